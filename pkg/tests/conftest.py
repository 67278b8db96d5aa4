import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from isskit import dsl  # noqa: E402
from isskit.cli import bundled_scenario  # noqa: E402
from isskit.generate import random_model, random_monitor  # noqa: E402

SCENARIOS = Path(__file__).parent.parent / "src" / "isskit" / "scenarios"


@pytest.fixture(scope="session")
def abc():
    return dsl.load(bundled_scenario(), "abc.iss")


@pytest.fixture(scope="session")
def abc_text():
    return bundled_scenario()


def scenario(name):
    return (SCENARIOS / name).read_text(encoding="utf-8")


def random_suite(seed=2024, n=200, **kw):
    """(model, monitor) pairs from a fixed seed."""
    rng = random.Random(seed)
    out = []
    for _ in range(n):
        m = random_model(rng, **kw)
        out.append((m, random_monitor(rng, m)))
    return out


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is not None and acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in acceptance.RESULTS:
            terminalreporter.write_line(line)
