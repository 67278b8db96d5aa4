"""Finite representations of infinite behaviors.

An infinite run of a deterministic model under a finite-memory strategy is
eventually periodic, so every behavior handled here is a :class:`Lasso`: a
finite stem followed by a non-empty cycle repeated forever.  Bounded prefixes
are :class:`Trace` values.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence, Union

from .errors import IllegalAction, IllegalJointAction, IncompleteProfile
from .model import (
    JointAction,
    Model,
    Vector,
    action_cost,
    is_legal,
    joint_actions,
    step,
    vec_add,
    zero,
)


@dataclass(frozen=True)
class Step:
    source: int
    action: JointAction


@dataclass(frozen=True)
class Trace:
    start: int
    steps: tuple[Step, ...] = ()
    end: int | None = None

    def __post_init__(self):
        if self.end is None:
            if self.steps:
                raise ValueError("a non-empty trace needs its end state")
            object.__setattr__(self, "end", self.start)

    def __len__(self) -> int:
        return len(self.steps)

    @classmethod
    def empty(cls, q: int) -> "Trace":
        return cls(q, (), q)


@dataclass(frozen=True)
class Lasso:
    stem: Trace
    cycle: tuple[Step, ...]

    @property
    def start(self) -> int:
        return self.stem.start

    def __len__(self) -> int:
        return len(self.stem.steps) + len(self.cycle)

    def step_at(self, i: int) -> Step:
        """The ``i``-th step of the infinite run."""
        s = len(self.stem.steps)
        if i < s:
            return self.stem.steps[i]
        return self.cycle[(i - s) % len(self.cycle)]

    def unroll(self, k: int) -> tuple[Step, ...]:
        """Stem followed by ``k`` copies of the cycle."""
        return self.stem.steps + self.cycle * k


Steps = Union[Trace, Sequence[Step]]


def _steps(t: Steps) -> Sequence[Step]:
    return t.steps if isinstance(t, Trace) else t


def extend_trace(m: Model, t: Trace, sigma: JointAction) -> Trace:
    sigma = tuple(sigma)
    target = step(m, t.end, sigma)
    return Trace(t.start, t.steps + (Step(t.end, sigma),), target)


def trace_from_actions(m: Model, start: int, actions: Iterable[JointAction]) -> Trace:
    t = Trace.empty(start)
    for sigma in actions:
        t = extend_trace(m, t, sigma)
    return t


def run_states(m: Model, start: int, steps: Sequence[Step]) -> list[int]:
    """States visited by ``steps`` from ``start``; raises on a broken chain."""
    q = start
    out = [q]
    for i, s in enumerate(steps):
        if s.source != q:
            raise IllegalJointAction(f"step {i} starts at {m.states[s.source]}, run is at {m.states[q]}")
        q = step(m, q, s.action)
        out.append(q)
    return out


def check_lasso(m: Model, lam: Lasso) -> list[str]:
    """Problems with ``lam`` as a behavior of ``m``; empty when valid."""
    problems = []
    if not lam.cycle:
        problems.append("empty cycle")
        return problems
    try:
        states = run_states(m, lam.start, lam.stem.steps)
    except (IllegalJointAction, KeyError) as exc:
        return [f"stem: {exc}"]
    if states[-1] != lam.stem.end:
        problems.append("stem end state does not match its steps")
    if lam.cycle[0].source != states[-1]:
        problems.append("cycle does not start where the stem ends")
        return problems
    try:
        cyc = run_states(m, lam.cycle[0].source, lam.cycle)
    except (IllegalJointAction, KeyError) as exc:
        return [f"cycle: {exc}"]
    if cyc[-1] != lam.cycle[0].source:
        problems.append("cycle does not close")
    return problems


def lasso_from_strategy(
    m: Model, profile: Mapping[tuple[int, int], int], start: int
) -> Lasso:
    """The unique run induced by a memoryless joint profile.

    ``profile`` maps ``(agent, state)`` to an action id.  The run is cut at the
    first repeated state, so the cycle is simple and the stem minimal.
    """
    first_seen: dict[int, int] = {}
    steps: list[Step] = []
    q = start
    while q not in first_seen:
        first_seen[q] = len(steps)
        sigma = []
        for a in range(m.n_agents):
            try:
                x = profile[(a, q)]
            except KeyError:
                raise IncompleteProfile(f"no action for {m.agents[a]} at {m.states[q]}") from None
            if x not in m.availability[q][a]:
                label = m.actions[x] if 0 <= x < len(m.actions) else f"action #{x}"
                raise IllegalAction(f"{label} is not available to {m.agents[a]} at {m.states[q]}")
            sigma.append(x)
        sigma = tuple(sigma)
        steps.append(Step(q, sigma))
        q = m.outcome[(q, sigma)]
    k = first_seen[q]
    stem = Trace(start, tuple(steps[:k]), q)
    return Lasso(stem, tuple(steps[k:]))


def cumulative_cost(m: Model, t: Steps, group: Iterable[int]) -> Vector:
    group = list(group)
    total = zero(m.n_resources)
    for s in _steps(t):
        for a in group:
            total = vec_add(total, action_cost(m, s.source, a, s.action[a]))
    return total


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    step: int | None = None
    agent: int | None = None
    resource: int | None = None

    def __bool__(self) -> bool:
        return self.feasible


def feasible_under_budget(m: Model, t: Steps, budget: Mapping[int, Sequence[int]]) -> Feasibility:
    """Check every prefix of ``t`` against per-agent endowments.

    Agents absent from ``budget`` have a zero endowment.
    """
    r = m.n_resources
    spent = [zero(r) for _ in range(m.n_agents)]
    endow = [tuple(budget.get(a, zero(r))) for a in range(m.n_agents)]
    for k, s in enumerate(_steps(t)):
        for a in range(m.n_agents):
            spent[a] = vec_add(spent[a], action_cost(m, s.source, a, s.action[a]))
            for i in range(r):
                if spent[a][i] > endow[a][i]:
                    return Feasibility(False, k, a, i)
    return Feasibility(True)


def is_primitive(cycle: Sequence[Step]) -> bool:
    c = len(cycle)
    for d in range(1, c):
        if c % d == 0 and all(cycle[i] == cycle[(i + d) % c] for i in range(c)):
            return False
    return True


def is_reduced(lam: Lasso) -> bool:
    """True when no shorter (stem, cycle) pair describes the same run."""
    stem = lam.stem.steps
    if stem and stem[-1] == lam.cycle[-1]:
        return False
    return is_primitive(lam.cycle)


def enumerate_lassos(m: Model, start: int, max_total_len: int) -> Iterator[Lasso]:
    """Every reduced lasso from ``start`` with at most ``max_total_len`` steps.

    Each eventually periodic run appears once, in its shortest form, ordered by
    stem length, then cycle length, then the joint-action id sequence.
    """
    if max_total_len < 1:
        raise ValueError("max_total_len must be >= 1")
    found: list[tuple[int, int, tuple, Lasso]] = []
    path: list[Step] = []
    states = [start]

    def visit():
        n = len(path)
        if n:
            end = states[-1]
            for s in range(n):
                if path[s].source != end:
                    continue
                cycle = tuple(path[s:])
                if s and path[s - 1] == cycle[-1]:
                    continue
                if not is_primitive(cycle):
                    continue
                lam = Lasso(Trace(start, tuple(path[:s]), path[s].source), cycle)
                found.append((s, n - s, tuple(p.action for p in path), lam))
        if n == max_total_len:
            return
        q = states[-1]
        for sigma in joint_actions(m, q):
            path.append(Step(q, sigma))
            states.append(m.outcome[(q, sigma)])
            visit()
            path.pop()
            states.pop()

    visit()
    found.sort(key=lambda e: e[:3])
    for *_, lam in found:
        yield lam


def format_lasso(m: Model, lam: Lasso) -> str:
    """One line per step; the cycle section follows a ``repeat:`` line."""
    lines = []

    def emit(steps):
        for s in steps:
            t = m.outcome[(s.source, s.action)]
            lines.append(f"{m.states[s.source]} --({m.format_joint(s.action)})--> {m.states[t]}")

    emit(lam.stem.steps)
    lines.append("repeat:")
    emit(lam.cycle)
    return "\n".join(lines)


def parse_lasso(m: Model, text: str) -> Lasso:
    """Inverse of :func:`format_lasso`."""
    stem: list[Step] = []
    cycle: list[Step] = []
    target = stem
    first = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line == "repeat:":
            target = cycle
            continue
        src, rest = line.split(" --(", 1)
        joint, dst = rest.split(")--> ", 1)
        choices = dict(part.split(":", 1) for part in joint.split(","))
        sigma = tuple(m.action_id(choices[a]) for a in m.agents)
        q = m.state_id(src.strip())
        if not is_legal(m, q, sigma) or m.outcome[(q, sigma)] != m.state_id(dst.strip()):
            raise IllegalJointAction(line)
        if first is None:
            first = q
        target.append(Step(q, sigma))
    if not cycle:
        raise ValueError("lasso dump has no repeat: section")
    start = first
    end = cycle[0].source
    return Lasso(Trace(start, tuple(stem), end), tuple(cycle))
