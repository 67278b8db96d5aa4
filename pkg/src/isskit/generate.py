"""Random and parametric model families used by tests and the probe."""
from __future__ import annotations

import itertools
import random

from .model import Model, RawModel, validate_model
from .norms import NormMonitor, Status


def random_model(
    rng: random.Random,
    max_states: int = 6,
    max_agents: int = 3,
    max_actions: int = 3,
    max_resources: int = 2,
    max_cost: int = 2,
    max_joint: int | None = None,
) -> Model:
    """A valid random model; ``max_joint`` caps the joint actions per state."""
    n_states = rng.randint(1, max_states)
    n_agents = rng.randint(1, max_agents)
    n_actions = rng.randint(1, max_actions)
    n_res = rng.randint(1, max_resources)
    states = [f"q{i}" for i in range(n_states)]
    agents = [chr(ord("A") + i) for i in range(n_agents)]
    actions = [f"a{i}" for i in range(n_actions)]
    resources = [f"r{i}" for i in range(n_res)]

    availability, cost, outcome = {}, {}, {}
    for q in states:
        while True:
            per_agent = [rng.sample(actions, rng.randint(1, n_actions)) for _ in agents]
            size = 1
            for acts in per_agent:
                size *= len(acts)
            if max_joint is None or size <= max_joint:
                break
        for a, acts in zip(agents, per_agent):
            availability[(q, a)] = sorted(acts)
            for x in acts:
                if rng.random() < 0.85:
                    cost[(q, a, x)] = [rng.randint(0, max_cost) for _ in resources]
        for sigma in itertools.product(*(sorted(acts) for acts in per_agent)):
            outcome[(q, sigma)] = rng.choice(states)
    initial = sorted(rng.sample(states, 1 if rng.random() < 0.8 else min(2, n_states)))
    return validate_model(
        RawModel(agents, resources, states, actions, availability, cost, outcome, initial)
    )


def random_monitor(rng: random.Random, m: Model, max_states: int = 3, p_violate: float = 0.15) -> NormMonitor:
    """A random total monitor with one violation state (the last one)."""
    k = rng.randint(2, max_states)
    names = [f"m{i}" for i in range(k - 1)] + ["bad"]
    status = [Status.OK] * (k - 1) + [Status.VIOLATION]
    bad = k - 1
    delta = {}
    for mu in range(k):
        for q in range(m.n_states):
            for sigma in _joints(m, q):
                if mu == bad:
                    delta[(mu, q, sigma)] = bad
                elif rng.random() < p_violate:
                    delta[(mu, q, sigma)] = bad
                else:
                    delta[(mu, q, sigma)] = rng.randrange(k - 1)
    start = tuple(bad if rng.random() < 0.05 else 0 for _ in range(m.n_states))
    return NormMonitor("random", tuple(names), tuple(status), 0, start, delta)


def _joints(m: Model, q: int):
    return itertools.product(*m.availability[q])


def ring_model(n_states: int, n_resources: int = 1) -> Model:
    """Ring ``s0..s{n-2}`` plus an isolated ``goal``.

    Agent A moves one step for free (``go``) or two steps for one unit of each
    resource (``fast``); B only waits.  Queries aiming at ``goal`` fail after
    exploring every reachable (state, remaining budget) pair.
    """
    if n_states < 2:
        raise ValueError("ring_model needs at least 2 states")
    ring = [f"s{i}" for i in range(n_states - 1)]
    states = ring + ["goal"]
    resources = [f"r{i}" for i in range(n_resources)]
    availability, cost, outcome = {}, {}, {}
    for i, q in enumerate(ring):
        availability[(q, "A")] = ["go", "fast"]
        availability[(q, "B")] = ["wait"]
        cost[(q, "A", "go")] = [0] * n_resources
        cost[(q, "A", "fast")] = [1] * n_resources
        cost[(q, "B", "wait")] = [0] * n_resources
        outcome[(q, ("go", "wait"))] = ring[(i + 1) % len(ring)]
        outcome[(q, ("fast", "wait"))] = ring[(i + 2) % len(ring)]
    availability[("goal", "A")] = ["go"]
    availability[("goal", "B")] = ["wait"]
    cost[("goal", "A", "go")] = [0] * n_resources
    cost[("goal", "B", "wait")] = [0] * n_resources
    outcome[("goal", ("go", "wait"))] = "goal"
    return validate_model(
        RawModel(["A", "B"], resources, states, ["go", "fast", "wait"], availability, cost, outcome, ["s0"])
    )
