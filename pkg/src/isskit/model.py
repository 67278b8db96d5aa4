"""Resource-bounded concurrent game structures.

A :class:`Model` holds agents, resource types, states, an action catalog, the
availability function ``d``, the (partial) cost function ``c`` and the
deterministic outcome function ``o``, plus a non-empty set of initial states.
All identifiers are interned to integers; the display names are kept on the
model for reports and serialization.

Models are built from a name-based :class:`RawModel` through
:func:`validate_model`, which reports every violated constraint at once.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import (
    IllegalAction,
    IllegalJointAction,
    ModelValidationError,
    UnknownState,
)

Vector = tuple[int, ...]
JointAction = tuple[int, ...]


def zero(r: int) -> Vector:
    return (0,) * r


def vec_add(u: Sequence[int], v: Sequence[int]) -> Vector:
    return tuple(a + b for a, b in zip(u, v))


def vec_sub(u: Sequence[int], v: Sequence[int]) -> Vector:
    return tuple(a - b for a, b in zip(u, v))


def vec_le(u: Sequence[int], v: Sequence[int]) -> bool:
    return all(a <= b for a, b in zip(u, v))


@dataclass(frozen=True)
class Violation:
    """One violated (or suspicious) model constraint."""

    kind: str
    coords: tuple
    message: str
    severity: str = "error"

    def __str__(self) -> str:
        where = ", ".join(str(c) for c in self.coords)
        return f"{self.severity}: {self.kind}({where}): {self.message}"


@dataclass
class RawModel:
    """Name-based, unchecked model description.

    ``outcome`` is keyed by ``(state, joint action)`` where the joint action is
    a tuple of action names in agent order.
    """

    agents: list[str]
    resources: list[str]
    states: list[str]
    actions: list[str]
    availability: dict[tuple[str, str], Iterable[str]] = field(default_factory=dict)
    cost: dict[tuple[str, str, str], Sequence[int]] = field(default_factory=dict)
    outcome: dict[tuple[str, tuple[str, ...]], str] = field(default_factory=dict)
    initial: list[str] = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class Model:
    agents: tuple[str, ...]
    resources: tuple[str, ...]
    states: tuple[str, ...]
    actions: tuple[str, ...]
    # availability[q][a] is a sorted tuple of action ids
    availability: tuple[tuple[tuple[int, ...], ...], ...]
    cost: Mapping[tuple[int, int, int], Vector]
    outcome: Mapping[tuple[int, JointAction], int]
    initial: tuple[int, ...]
    warnings: tuple[Violation, ...] = ()
    _joint: tuple[tuple[JointAction, ...], ...] = field(
        init=False, repr=False, compare=False
    )
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        joint = tuple(tuple(itertools.product(*per_agent)) for per_agent in self.availability)
        object.__setattr__(self, "_joint", joint)
        index = {
            "agent": {n: i for i, n in enumerate(self.agents)},
            "resource": {n: i for i, n in enumerate(self.resources)},
            "state": {n: i for i, n in enumerate(self.states)},
            "action": {n: i for i, n in enumerate(self.actions)},
        }
        object.__setattr__(self, "_index", index)

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    @property
    def n_resources(self) -> int:
        return len(self.resources)

    @property
    def n_states(self) -> int:
        return len(self.states)

    def agent_id(self, name: str) -> int:
        return self._index["agent"][name]

    def resource_id(self, name: str) -> int:
        return self._index["resource"][name]

    def state_id(self, name: str) -> int:
        try:
            return self._index["state"][name]
        except KeyError:
            raise UnknownState(name) from None

    def action_id(self, name: str) -> int:
        return self._index["action"][name]

    def joint(self, *names: str) -> JointAction:
        """Joint action from action names given in agent order."""
        return tuple(self.action_id(n) for n in names)

    def available(self, q: int, a: int) -> tuple[int, ...]:
        return self.availability[q][a]

    def size(self) -> int:
        """|M| measured as states plus transitions."""
        return self.n_states + sum(len(j) for j in self._joint)

    def format_joint(self, sigma: JointAction) -> str:
        return ",".join(f"{self.agents[i]}:{self.actions[x]}" for i, x in enumerate(sigma))

    def to_raw(self) -> RawModel:
        s, ag, ac = self.states, self.agents, self.actions
        return RawModel(
            agents=list(ag),
            resources=list(self.resources),
            states=list(s),
            actions=list(ac),
            availability={
                (s[q], ag[a]): [ac[x] for x in self.availability[q][a]]
                for q in range(self.n_states)
                for a in range(self.n_agents)
            },
            cost={(s[q], ag[a], ac[x]): list(v) for (q, a, x), v in self.cost.items()},
            outcome={
                (s[q], tuple(ac[x] for x in sigma)): s[t]
                for (q, sigma), t in self.outcome.items()
            },
            initial=[s[q] for q in self.initial],
        )


def _duplicates(names: Sequence[str]) -> list[str]:
    seen, dup = set(), []
    for n in names:
        if n in seen:
            dup.append(n)
        seen.add(n)
    return dup


def check_model(raw: RawModel) -> list[Violation]:
    """Every constraint violation (errors and warnings) of ``raw``."""
    out: list[Violation] = []
    err = lambda kind, coords, msg: out.append(Violation(kind, coords, msg))

    for label, names in (
        ("agent", raw.agents),
        ("resource", raw.resources),
        ("state", raw.states),
        ("action", raw.actions),
    ):
        for d in _duplicates(names):
            err("DuplicateName", (label, d), f"{label} {d!r} declared twice")
    if not raw.agents:
        err("NoAgents", (), "a model needs at least one agent")
    if not raw.states:
        err("NoStates", (), "a model needs at least one state")

    states, agents, actions = set(raw.states), set(raw.agents), set(raw.actions)
    r = len(raw.resources)

    avail: dict[tuple[str, str], frozenset[str]] = {}
    for (q, a), acts in raw.availability.items():
        acts = frozenset(acts)
        if q not in states:
            err("UnknownIdentifier", (q,), f"availability names undeclared state {q!r}")
            continue
        if a not in agents:
            err("UnknownIdentifier", (a,), f"availability names undeclared agent {a!r}")
            continue
        for x in sorted(acts - actions):
            err("UnknownIdentifier", (q, a, x), f"undeclared action {x!r}")
        avail[(q, a)] = acts & actions
    for q in raw.states:
        for a in raw.agents:
            if not avail.get((q, a)):
                err("EmptyAvailability", (q, a), "every agent needs a non-empty action set")

    for (q, a, x), vec in raw.cost.items():
        if (q, a) not in avail:
            if q in states and a in agents:
                err("CostOutsideAvailability", (q, a, x), "no availability entry")
            else:
                err("UnknownIdentifier", (q, a, x), "cost names undeclared state or agent")
            continue
        if x not in avail[(q, a)]:
            err("CostOutsideAvailability", (q, a, x), f"{x!r} is not available to {a!r} at {q!r}")
        if len(vec) != r:
            err("BadCostVector", (q, a, x), f"expected {r} entries, got {len(vec)}")
        elif any(v < 0 for v in vec):
            err("BadCostVector", (q, a, x), "cost entries must be non-negative")

    n = len(raw.agents)
    for (q, sigma), t in raw.outcome.items():
        if q not in states:
            err("UnknownIdentifier", (q,), f"outcome names undeclared state {q!r}")
            continue
        if len(sigma) != n:
            err("BadJointAction", (q, sigma), f"expected {n} components")
            continue
        if any(sigma[i] not in avail.get((q, raw.agents[i]), ()) for i in range(n)):
            err("IllegalJointAction", (q, sigma), "outcome defined for an unavailable joint action")
        if t not in states:
            err("DanglingTarget", (q, sigma, t), f"target {t!r} is not a declared state")

    for q in raw.states:
        per_agent = [sorted(avail.get((q, a), ())) for a in raw.agents]
        if not all(per_agent):
            continue
        for sigma in itertools.product(*per_agent):
            if (q, sigma) not in raw.outcome:
                err("MissingOutcome", (q, sigma), "outcome must be total on available joint actions")
            if len(out) > 10_000:
                return out

    if not raw.initial:
        err("NoInitialState", (), "declare at least one initial state")
    for q in raw.initial:
        if q not in states:
            err("UnknownIdentifier", (q,), f"initial state {q!r} is not declared")

    for q in raw.states:
        for a in raw.agents:
            for x in sorted(avail.get((q, a), ())):
                if (q, a, x) not in raw.cost:
                    out.append(
                        Violation("UndefinedCost", (q, a, x), "defaults to the zero vector", "warning")
                    )
    return out


def validate_model(raw: RawModel) -> Model:
    """Build a :class:`Model` or raise :class:`ModelValidationError`."""
    report = check_model(raw)
    errors = [v for v in report if v.severity == "error"]
    if errors:
        raise ModelValidationError(errors)
    warnings = tuple(v for v in report if v.severity == "warning")

    sid = {n: i for i, n in enumerate(raw.states)}
    aid = {n: i for i, n in enumerate(raw.agents)}
    xid = {n: i for i, n in enumerate(raw.actions)}
    availability = tuple(
        tuple(tuple(sorted(xid[x] for x in set(raw.availability[(q, a)]))) for a in raw.agents)
        for q in raw.states
    )
    cost = {
        (sid[q], aid[a], xid[x]): tuple(int(v) for v in vec)
        for (q, a, x), vec in raw.cost.items()
    }
    outcome = {
        (sid[q], tuple(xid[x] for x in sigma)): sid[t] for (q, sigma), t in raw.outcome.items()
    }
    initial = tuple(sorted({sid[q] for q in raw.initial}))
    return Model(
        agents=tuple(raw.agents),
        resources=tuple(raw.resources),
        states=tuple(raw.states),
        actions=tuple(raw.actions),
        availability=availability,
        cost=cost,
        outcome=outcome,
        initial=initial,
        warnings=warnings,
    )


def _check_state(m: Model, q: int) -> None:
    if not isinstance(q, int) or not 0 <= q < m.n_states:
        raise UnknownState(q)


def joint_actions(m: Model, q: int) -> tuple[JointAction, ...]:
    """All joint actions at ``q`` in lexicographic order of action ids."""
    _check_state(m, q)
    return m._joint[q]


def is_legal(m: Model, q: int, sigma: JointAction) -> bool:
    return len(sigma) == m.n_agents and all(
        x in m.availability[q][i] for i, x in enumerate(sigma)
    )


def step(m: Model, q: int, sigma: JointAction) -> int:
    _check_state(m, q)
    sigma = tuple(sigma)
    if not is_legal(m, q, sigma):
        raise IllegalJointAction(f"{sigma} is not available at {m.states[q]}")
    return m.outcome[(q, sigma)]


def action_cost(m: Model, q: int, a: int, x: int) -> Vector:
    """Declared cost of action ``x`` for agent ``a`` at ``q``; zero when undefined."""
    _check_state(m, q)
    if x not in m.availability[q][a]:
        raise IllegalAction(f"{m.actions[x]} is not available to {m.agents[a]} at {m.states[q]}")
    return m.cost.get((q, a, x), zero(m.n_resources))


def group_cost(m: Model, q: int, sigma: JointAction, group: Iterable[int]) -> Vector:
    """Summed cost of the group members' components of ``sigma`` at ``q``."""
    total = zero(m.n_resources)
    for a in group:
        total = vec_add(total, action_cost(m, q, a, sigma[a]))
    return total


def successors(m: Model, q: int) -> set[int]:
    return {m.outcome[(q, s)] for s in m._joint[q]}


def reachable_states(m: Model) -> frozenset[int]:
    seen = set(m.initial)
    todo = deque(m.initial)
    while todo:
        q = todo.popleft()
        for t in successors(m, q):
            if t not in seen:
                seen.add(t)
                todo.append(t)
    return frozenset(seen)
