"""Norms as deterministic safety monitors over steps.

A monitor reads the start state of a run (``start``) and then one
``(source state, joint action)`` pair per step (``delta``).  The norm it
denotes is the set of behaviors whose monitor run never enters a VIOLATION
state; VIOLATION states are absorbing.
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .behavior import Lasso, Step, Trace
from .errors import AlphabetMismatch, IllegalTriple, MonitorError, UnknownState
from .model import JointAction, Model, joint_actions


class Status(enum.Enum):
    OK = "ok"
    VIOLATION = "violation"
    PENDING_REPAIR = "pending"


class Outcome(enum.Enum):
    COMPLIANT = "COMPLIANT"
    VIOLATING = "VIOLATING"


@dataclass(frozen=True, eq=False)
class NormMonitor:
    name: str
    state_names: tuple[str, ...]
    status: tuple[Status, ...]
    initial: int
    # start[q]: monitor state after checking the run's first model state q
    start: tuple[int, ...]
    delta: Mapping[tuple[int, int, JointAction], int]

    def __post_init__(self):
        if len(self.state_names) != len(self.status):
            raise MonitorError("one status per monitor state")
        if Status.OK not in self.status:
            raise MonitorError(f"norm {self.name}: at least one ok state is required")
        for (mu, q, sigma), nu in self.delta.items():
            if self.status[mu] is Status.VIOLATION and nu != mu:
                raise MonitorError(f"norm {self.name}: violation state {self.state_names[mu]} must be absorbing")

    @property
    def n_states(self) -> int:
        return len(self.state_names)

    def is_violation(self, mu: int) -> bool:
        return self.status[mu] is Status.VIOLATION

    def start_state(self, q: int) -> int:
        try:
            return self.start[q]
        except IndexError:
            raise AlphabetMismatch(f"norm {self.name} does not know model state {q}") from None

    def next(self, mu: int, q: int, sigma: JointAction) -> int:
        try:
            return self.delta[(mu, q, sigma)]
        except KeyError:
            raise AlphabetMismatch(
                f"norm {self.name} has no transition for state {q}, joint action {sigma}"
            ) from None

    def violation_states(self) -> list[int]:
        return [i for i, s in enumerate(self.status) if s is Status.VIOLATION]


@dataclass(frozen=True)
class Verdict:
    """Classification of one lasso.

    ``position`` is the index (in the unrolled run) of the step that moved the
    monitor into VIOLATION; a violation found by the start check has position
    0 and phase ``"start"``.  For cycle violations, ``iteration`` and
    ``offset`` locate the step inside the pumped cycle.
    """

    outcome: Outcome
    position: int | None = None
    phase: str | None = None
    iteration: int | None = None
    offset: int | None = None

    @property
    def compliant(self) -> bool:
        return self.outcome is Outcome.COMPLIANT

    def __str__(self) -> str:
        if self.compliant:
            return "COMPLIANT"
        if self.phase == "cycle":
            return f"VIOLATING@{self.position} (cycle {self.iteration}+{self.offset})"
        return f"VIOLATING@{self.position} ({self.phase})"


COMPLIANT = Verdict(Outcome.COMPLIANT)


def classify_lasso(m: Model, mon: NormMonitor, lam: Lasso) -> Verdict:
    if len(mon.start) != m.n_states:
        raise AlphabetMismatch(f"norm {mon.name} was built for {len(mon.start)} states, model has {m.n_states}")
    mu = mon.start_state(lam.start)
    if mon.is_violation(mu):
        return Verdict(Outcome.VIOLATING, 0, "start")
    for i, s in enumerate(lam.stem.steps):
        mu = mon.next(mu, s.source, s.action)
        if mon.is_violation(mu):
            return Verdict(Outcome.VIOLATING, i, "stem")
    base = len(lam.stem.steps)
    c = len(lam.cycle)
    seen = set()
    it = 0
    # monitor state at each cycle boundary; a repeat means the run is periodic
    while mu not in seen:
        seen.add(mu)
        for j, s in enumerate(lam.cycle):
            mu = mon.next(mu, s.source, s.action)
            if mon.is_violation(mu):
                return Verdict(Outcome.VIOLATING, base + it * c + j, "cycle", it, j)
        it += 1
    return COMPLIANT


def classify_trace(m: Model, mon: NormMonitor, t: Trace) -> Verdict:
    """Verdict on a finite prefix: VIOLATING iff the prefix already violates."""
    mu = mon.start_state(t.start)
    if mon.is_violation(mu):
        return Verdict(Outcome.VIOLATING, 0, "start")
    for i, s in enumerate(t.steps):
        mu = mon.next(mu, s.source, s.action)
        if mon.is_violation(mu):
            return Verdict(Outcome.VIOLATING, i, "stem")
    return COMPLIANT


# -- monitor construction ---------------------------------------------------

STAY = -1


@dataclass(frozen=True)
class Rule:
    """``on [source:] states / action -> target``; ``None`` fields are wildcards.

    ``action`` holds one allowed-action set (or ``None``) per agent.  A target
    of :data:`STAY` keeps the current monitor state.
    """

    target: int
    source: frozenset[int] | None = None
    states: frozenset[int] | None = None
    action: tuple[frozenset[int] | None, ...] | None = None

    def matches(self, mu: int, q: int, sigma: JointAction) -> bool:
        if self.source is not None and mu not in self.source:
            return False
        if self.states is not None and q not in self.states:
            return False
        if self.action is not None:
            for allowed, x in zip(self.action, sigma):
                if allowed is not None and x not in allowed:
                    return False
        return True


@dataclass(frozen=True)
class StartRule:
    target: int
    states: frozenset[int] | None = None


class NonTotalMonitor(MonitorError):
    def __init__(self, name, uncovered):
        self.uncovered = uncovered
        super().__init__(f"norm {name}: no rule covers {uncovered}; add a wildcard default")


def compile_monitor(
    m: Model,
    name: str,
    state_names: Sequence[str],
    status: Sequence[Status],
    initial: int,
    rules: Sequence[Rule],
    start_rules: Sequence[StartRule] = (),
) -> NormMonitor:
    """Expand first-match-wins rules into a total transition table over ``m``."""
    delta = {}
    for mu in range(len(state_names)):
        for q in range(m.n_states):
            for sigma in joint_actions(m, q):
                if status[mu] is Status.VIOLATION:
                    delta[(mu, q, sigma)] = mu
                    continue
                for rule in rules:
                    if rule.matches(mu, q, sigma):
                        delta[(mu, q, sigma)] = mu if rule.target == STAY else rule.target
                        break
                else:
                    raise NonTotalMonitor(name, (state_names[mu], m.states[q], m.format_joint(sigma)))
    start = []
    for q in range(m.n_states):
        for rule in start_rules:
            if rule.states is None or q in rule.states:
                start.append(initial if rule.target == STAY else rule.target)
                break
        else:
            start.append(initial)
    return NormMonitor(name, tuple(state_names), tuple(status), initial, tuple(start), delta)


def universal_norm(m: Model, name: str = "universal") -> NormMonitor:
    """The norm containing every behavior."""
    return compile_monitor(m, name, ["ok"], [Status.OK], 0, [Rule(0)])


def empty_norm(m: Model, name: str = "empty") -> NormMonitor:
    """The norm containing no behavior: the start check always fails."""
    return compile_monitor(
        m, name, ["ok", "bad"], [Status.OK, Status.VIOLATION], 0, [Rule(0)], [StartRule(1)]
    )


def state_norm(m: Model, bad_states: Iterable[int], name: str = "state_norm") -> NormMonitor:
    """Violation exactly when the run visits a state in ``bad_states``."""
    bad = frozenset(bad_states)
    for q in bad:
        if not isinstance(q, int) or not 0 <= q < m.n_states:
            raise UnknownState(q)
    delta = {}
    for q in range(m.n_states):
        for sigma in joint_actions(m, q):
            delta[(0, q, sigma)] = 1 if m.outcome[(q, sigma)] in bad else 0
            delta[(1, q, sigma)] = 1
    start = tuple(1 if q in bad else 0 for q in range(m.n_states))
    return NormMonitor(name, ("ok", "bad"), (Status.OK, Status.VIOLATION), 0, start, delta)


def action_norm(
    m: Model, bad: Iterable[tuple[int, int, int]], name: str = "action_norm"
) -> NormMonitor:
    """Violation exactly when a step assigns a banned action to an agent at a state."""
    bad = frozenset(bad)
    for q, a, x in bad:
        if not 0 <= q < m.n_states or not 0 <= a < m.n_agents or x not in m.availability[q][a]:
            raise IllegalTriple(f"({q}, {a}, {x}) is not an available (state, agent, action)")
    delta = {}
    for q in range(m.n_states):
        for sigma in joint_actions(m, q):
            hit = any((q, a, x) in bad for a, x in enumerate(sigma))
            delta[(0, q, sigma)] = 1 if hit else 0
            delta[(1, q, sigma)] = 1
    start = (0,) * m.n_states
    return NormMonitor(name, ("ok", "bad"), (Status.OK, Status.VIOLATION), 0, start, delta)


# -- product exploration ----------------------------------------------------


@dataclass
class ProductGraph:
    """Reachable part of model x monitor, nodes in BFS discovery order."""

    nodes: list[tuple[int, int]]
    index: dict[tuple[int, int], int]
    initial: list[int]
    succ: list[list[tuple[JointAction, int]]]


def explore_product(m: Model, mon: NormMonitor) -> ProductGraph:
    nodes: list[tuple[int, int]] = []
    index: dict[tuple[int, int], int] = {}
    succ: list[list[tuple[JointAction, int]]] = []

    def add(pair):
        if pair not in index:
            index[pair] = len(nodes)
            nodes.append(pair)
            succ.append([])
            todo.append(pair)
        return index[pair]

    todo: deque = deque()
    initial = [add((q, mon.start_state(q))) for q in m.initial]
    while todo:
        q, mu = todo.popleft()
        i = index[(q, mu)]
        for sigma in joint_actions(m, q):
            j = add((m.outcome[(q, sigma)], mon.next(mu, q, sigma)))
            succ[i].append((sigma, j))
    return ProductGraph(nodes, index, sorted(set(initial)), succ)


@dataclass(frozen=True)
class ViolationSearch:
    found: bool
    witness: Lasso | None = None

    def __bool__(self) -> bool:
        return self.found


def exists_violation(m: Model, mon: NormMonitor) -> ViolationSearch:
    """Search the product for a reachable VIOLATION state.

    The witness stem is a shortest path to the first violating product state
    (BFS order); it is closed into a lasso by following the first available
    joint action until a model state repeats.
    """
    g = explore_product(m, mon)
    parent: dict[int, tuple[int, JointAction] | None] = {i: None for i in g.initial}
    order = deque(g.initial)
    hit = None
    while order:
        i = order.popleft()
        if mon.is_violation(g.nodes[i][1]):
            hit = i
            break
        for sigma, j in g.succ[i]:
            if j not in parent:
                parent[j] = (i, sigma)
                order.append(j)
    if hit is None:
        return ViolationSearch(False)

    path: list[Step] = []
    i = hit
    while parent[i] is not None:
        p, sigma = parent[i]
        path.append(Step(g.nodes[p][0], sigma))
        i = p
    path.reverse()
    start = g.nodes[i][0]

    tail: list[Step] = []
    seen: dict[int, int] = {}
    q = g.nodes[hit][0]
    while q not in seen:
        seen[q] = len(tail)
        sigma = joint_actions(m, q)[0]
        tail.append(Step(q, sigma))
        q = m.outcome[(q, sigma)]
    k = seen[q]
    stem = tuple(path) + tuple(tail[:k])
    return ViolationSearch(True, Lasso(Trace(start, stem, q), tuple(tail[k:])))
