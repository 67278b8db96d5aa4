"""Resource-bounded coalition model checking for flat X / F / G / U queries.

A coalition with a shared budget ``b`` picks its members' actions as a
function of the current state and the remaining budget; only members' costs
are charged.  The other agents act freely.  Evaluation runs over
configurations ``(state, remaining budget)`` reachable from the start, so at
most ``|Q| * prod(b_i + 1)`` configurations are ever created.
"""
from __future__ import annotations

import enum
import itertools
import math
import re
import statistics
import time
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from .errors import BudgetDimensionMismatch, QuerySyntaxError, UnknownState
from .model import JointAction, Model, Vector, action_cost, vec_add, vec_le, vec_sub, zero
from .norms import NormMonitor


class Op(enum.Enum):
    NEXT = "X"
    EVENTUALLY = "F"
    GLOBALLY = "G"
    UNTIL = "U"


@dataclass(frozen=True)
class CoalitionQuery:
    """``<<coalition budget>> op target``.

    For UNTIL, ``hold`` must be true until ``target`` is reached.  ``start`` of
    None means every initial state of the model.
    """

    coalition: frozenset[int]
    budget: Vector
    operator: Op
    target: frozenset[int]
    hold: frozenset[int] | None = None
    start: int | None = None


Config = tuple[int, Vector]
Choice = tuple[int, ...]


@dataclass
class CheckResult:
    holds: bool
    configs_explored: int
    witness_strategy: dict[Config, dict[int, int]] | None = None
    starts: dict[int, bool] = field(default_factory=dict)


def _validate(m: Model, q: CoalitionQuery) -> None:
    if len(q.budget) != m.n_resources:
        raise BudgetDimensionMismatch(
            f"budget has {len(q.budget)} entries, model has {m.n_resources} resources"
        )
    if any(v < 0 for v in q.budget):
        raise BudgetDimensionMismatch("budget entries must be non-negative")
    for a in q.coalition:
        if not 0 <= a < m.n_agents:
            raise ValueError(f"unknown agent index {a}")
    for s in itertools.chain(q.target, q.hold or ()):
        if not 0 <= s < m.n_states:
            raise UnknownState(s)
    if q.start is not None and not 0 <= q.start < m.n_states:
        raise UnknownState(q.start)
    if q.operator is Op.UNTIL and q.hold is None:
        raise ValueError("UNTIL needs a hold set")


class _Arena:
    """Configurations reachable from the start under affordable member choices."""

    def __init__(self, m: Model, q: CoalitionQuery, expand_state, only_starts: bool = False):
        self.m = m
        self.members = sorted(q.coalition)
        self.others = [a for a in range(m.n_agents) if a not in q.coalition]
        self.index: dict[Config, int] = {}
        self.configs: list[Config] = []
        # moves[i]: list of (choice, successor config ids)
        self.moves: list[list[tuple[Choice, tuple[int, ...]]] | None] = []
        starts = m.initial if q.start is None else (q.start,)
        self.starts = []
        for s in starts:
            if (s, tuple(q.budget)) not in self.index:
                self.starts.append(self._add((s, tuple(q.budget))))
        todo = deque(self.starts)
        while todo:
            i = todo.popleft()
            state, rem = self.configs[i]
            if not expand_state(state) or (only_starts and i not in self.starts):
                continue
            moves = []
            for choice, spent in self._choices(state):
                if not vec_le(spent, rem):
                    continue
                left = vec_sub(rem, spent)
                succ = set()
                for sigma in self._completions(state, choice):
                    cfg = (m.outcome[(state, sigma)], left)
                    if cfg not in self.index:
                        todo.append(self._add(cfg))
                    succ.add(self.index[cfg])
                moves.append((choice, tuple(sorted(succ))))
            self.moves[i] = moves

    def _add(self, cfg: Config) -> int:
        self.index[cfg] = len(self.configs)
        self.configs.append(cfg)
        self.moves.append(None)
        return self.index[cfg]

    def _choices(self, state: int):
        m = self.m
        per = [m.availability[state][a] for a in self.members]
        for choice in itertools.product(*per):
            spent = zero(m.n_resources)
            for a, x in zip(self.members, choice):
                spent = vec_add(spent, action_cost(m, state, a, x))
            yield choice, spent

    def _completions(self, state: int, choice: Choice) -> Iterable[JointAction]:
        m = self.m
        per = [m.availability[state][a] for a in self.others]
        for rest in itertools.product(*per):
            sigma = [0] * m.n_agents
            for a, x in zip(self.members, choice):
                sigma[a] = x
            for a, x in zip(self.others, rest):
                sigma[a] = x
            yield tuple(sigma)

    def assignment(self, choice: Choice) -> dict[int, int]:
        return dict(zip(self.members, choice))


def _attractor(arena: _Arena, goal: set[int]) -> tuple[set[int], dict[int, Choice]]:
    """Least fixpoint: configs from which the coalition can force ``goal``."""
    n = len(arena.configs)
    preds: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    missing: dict[tuple[int, int], int] = {}
    for i, moves in enumerate(arena.moves):
        if moves is None or i in goal:
            continue
        for k, (_, succ) in enumerate(moves):
            missing[(i, k)] = len(succ)
            for j in succ:
                preds[j].append((i, k))
    win = set(goal)
    strategy: dict[int, Choice] = {}
    todo = deque(sorted(goal))
    while todo:
        j = todo.popleft()
        for i, k in preds[j]:
            if i in win:
                continue
            missing[(i, k)] -= 1
            if missing[(i, k)] == 0:
                win.add(i)
                strategy[i] = arena.moves[i][k][0]
                todo.append(i)
    return win, strategy


def _safe_region(arena: _Arena, safe_state) -> tuple[set[int], dict[int, Choice]]:
    """Greatest fixpoint: configs where the coalition can stay safe forever."""
    n = len(arena.configs)
    alive = [[True] * len(moves) if moves else [] for moves in arena.moves]
    live_count = [len(a) for a in alive]
    preds: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for i, moves in enumerate(arena.moves):
        for k, (_, succ) in enumerate(moves or ()):
            for j in succ:
                preds[j].append((i, k))
    lost = {
        i for i, (state, _) in enumerate(arena.configs)
        if not safe_state(state) or live_count[i] == 0
    }
    todo = deque(sorted(lost))
    while todo:
        j = todo.popleft()
        for i, k in preds[j]:
            if i in lost or not alive[i][k]:
                continue
            alive[i][k] = False
            live_count[i] -= 1
            if live_count[i] == 0:
                lost.add(i)
                todo.append(i)
    win = set(range(n)) - lost
    strategy = {i: arena.moves[i][alive[i].index(True)][0] for i in win}
    return win, strategy


def check(m: Model, q: CoalitionQuery) -> CheckResult:
    _validate(m, q)
    target = q.target
    if q.operator is Op.NEXT:
        arena = _Arena(m, q, lambda s: True, only_starts=True)
        win, strategy = set(), {}
        for i in arena.starts:
            for choice, succ in arena.moves[i]:
                if all(arena.configs[j][0] in target for j in succ):
                    win.add(i)
                    strategy[i] = choice
                    break
        explored = len(arena.configs)
    elif q.operator in (Op.EVENTUALLY, Op.UNTIL):
        hold = q.hold if q.operator is Op.UNTIL else None
        arena = _Arena(
            m, q, lambda s: s not in target and (hold is None or s in hold)
        )
        goal = {i for i, (s, _) in enumerate(arena.configs) if s in target}
        win, strategy = _attractor(arena, goal)
        explored = len(arena.configs)
    else:
        arena = _Arena(m, q, lambda s: s in target)
        win, strategy = _safe_region(arena, lambda s: s in target)
        explored = len(arena.configs)

    starts = {arena.configs[i][0]: i in win for i in arena.starts}
    holds = all(starts.values())
    witness = None
    if holds and q.coalition:
        witness = {arena.configs[i]: arena.assignment(c) for i, c in sorted(strategy.items())}
    return CheckResult(holds, explored, witness, starts)


def check_norm_enforceable(
    m: Model, mon: NormMonitor, coalition: Iterable[int], budget: Vector
) -> CheckResult:
    """Can the coalition keep the product run out of VIOLATION forever?"""
    from .coordination import expand

    exp = expand(m, mon)
    safe = frozenset(
        p for p, (_, mu) in enumerate(exp.pairs) if not mon.is_violation(mu)
    )
    query = CoalitionQuery(frozenset(coalition), tuple(budget), Op.GLOBALLY, safe)
    return check(exp.model, query)


@dataclass(frozen=True)
class ProbeRecord:
    operator: str
    n_states: int
    model_size: int
    budget_product: int
    config_bound: int
    configs_explored: int
    holds: bool
    wall_time_s: float

    @property
    def within_bound(self) -> bool:
        return self.configs_explored <= self.config_bound


def complexity_probe(m: Model, q: CoalitionQuery) -> ProbeRecord:
    t0 = time.perf_counter()
    res = check(m, q)
    elapsed = time.perf_counter() - t0
    product = math.prod(b + 1 for b in q.budget)
    rec = ProbeRecord(
        operator=q.operator.value,
        n_states=m.n_states,
        model_size=m.size(),
        budget_product=product,
        config_bound=m.n_states * product,
        configs_explored=res.configs_explored,
        holds=res.holds,
        wall_time_s=elapsed,
    )
    if not rec.within_bound:
        raise AssertionError(
            f"explored {rec.configs_explored} configurations, bound is {rec.config_bound}"
        )
    return rec


# -- query syntax -----------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(<<)|(>>)|([A-Za-z_][A-Za-z0-9_]*)|(\d+)|([{}\[\],:=]))")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    out, pos = [], 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        mt = _TOKEN.match(text, pos)
        if not mt:
            col = pos + len(text[pos:]) - len(text[pos:].lstrip()) + 1
            raise QuerySyntaxError(f"unexpected character {text[col - 1]!r}", col, text)
        kinds = ("<<", ">>", "ident", "int", "punct")
        for kind, val in zip(kinds, mt.groups()):
            if val is not None:
                out.append((kind, val, mt.start(mt.lastindex) + 1))
        pos = mt.end()
    out.append(("eof", "", len(text) + 1))
    return out


def parse_query(m: Model, text: str, start: int | None = None) -> CoalitionQuery:
    """Parse ``<<A,B budget=[1,0]>> F {q1,q2}`` style queries against ``m``.

    The coalition may carry a label (``<<C:A,B ...>>``); the budget defaults to
    zero; the formula is ``X S``, ``F S``, ``G S`` or ``S U S`` where ``S`` is a
    state name or a braced set of state names.
    """
    toks = _tokenize(text)
    pos = 0

    def peek(k=0):
        return toks[min(pos + k, len(toks) - 1)]

    def expect(kind, val=None, hint=None):
        nonlocal pos
        t = peek()
        if t[0] != kind or (val is not None and t[1] != val):
            want = hint or (val if val is not None else kind)
            raise QuerySyntaxError(f"expected {want}, found {t[1] or 'end of input'!r}", t[2], text)
        pos += 1
        return t

    def state_set():
        nonlocal pos
        if peek()[0] == "ident":
            return frozenset([resolve_state(expect("ident"))])
        expect("punct", "{", "state set")
        names = []
        if peek()[1] != "}":
            names.append(resolve_state(expect("ident", hint="state name")))
            while peek()[1] == ",":
                pos += 1
                names.append(resolve_state(expect("ident", hint="state name")))
        expect("punct", "}")
        return frozenset(names)

    def resolve_state(tok):
        if tok[1] not in m.states:
            raise QuerySyntaxError(f"unknown state {tok[1]!r}", tok[2], text)
        return m.state_id(tok[1])

    def resolve_agent(tok):
        if tok[1] not in m.agents:
            raise QuerySyntaxError(f"unknown agent {tok[1]!r}", tok[2], text)
        return m.agent_id(tok[1])

    expect("<<", hint="'<<'")
    members: list[int] = []
    if peek()[0] == "ident" and peek()[1] != "budget":
        if peek(1)[1] == ":":
            pos += 2  # coalition label
        members.append(resolve_agent(expect("ident", hint="agent name")))
        while peek()[1] == ",":
            pos += 1
            members.append(resolve_agent(expect("ident", hint="agent name")))
    budget = zero(m.n_resources)
    if peek()[1] == "budget":
        pos += 1
        expect("punct", "=")
        expect("punct", "[")
        vals = []
        if peek()[1] != "]":
            vals.append(int(expect("int", hint="integer")[1]))
            while peek()[1] == ",":
                pos += 1
                vals.append(int(expect("int", hint="integer")[1]))
        close = expect("punct", "]")
        if len(vals) != m.n_resources:
            raise QuerySyntaxError(
                f"budget has {len(vals)} entries, model has {m.n_resources} resources",
                close[2],
                text,
            )
        budget = tuple(vals)
    expect(">>", hint="'>>'")

    t = peek()
    unary = t[0] == "ident" and t[1] in ("X", "F", "G") and peek(1)[1] != "U"
    if unary:
        pos += 1
        op = Op(t[1])
        target, hold = state_set(), None
    else:
        hold = state_set()
        expect("ident", "U", "'U'")
        op = Op.UNTIL
        target = state_set()
    expect("eof", hint="end of query")
    return CoalitionQuery(frozenset(members), budget, op, target, hold, start)


def format_query(m: Model, q: CoalitionQuery) -> str:
    def s(states):
        return "{" + ",".join(m.states[i] for i in sorted(states)) + "}"

    members = ",".join(m.agents[a] for a in sorted(q.coalition))
    head = f"<<{members} budget=[{','.join(map(str, q.budget))}]>>"
    if q.operator is Op.UNTIL:
        return f"{head} {s(q.hold)} U {s(q.target)}"
    return f"{head} {q.operator.value} {s(q.target)}"


def fit_exponent(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of log(y) against log(x)."""
    pts = [(math.log(x), math.log(y)) for x, y in zip(xs, ys) if x > 0 and y > 0]
    if len(pts) < 2:
        raise ValueError("need at least two positive points")
    return statistics.linear_regression([p[0] for p in pts], [p[1] for p in pts]).slope


def budget_sweep(m: Model, q: CoalitionQuery, levels: Iterable[int]) -> list[ProbeRecord]:
    """Probe ``q`` with the uniform budget ``[b, ..., b]`` for each level ``b``."""
    out = []
    for b in levels:
        out.append(complexity_probe(m, replace(q, budget=(b,) * m.n_resources)))
    return out
