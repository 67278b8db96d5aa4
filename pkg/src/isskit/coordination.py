"""Norm enforcement: regimentation, sanction and reparation.

Every model transform works on the reachable product of the model with the
norm's monitor and returns a product-expanded model whose states are
``(model state, monitor state)`` pairs.  Forbidding or charging a joint action
is therefore allowed to depend on the history the monitor has recorded, which
is what ordering norms need.  For memoryless monitors (state and action norms)
the product adds no information beyond the original states.
"""
from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

from .behavior import Lasso, Step, Trace, cumulative_cost, enumerate_lassos
from .errors import InvalidPolicy, NormUnenforceable, RegimentationDeadlock
from .model import JointAction, Model, joint_actions, zero
from .norms import (
    NormMonitor,
    ProductGraph,
    Status,
    classify_lasso,
    exists_violation,
    explore_product,
)


@dataclass(frozen=True)
class SanctionPolicy:
    money_resource: int
    sv: int

    def __post_init__(self):
        if self.sv < 1:
            raise InvalidPolicy(f"sanction value must be >= 1, got {self.sv}")
        if self.money_resource < 0:
            raise InvalidPolicy("money resource index must be non-negative")


@dataclass(frozen=True)
class ReparationPolicy:
    cv: int
    sv: int
    window: int
    repair_action: str
    money_resource: int | None = None

    def __post_init__(self):
        if self.cv < 1 or self.sv < 1:
            raise InvalidPolicy("cv and sv must be positive integers")
        if self.cv >= self.sv:
            raise InvalidPolicy(
                f"compensation cv={self.cv} must be lower than the sanction value sv={self.sv}"
            )
        if self.window < 1:
            raise InvalidPolicy(f"repair window must be >= 1, got {self.window}")


# -- product expansion ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Expansion:
    """A product-expanded model together with the norm lifted onto it."""

    model: Model
    monitor: NormMonitor
    base: Model
    norm: NormMonitor
    pairs: tuple[tuple[int, int], ...]

    def base_state(self, p: int) -> int:
        return self.pairs[p][0]

    def name_of(self, pair: tuple[int, int]) -> str:
        return self.model.states[self.pairs.index(pair)]


def _product_names(m: Model, mon: NormMonitor, pairs) -> list[str]:
    names, used = [], set(m.states)
    for q, mu in pairs:
        base = f"{m.states[q]}__{mon.state_names[mu]}"
        name, k = base, 1
        while name in used:
            name = f"{base}_{k}"
            k += 1
        used.add(name)
        names.append(name)
    return names


def lift_monitor(mon: NormMonitor, product: Model, base_of: Sequence[int]) -> NormMonitor:
    """The same norm, read over a product-expanded model's alphabet."""
    delta = {}
    for p in range(product.n_states):
        q = base_of[p]
        for sigma in joint_actions(product, p):
            for mu in range(mon.n_states):
                delta[(mu, p, sigma)] = mon.delta[(mu, q, sigma)]
    start = tuple(mon.start[base_of[p]] for p in range(product.n_states))
    return NormMonitor(mon.name, mon.state_names, mon.status, mon.initial, start, delta)


def _build(
    m: Model,
    mon: NormMonitor,
    pairs: list[tuple[int, int]],
    initial: Sequence[int],
    avail: dict[int, tuple[tuple[int, ...], ...]],
    cost_extra: dict[tuple[int, int, int], int] | None = None,
    money: int = 0,
) -> Expansion:
    index = {pair: i for i, pair in enumerate(pairs)}
    availability, cost, outcome = [], {}, {}
    for p, (q, mu) in enumerate(pairs):
        availability.append(avail.get(p, m.availability[q]))
        for a in range(m.n_agents):
            for x in availability[p][a]:
                c = m.cost.get((q, a, x))
                extra = (cost_extra or {}).get((p, a, x), 0)
                if extra:
                    c = list(c or zero(m.n_resources))
                    c[money] += extra
                    c = tuple(c)
                if c is not None:
                    cost[(p, a, x)] = c
        for sigma in itertools.product(*availability[p]):
            outcome[(p, sigma)] = index[(m.outcome[(q, sigma)], mon.delta[(mu, q, sigma)])]
    product = Model(
        agents=m.agents,
        resources=m.resources,
        states=tuple(_product_names(m, mon, pairs)),
        actions=m.actions,
        availability=tuple(availability),
        cost=cost,
        outcome=outcome,
        initial=tuple(sorted(set(initial))),
    )
    base_of = [q for q, _ in pairs]
    return Expansion(product, lift_monitor(mon, product, base_of), m, mon, tuple(pairs))


def expand(m: Model, mon: NormMonitor) -> Expansion:
    g = explore_product(m, mon)
    return _build(m, mon, g.nodes, g.initial, {})


def lift_lasso(exp: Expansion, lam: Lasso) -> Lasso | None:
    """The run of ``lam`` inside ``exp.model``, or None if it is not allowed there."""
    m, mon = exp.model, exp.norm
    index = {pair: i for i, pair in enumerate(exp.pairs)}
    p = index.get((lam.start, mon.start[lam.start]))
    if p is None or p not in m.initial:
        return None
    p0 = p

    def advance(p, s: Step):
        if any(x not in m.availability[p][a] for a, x in enumerate(s.action)):
            return None
        return m.outcome[(p, s.action)]

    stem: list[Step] = []
    for s in lam.stem.steps:
        nxt = advance(p, s)
        if nxt is None:
            return None
        stem.append(Step(p, s.action))
        p = nxt
    boundary: dict[int, int] = {}
    pumped: list[Step] = []
    while p not in boundary:
        boundary[p] = len(pumped)
        for s in lam.cycle:
            nxt = advance(p, s)
            if nxt is None:
                return None
            pumped.append(Step(p, s.action))
            p = nxt
    k = boundary[p]
    full_stem = tuple(stem + pumped[:k])
    return Lasso(Trace(p0, full_stem, p), tuple(pumped[k:]))


def project_lasso(exp: Expansion, plam: Lasso) -> Lasso:
    b = exp.base_state
    stem = tuple(Step(b(s.source), s.action) for s in plam.stem.steps)
    cycle = tuple(Step(b(s.source), s.action) for s in plam.cycle)
    return Lasso(Trace(b(plam.start), stem, b(plam.stem.end)), cycle)


# -- regimentation ----------------------------------------------------------


@dataclass
class RegimentationReport:
    pruned: list[tuple[str, str]] = field(default_factory=list)
    # (base state, monitor state) pairs whose allowed set became empty
    deadlocked: list[tuple[int, int]] = field(default_factory=list)
    deadlocked_states: list[str] = field(default_factory=list)
    lost_compliant_behaviors: bool = False


@dataclass(frozen=True, eq=False)
class RegimentResult:
    expansion: Expansion
    report: RegimentationReport

    @property
    def model(self) -> Model:
        return self.expansion.model

    @property
    def monitor(self) -> NormMonitor:
        return self.expansion.monitor


def _losing_region(mon: NormMonitor, g: ProductGraph, lookahead: bool) -> set[int]:
    bad = {i for i, (_, mu) in enumerate(g.nodes) if mon.is_violation(mu)}
    if not lookahead:
        return bad
    # least fixpoint: nodes all of whose joint actions lead into the region
    pred: list[list[int]] = [[] for _ in g.nodes]
    remaining = [len(s) for s in g.succ]
    for i, succ in enumerate(g.succ):
        for _, j in succ:
            pred[j].append(i)
    region = set(bad)
    todo = deque(bad)
    while todo:
        j = todo.popleft()
        for i in pred[j]:
            if i in region:
                continue
            remaining[i] -= 1
            if remaining[i] == 0:
                region.add(i)
                todo.append(i)
    return region


def max_box(per_agent: Sequence[Sequence[int]], allowed: set[JointAction]) -> tuple[tuple[int, ...], ...]:
    """Largest product of per-agent action subsets inside ``allowed``.

    Availability is per agent, so a set of surviving joint actions is only
    expressible when it is a Cartesian product.  Exact search on desk-scale
    action sets; a greedy reduction otherwise.
    """
    full = tuple(tuple(acts) for acts in per_agent)
    if all(sigma in allowed for sigma in itertools.product(*full)):
        return full
    n_boxes = math.prod(2 ** len(acts) - 1 for acts in per_agent)
    if n_boxes <= 4096:
        options = []
        for acts in per_agent:
            subsets = []
            for k in range(len(acts), 0, -1):
                subsets.extend(itertools.combinations(acts, k))
            options.append(subsets)
        best, best_size = None, 0
        for box in itertools.product(*options):
            size = math.prod(len(b) for b in box)
            if size <= best_size:
                continue
            if all(sigma in allowed for sigma in itertools.product(*box)):
                best, best_size = box, size
        return best

    seed = min(allowed)
    box = [set(acts) for acts in per_agent]
    while True:
        banned = [s for s in itertools.product(*(sorted(b) for b in box)) if s not in allowed]
        if not banned:
            return tuple(tuple(sorted(b)) for b in box)
        counts: dict[tuple[int, int], int] = {}
        for s in banned:
            for a, x in enumerate(s):
                if x != seed[a]:
                    counts[(a, x)] = counts.get((a, x), 0) + 1
        a, x = max(counts, key=lambda k: (counts[k], -k[0], -k[1]))
        box[a].discard(x)


def regiment(
    m: Model, mon: NormMonitor, *, lookahead: bool = True, allow_deadlock: bool = False
) -> RegimentResult:
    """Restrict availability so that the norm can no longer be violated.

    With ``lookahead`` the supervisor removes exactly the joint actions that
    enter the region from which violation is unavoidable (least restrictive
    sound policy).  Without it, only joint actions that violate immediately
    are removed, which can leave states with no admissible joint action.
    """
    g = explore_product(m, mon)
    losing = _losing_region(mon, g, lookahead)
    doomed = [g.nodes[i] for i in g.initial if i in losing]
    if doomed:
        names = ", ".join(m.states[q] for q, _ in doomed)
        raise NormUnenforceable(f"norm {mon.name} cannot be met from initial state(s) {names}")

    report = RegimentationReport()
    avail: dict[int, tuple[tuple[int, ...], ...]] = {}
    visited = set(g.initial)
    todo = deque(g.initial)
    while todo:
        i = todo.popleft()
        q, mu = g.nodes[i]
        allowed = {sigma for sigma, j in g.succ[i] if j not in losing}
        if mon.is_violation(mu):
            # only reachable through a kept deadlock
            box = m.availability[q]
        elif not allowed:
            report.deadlocked.append((q, mu))
            box = m.availability[q]
        else:
            box = max_box(m.availability[q], allowed)
        kept = set(itertools.product(*box))
        for sigma, j in g.succ[i]:
            if sigma not in kept:
                report.pruned.append((i, sigma))
                if sigma in allowed:
                    report.lost_compliant_behaviors = True
            elif j not in visited:
                visited.add(j)
                todo.append(j)
        avail[i] = box

    order = sorted(visited)
    if report.deadlocked and not allow_deadlock:
        raise RegimentationDeadlock(
            [f"{m.states[q]}/{mon.state_names[mu]}" for q, mu in report.deadlocked]
        )
    pairs = [g.nodes[i] for i in order]
    renumber = {i: k for k, i in enumerate(order)}
    exp = _build(
        m,
        mon,
        pairs,
        [renumber[i] for i in g.initial],
        {renumber[i]: box for i, box in avail.items()},
    )
    report.pruned = [
        (exp.model.states[renumber[i]], m.format_joint(sigma)) for i, sigma in report.pruned
    ]
    report.deadlocked_states = [exp.name_of(pair) for pair in report.deadlocked]
    return RegimentResult(exp, report)


# -- sanction ---------------------------------------------------------------


@dataclass
class SanctionReport:
    policy: SanctionPolicy
    attribution: str
    # (product state, agent, action) names of every cost entry raised by sv
    charged: list[tuple[str, str, str]] = field(default_factory=list)
    # compliant joint actions that share a charged component
    overcharged: list[tuple[str, str]] = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class SanctionResult:
    expansion: Expansion
    report: SanctionReport

    @property
    def model(self) -> Model:
        return self.expansion.model

    @property
    def monitor(self) -> NormMonitor:
        return self.expansion.monitor


def sanction(
    m: Model, mon: NormMonitor, policy: SanctionPolicy, attribution: str = "trigger"
) -> SanctionResult:
    """Raise the money cost of the actions that move the monitor into VIOLATION.

    ``attribution="trigger"`` charges the agents who could have avoided the
    violating step by changing only their own action; when nobody could,
    every agent is charged.  ``"collective"`` always charges
    every agent.  Costs are per (state, agent, action), so a charged action is
    also charged in compliant joint actions that contain it; those are listed
    in the report.
    """
    if attribution not in ("trigger", "collective"):
        raise InvalidPolicy(f"unknown attribution mode {attribution!r}")
    if policy.money_resource >= m.n_resources:
        raise InvalidPolicy(f"money resource index {policy.money_resource} out of range")
    g = explore_product(m, mon)
    extra: dict[tuple[int, int, int], int] = {}
    for i, (q, mu) in enumerate(g.nodes):
        if mon.is_violation(mu):
            continue
        violating = {sigma for sigma, j in g.succ[i] if mon.is_violation(g.nodes[j][1])}
        if not violating:
            continue
        joints = {sigma for sigma, _ in g.succ[i]}
        for sigma in violating:
            charged = []
            if attribution == "trigger":
                # agents who could have avoided the violation by deviating alone
                for a in range(m.n_agents):
                    alts = (sigma[:a] + (x,) + sigma[a + 1 :] for x in m.availability[q][a])
                    if any(alt in joints and alt not in violating for alt in alts):
                        charged.append(a)
            if not charged:
                charged = range(m.n_agents)
            for a in charged:
                extra[(i, a, sigma[a])] = policy.sv

    exp = _build(m, mon, g.nodes, g.initial, {}, extra, policy.money_resource)
    report = SanctionReport(policy, attribution)
    names = exp.model.states
    for i, a, x in sorted(extra):
        report.charged.append((names[i], m.agents[a], m.actions[x]))
    for i, (q, mu) in enumerate(g.nodes):
        for sigma, j in g.succ[i]:
            if mon.is_violation(mu) or mon.is_violation(g.nodes[j][1]):
                continue
            if any((i, a, x) in extra for a, x in enumerate(sigma)):
                report.overcharged.append((names[i], m.format_joint(sigma)))
    return SanctionResult(exp, report)


# -- reparation -------------------------------------------------------------


def check_repair_payment(m: Model, policy: ReparationPolicy) -> list[str]:
    """Problems with the repair action's declared money cost (must be >= cv)."""
    if policy.repair_action not in m.actions:
        return [f"repair action {policy.repair_action!r} is not declared"]
    money = policy.money_resource if policy.money_resource is not None else 0
    if not 0 <= money < m.n_resources:
        return [f"money resource index {money} out of range"]
    x = m.action_id(policy.repair_action)
    problems, offered = [], False
    for q in range(m.n_states):
        for a in range(m.n_agents):
            if x in m.availability[q][a]:
                offered = True
                paid = m.cost.get((q, a, x), zero(m.n_resources))[money]
                if paid < policy.cv:
                    problems.append(
                        f"{m.agents[a]} pays {paid} < cv={policy.cv} with "
                        f"{policy.repair_action} at {m.states[q]}"
                    )
    if not offered:
        problems.append(f"repair action {policy.repair_action!r} is never available")
    return problems


def repair_extend(m: Model, mon: NormMonitor, policy: ReparationPolicy) -> NormMonitor:
    """Tolerate violations repaired within ``policy.window`` steps.

    Every transition into VIOLATION from a state ``mu`` is redirected to a chain
    of PENDING_REPAIR states ``mu/1 .. mu/w``.  A step whose joint action
    contains the repair action returns the monitor to ``mu``; a step without it
    at ``mu/w`` lands in VIOLATION.
    """
    if policy.repair_action not in m.actions:
        raise InvalidPolicy(f"repair action {policy.repair_action!r} is not declared")
    pay = m.action_id(policy.repair_action)
    violations = mon.violation_states()
    sink = violations[0] if violations else None

    sources = sorted({
        mu for (mu, q, sigma), nu in mon.delta.items()
        if not mon.is_violation(mu) and mon.is_violation(nu)
    })
    names = list(mon.state_names)
    status = list(mon.status)
    pending: dict[tuple[int, int], int] = {}
    used = set(names)
    for mu in sources:
        for k in range(1, policy.window + 1):
            base = f"{mon.state_names[mu]}_pending{k}"
            name, n = base, 1
            while name in used:
                name, n = f"{base}_{n}", n + 1
            used.add(name)
            pending[(mu, k)] = len(names)
            names.append(name)
            status.append(Status.PENDING_REPAIR)

    delta = {}
    for (mu, q, sigma), nu in mon.delta.items():
        if mon.is_violation(nu) and not mon.is_violation(mu):
            delta[(mu, q, sigma)] = pending[(mu, 1)]
        else:
            delta[(mu, q, sigma)] = nu
        if (mu, 1) in pending and mu not in violations:
            for k in range(1, policy.window + 1):
                pk = pending[(mu, k)]
                if pay in sigma:
                    delta[(pk, q, sigma)] = mu
                elif k < policy.window:
                    delta[(pk, q, sigma)] = pending[(mu, k + 1)]
                else:
                    delta[(pk, q, sigma)] = sink
    return NormMonitor(
        f"{mon.name}_repaired", tuple(names), tuple(status), mon.initial, mon.start, delta
    )


@dataclass(frozen=True, eq=False)
class RepairResult:
    monitor: NormMonitor
    policy: ReparationPolicy


def repair(m: Model, mon: NormMonitor, policy: ReparationPolicy) -> RepairResult:
    """:func:`repair_extend` after checking that the repair action pays ``cv``."""
    problems = check_repair_payment(m, policy)
    if problems:
        raise InvalidPolicy("; ".join(problems))
    return RepairResult(repair_extend(m, mon, policy), policy)


# -- audit ------------------------------------------------------------------


def compliant_census(m: Model, mon: NormMonitor, max_len: int) -> list[Lasso]:
    """Compliant reduced lassos of length <= max_len from every initial state."""
    out = []
    for q in m.initial:
        for lam in enumerate_lassos(m, q, max_len):
            if classify_lasso(m, mon, lam).compliant:
                out.append(lam)
    return out


def _violating_census(m: Model, mon: NormMonitor, max_len: int) -> list[Lasso]:
    return [
        lam
        for q in m.initial
        for lam in enumerate_lassos(m, q, max_len)
        if not classify_lasso(m, mon, lam).compliant
    ]


def sanction_surcharge(res: SanctionResult, lam: Lasso) -> int:
    """Extra money paid by all agents over one classification pass of ``lam``."""
    exp = res.expansion
    plam = lift_lasso(exp, lam)
    steps = plam.stem.steps + plam.cycle
    everyone = range(exp.model.n_agents)
    money = res.report.policy.money_resource
    after = cumulative_cost(exp.model, steps, everyone)[money]
    before = cumulative_cost(exp.base, [Step(exp.base_state(s.source), s.action) for s in steps], everyone)[money]
    return after - before


def enforcement_audit(m: Model, mon: NormMonitor, transformed, max_len: int = 4) -> dict:
    """Key/value audit of an enforcement result against the original system."""
    rec: dict = {"norm": mon.name, "max_len": max_len}
    original = exists_violation(m, mon).found
    if isinstance(transformed, RegimentResult):
        exp = transformed.expansion
        before = compliant_census(m, mon, max_len)
        kept = [lam for lam in before if lift_lasso(exp, lam) is not None]
        rec.update(
            mode="regiment",
            violation_possible_before=original,
            violation_possible_after=exists_violation(exp.model, exp.monitor).found,
            pruned=len(transformed.report.pruned),
            deadlocked=len(transformed.report.deadlocked),
            lost_compliant_flag=transformed.report.lost_compliant_behaviors,
            compliant_before=len(before),
            compliant_after=len(kept),
            compliant_lost=len(before) - len(kept),
            product_states=exp.model.n_states,
        )
    elif isinstance(transformed, SanctionResult):
        exp = transformed.expansion
        bad = _violating_census(m, mon, max_len)
        extras = [sanction_surcharge(transformed, lam) for lam in bad]
        rec.update(
            mode="sanction",
            violation_possible_before=original,
            violation_possible_after=exists_violation(exp.model, exp.monitor).found,
            sv=transformed.report.policy.sv,
            money=m.resources[transformed.report.policy.money_resource],
            attribution=transformed.report.attribution,
            charged_entries=len(transformed.report.charged),
            overcharged_steps=len(transformed.report.overcharged),
            violating_lassos=len(bad),
            min_surcharge=min(extras) if extras else 0,
            max_surcharge=max(extras) if extras else 0,
        )
    elif isinstance(transformed, RepairResult):
        rep = transformed.monitor
        before = compliant_census(m, mon, max_len)
        after = compliant_census(m, rep, max_len)
        before_set = {(lam.stem, lam.cycle) for lam in before}
        rec.update(
            mode="repair",
            violation_possible_before=original,
            violation_possible_after=exists_violation(m, rep).found,
            cv=transformed.policy.cv,
            sv=transformed.policy.sv,
            window=transformed.policy.window,
            repair_action=transformed.policy.repair_action,
            compliant_before=len(before),
            compliant_after=len(after),
            repaired=sum(1 for lam in after if (lam.stem, lam.cycle) not in before_set),
            pending_states=sum(1 for s in rep.status if s is Status.PENDING_REPAIR),
        )
    else:
        raise TypeError(f"not an enforcement result: {type(transformed).__name__}")
    return rec
