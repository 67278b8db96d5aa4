"""Brute-force reference implementations.

These deliberately avoid the library's own algorithms: they unroll runs,
scan states directly, and search game trees instead of computing fixpoints.
"""
from __future__ import annotations

import itertools
from functools import lru_cache

from isskit.behavior import Lasso, Step


def joints(m, q):
    return list(itertools.product(*m.availability[q]))


def unrolled_verdict(m, mon, lam: Lasso):
    """Index of the first violating step of the infinite run, or None.

    The monitor state at cycle boundaries takes at most ``n`` distinct values,
    so ``n + 1`` copies of the cycle are enough to see any violation.
    """
    mu = mon.start[lam.start]
    if mon.status[mu].value == "violation":
        return 0
    steps = lam.stem.steps + lam.cycle * (mon.n_states + 1)
    for i, s in enumerate(steps):
        mu = mon.delta[(mu, s.source, s.action)]
        if mon.status[mu].value == "violation":
            return i
    return None


def visited_states(m, lam: Lasso, copies: int = 1):
    q = lam.start
    out = [q]
    for s in lam.stem.steps + lam.cycle * copies:
        assert s.source == q
        q = m.outcome[(q, s.action)]
        out.append(q)
    return out


def state_scan(m, bad, lam: Lasso):
    """First step whose target is bad (0 if the start is bad), else None."""
    states = visited_states(m, lam)
    if states[0] in bad:
        return 0
    for i, q in enumerate(states[1:]):
        if q in bad:
            return i
    return None


def action_scan(m, bad, lam: Lasso):
    for i, s in enumerate(lam.stem.steps + lam.cycle):
        if any((s.source, a, x) in bad for a, x in enumerate(s.action)):
            return i
    return None


def all_lassos_bruteforce(m, start, max_len):
    """Every (stem, cycle) split of every joint-action path, canonicalised.

    A run is identified by its first ``2 * max_len`` steps, which pins down
    any eventually periodic word with stem + cycle <= max_len.
    """
    runs = set()
    for n in range(1, max_len + 1):
        frontier = [((), start)]
        for _ in range(n):
            nxt = []
            for path, q in frontier:
                for sigma in joints(m, q):
                    nxt.append((path + (Step(q, sigma),), m.outcome[(q, sigma)]))
            frontier = nxt
        for path, end in frontier:
            for k in range(n):
                if path[k].source != end:
                    continue
                stem, cycle = path[:k], path[k:]
                word = stem + cycle * (2 * max_len)
                runs.add(word[: 2 * max_len])
    return runs


def canonical_run(lam: Lasso, horizon: int):
    word = lam.stem.steps + lam.cycle * (horizon + 1)
    return word[:horizon]


# -- coalition games --------------------------------------------------------


def _member_choices(m, q, coalition):
    members = sorted(coalition)
    return members, list(itertools.product(*(m.availability[q][a] for a in members)))


def _spend(m, q, members, choice, remaining):
    left = list(remaining)
    for a, x in zip(members, choice):
        c = m.cost.get((q, a, x), (0,) * m.n_resources)
        for i, v in enumerate(c):
            left[i] -= v
    if min(left, default=0) < 0:
        return None
    return tuple(left)


def _responses(m, q, members, choice):
    out = []
    for sigma in joints(m, q):
        if all(sigma[a] == x for a, x in zip(members, choice)):
            out.append(sigma)
    return out


def game_tree_check(m, coalition, budget, op, target, hold=None, start=None):
    """AND-OR search over histories, depth-bounded by the configuration count."""
    horizon = m.n_states
    for b in budget:
        horizon *= b + 1
    horizon += 1

    @lru_cache(maxsize=None)
    def win(q, rem, depth):
        if op == "F" or op == "U":
            if q in target:
                return True
            if op == "U" and q not in hold:
                return False
            if depth == 0:
                return False
        elif op == "G":
            if q not in target:
                return False
            if depth == 0:
                return True
        members, choices = _member_choices(m, q, coalition)
        for choice in choices:
            left = _spend(m, q, members, choice, rem)
            if left is None:
                continue
            succ = [m.outcome[(q, s)] for s in _responses(m, q, members, choice)]
            if op == "X":
                if all(t in target for t in succ):
                    return True
            elif all(win(t, left, depth - 1) for t in succ):
                return True
        return False

    starts = m.initial if start is None else (start,)
    return all(win(q, tuple(budget), horizon) for q in starts)


def positional_strategy_check(m, coalition, budget, op, target, hold=None, start=None, limit=20000):
    """Try every memoryless strategy over (state, remaining budget) configurations.

    Returns None when the strategy space is larger than ``limit``.
    """
    budget = tuple(budget)
    configs = set()
    todo = [(q, budget) for q in (m.initial if start is None else (start,))]
    while todo:
        c = todo.pop()
        if c in configs:
            continue
        configs.add(c)
        q, rem = c
        members, choices = _member_choices(m, q, coalition)
        for choice in choices:
            left = _spend(m, q, members, choice, rem)
            if left is None:
                continue
            for s in _responses(m, q, members, choice):
                todo.append((m.outcome[(q, s)], left))
    configs = sorted(configs)
    options = []
    size = 1
    for q, rem in configs:
        members, choices = _member_choices(m, q, coalition)
        ok = [c for c in choices if _spend(m, q, members, c, rem) is not None]
        options.append(ok or [None])
        size *= len(options[-1])
        if size > limit:
            return None

    def successors(c, choice):
        q, rem = c
        members, _ = _member_choices(m, q, coalition)
        left = _spend(m, q, members, choice, rem)
        return [(m.outcome[(q, s)], left) for s in _responses(m, q, members, choice)]

    def good_under(strategy):
        pick = dict(zip(configs, strategy))
        for q0 in (m.initial if start is None else (start,)):
            c0 = (q0, budget)
            if op == "X":
                ch = pick[c0]
                if ch is None or not all(t[0] in target for t in successors(c0, ch)):
                    return False
                continue
            if op == "G":
                # every reachable config must be safe and have a move
                seen, stack = set(), [c0]
                while stack:
                    c = stack.pop()
                    if c in seen:
                        continue
                    seen.add(c)
                    if c[0] not in target or pick[c] is None:
                        return False
                    stack.extend(successors(c, pick[c]))
                continue
            # F / U: no reachable non-goal config may be a dead end or lie on a cycle
            def goal(c):
                return c[0] in target

            def blocked(c):
                return op == "U" and c[0] not in hold

            color = {}

            def dfs(c):
                if goal(c):
                    return True
                if blocked(c) or pick[c] is None:
                    return False
                if color.get(c) == 1:
                    return False
                if color.get(c) == 2:
                    return True
                color[c] = 1
                for t in successors(c, pick[c]):
                    if not dfs(t):
                        return False
                color[c] = 2
                return True

            if not dfs(c0):
                return False
        return True

    return any(good_under(s) for s in itertools.product(*options))
