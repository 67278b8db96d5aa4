import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import scenario
from isskit import dsl
from isskit.behavior import (
    Lasso,
    Step,
    Trace,
    check_lasso,
    cumulative_cost,
    enumerate_lassos,
    extend_trace,
    feasible_under_budget,
    format_lasso,
    is_reduced,
    lasso_from_strategy,
    parse_lasso,
    trace_from_actions,
)
from isskit.errors import IllegalAction, IllegalJointAction, IncompleteProfile
from isskit.generate import random_model


@pytest.fixture(scope="module")
def toggle():
    return dsl.load(scenario("toggle.iss")).model


def test_trace_building(toggle):
    m = toggle
    t = trace_from_actions(m, 0, [(0,), (1,), (0,)])
    assert [s.source for s in t.steps] == [0, 1, 1]
    assert t.end == 0
    assert len(Trace.empty(1)) == 0 and Trace.empty(1).end == 1
    with pytest.raises(IllegalJointAction):
        extend_trace(m, t, (7,))


def test_lasso_step_condition(toggle):
    m = toggle
    good = Lasso(Trace(0, (Step(0, (0,)),), 1), (Step(1, (1,)),))
    assert check_lasso(m, good) == []
    assert good.step_at(5) == Step(1, (1,))
    assert good.unroll(2) == (Step(0, (0,)), Step(1, (1,)), Step(1, (1,)))
    open_cycle = Lasso(Trace(0, (), 0), (Step(0, (0,)),))
    assert "cycle does not close" in check_lasso(m, open_cycle)
    assert check_lasso(m, Lasso(Trace(0, (), 0), ())) == ["empty cycle"]


def test_toggle_enumeration_is_frozen(toggle):
    # 9 distinct runs from 'off' with stem + cycle <= 3 (brute-force count)
    lams = list(enumerate_lassos(toggle, 0, 3))
    assert len(lams) == 9
    assert len(oracles.all_lassos_bruteforce(toggle, 0, 3)) == 9
    assert [(len(l.stem), len(l.cycle)) for l in lams] == [
        (0, 1), (0, 2), (0, 3), (0, 3), (0, 3), (1, 1), (1, 2), (2, 1), (2, 1)
    ]


def test_enumeration_rejects_zero_length(toggle):
    with pytest.raises(ValueError):
        list(enumerate_lassos(toggle, 0, 0))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), length=st.integers(1, 4))
def test_enumeration_matches_bruteforce(seed, length):
    m = random_model(random.Random(seed), max_states=4, max_agents=2, max_actions=2, max_joint=4)
    for q in m.initial:
        lams = list(enumerate_lassos(m, q, length))
        runs = [oracles.canonical_run(l, 2 * length) for l in lams]
        assert len(set(runs)) == len(runs)
        assert set(runs) == oracles.all_lassos_bruteforce(m, q, length)
        for l in lams:
            assert check_lasso(m, l) == []
            assert is_reduced(l)
            assert len(l) <= length


def test_strategy_lasso(toggle):
    # always flip: (off flip on flip off)^omega
    lam = lasso_from_strategy(toggle, {(0, 0): 0, (0, 1): 0}, 0)
    assert len(lam.stem) == 0 and len(lam.cycle) == 2
    lam = lasso_from_strategy(toggle, {(0, 0): 0, (0, 1): 1}, 0)
    assert [s.source for s in lam.stem.steps] == [0] and lam.cycle == (Step(1, (1,)),)
    with pytest.raises(IncompleteProfile):
        lasso_from_strategy(toggle, {(0, 0): 0}, 0)
    with pytest.raises(IllegalAction):
        lasso_from_strategy(toggle, {(0, 0): 5, (0, 1): 0}, 0)


def test_costs_and_budget(toggle):
    t = trace_from_actions(toggle, 0, [(0,), (0,), (1,), (0,)])
    assert cumulative_cost(toggle, t, [0]) == (3,)
    assert feasible_under_budget(toggle, t, {0: (3,)})
    res = feasible_under_budget(toggle, t, {0: (2,)})
    assert not res and res.step == 3 and res.agent == 0 and res.resource == 0
    # a missing agent has nothing to spend
    assert not feasible_under_budget(toggle, t, {})


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_budget_feasibility_is_monotone(seed):
    rng = random.Random(seed)
    m = random_model(rng, max_states=4, max_agents=2, max_joint=4)
    lam = next(iter(enumerate_lassos(m, m.initial[0], 4)))
    steps = lam.unroll(2)
    low = {a: tuple(rng.randint(0, 3) for _ in range(m.n_resources)) for a in range(m.n_agents)}
    high = {a: tuple(v + rng.randint(0, 2) for v in low[a]) for a in low}
    if feasible_under_budget(m, steps, low):
        assert feasible_under_budget(m, steps, high)


def test_dump_round_trip(abc):
    m = abc.model
    for lam in list(enumerate_lassos(m, 0, 3))[:50]:
        text = format_lasso(m, lam)
        assert text.count("repeat:") == 1
        assert parse_lasso(m, text) == lam


def test_dump_format(toggle):
    lam = lasso_from_strategy(toggle, {(0, 0): 0, (0, 1): 1}, 0)
    assert format_lasso(toggle, lam) == "off --(A:flip)--> on\nrepeat:\non --(A:wait)--> on"


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000), cut=st.integers(0, 6))
def test_cumulative_cost_is_additive(seed, cut):
    rng = random.Random(seed)
    m = random_model(rng, max_states=4, max_agents=3, max_joint=4)
    lam = next(iter(enumerate_lassos(m, m.initial[0], 3)))
    steps = lam.unroll(2)
    cut = min(cut, len(steps))
    group = [a for a in range(m.n_agents) if rng.random() < 0.6]
    whole = cumulative_cost(m, steps, group)
    left = cumulative_cost(m, steps[:cut], group)
    right = cumulative_cost(m, steps[cut:], group)
    assert whole == tuple(x + y for x, y in zip(left, right))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_strategy_lasso_is_deterministic(seed):
    rng = random.Random(seed)
    m = random_model(rng, max_joint=4)
    profile = {
        (a, q): rng.choice(m.availability[q][a]) for a in range(m.n_agents) for q in range(m.n_states)
    }
    runs = [lasso_from_strategy(m, profile, m.initial[0]) for _ in range(3)]
    assert runs[0] == runs[1] == runs[2]
    assert check_lasso(m, runs[0]) == []
