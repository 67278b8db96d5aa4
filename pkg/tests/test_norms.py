import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import scenario
from isskit import dsl
from isskit.behavior import Lasso, Step, Trace, check_lasso, enumerate_lassos, trace_from_actions
from isskit.errors import AlphabetMismatch, IllegalTriple, MonitorError, UnknownState
from isskit.generate import random_model, random_monitor
from isskit.norms import (
    STAY,
    NonTotalMonitor,
    NormMonitor,
    Outcome,
    Rule,
    StartRule,
    Status,
    action_norm,
    classify_lasso,
    classify_trace,
    compile_monitor,
    empty_norm,
    exists_violation,
    explore_product,
    state_norm,
    universal_norm,
)


@pytest.fixture(scope="module")
def toggle():
    return dsl.load(scenario("toggle.iss"))


def test_toggle_verdicts_are_frozen(toggle):
    m, mon = toggle.model, toggle.norms[0]
    lams = list(enumerate_lassos(m, 0, 3))
    # first violating step per lasso, from oracles.unrolled_verdict
    assert [classify_lasso(m, mon, l).position for l in lams] == [None, 1, 1, 2, 2, None, 2, 1, None]
    v = classify_lasso(m, mon, lams[1])
    assert v.outcome is Outcome.VIOLATING and v.phase == "cycle" and (v.iteration, v.offset) == (0, 1)
    assert str(v) == "VIOLATING@1 (cycle 0+1)"


def test_stem_and_start_phases(toggle):
    m = toggle.model
    mon = state_norm(m, {1})
    lam = Lasso(Trace(0, (Step(0, (0,)),), 1), (Step(1, (1,)),))
    v = classify_lasso(m, mon, lam)
    assert (v.position, v.phase) == (0, "stem")
    v = classify_lasso(m, mon, Lasso(Trace(1, (), 1), (Step(1, (1,)),)))
    assert (v.position, v.phase) == (0, "start")


def test_violation_deep_in_pumped_cycle(toggle):
    # counter monitor: the third flip from 'off' violates; the cycle must be pumped
    m = toggle.model
    names = ["c0", "c1", "c2", "bad"]
    status = [Status.OK] * 3 + [Status.VIOLATION]
    rules = [
        Rule(1, frozenset({0}), frozenset({0}), (frozenset({0}),)),
        Rule(2, frozenset({1}), frozenset({0}), (frozenset({0}),)),
        Rule(3, frozenset({2}), frozenset({0}), (frozenset({0}),)),
        Rule(STAY),
    ]
    mon = compile_monitor(m, "third_flip", names, status, 0, rules)
    lam = Lasso(Trace(0, (), 0), (Step(0, (0,)), Step(1, (0,))))
    v = classify_lasso(m, mon, lam)
    assert v.position == oracles.unrolled_verdict(m, mon, lam) == 4
    assert (v.iteration, v.offset) == (2, 0)


def test_trace_classification(toggle):
    m, mon = toggle.model, toggle.norms[0]
    assert classify_trace(m, mon, trace_from_actions(m, 0, [(0,)])).compliant
    assert classify_trace(m, mon, trace_from_actions(m, 0, [(0,), (0,)])).position == 1


def test_universal_and_empty(toggle):
    m = toggle.model
    for lam in enumerate_lassos(m, 0, 3):
        assert classify_lasso(m, universal_norm(m), lam).compliant
        assert classify_lasso(m, empty_norm(m), lam).phase == "start"


def test_monitor_validation(toggle):
    m = toggle.model
    with pytest.raises(MonitorError):
        NormMonitor("x", ("bad",), (Status.VIOLATION,), 0, (0, 0), {})
    with pytest.raises(MonitorError):
        NormMonitor("x", ("ok", "bad"), (Status.OK, Status.VIOLATION), 0, (0, 0), {(1, 0, (0,)): 0})
    with pytest.raises(NonTotalMonitor) as err:
        compile_monitor(m, "partial", ["ok"], [Status.OK], 0, [Rule(0, states=frozenset({0}))])
    assert err.value.uncovered[1] == "on"


def test_alphabet_mismatch(toggle, abc):
    with pytest.raises(AlphabetMismatch):
        classify_lasso(abc.model, toggle.norms[0], next(enumerate_lassos(abc.model, 0, 1)))


def test_constructor_errors(toggle):
    m = toggle.model
    with pytest.raises(UnknownState):
        state_norm(m, {9})
    with pytest.raises(IllegalTriple):
        action_norm(m, {(0, 0, 5)})


def test_start_rules(toggle):
    m = toggle.model
    mon = compile_monitor(
        m, "s", ["ok", "bad"], [Status.OK, Status.VIOLATION], 0, [Rule(STAY)], [StartRule(1, frozenset({1}))]
    )
    assert mon.start == (0, 1)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_classification_matches_unrolling(seed):
    rng = random.Random(seed)
    m = random_model(rng, max_states=4, max_agents=2, max_actions=2, max_joint=4)
    mon = random_monitor(rng, m)
    for q in m.initial:
        for lam in enumerate_lassos(m, q, 4):
            assert classify_lasso(m, mon, lam).position == oracles.unrolled_verdict(m, mon, lam)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_violation_search_agrees_with_census(seed):
    rng = random.Random(seed)
    m = random_model(rng, max_states=4, max_agents=2, max_actions=2, max_joint=4)
    mon = random_monitor(rng, m, p_violate=0.05)
    res = exists_violation(m, mon)
    g = explore_product(m, mon)
    reachable_bad = any(mon.is_violation(mu) for _, mu in g.nodes)
    assert res.found == reachable_bad
    if res:
        assert check_lasso(m, res.witness) == []
        assert res.witness.start in m.initial
        assert not classify_lasso(m, mon, res.witness).compliant
    else:
        # product reachability covers every run, so no short lasso violates either
        for q in m.initial:
            for lam in enumerate_lassos(m, q, 3):
                assert classify_lasso(m, mon, lam).compliant


def test_witness_on_scenario(abc):
    m = abc.model
    res = exists_violation(m, abc.norm("commitment"))
    v = classify_lasso(m, abc.norm("commitment"), res.witness)
    assert (v.position, v.phase) == (1, "stem")
    assert m.format_joint(res.witness.stem.steps[1].action) == "A:send,B:defect,C:treat"


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 100_000), shift=st.integers(1, 3))
def test_verdict_survives_cycle_rotation(seed, shift):
    rng = random.Random(seed)
    m = random_model(rng, max_states=4, max_agents=2, max_actions=2, max_joint=4)
    mon = random_monitor(rng, m)
    for lam in enumerate_lassos(m, m.initial[0], 3):
        k = shift % len(lam.cycle)
        moved = lam.cycle[:k]
        cycle = lam.cycle[k:] + moved
        stem = Trace(lam.start, lam.stem.steps + moved, cycle[0].source)
        rotated = Lasso(stem, cycle)
        assert check_lasso(m, rotated) == []
        a = classify_lasso(m, mon, lam)
        b = classify_lasso(m, mon, rotated)
        assert (a.outcome, a.position) == (b.outcome, b.position)
