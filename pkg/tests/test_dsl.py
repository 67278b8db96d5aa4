import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import SCENARIOS, scenario
from isskit import dsl
from isskit.coordination import regiment, repair_extend, sanction, ReparationPolicy, SanctionPolicy
from isskit.errors import DslError
from isskit.generate import random_model, random_monitor

HEAD = "agents A B;\nresources money;\nstates s* t;\nactions go stop;\n"
AVAIL = "avail s A {go,stop};\navail s B stop;\navail t A stop;\navail t B stop;\n"


def diags(text):
    with pytest.raises(DslError) as err:
        dsl.load(text, "x.iss")
    return err.value.diagnostics


def codes(text):
    return [d.code for d in diags(text)]


def test_tokens_carry_positions():
    toks, problems = dsl.tokenize("agents A;\n  cost s A go = [1];", "f.iss")
    assert problems == []
    assert [(t.text, t.span.line, t.span.column) for t in toks[:4]] == [
        ("agents", 1, 1), ("A", 1, 8), (";", 1, 9), ("cost", 2, 3)
    ]
    assert toks[-1].kind == "eof"


def test_lex_error_has_span():
    (d,) = [d for d in diags(HEAD + "avail s A $go;\n") if d.code == "LexError"]
    assert (d.span.line, d.span.column) == (5, 11)
    assert str(d).startswith("x.iss:5:11: error[LexError]")


def test_parse_error_names_the_expected_token():
    (d,) = diags(HEAD + "avail s A {go stop};\n")
    assert d.code == "ParseError"
    assert (d.span.line, d.span.column) == (5, 15)
    assert d.hint == "'}' or ','"


def test_recovery_inside_norm_block():
    text = HEAD + AVAIL + "norm n {\n  state ok fine init;\n  on _ / _ -> ok;\n  bogus;\n}\npolicy sanction money;\n"
    found = diags(text)
    assert [(d.span.line, d.span.column) for d in found] == [(10, 12), (12, 3)]
    assert found[0].hint == "ok, violation or pending"


def test_recovery_skips_a_broken_block():
    found = diags("norm { state x ok; }\nagents A;\nagents ;\n")
    assert [(d.span.line, d.span.column, d.hint) for d in found] == [(1, 6, "norm name")]


def test_recovery_reports_several_errors():
    text = HEAD + "avail s A {go,;\ncost s A go = [1;\noutcome s go -> t;\n"
    found = diags(text)
    assert [d.span.line for d in found] == [5, 6, 7]


def test_duplicates_and_unknowns():
    text = HEAD.replace("states s* t;", "states s* t s;") + "avail s C go;\n"
    found = codes(text)
    assert "DuplicateDefinition" in found
    assert found.count("UnknownIdentifier") == 1


def test_unknown_identifier_span_points_at_name():
    (d,) = diags(HEAD + AVAIL + "outcome s (go,stop) -> nowhere;\noutcome _x (stop,stop) -> s;\n")[:1]
    assert d.code == "UnknownIdentifier"
    assert (d.span.line, d.span.column, d.span.length) == (9, 24, 7)


def test_cv_must_be_below_sv():
    (d,) = diags(scenario("bad_repair.iss"))
    assert d.code == "InvalidPolicy"
    assert "cv < sv" in d.message
    assert d.span.line == 16


def test_wildcards_expand_first_match_wins():
    text = HEAD + AVAIL + "outcome s (go,_) -> t;\noutcome s (_,_) -> t;\noutcome _ (_,_) -> s;\n"
    with pytest.raises(DslError):
        dsl.load(text)  # '_' is not a state name in outcome position
    text = HEAD + AVAIL + "outcome s (go,_) -> t;\noutcome s (_,_) -> s;\noutcome t (_,_) -> t;\n"
    m = dsl.load(text).model
    assert m.outcome == {(0, (0, 1)): 1, (0, (1, 1)): 0, (1, (1, 1)): 1}


def test_unused_and_unavailable_outcomes():
    text = HEAD + AVAIL + "outcome s (_,_) -> s;\noutcome s ({go,stop},stop) -> t;\noutcome t (_,_) -> t;\n"
    low = dsl.load(text)
    assert [d.code for d in low.warnings if d.code == "UnusedOutcome"] == ["UnusedOutcome"]
    text = HEAD + AVAIL + "outcome s (_,_) -> s;\noutcome t (go,stop) -> t;\noutcome t (_,_) -> t;\n"
    assert codes(text) == ["IllegalJointAction"]


def test_missing_cost_is_a_warning():
    text = HEAD + AVAIL + "cost s A go = [2];\noutcome s (_,_) -> t;\noutcome t (_,_) -> t;\n"
    low = dsl.load(text)
    missing = [d for d in low.warnings if d.code == "UndefinedCost"]
    assert len(missing) == 4
    assert low.model.cost == {(0, 0, 0): (2,)}


def test_validation_errors_keep_spans():
    text = HEAD + AVAIL + "outcome s (go,_) -> t;\noutcome t (_,_) -> t;\n"
    (d,) = diags(text)
    assert d.code == "MissingOutcome"
    assert d.span.line == 3


def test_non_total_norm():
    text = HEAD + AVAIL + "outcome s (_,_) -> s;\noutcome t (_,_) -> t;\n"
    text += "norm n {\n  state ok ok init;\n  on s / _ -> ok;\n}\n"
    (d,) = diags(text)
    assert d.code == "MonitorError" and d.hint.startswith("a wildcard default")


def test_norm_block_lowering():
    text = HEAD + AVAIL + "outcome s (go,_) -> t;\noutcome s (_,_) -> s;\noutcome t (_,_) -> t;\n"
    text += "norm n {\n  state ok ok init;\n  state hot ok;\n  state bad violation;\n"
    text += "  start t -> bad;\n  on ok: s / (go,_) -> hot;\n  on hot: t / _ -> bad;\n  on _ / _ -> _;\n}\n"
    mon = dsl.load(text).norm("n")
    assert mon.start == (0, 2)
    assert mon.delta[(0, 0, (0, 1))] == 1
    assert mon.delta[(1, 1, (1, 1))] == 2
    assert mon.delta[(1, 0, (1, 1))] == 1


def test_crlf_and_utf8_comments(abc_text):
    crlf = abc_text.replace("\n", "\r\n").replace("# Three", "# Drei Agenten über")
    assert dsl.parse(crlf) == dsl.parse(abc_text)
    assert "\r" not in dsl.serialize(dsl.parse(crlf))


@pytest.mark.parametrize("name", sorted(p.name for p in SCENARIOS.glob("*.iss") if p.name != "bad_repair.iss"))
def test_bundled_round_trip(name):
    doc = dsl.parse(scenario(name))
    text = dsl.serialize(doc)
    assert dsl.parse(text) == doc
    assert dsl.serialize(dsl.parse(text)) == text


def test_spans_do_not_affect_equality(abc_text):
    shifted = "\n\n# padding\n" + abc_text
    assert dsl.parse(shifted) == dsl.parse(abc_text)


def test_policies_lower(abc):
    assert abc.sanction.policy == SanctionPolicy(0, 5) and abc.sanction.norm == "commitment"
    assert abc.repair.policy == ReparationPolicy(2, 5, 1, "pay", 0)


def _same_model(a, b):
    return (a.states, a.agents, a.actions, a.resources, a.availability, a.cost, a.outcome, a.initial) == (
        b.states, b.agents, b.actions, b.resources, b.availability, b.cost, b.outcome, b.initial
    )


def _same_monitor(a, b):
    return (a.state_names, a.status, a.initial, a.start, dict(a.delta)) == (
        b.state_names, b.status, b.initial, b.start, dict(b.delta)
    )


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 1_000_000))
def test_model_documents_round_trip(seed):
    rng = random.Random(seed)
    m = random_model(rng, max_states=5, max_agents=3, max_joint=8)
    mon = random_monitor(rng, m)
    doc = dsl.model_document(m, [mon])
    text = dsl.serialize(doc)
    assert dsl.parse(text) == doc
    low = dsl.load(text)
    assert _same_model(low.model, m)
    assert _same_monitor(low.norms[0], mon)


def test_transformed_models_serialize(abc):
    m = abc.model
    mon = abc.norm("clean_air")
    for res in (regiment(m, mon), sanction(m, mon, SanctionPolicy(0, 5))):
        low = dsl.load(dsl.serialize(dsl.model_document(res.model, [res.monitor])))
        assert _same_model(low.model, res.model)
        assert _same_monitor(low.norms[0], res.monitor)
    rep = repair_extend(m, abc.norm("commitment"), ReparationPolicy(2, 5, 1, "pay"))
    low = dsl.load(dsl.serialize(dsl.model_document(m, [rep])))
    assert _same_monitor(low.norms[0], rep)


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet="agentsrucoq*{}()[],;=/:_->01 \n#", max_size=80))
def test_garbage_only_raises_diagnostics(text):
    try:
        dsl.load(text)
    except DslError as err:
        assert err.diagnostics
        assert all(d.span.line >= 1 and d.span.column >= 1 for d in err.diagnostics)


@settings(max_examples=100, deadline=None)
@given(cut=st.integers(0, 2000))
def test_truncated_scenario_never_crashes(abc_text, cut):
    try:
        dsl.load(abc_text[:cut])
    except DslError:
        pass
