"""Tests for scripts/smv_backend.py: LTL rendering and SMV emission."""

import ltl
import pytest
from bounded_expansion import expand
from evaluation._pipeline import FIXTURES_DIR, load_combined, load_formula, load_model
from grounding import ground_mfstl
from mfstl import bound_profile
from smv_backend import (
    SmvEmissionError,
    boolean_input,
    emit_smv,
    input_actions,
    render_ltl,
    stay_put_completion,
)
from smv_syntax import check_smv, input_token, parse_smv, simulate_smv
from sps_model import TAU, Action

GOLDEN = FIXTURES_DIR / "golden"
REQUEST_ANSWER = FIXTURES_DIR / "request_answer"
LOAN_DIR = FIXTURES_DIR / "loan_approval"


def _combined(name):
    spec = load_combined(REQUEST_ANSWER / f"{name}.spsml")
    profile = bound_profile(spec.formula, spec.sps.alphabet)
    return spec.sps, profile, ground_mfstl(spec.formula, profile)


def _loan(formula_name):
    sps = load_model(LOAN_DIR / "loan.sps")
    formula = load_formula(LOAN_DIR / f"{formula_name}.mfstl", sps.alphabet)
    profile = bound_profile(formula, sps.alphabet)
    return sps, profile, ground_mfstl(formula, profile)


def _agreement(sps, profile, document):
    """Edges of the simulated SMV against the freeze expansion of the completed SPS."""
    graph = simulate_smv(parse_smv(document.text))
    client = sps.alphabet.types[0] if boolean_input(sps) else None
    smv_edges = {(source, input_token(value, client), target) for source, value, target in graph.edges}
    completed = stay_put_completion(sps, input_actions(sps, profile))
    structure = expand(completed, profile, "freeze")
    expansion_edges = {
        ((t.source.state, t.source.counters, t.source.flags), str(t.action), (t.target.state, t.target.counters, t.target.flags))
        for t in structure.transitions
    }
    return smv_edges, expansion_edges


# ── rendering ────────────────────────────────────────────────────────────────

def test_canonical_rendering_matches_the_golden_formula():
    _, _, grounded = _combined("request_answer")
    expected = (GOLDEN / "request_answer.ltl").read_text(encoding="utf-8").strip()
    assert render_ltl(grounded) == expected


def test_smv_rendering_drops_parentheses_around_leaves():
    _, _, grounded = _combined("request_answer")
    assert render_ltl(grounded, style="smv") == "G ( (p[1] | p[2] | p[3] | p[4]) -> X ( q[1] | q[2] | q[3] | q[4] ) )"
    assert render_ltl(ltl.Until(ltl.Atom("a"), ltl.Not(ltl.Atom("b"))), style="smv") == "a U ! b"
    assert render_ltl(ltl.Release(ltl.FALSE, ltl.Atom("a"))) == "(FALSE) V (a)"


def test_nested_disjunctions_are_flattened():
    a, b, c = ltl.Atom("a"), ltl.Atom("b"), ltl.Atom("c")
    assert render_ltl(ltl.Or((a, ltl.Or((b, c))))) == "(a) | (b) | (c)"


def test_unknown_style_is_rejected():
    with pytest.raises(ValueError):
        render_ltl(ltl.TRUE, style="latex")


# ── emission ─────────────────────────────────────────────────────────────────

@pytest.mark.parametrize("name", ["request_answer", "request_answer_printed"])
def test_emitted_smv_matches_the_golden_file(name):
    sps, profile, grounded = _combined(name)
    document = emit_smv(sps, profile, grounded)
    assert document.text == (GOLDEN / f"{name}.smv").read_text(encoding="utf-8")
    assert check_smv(document.text) == []


def test_manifest_records_every_variable_and_the_encoding():
    sps, profile, grounded = _combined("request_answer")
    manifest = emit_smv(sps, profile, grounded).manifest
    assert manifest["ip"] == {"role": "input", "values": ["req(u0)", "ans(u0)"]}
    assert manifest["ctr"]["bound"] == 4
    assert manifest["p"]["role"] == "pending request flags"
    assert manifest["encoding"] == {"discipline": "freeze", "completion": "stay-put"}


def test_loan_uses_an_enumerated_input_and_indexed_arrays():
    sps, profile, grounded = _loan("every_type_pending")
    assert not boolean_input(sps)
    assert input_actions(sps, profile) == (
        TAU, Action.req("h"), Action.ans("h"), Action.req("l"), Action.ans("l"), Action.req("m"), Action.ans("m"),
    )
    text = emit_smv(sps, profile, grounded).text
    assert "IVAR ip : {tau, req_h, ans_h, req_l, ans_l, req_m, ans_m};" in text
    assert "VAR p1 : array 1..4 of boolean;" in text
    assert check_smv(text) == []


def test_server_propositions_become_locations():
    sps, profile, _ = _loan("every_type_pending")
    formula = ltl.Globally(ltl.Or((ltl.Atom("open"), ltl.Atom("reviewing"))))
    text = emit_smv(sps, profile, formula).text
    assert text.rstrip().endswith("G ( loc=idle | loc=review_h | loc=review_l | loc=review_m )")


def test_types_with_bound_zero_cannot_be_emitted():
    sps, profile, grounded = _loan("high_excludes_low")
    with pytest.raises(SmvEmissionError, match="bound 0: m"):
        emit_smv(sps, profile, grounded)


def test_stay_put_completion_adds_only_missing_moves():
    sps, profile, _ = _combined("request_answer")
    assert stay_put_completion(sps, input_actions(sps, profile)).transitions == sps.transitions
    loan, loan_profile, _ = _loan("every_type_pending")
    completed = stay_put_completion(loan, input_actions(loan, loan_profile))
    assert len(completed.transitions) == 4 * 7
    assert any(t.source == t.target == "idle" and t.action == TAU for t in completed.transitions)


def test_simulated_smv_agrees_with_the_freeze_expansion():
    sps, profile, grounded = _combined("request_answer")
    smv_edges, expansion_edges = _agreement(sps, profile, emit_smv(sps, profile, grounded))
    assert smv_edges == expansion_edges


@pytest.mark.slow
def test_simulated_loan_smv_agrees_with_the_freeze_expansion():
    sps, profile, grounded = _loan("every_type_pending")
    smv_edges, expansion_edges = _agreement(sps, profile, emit_smv(sps, profile, grounded))
    assert smv_edges == expansion_edges
