"""Tests for scripts/mfstl.py: well-formedness, bound profiles and the semantics."""

import dataclasses
import random

import pytest
from evaluation.properties import random_sentence
from mfstl import (
    TRUE,
    And,
    Eq,
    Exists,
    Finally,
    Forall,
    Globally,
    Implies,
    Instant,
    MfoAnd,
    MfoImplies,
    MfoNot,
    MfoOr,
    MfstlEvaluationError,
    Next,
    Not,
    Or,
    Pred,
    Sentence,
    ServerProp,
    TraceModel,
    Until,
    bound_profile,
    check_well_formed,
    desugar_single_type,
    eval_mfo,
    eval_mfstl,
    free_variables,
    is_well_formed,
    mfo_sentences,
)
from sps_model import ServiceAlphabet

LOAN = ServiceAlphabet(("h", "l", "m"))
SINGLE = ServiceAlphabet(("u0",))

# exactly one pending high request
EXACTLY_ONE_HIGH = Exists("x", "h", MfoAnd(
    Pred("req_h", "x"),
    Forall("y", "h", MfoImplies(Pred("req_h", "y"), Eq("x", "y"))),
))


def _errors(formula, alphabet=None):
    return [i.message for i in check_well_formed(formula, alphabet) if i.severity == "error"]


def _warnings(formula, alphabet=None):
    return [i.message for i in check_well_formed(formula, alphabet) if i.severity == "warning"]


def _instant(props=(), **clients):
    return Instant(frozenset(props), {u: {j: frozenset(p) for j, p in members.items()} for u, members in clients.items()})


# ── well-formedness ──────────────────────────────────────────────────────────

def test_variable_free_under_a_temporal_operator_is_rejected():
    formula = Globally(Implies(
        Sentence(Forall("x", "u", Pred("req_u", "x"))),
        Next(Finally(Sentence(Pred("ans_u", "x")))),
    ))
    errors = _errors(formula, ServiceAlphabet(("u",)))
    assert len(errors) == 1
    assert "free variable x" in errors[0]
    assert not is_well_formed(formula, ServiceAlphabet(("u",)))


def test_typed_sentences_are_well_formed():
    formula = Globally(Sentence(EXACTLY_ONE_HIGH))
    assert check_well_formed(formula, LOAN) == []


def test_equality_across_sorts_is_an_error():
    formula = Sentence(Exists("x", "h", Exists("y", "l", Eq("x", "y"))))
    assert any("equality across sorts" in e for e in _errors(formula, LOAN))


def test_predicate_applied_to_the_wrong_sort():
    formula = Sentence(Exists("x", "l", Pred("req_h", "x")))
    assert any("of sort h applied to x of sort l" in e for e in _errors(formula, LOAN))


def test_untyped_binder_needs_a_single_type_alphabet():
    formula = Sentence(Exists("x", None, Pred("req_h", "x")))
    assert any("needs a type annotation" in e for e in _errors(formula, LOAN))
    assert _errors(formula, ServiceAlphabet(("h",))) == []


def test_unknown_client_type_is_an_error():
    formula = Sentence(Exists("x", "z", Pred("req_z", "x")))
    assert _errors(formula, LOAN)


def test_rebinding_in_scope_at_another_sort_is_an_error_at_the_same_sort_a_warning():
    other = Sentence(Exists("x", "h", Exists("x", "l", Pred("req_l", "x"))))
    assert any("rebound at sort l" in e for e in _errors(other, LOAN))
    same = Sentence(Exists("x", "h", Exists("x", "h", Pred("req_h", "x"))))
    assert _errors(same, LOAN) == []
    assert any("shadows" in w for w in _warnings(same, LOAN))


def test_name_reuse_in_disjoint_scopes_is_fine():
    formula = Sentence(MfoOr(
        Exists("x", "h", Pred("req_h", "x")),
        Exists("x", "l", Pred("req_l", "x")),
    ))
    assert check_well_formed(formula, LOAN) == []


def test_unknown_predicates_only_warn():
    formula = Sentence(Exists("x", "h", Pred("vip", "x")))
    assert _errors(formula, LOAN) == []
    assert _warnings(formula, LOAN) == ["unknown client predicate vip"]
    assert check_well_formed(formula, LOAN, signatures={"vip": "h"}) == []


def test_free_variables_and_sentences():
    body = MfoAnd(Pred("req_h", "x"), Eq("x", "y"))
    assert free_variables(body) == {"x", "y"}
    assert free_variables(Exists("y", "h", body)) == {"x"}
    formula = Until(Sentence(body), Not(Sentence(EXACTLY_ONE_HIGH)))
    assert list(mfo_sentences(formula)) == [body, EXACTLY_ONE_HIGH]


def test_desugar_single_type_fills_predicates_and_sorts():
    formula = Globally(Sentence(Exists("x", None, Pred("p", "x"))))
    assert desugar_single_type(formula, SINGLE) == Globally(Sentence(Exists("x", "u0", Pred("req_u0", "x"))))
    assert desugar_single_type(formula, LOAN) == formula


# ── bound profile ────────────────────────────────────────────────────────────

def test_bound_profile_counts_distinct_names_per_sort():
    profile = bound_profile(Globally(Sentence(EXACTLY_ONE_HIGH)), LOAN)
    assert (profile.r("h"), profile.n("h")) == (2, 8)
    assert profile.n("l") == 0
    assert profile.as_dict()["h"] == {"r": 2, "n": 8}


def test_bound_profile_request_answer():
    formula = Globally(Implies(
        Sentence(Exists("x", "u0", Pred("req_u0", "x"))),
        Next(Sentence(Exists("x", "u0", Pred("ans_u0", "x")))),
    ))
    assert bound_profile(formula, SINGLE).describe() == "u0: r=1 n=4"


def test_bound_profile_counts_one_name_once_per_sort():
    formula = Not(Sentence(MfoOr(
        MfoOr(Exists("x", "h", Pred("req_h", "x")), Exists("x", "l", Pred("req_l", "x"))),
        Exists("x", "m", Pred("req_m", "x")),
    )))
    profile = bound_profile(formula, LOAN)
    assert [profile.r(u) for u in LOAN.types] == [1, 1, 1]


# ── client semantics ─────────────────────────────────────────────────────────

def test_exactly_one_high_request():
    two = TraceModel.finite([_instant(h={1: {"req_h"}, 2: {"req_h"}})])
    one = TraceModel.finite([_instant(h={1: {"req_h"}, 2: set()})])
    none = TraceModel.finite([_instant(h={})])
    assert not eval_mfo(two, {}, 0, EXACTLY_ONE_HIGH)
    assert eval_mfo(one, {}, 0, EXACTLY_ONE_HIGH)
    assert not eval_mfo(none, {}, 0, EXACTLY_ONE_HIGH)


def test_predicates_hold_only_of_present_clients_equality_ignores_presence():
    model = TraceModel.finite([_instant(h={1: {"req_h"}})])
    assert eval_mfo(model, {"x": ("h", 1)}, 0, Pred("req_h", "x"))
    assert not eval_mfo(model, {"x": ("h", 2)}, 0, Pred("req_h", "x"))
    assert eval_mfo(model, {"x": ("h", 5), "y": ("h", 5)}, 0, Eq("x", "y"))


def test_unbound_variable_raises():
    model = TraceModel.finite([_instant(h={1: set()})])
    with pytest.raises(MfstlEvaluationError, match="unbound variable x"):
        eval_mfo(model, {}, 0, Pred("req_h", "x"))


def test_quantifiers_over_an_empty_domain():
    model = TraceModel.finite([_instant(h={})])
    assert not eval_mfo(model, {}, 0, Exists("x", "h", Pred("req_h", "x")))
    assert eval_mfo(model, {}, 0, Forall("x", "h", MfoNot(Pred("req_h", "x"))))


def test_untyped_binders_use_the_sole_client_type():
    model = TraceModel.finite([_instant(u0={1: {"req_u0"}})])
    assert eval_mfo(model, {}, 0, Exists("x", None, Pred("req_u0", "x")))


# ── server semantics ─────────────────────────────────────────────────────────

def test_trace_model_shape():
    with pytest.raises(MfstlEvaluationError):
        TraceModel.finite([])
    with pytest.raises(MfstlEvaluationError):
        TraceModel.lasso([_instant()], loop_start=1)
    model = TraceModel.lasso([_instant(), _instant(), _instant()], loop_start=1)
    assert [model.position(i) for i in range(6)] == [0, 1, 2, 1, 2, 1]
    with pytest.raises(MfstlEvaluationError):
        TraceModel.finite([_instant()]).position(1)


def test_temporal_operators_on_a_lasso():
    busy, idle = _instant({"busy"}), _instant({"idle"})
    model = TraceModel.lasso([idle, busy, idle], loop_start=1)
    assert eval_mfstl(model, 0, Next(ServerProp("busy")))
    assert eval_mfstl(model, 0, Globally(Finally(ServerProp("busy"))))
    assert not eval_mfstl(model, 0, Finally(Globally(ServerProp("busy"))))
    assert eval_mfstl(model, 0, Until(ServerProp("idle"), ServerProp("busy")))
    assert eval_mfstl(model, 1, Until(ServerProp("idle"), ServerProp("busy")))
    assert not eval_mfstl(model, 1, Until(ServerProp("busy"), ServerProp("closed")))
    assert eval_mfstl(model, 3, ServerProp("busy"))
    assert eval_mfstl(model, 4, ServerProp("idle"))


def test_sentences_are_evaluated_at_each_instant():
    pending = _instant(u0={1: {"req_u0"}})
    answered = _instant(u0={1: {"ans_u0"}})
    some_request = Sentence(Exists("x", "u0", Pred("req_u0", "x")))
    some_answer = Sentence(Exists("x", "u0", Pred("ans_u0", "x")))
    model = TraceModel.lasso([pending, answered], loop_start=0)
    assert eval_mfstl(model, 0, Globally(Implies(some_request, Next(some_answer))))
    assert not eval_mfstl(model, 0, Globally(some_request))


def test_finite_prefixes_refuse_infinite_horizon_questions():
    model = TraceModel.finite([_instant({"a"}), _instant({"a"})])
    assert eval_mfstl(model, 0, Next(ServerProp("a")))
    with pytest.raises(MfstlEvaluationError):
        eval_mfstl(model, 1, Next(ServerProp("a")))
    with pytest.raises(MfstlEvaluationError):
        eval_mfstl(model, 0, Globally(ServerProp("a")))
    with pytest.raises(MfstlEvaluationError):
        eval_mfstl(model, 0, Until(TRUE, ServerProp("a")))


def test_untyped_binders_over_a_model_without_clients_see_an_empty_domain():
    model = TraceModel.finite([_instant({"open"}), _instant()])
    assert not eval_mfo(model, {}, 0, Exists("x", None, Pred("req_u0", "x")))
    assert eval_mfo(model, {}, 1, Forall("x", None, Pred("req_u0", "x")))


# ── semantic laws on random lassos ───────────────────────────────────────────

def _random_instant(rng):
    props = frozenset(p for p in "ab" if rng.random() < 0.5)
    if rng.random() < 0.15:
        return Instant(props)
    members = {
        j: frozenset(p for p in ("req_u0", "ans_u0") if rng.random() < 0.5)
        for j in range(1, 4)
        if rng.random() < 0.6
    }
    return Instant(props, {"u0": members})


def _random_lasso(rng):
    instants = [_random_instant(rng) for _ in range(rng.randint(1, 4))]
    return TraceModel.lasso(instants, rng.randrange(len(instants)))


def _random_formula(rng, depth):
    if depth == 0 or rng.random() < 0.3:
        leaf = rng.choice(["sentence", "sentence", "prop", "truth"])
        if leaf == "sentence":
            return Sentence(random_sentence(rng, SINGLE, max_depth=3))
        if leaf == "prop":
            return ServerProp(rng.choice("ab"))
        return TRUE
    kind = rng.choice([Not, Next, Finally, Globally, Or, And, Implies, Until])
    if kind in (Not, Next, Finally, Globally):
        return kind(_random_formula(rng, depth - 1))
    return kind(_random_formula(rng, depth - 1), _random_formula(rng, depth - 1))


def _rebuild(node, leaf):
    """Apply ``leaf`` bottom-up to every formula node and string field."""
    if isinstance(node, str):
        return leaf(node)
    if dataclasses.is_dataclass(node):
        rebuilt = type(node)(*(_rebuild(getattr(node, f.name), leaf) for f in dataclasses.fields(node)))
        return leaf(rebuilt)
    return node


def _bound_names(node):
    if isinstance(node, (Exists, Forall)):
        yield node.variable
    if dataclasses.is_dataclass(node):
        for f in dataclasses.fields(node):
            yield from _bound_names(getattr(node, f.name))


def _cases(seed, count):
    rng = random.Random(seed)
    for _ in range(count):
        model = _random_lasso(rng)
        formula = _random_formula(rng, 3)
        for i in range(len(model.instants) + 2):
            yield model, i, formula


def test_renaming_bound_variables_preserves_truth():
    for model, i, formula in _cases(101, 300):
        names = sorted(set(_bound_names(formula)))
        permutation = dict(zip(names, reversed(names)))
        renamed = _rebuild(formula, lambda x: permutation.get(x, x) if isinstance(x, str) else x)
        assert eval_mfstl(model, i, renamed) == eval_mfstl(model, i, formula), formula


def test_forall_is_not_exists_not():
    def dual(node):
        if isinstance(node, Forall):
            return MfoNot(Exists(node.variable, node.sort, MfoNot(node.body)))
        return node

    for model, i, formula in _cases(202, 300):
        assert eval_mfstl(model, i, _rebuild(formula, dual)) == eval_mfstl(model, i, formula), formula


def test_negation_is_pointwise():
    for model, i, formula in _cases(303, 300):
        assert eval_mfstl(model, i, Not(formula)) == (not eval_mfstl(model, i, formula)), formula
        for sentence in mfo_sentences(formula):
            assert eval_mfo(model, {}, i, MfoNot(sentence)) == (not eval_mfo(model, {}, i, sentence))


def test_finally_is_true_until():
    for model, i, formula in _cases(404, 300):
        assert eval_mfstl(model, i, Finally(formula)) == eval_mfstl(model, i, Until(TRUE, formula)), formula
        assert eval_mfstl(model, i, Globally(formula)) == eval_mfstl(model, i, Not(Finally(Not(formula)))), formula
