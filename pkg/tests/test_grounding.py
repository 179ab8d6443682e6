"""Tests for scripts/grounding.py: quantifier elimination over bounded domains.

The adequacy suites compare the client semantics with the grounded formula
on every flag assignment that respects the p/q exclusion.
"""

import random

import ltl
import pytest
from evaluation.properties import adequacy_mismatches, flag_assignments, random_sentence, sampled_flag_assignments
from grounding import (
    GroundingError,
    GroundingMap,
    check_atom_clash,
    flag_assignment,
    ground_mfo,
    ground_mfstl,
    instant_of_flags,
)
from mfstl import (
    Eq,
    Exists,
    Forall,
    Globally,
    Implies,
    Instant,
    MfoAnd,
    MfoImplies,
    MfoNot,
    MfoOr,
    Next,
    Pred,
    Sentence,
    ServerProp,
    bound_profile,
)
from smv_backend import render_ltl
from sps_model import ServiceAlphabet, Sps

SINGLE = ServiceAlphabet(("u0",))
LOAN = ServiceAlphabet(("h", "l", "m"))

SOME_REQUEST = Exists("x", "u0", Pred("req_u0", "x"))
SOME_ANSWER = Exists("x", "u0", Pred("ans_u0", "x"))
AT_MOST_ONE_HIGH = MfoOr(
    MfoNot(Exists("x", "h", Pred("req_h", "x"))),
    Exists("x", "h", MfoAnd(Pred("req_h", "x"), Forall("y", "h", MfoImplies(Pred("req_h", "y"), Eq("x", "y"))))),
)
HIGH_EXCLUDES_LOW = MfoImplies(
    Exists("x", "h", Pred("req_h", "x")),
    MfoNot(Exists("y", "l", Pred("req_l", "y"))),
)


def _pending(prefix, n):
    return [ltl.Atom(f"{prefix}[{j}]") for j in range(1, n + 1)]


def test_atom_names_carry_the_type_index_only_with_several_types():
    single = GroundingMap(SINGLE, {"u0": 2})
    assert single.atoms() == {"p[1]", "p[2]", "q[1]", "q[2]"}
    loan = GroundingMap(LOAN, {"h": 1, "l": 1})
    assert loan.atoms() == {"p0[1]", "q0[1]", "p1[1]", "q1[1]"}
    assert loan.size("m") == 0


def test_existential_request_grounds_to_four_disjuncts():
    grounded = ground_mfo(SOME_REQUEST, GroundingMap(SINGLE, {"u0": 4}))
    assert grounded == ltl.Or(tuple(_pending("p", 4)))
    assert render_ltl(grounded) == "(p[1]) | (p[2]) | (p[3]) | (p[4])"


def test_bare_p_q_predicates_ground_in_single_type_mode():
    sentence = Exists("x", None, Pred("q", "x"))
    assert ground_mfo(sentence, GroundingMap(SINGLE, {"u0": 2})) == ltl.Or(tuple(_pending("q", 2)))


def test_equality_becomes_a_constant():
    distinct_pair = Exists("x", "u0", Exists("y", "u0", MfoNot(Eq("x", "y"))))
    assert ground_mfo(distinct_pair, GroundingMap(SINGLE, {"u0": 2})) == ltl.TRUE
    assert ground_mfo(distinct_pair, GroundingMap(SINGLE, {"u0": 1})) == ltl.FALSE


def test_profile_bounds_expand_over_four_times_the_variables():
    formula = Globally(Implies(Sentence(SOME_REQUEST), Next(Sentence(SOME_ANSWER))))
    profile = bound_profile(formula, SINGLE)
    grounded = ground_mfstl(formula, profile)
    assert render_ltl(grounded) == (
        "G (((p[1]) | (p[2]) | (p[3]) | (p[4])) -> (X ((q[1]) | (q[2]) | (q[3]) | (q[4]))))"
    )
    prose = ground_mfstl(formula, profile, strict_prose=True)
    assert prose == ltl.Globally(ltl.Implies(ltl.Atom("p[1]"), ltl.Next(ltl.Atom("q[1]"))))


def test_high_excludes_low_over_the_loan_alphabet():
    formula = Globally(Sentence(HIGH_EXCLUDES_LOW))
    profile = bound_profile(formula, LOAN)
    assert ground_mfstl(formula, profile) == ltl.Globally(ltl.Implies(
        ltl.Or(tuple(_pending("p0", 4))),
        ltl.Not(ltl.Or(tuple(_pending("p1", 4)))),
    ))


def test_server_propositions_pass_through():
    formula = Globally(ServerProp("open"))
    assert ground_mfstl(formula, GroundingMap(SINGLE, {"u0": 1})) == ltl.Globally(ltl.Atom("open"))


def test_grounding_errors():
    with pytest.raises(GroundingError, match="bound is 0"):
        ground_mfo(Exists("x", "l", Pred("req_l", "x")), GroundingMap(LOAN, {"h": 4}))
    with pytest.raises(GroundingError, match="vip"):
        ground_mfo(Exists("x", "u0", Pred("vip", "x")), GroundingMap(SINGLE, {"u0": 1}))
    with pytest.raises(GroundingError, match="collide"):
        ground_mfstl(ServerProp("p[1]"), GroundingMap(SINGLE, {"u0": 1}))


def test_server_labels_must_not_reuse_flag_names():
    sps = Sps(SINGLE, ("s0",), (), frozenset({"s0"}), labels={"s0": frozenset({"q[2]"})})
    with pytest.raises(GroundingError):
        check_atom_clash(GroundingMap(SINGLE, {"u0": 2}), sps)
    check_atom_clash(GroundingMap(SINGLE, {"u0": 1}), sps)


def test_flags_and_instants_correspond():
    gmap = GroundingMap(SINGLE, {"u0": 3})
    atoms = frozenset({"p[1]", "q[3]"})
    instant = instant_of_flags(atoms, gmap, props={"busy"})
    assert instant.domain("u0") == {1, 2, 3}
    assert instant.holds("u0", 1, "req_u0")
    assert instant.holds("u0", 3, "ans_u0")
    assert flag_assignment(instant, gmap) == atoms
    absent = Instant(frozenset(), {"u0": {2: frozenset({"req_u0"})}})
    assert flag_assignment(absent, gmap) == {"p[2]"}


def test_at_most_one_high_request_counts_pending_flags():
    gmap = GroundingMap(LOAN, {"h": 8})
    grounded = ground_mfo(AT_MOST_ONE_HIGH, gmap)
    for bits in range(2 ** 8):
        pending = {f"p0[{j + 1}]" for j in range(8) if bits >> j & 1}
        assert ltl.eval_propositional(grounded, pending) == (len(pending) <= 1)


@pytest.mark.parametrize("size", [1, 2, 3, 4])
@pytest.mark.parametrize("sentence", [SOME_REQUEST, SOME_ANSWER, AT_MOST_ONE_HIGH, HIGH_EXCLUDES_LOW])
def test_grounding_is_adequate_exhaustively(sentence, size):
    alphabet = SINGLE if sentence in (SOME_REQUEST, SOME_ANSWER) else LOAN
    gmap = GroundingMap(alphabet, {u: size for u in alphabet.types})
    assert adequacy_mismatches(sentence, gmap) == []


def test_flag_assignments_respect_the_exclusion():
    gmap = GroundingMap(SINGLE, {"u0": 2})
    assignments = list(flag_assignments(gmap, ["u0"]))
    assert len(assignments) == 9
    assert all(not ({"p[1]", "q[1]"} <= a or {"p[2]", "q[2]"} <= a) for a in assignments)


@pytest.mark.slow
def test_grounding_is_adequate_on_random_sentences():
    rng = random.Random(20240613)
    for k in range(500):
        sentence = random_sentence(rng, SINGLE)
        gmap = GroundingMap(SINGLE, {"u0": rng.randint(1, 4)})
        assert adequacy_mismatches(sentence, gmap) == [], f"sentence #{k}: {sentence}"


@pytest.mark.slow
def test_grounding_is_adequate_on_random_two_type_sentences():
    rng = random.Random(11)
    alphabet = ServiceAlphabet(("h", "l"))
    for k in range(150):
        sentence = random_sentence(rng, alphabet)
        gmap = GroundingMap(alphabet, {"h": 2, "l": 2})
        assert adequacy_mismatches(sentence, gmap) == [], f"sentence #{k}: {sentence}"


def test_sampled_flag_assignments_stay_in_the_exclusion_space():
    gmap = GroundingMap(SINGLE, {"u0": 8})
    assignments = list(sampled_flag_assignments(gmap, ["u0"], random.Random(1), 50))
    assert len(assignments) == 50
    assert all(not {f"p[{j}]", f"q[{j}]"} <= a for a in assignments for j in range(1, 9))
    assert len(set(assignments)) > 1


@pytest.mark.parametrize("sentence", [SOME_REQUEST, SOME_ANSWER, AT_MOST_ONE_HIGH, HIGH_EXCLUDES_LOW])
def test_grounding_is_adequate_on_sampled_assignments_at_eight(sentence):
    alphabet = SINGLE if sentence in (SOME_REQUEST, SOME_ANSWER) else LOAN
    gmap = GroundingMap(alphabet, {u: 8 for u in alphabet.types})
    assert adequacy_mismatches(sentence, gmap, random.Random(8), samples=300) == []


@pytest.mark.slow
def test_grounding_is_adequate_on_random_sentences_at_eight():
    rng = random.Random(20240614)
    for k in range(200):
        sentence = random_sentence(rng, SINGLE)
        gmap = GroundingMap(SINGLE, {"u0": 8})
        assert adequacy_mismatches(sentence, gmap, rng, samples=100) == [], f"sentence #{k}: {sentence}"
