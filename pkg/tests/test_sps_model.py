"""Tests for scripts/sps_model.py: alphabet, actions, configurations, runs."""

import pytest
from sps_model import (
    TAU,
    Action,
    Configuration,
    ServiceAlphabet,
    Sps,
    SpsConfigurationError,
    SpsInputError,
    Transition,
    accepts,
    emptiness_witness_bounded,
    format_configuration,
    parse_action,
    reachable,
    run_all,
    step,
)

REQ, ANS = Action.req("u0"), Action.ans("u0")


def _request_answer(final=None):
    return Sps(
        alphabet=ServiceAlphabet(("u0",)),
        states=("s0", "s1"),
        transitions=(
            Transition("s0", REQ, "s1"),
            Transition("s0", ANS, "s0"),
            Transition("s1", REQ, "s1"),
            Transition("s1", ANS, "s0"),
        ),
        initial=frozenset({"s0"}),
        final=final,
    )


def _config(state, *active):
    return Configuration(state, tuple(frozenset(a) for a in active))


def test_alphabet_rejects_duplicates_and_unknown_types():
    with pytest.raises(SpsInputError):
        ServiceAlphabet(("h", "h"))
    with pytest.raises(SpsInputError):
        ServiceAlphabet(())
    alphabet = ServiceAlphabet(("h", "l"))
    assert alphabet.index("l") == 1
    assert "m" not in alphabet
    with pytest.raises(SpsInputError):
        alphabet.index("m")


def test_actions_print_and_parse_back():
    for action in (REQ, ANS, TAU):
        assert parse_action(str(action)) == action
    assert parse_action(" req( h ) ") == Action.req("h")
    with pytest.raises(SpsInputError):
        parse_action("serve(h)")
    with pytest.raises(SpsInputError):
        Action.req(None)


def test_sps_validation_names_the_problem():
    with pytest.raises(SpsInputError, match="initial state s9"):
        Sps(ServiceAlphabet(("u0",)), ("s0",), (), frozenset({"s9"}))
    with pytest.raises(SpsInputError, match="unknown client type x"):
        Sps(ServiceAlphabet(("u0",)), ("s0",), (Transition("s0", Action.req("x"), "s0"),), frozenset({"s0"}))
    with pytest.raises(SpsInputError, match="at least one initial state"):
        Sps(ServiceAlphabet(("u0",)), ("s0",), (), frozenset())


def test_duplicate_transitions_collapse():
    t = Transition("s0", REQ, "s0")
    sps = Sps(ServiceAlphabet(("u0",)), ("s0",), (t, t), frozenset({"s0"}))
    assert sps.transitions == (t,)


def test_request_takes_least_free_index_and_answer_retires_least_active():
    sps = _request_answer()
    assert step(sps, _config("s0", ()), REQ) == {_config("s1", {1})}
    assert step(sps, _config("s1", {2}), REQ) == {_config("s1", {1, 2})}
    assert step(sps, _config("s1", {1, 3}), ANS) == {_config("s0", {3})}


def test_answer_without_active_clients_is_blocked():
    assert step(_request_answer(), _config("s0", ()), ANS) == frozenset()


def test_run_all_follows_the_word():
    sps = _request_answer()
    runs = run_all(sps, [REQ, REQ, ANS])
    assert len(runs) == 1
    (run,) = runs
    assert run.configs == (
        _config("s0", ()),
        _config("s1", {1}),
        _config("s1", {1, 2}),
        _config("s0", {2}),
    )


def test_run_all_branches_on_nondeterminism():
    sps = Sps(
        ServiceAlphabet(("u0",)),
        ("a", "b", "c"),
        (Transition("a", REQ, "b"), Transition("a", REQ, "c")),
        frozenset({"a"}),
    )
    ends = {run.configs[-1].state for run in run_all(sps, [REQ])}
    assert ends == {"b", "c"}
    assert run_all(sps, [REQ, REQ]) == frozenset()


def test_run_all_rejects_unknown_client_types():
    with pytest.raises(SpsInputError):
        run_all(_request_answer(), [Action.req("h")])


def test_reachable_is_breadth_first_and_depth_bounded():
    sps = _request_answer()
    assert reachable(sps, 0) == (_config("s0", ()),)
    assert reachable(sps, 2) == (_config("s0", ()), _config("s1", {1}), _config("s1", {1, 2}))
    with pytest.raises(SpsInputError):
        reachable(sps, -1)


def test_acceptance_needs_final_states():
    with pytest.raises(SpsConfigurationError):
        accepts(_request_answer(), [REQ])
    with pytest.raises(SpsConfigurationError):
        emptiness_witness_bounded(_request_answer(), 3)


def test_acceptance_and_shortest_witness():
    sps = _request_answer(final=frozenset({"s1"}))
    assert accepts(sps, [REQ])
    assert not accepts(sps, [REQ, ANS])
    assert emptiness_witness_bounded(sps, 3) == (REQ,)
    assert emptiness_witness_bounded(_request_answer(final=frozenset({"s0"})), 0) == ()


def test_witness_reports_nothing_beyond_the_depth():
    sps = Sps(
        ServiceAlphabet(("u0",)),
        ("a", "b", "c"),
        (Transition("a", REQ, "b"), Transition("b", REQ, "c")),
        frozenset({"a"}),
        final=frozenset({"c"}),
    )
    assert emptiness_witness_bounded(sps, 1) is None
    assert emptiness_witness_bounded(sps, 2) == (REQ, REQ)


def test_format_configuration():
    sps = _request_answer()
    assert format_configuration(sps, _config("s1", {2, 1})) == "(s1, u0={1,2})"
    assert format_configuration(sps, _config("s0", ())) == "(s0, u0={})"
