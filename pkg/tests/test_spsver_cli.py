"""Command-line tests: every subcommand runs in-process through run_cli."""

import json

import config
import pytest
from evaluation._pipeline import FIXTURES_DIR, REPO_ROOT, run_cli
from jsonschema import Draft202012Validator

REQUEST_ANSWER = FIXTURES_DIR / "request_answer" / "request_answer.spsml"
REQUEST_ANSWER_MODEL = FIXTURES_DIR / "request_answer" / "request_answer.sps"
GOLDEN = FIXTURES_DIR / "golden"
LOAN_DIR = FIXTURES_DIR / "loan_approval"
LOAN = LOAN_DIR / "loan.sps"


def test_bound():
    assert run_cli(["bound", REQUEST_ANSWER]) == (0, "u0: r=1 n=4\n", "")


def test_bound_of_a_model_with_a_separate_formula():
    code, out, _ = run_cli(["bound", LOAN, "--spec", LOAN_DIR / "exactly_one_high.mfstl"])
    assert code == 0
    assert out.splitlines() == ["h: r=2 n=8", "l: r=0 n=0", "m: r=0 n=0"]


def test_ground_in_both_styles():
    code, out, _ = run_cli(["ground", REQUEST_ANSWER])
    assert code == 0
    assert out.strip() == (GOLDEN / "request_answer.ltl").read_text(encoding="utf-8").strip()
    code, out, _ = run_cli(["ground", REQUEST_ANSWER, "--style", "smv"])
    assert out == "G ( (p[1] | p[2] | p[3] | p[4]) -> X ( q[1] | q[2] | q[3] | q[4] ) )\n"


def test_ground_over_the_short_domain(monkeypatch):
    monkeypatch.setattr(config, "GROUNDING_DOMAIN", "prose")
    assert run_cli(["ground", REQUEST_ANSWER])[1] == "G ((p[1]) -> (X (q[1])))\n"


def test_check_reports_a_violation_with_its_counterexample():
    code, out, _ = run_cli(["check", REQUEST_ANSWER, "--at-bound", "block"])
    assert code == 1
    lines = out.splitlines()
    assert lines[:3] == [
        "verdict: violated",
        "bounds: u0: r=1 n=4",
        "structure: 9 states, 15 transitions (block at bound)",
    ]
    assert lines[3].startswith("counterexample: stem ")


def test_check_json_matches_the_schema():
    code, out, _ = run_cli(["check", REQUEST_ANSWER, "--format", "json", "--at-bound", "freeze"])
    assert code == 1
    payload = json.loads(out)
    schema = json.loads((REPO_ROOT / "schema" / "verdict-v1.schema.json").read_text(encoding="utf-8"))
    assert list(Draft202012Validator(schema).iter_errors(payload)) == []
    assert payload["verdict"] == "violated"
    assert payload["at_bound"] == "freeze"
    assert payload["bounds"] == {"u0": {"r": 1, "n": 4}}
    assert payload["steps"][0]["action"] is None
    assert [step["action"] for step in payload["steps"][1:3]] == ["req(u0)", "req(u0)"]
    assert payload["steps"][2]["counters"] == {"u0": 2}


def test_check_with_the_oracle():
    code, out, _ = run_cli(["check", REQUEST_ANSWER, "--oracle"])
    assert code == 1
    assert out.startswith("verdict: violated\n")


def test_check_a_property_that_holds():
    code, out, _ = run_cli(["check", LOAN, "--spec", LOAN_DIR / "no_pending_initially.mfstl"])
    assert code == 0
    assert out.splitlines()[0] == "verdict: holds"


def test_emit_smv_to_files(tmp_path):
    output, manifest = tmp_path / "ra.smv", tmp_path / "ra.json"
    code, out, _ = run_cli(["emit-smv", REQUEST_ANSWER, "-o", output, "--manifest", manifest])
    assert (code, out) == (0, "")
    assert output.read_text(encoding="utf-8") == (GOLDEN / "request_answer.smv").read_text(encoding="utf-8")
    assert json.loads(manifest.read_text(encoding="utf-8"))["encoding"]["completion"] == "stay-put"


def test_emit_smv_to_stdout():
    code, out, _ = run_cli(["emit-smv", FIXTURES_DIR / "request_answer" / "request_answer_printed.spsml"])
    assert code == 0
    assert out == (GOLDEN / "request_answer_printed.smv").read_text(encoding="utf-8")


def test_expand_dumps_the_structure():
    code, out, _ = run_cli(["expand", REQUEST_ANSWER, "--at-bound", "block"])
    assert code == 0
    assert out.splitlines()[0] == "*S0: s0 <0> flags[] labels[]"


def test_simulate_prints_runs_and_acceptance():
    code, out, _ = run_cli(["simulate", LOAN, "--word", "req(h), ans(h)"])
    assert code == 0
    assert out.splitlines() == [
        "(idle, h={}, l={}, m={}) -req(h)-> (review_h, h={1}, l={}, m={}) -ans(h)-> (idle, h={}, l={}, m={})",
        "accepted: yes",
    ]
    code, out, _ = run_cli(["simulate", LOAN, "--word", "ans(h)"])
    assert (code, out) == (1, "no run for the word (1 actions)\n")


def test_reach_and_witness():
    code, out, _ = run_cli(["reach", LOAN, "--depth", "1"])
    assert code == 0
    assert out.splitlines() == [
        "(idle, h={}, l={}, m={})",
        "(review_h, h={1}, l={}, m={})",
        "(review_l, h={}, l={1}, m={})",
        "(review_m, h={}, l={}, m={1})",
    ]
    assert run_cli(["witness", LOAN, "--depth", "4"]) == (0, "(empty word)\n", "")


def test_witness_without_final_states_is_an_input_error():
    code, _, err = run_cli(["witness", REQUEST_ANSWER_MODEL, "--depth", "3"])
    assert code == 2
    assert "final states" in err


@pytest.mark.parametrize("argv, fragment", [
    (["bound", LOAN_DIR / "matched_answer.mfstl"], "under a temporal modality"),
    (["check", LOAN, "--spec", LOAN_DIR / "high_excludes_low.mfstl"], "bound 0: m"),
    (["check", LOAN_DIR / "exactly_one_high.mfstl"], "needs a model"),
    (["bound", LOAN_DIR / "exactly_one_high.mfstl", "--spec", LOAN_DIR / "at_most_one_high.mfstl"], "--spec needs"),
    (["reach", REQUEST_ANSWER_MODEL, "--depth", "-1"], "non-negative"),
])
def test_input_errors_exit_2(argv, fragment):
    code, _, err = run_cli(argv)
    assert code == 2
    assert fragment in err


def test_parse_errors_are_reported_with_their_position(tmp_path):
    model = tmp_path / "broken.sps"
    model.write_text("types h;\nstates idle;\ninit idel;\n", encoding="utf-8")
    code, _, err = run_cli(["reach", model, "--depth", "1"])
    assert code == 2
    assert f"{model}:3:6: error: undeclared state idel; did you mean idle?" in err


def test_unknown_suffix_is_an_input_error(tmp_path):
    other = tmp_path / "model.txt"
    other.write_text("types h;\n", encoding="utf-8")
    assert run_cli(["reach", other, "--depth", "1"])[0] == 2


def test_capacity_exceeded_exits_3(monkeypatch):
    monkeypatch.setattr(config, "MAX_STATES", 3)
    code, _, err = run_cli(["check", REQUEST_ANSWER])
    assert code == 3
    assert "capacity exceeded" in err
