"""
evaluation/harness.py

Run the acceptance criteria of the spsver toolchain over fixtures/ and
print/store a report.

  1  bound         `bound` on the request/answer fixture prints u0: r=1 n=4
  2  grounding     (E x)p(x) with n=4 grounds to the four-way disjunction
  3  smv-golden    emit-smv reproduces the golden .smv files byte for byte
  4  oracle        check agrees with the brute-force lasso oracle
  5  adequacy      client sentences agree with their groundings
  6  expansion     structure invariants and simulation agreement
  7  corpus        the loan-approval formulas parse, type-check and ground
  8  determinism   repeated CLI runs give identical output

Usage (from repo root):
    python -m evaluation.harness
    python -m evaluation.harness --repeat 10 --samples 500 --output report.json
"""

from __future__ import annotations

import argparse
import json
import logging
import random
import sys
import time
from pathlib import Path

from evaluation._pipeline import (
    FIXTURES_DIR,
    bounded_expansion,
    grounding,
    load_combined,
    load_formula,
    load_model,
    ltl,
    ltl_checker,
    mfstl,
    run_cli,
    smv_backend,
    smv_syntax,
    sps_model,
)
from evaluation.properties import (
    adequacy_mismatches,
    invariant_violations,
    random_sentence,
    simulation_mismatches,
)

logger = logging.getLogger(__name__)

# Corpus sentences are checked on domains of this size per type; adequacy
# does not depend on the size, and the enumeration grows as 3^(types·size).
CORPUS_DOMAIN = 2
# Random sentences: exhaustive up to EXHAUSTIVE_DOMAIN, sampled assignments at SAMPLED_DOMAIN.
EXHAUSTIVE_DOMAIN = 4
SAMPLED_DOMAIN = 8
SIMULATION_LENGTH = 6
EXPECTED_BOUND = "u0: r=1 n=4\n"
EXPECTED_DISJUNCTION = "(p[1]) | (p[2]) | (p[3]) | (p[4])"
CORPUS_FORMULAS = (
    "no_pending_initially",
    "low_answered_next",
    "high_excludes_low",
    "every_type_pending",
    "high_excludes_medium_low",
    "exactly_one_high",
    "at_most_one_high",
    "high_count_stabilizes",
)
EXPECTED_HIGH_BOUNDS = {"exactly_one_high": 8, "at_most_one_high": 8, "high_count_stabilizes": 12}
INEXPRESSIBLE = "matched_answer"
FREE_VARIABLE_MESSAGE = "under a temporal modality"


class Fixtures:
    def __init__(self, root: Path):
        self.root = Path(root)
        self.request_answer = self.root / "request_answer" / "request_answer.spsml"
        self.request_answer_printed = self.root / "request_answer" / "request_answer_printed.spsml"
        self.loan = self.root / "loan_approval" / "loan.sps"
        self.golden = self.root / "golden"

    def loan_formula(self, name: str) -> Path:
        return self.root / "loan_approval" / f"{name}.mfstl"


# ── criteria ─────────────────────────────────────────────────────────────────

def criterion_bound(fx: Fixtures, args) -> list[str]:
    code, out, _ = run_cli(["bound", fx.request_answer])
    if code != 0 or out != EXPECTED_BOUND:
        return [f"bound printed {out!r} with exit {code}; expected {EXPECTED_BOUND!r}"]
    return []


def criterion_grounding(fx: Fixtures, args) -> list[str]:
    alphabet = sps_model.ServiceAlphabet(("u0",))
    sentence = mfstl.Exists("x", "u0", mfstl.Pred("req_u0", "x"))
    gmap = grounding.GroundingMap(alphabet, {"u0": 4})
    rendered = smv_backend.render_ltl(grounding.ground_mfo(sentence, gmap))
    if rendered != EXPECTED_DISJUNCTION:
        return [f"grounded to {rendered!r}; expected {EXPECTED_DISJUNCTION!r}"]
    return []


def criterion_smv_golden(fx: Fixtures, args) -> list[str]:
    problems = []
    for source in (fx.request_answer, fx.request_answer_printed):
        golden = fx.golden / (source.stem + ".smv")
        code, out, _ = run_cli(["emit-smv", source])
        if code != 0:
            problems.append(f"emit-smv {source.name} exited {code}")
            continue
        if out != golden.read_text(encoding="utf-8"):
            problems.append(f"emit-smv {source.name} differs from {golden.name}")
        problems += [f"{source.name}: {issue}" for issue in smv_syntax.check_smv(out)]
    return problems


def _pipeline(spec, at_bound: str = "block"):
    profile = mfstl.bound_profile(spec.formula, spec.sps.alphabet)
    grounded = grounding.ground_mfstl(spec.formula, profile)
    structure = bounded_expansion.expand(spec.sps, profile, at_bound)
    return profile, grounded, structure


def criterion_oracle(fx: Fixtures, args) -> list[str]:
    problems = []
    for source in (fx.request_answer, fx.request_answer_printed):
        _, grounded, structure = _pipeline(load_combined(source))
        verdict = ltl_checker.check(structure, grounded)
        oracle = ltl_checker.brute_force_check(structure, grounded)
        if verdict.holds != oracle.holds:
            problems.append(f"{source.name}: check says holds={verdict.holds}, oracle says holds={oracle.holds}")
            continue
        if verdict.holds:
            problems.append(f"{source.name}: expected a violation")
            continue
        for name, found in (("check", verdict), ("oracle", oracle)):
            states, loop_start = found.counterexample.path()
            labels = [structure.label(state) for state in states]
            if ltl.eval_lasso(grounded, labels, loop_start):
                problems.append(f"{source.name}: {name} counterexample satisfies the formula")
    spec = load_combined(fx.request_answer)
    _, grounded, structure = _pipeline(spec)
    requests = (sps_model.Action.req("u0"),) * 2
    for name, found in (
        ("check", ltl_checker.check(structure, grounded)),
        ("oracle", ltl_checker.brute_force_check(structure, grounded)),
    ):
        if found.counterexample is None or found.counterexample.actions()[:2] != requests:
            problems.append(f"{fx.request_answer.name}: {name} counterexample does not start with two requests")
    return problems


def _corpus_sentences(fx: Fixtures):
    loan = load_model(fx.loan)
    for name in CORPUS_FORMULAS:
        formula = load_formula(fx.loan_formula(name), loan.alphabet)
        for sentence in mfstl.mfo_sentences(formula):
            yield name, loan.alphabet, sentence
    spec = load_combined(fx.request_answer)
    for sentence in mfstl.mfo_sentences(spec.formula):
        yield fx.request_answer.name, spec.sps.alphabet, sentence


def criterion_adequacy(fx: Fixtures, args) -> list[str]:
    problems = []
    seen = set()
    for name, alphabet, sentence in _corpus_sentences(fx):
        if sentence in seen:
            continue
        seen.add(sentence)
        gmap = grounding.GroundingMap(alphabet, {u: CORPUS_DOMAIN for u in alphabet.types})
        if adequacy_mismatches(sentence, gmap):
            problems.append(f"{name}: grounding disagrees with the sentence")
        wide = grounding.GroundingMap(alphabet, {u: SAMPLED_DOMAIN for u in alphabet.types})
        if adequacy_mismatches(sentence, wide, random.Random(args.seed)):
            problems.append(f"{name}: grounding disagrees with the sentence at domain {SAMPLED_DOMAIN}")
    rng = random.Random(args.seed)
    alphabet = sps_model.ServiceAlphabet(("u0",))
    for k in range(args.samples):
        sentence = random_sentence(rng, alphabet)
        size = rng.choice((*range(1, EXHAUSTIVE_DOMAIN + 1), SAMPLED_DOMAIN))
        gmap = grounding.GroundingMap(alphabet, {"u0": size})
        if adequacy_mismatches(sentence, gmap, rng if size > EXHAUSTIVE_DOMAIN else None):
            problems.append(f"random sentence #{k} (seed {args.seed}) disagrees with its grounding")
    return problems


def _expansion_fixtures(fx: Fixtures):
    for source in (fx.request_answer, fx.request_answer_printed):
        spec = load_combined(source)
        yield source.name, spec.sps, mfstl.bound_profile(spec.formula, spec.sps.alphabet)
    loan = load_model(fx.loan)
    # Every loan client type has to be quantified for the expansion to count it.
    formula = load_formula(fx.loan_formula("every_type_pending"), loan.alphabet)
    yield fx.loan.name, loan, mfstl.bound_profile(formula, loan.alphabet)


def criterion_expansion(fx: Fixtures, args) -> list[str]:
    problems = []
    for name, sps, profile in _expansion_fixtures(fx):
        for at_bound in bounded_expansion.AT_BOUND_CHOICES:
            structure = bounded_expansion.expand(sps, profile, at_bound)
            problems += [f"{name} ({at_bound}): {p}" for p in invariant_violations(structure)]
        block = bounded_expansion.expand(sps, profile, "block")
        problems += [f"{name}: {m}" for m in simulation_mismatches(sps, block, SIMULATION_LENGTH)]
    return problems


def criterion_corpus(fx: Fixtures, args) -> list[str]:
    problems = []
    loan = load_model(fx.loan)
    for name in CORPUS_FORMULAS:
        try:
            formula = load_formula(fx.loan_formula(name), loan.alphabet)
        except ValueError as exc:
            problems.append(f"{name}: {exc}")
            continue
        profile = mfstl.bound_profile(formula, loan.alphabet)
        expected = EXPECTED_HIGH_BOUNDS.get(name)
        if expected is not None and profile.n("h") != expected:
            problems.append(f"{name}: n_h={profile.n('h')}, expected {expected}")
        grounded = grounding.ground_mfstl(formula, profile)
        stray = ltl.atoms(grounded) - grounding.GroundingMap.for_profile(profile).atoms()
        if stray:
            problems.append(f"{name}: grounding mentions unknown atoms {sorted(stray)}")
    code, _, err = run_cli(["bound", fx.loan_formula(INEXPRESSIBLE)])
    if code != 2 or FREE_VARIABLE_MESSAGE not in err:
        problems.append(f"{INEXPRESSIBLE}: expected the free-variable diagnostic, got exit {code}")
    return problems


def criterion_determinism(fx: Fixtures, args) -> list[str]:
    problems = []
    for command in (["check", fx.request_answer], ["ground", fx.request_answer], ["emit-smv", fx.request_answer]):
        outputs = {run_cli(command)[1] for _ in range(args.repeat)}
        if len(outputs) != 1:
            problems.append(f"{command[0]}: {len(outputs)} distinct outputs over {args.repeat} runs")
    return problems


CRITERIA = (
    (1, "bound", criterion_bound),
    (2, "grounding", criterion_grounding),
    (3, "smv-golden", criterion_smv_golden),
    (4, "oracle", criterion_oracle),
    (5, "adequacy", criterion_adequacy),
    (6, "expansion", criterion_expansion),
    (7, "corpus", criterion_corpus),
    (8, "determinism", criterion_determinism),
)


def run_criteria(fixtures: Path, args, only: set[int] | None = None) -> list[dict]:
    fx = Fixtures(fixtures)
    results = []
    for number, name, criterion in CRITERIA:
        if only and number not in only:
            continue
        started = time.perf_counter()
        try:
            problems = criterion(fx, args)
        except Exception as exc:  # a crashing criterion is a failing one
            logger.exception("criterion %d crashed", number)
            problems = [f"{type(exc).__name__}: {exc}"]
        results.append({
            "criterion": number,
            "name": name,
            "passed": not problems,
            "problems": problems,
            "seconds": round(time.perf_counter() - started, 3),
        })
    return results


def format_report(results: list[dict]) -> str:
    lines = []
    for r in results:
        mark = "PASS" if r["passed"] else "FAIL"
        lines.append(f"[{mark}] {r['criterion']} {r['name']:<12} {r['seconds']:>8.3f}s")
        for problem in r["problems"][:10]:
            lines.append(f"       {problem}")
        if len(r["problems"]) > 10:
            lines.append(f"       … and {len(r['problems']) - 10} more")
    passed = sum(r["passed"] for r in results)
    lines.append(f"{passed}/{len(results)} criteria passed")
    return "\n".join(lines)


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[1].strip())
    ap.add_argument("--fixtures", default=str(FIXTURES_DIR))
    ap.add_argument("--repeat", type=int, default=10, help="CLI repetitions for the determinism criterion")
    ap.add_argument("--samples", type=int, default=500, help="random sentences for the adequacy criterion")
    ap.add_argument("--seed", type=int, default=20240613)
    ap.add_argument("--only", type=int, action="append", help="run only this criterion (repeatable)")
    ap.add_argument("--output", default=None, help="write full JSON results to this path")
    args = ap.parse_args(argv)
    if args.repeat < 1:
        ap.error("--repeat must be at least 1")

    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    if not Path(args.fixtures).is_dir():
        print(f"No fixtures found in {args.fixtures}", file=sys.stderr)
        return 2

    results = run_criteria(Path(args.fixtures), args, set(args.only or ()))
    print(format_report(results))
    if args.output:
        Path(args.output).write_text(
            json.dumps({"criteria": results}, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
        )
    return 0 if all(r["passed"] for r in results) else 1


if __name__ == "__main__":
    raise SystemExit(main())
