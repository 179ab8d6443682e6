#!/usr/bin/env python3
"""
spsver.py
─────────
Command-line driver: parse → bound → ground → expand → check / emit SMV.

Usage (from repo root):
    python scripts/spsver.py bound fixtures/request_answer/request_answer.spsml
    python scripts/spsver.py ground fixtures/request_answer/request_answer.spsml
    python scripts/spsver.py check fixtures/request_answer/request_answer.spsml [--at-bound freeze] [--format json]
    python scripts/spsver.py check model.sps --spec property.mfstl
    python scripts/spsver.py emit-smv fixtures/request_answer/request_answer.spsml -o out.smv
    python scripts/spsver.py expand fixtures/request_answer/request_answer.spsml
    python scripts/spsver.py simulate fixtures/loan_approval/loan.sps --word "req(h),ans(h)"
    python scripts/spsver.py reach fixtures/loan_approval/loan.sps --depth 2
    python scripts/spsver.py witness fixtures/loan_approval/loan.sps --depth 4

Exit codes: 0 success / property holds, 1 property violated (or no run /
no witness), 2 input error, 3 capacity exceeded.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from jsonschema import Draft202012Validator

import config
import mfstl
from bounded_expansion import CapacityError, KripkeStructure, dump_structure, expand
from grounding import GroundingMap, ground_mfstl
from ltl_checker import Verdict, brute_force_check, check, render_counterexample
from smv_backend import emit_smv, render_ltl
from sps_model import (
    ServiceAlphabet,
    Sps,
    SpsInputError,
    accepts,
    emptiness_witness_bounded,
    format_configuration,
    parse_action,
    reachable,
    run_all,
)
from sps_parser import ParseResult, SourceFile, infer_alphabet, load_source, parse_mfstl, parse_source

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VIOLATED = 1
EXIT_INPUT = 2
EXIT_CAPACITY = 3

VERDICT_SCHEMA = Path(__file__).resolve().parent.parent / "schema" / "verdict-v1.schema.json"


class InputRejected(ValueError):
    """Parse diagnostics of severity error; already reported on stderr."""


@dataclass(frozen=True)
class Inputs:
    sps: Sps | None
    formula: mfstl.MfstlFormula | None
    alphabet: ServiceAlphabet


# ── loading ──────────────────────────────────────────────────────────────────

def _parsed(source: SourceFile, result: ParseResult):
    for diagnostic in result.diagnostics:
        print(diagnostic.render(str(source.path)), file=sys.stderr)
    if not result.ok:
        raise InputRejected(f"{source.path}: rejected")
    return result.value


def load_inputs(path: str, spec: str | None = None) -> Inputs:
    """A combined file, a model (optionally with ``--spec``), or a bare formula."""
    source = load_source(path)
    value = _parsed(source, parse_source(source))
    if source.kind == "combined":
        sps, formula = value.sps, value.formula
    elif source.kind == "sps-model":
        sps, formula = value, None
    else:
        sps, formula = None, value
    if spec is not None:
        if sps is None:
            raise SpsInputError("--spec needs a model file (.sps) as the main input")
        spec_source = load_source(spec)
        if spec_source.kind != "mfstl-spec":
            raise SpsInputError(f"--spec expects an .mfstl file; got {spec_source.path.suffix}")
        formula = _parsed(spec_source, parse_mfstl(spec_source.text, sps.alphabet))
    if sps is not None:
        alphabet = sps.alphabet
    else:
        alphabet = infer_alphabet(formula)
    return Inputs(sps, formula, alphabet)


def _need(inputs: Inputs, *, model: bool = False, formula: bool = False) -> None:
    if model and inputs.sps is None:
        raise SpsInputError("this command needs a model (.sps or .spsml)")
    if formula and inputs.formula is None:
        raise SpsInputError("this command needs a formula (.mfstl, .spsml or --spec)")


def _grounding_map(profile: mfstl.BoundProfile) -> GroundingMap:
    return GroundingMap.for_profile(profile, strict_prose=config.GROUNDING_DOMAIN == "prose")


# ── verdict payload ──────────────────────────────────────────────────────────

def verdict_payload(
    verdict: Verdict, structure: KripkeStructure, profile: mfstl.BoundProfile, at_bound: str
) -> dict:
    steps = []
    loop_start = None
    if verdict.counterexample is not None:
        lasso = verdict.counterexample
        loop_start = len(lasso.stem) - 1
        for index, (action, state) in enumerate(list(lasso.stem) + list(lasso.cycle)):
            steps.append({
                "index": index,
                "action": str(action) if action is not None else None,
                "state": state.state,
                "counters": dict(zip(profile.alphabet.types, state.counters)),
                "atoms": sorted(structure.label(state)),
            })
    return {
        "verdict": "holds" if verdict.holds else "violated",
        "bounds": profile.as_dict(),
        "at_bound": at_bound,
        "states": len(structure),
        "transitions": len(structure.transitions),
        "loop_start": loop_start,
        "steps": steps,
        "completed_deadlocks": len(verdict.completed_deadlocks),
        "unknown_atoms": sorted(verdict.unknown_atoms),
    }


def validate_payload(payload: dict) -> None:
    schema = json.loads(VERDICT_SCHEMA.read_text(encoding="utf-8"))
    errors = sorted(Draft202012Validator(schema).iter_errors(payload), key=lambda e: list(e.path))
    if errors:
        raise ValueError("verdict does not match its schema: " + "; ".join(e.message for e in errors))


# ── commands ─────────────────────────────────────────────────────────────────

def cmd_bound(args) -> int:
    inputs = load_inputs(args.file, args.spec)
    _need(inputs, formula=True)
    print(mfstl.bound_profile(inputs.formula, inputs.alphabet).describe())
    return EXIT_OK


def cmd_ground(args) -> int:
    inputs = load_inputs(args.file, args.spec)
    _need(inputs, formula=True)
    profile = mfstl.bound_profile(inputs.formula, inputs.alphabet)
    grounded = ground_mfstl(inputs.formula, _grounding_map(profile))
    print(render_ltl(grounded, args.style))
    return EXIT_OK


def _pipeline(inputs: Inputs, at_bound: str):
    profile = mfstl.bound_profile(inputs.formula, inputs.alphabet)
    grounded = ground_mfstl(inputs.formula, _grounding_map(profile))
    structure = expand(inputs.sps, profile, at_bound)
    return profile, grounded, structure


def cmd_check(args) -> int:
    inputs = load_inputs(args.file, args.spec)
    _need(inputs, model=True, formula=True)
    at_bound = args.at_bound or config.AT_BOUND
    profile, grounded, structure = _pipeline(inputs, at_bound)
    verdict = brute_force_check(structure, grounded) if args.oracle else check(structure, grounded)
    if args.format == "json":
        payload = verdict_payload(verdict, structure, profile, at_bound)
        validate_payload(payload)
        print(json.dumps(payload, indent=2, ensure_ascii=False))
    else:
        print(f"verdict: {'holds' if verdict.holds else 'violated'}")
        print("bounds: " + "; ".join(profile.describe().splitlines()))
        print(f"structure: {len(structure)} states, {len(structure.transitions)} transitions ({at_bound} at bound)")
        if not verdict.holds:
            sys.stdout.write(render_counterexample(verdict, structure))
    return EXIT_OK if verdict.holds else EXIT_VIOLATED


def cmd_emit_smv(args) -> int:
    inputs = load_inputs(args.file, args.spec)
    _need(inputs, model=True, formula=True)
    profile = mfstl.bound_profile(inputs.formula, inputs.alphabet)
    grounded = ground_mfstl(inputs.formula, _grounding_map(profile))
    document = emit_smv(inputs.sps, profile, grounded)
    if args.output:
        Path(args.output).write_text(document.text, encoding="utf-8")
        logger.info("wrote %s", args.output)
    else:
        sys.stdout.write(document.text)
    if args.manifest:
        Path(args.manifest).write_text(json.dumps(document.manifest, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_expand(args) -> int:
    inputs = load_inputs(args.file, args.spec)
    _need(inputs, model=True, formula=True)
    _, _, structure = _pipeline(inputs, args.at_bound or config.AT_BOUND)
    sys.stdout.write(dump_structure(structure))
    return EXIT_OK


def parse_word(text: str) -> tuple:
    return tuple(parse_action(token) for token in text.split(",") if token.strip())


def cmd_simulate(args) -> int:
    inputs = load_inputs(args.file)
    _need(inputs, model=True)
    sps = inputs.sps
    word = parse_word(args.word)
    runs = sorted(run_all(sps, word), key=lambda run: [c.sort_key() for c in run.configs])
    if not runs:
        print(f"no run for the word ({len(word)} actions)")
        return EXIT_VIOLATED
    for run in runs:
        parts = [format_configuration(sps, run.configs[0])]
        for action, config_ in zip(run.word, run.configs[1:]):
            parts.append(f"-{action}-> {format_configuration(sps, config_)}")
        print(" ".join(parts))
    if sps.final is not None:
        print(f"accepted: {'yes' if accepts(sps, word) else 'no'}")
    return EXIT_OK


def cmd_reach(args) -> int:
    inputs = load_inputs(args.file)
    _need(inputs, model=True)
    for configuration in reachable(inputs.sps, args.depth):
        print(format_configuration(inputs.sps, configuration))
    return EXIT_OK


def cmd_witness(args) -> int:
    inputs = load_inputs(args.file)
    _need(inputs, model=True)
    word = emptiness_witness_bounded(inputs.sps, args.depth)
    if word is None:
        print(f"no accepted word of length <= {args.depth}")
        return EXIT_VIOLATED
    print(",".join(str(a) for a in word) if word else "(empty word)")
    return EXIT_OK


# ── CLI ──────────────────────────────────────────────────────────────────────

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spsver", description=__doc__.split("\n\n")[0].splitlines()[-1])
    sub = ap.add_subparsers(dest="command", required=True)

    def command(name: str, handler, help_text: str, *, spec: bool = True) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("file", help=".sps, .mfstl or .spsml input")
        if spec:
            p.add_argument("--spec", help=".mfstl formula for an .sps model")
        p.set_defaults(handler=handler)
        return p

    command("bound", cmd_bound, "print the bound profile")
    p = command("ground", cmd_ground, "print the grounded LTL formula")
    p.add_argument("--style", choices=("canonical", "smv"), default="canonical")
    p = command("check", cmd_check, "model-check the formula on the model")
    p.add_argument("--at-bound", choices=config.AT_BOUND_CHOICES)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--oracle", action="store_true", help="use the brute-force lasso oracle")
    p = command("emit-smv", cmd_emit_smv, "write the SMV translation")
    p.add_argument("-o", "--output", help="output .smv path (default stdout)")
    p.add_argument("--manifest", help="write the variable manifest as JSON")
    p = command("expand", cmd_expand, "print the bounded Kripke structure")
    p.add_argument("--at-bound", choices=config.AT_BOUND_CHOICES)
    p = command("simulate", cmd_simulate, "run a word on the model", spec=False)
    p.add_argument("--word", required=True, help='comma-separated actions, e.g. "req(h),ans(h)"')
    p = command("reach", cmd_reach, "reachable configurations", spec=False)
    p.add_argument("--depth", type=int, required=True)
    p = command("witness", cmd_witness, "shortest accepted word", spec=False)
    p.add_argument("--depth", type=int, required=True)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=config.LOG_LEVEL, format="%(levelname)s: %(message)s")
    try:
        return args.handler(args)
    except CapacityError as exc:
        print(f"capacity exceeded: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except InputRejected:
        return EXIT_INPUT
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
