#!/usr/bin/env python3
"""
smv_backend.py
──────────────
SMV text for an SPS, its bound profile and a grounded LTL formula.

Encoding
  * the action arrives on an input variable ``ip``: a boolean when the
    alphabet has one client type and the SPS has no tau (TRUE = request,
    FALSE = answer), otherwise an enumeration over tau/req_<u>/ans_<u>;
  * ``loc`` is the server state and follows δ; inputs without a δ-transition
    leave ``loc`` where it is (stay-put completion);
  * per client type a counter ``ctr`` in 0..n and flag arrays ``p``/``q``
    of size n (suffixed with the type index when there are several types);
  * a request at a full counter and an answer at an empty one change
    neither counter nor p-flags (freeze at bound); q-flags last one instant.

The manifest records these choices next to every emitted variable.
"""
from __future__ import annotations

import logging
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

import ltl
from grounding import GroundingMap
from ltl import LtlFormula
from mfstl import BoundProfile
from sps_model import TAU, Action, ActionKind, Sps, Transition

logger = logging.getLogger(__name__)

INDENT = " " * 8


class SmvEmissionError(ValueError):
    """The bound profile cannot encode a client type the SPS uses."""


@dataclass(frozen=True)
class SmvDocument:
    text: str
    manifest: Mapping[str, dict] = field(default_factory=dict)
    discipline: str = "freeze"
    completion: str = "stay-put"


# ── rendering ────────────────────────────────────────────────────────────────

_UNARY = {ltl.Not: "!", ltl.Next: "X", ltl.Finally: "F", ltl.Globally: "G"}
_BINARY = {ltl.Implies: "->", ltl.Until: "U", ltl.Release: "V"}
_NARY = {ltl.And: "&", ltl.Or: "|"}


def _flatten(formula: ltl.And | ltl.Or) -> list[LtlFormula]:
    operands: list[LtlFormula] = []
    for operand in formula.operands:
        if type(operand) is type(formula):
            operands.extend(_flatten(operand))
        else:
            operands.append(operand)
    return operands


def _leaf(formula: LtlFormula) -> str | None:
    if isinstance(formula, ltl.Const):
        return "TRUE" if formula.value else "FALSE"
    if isinstance(formula, ltl.Atom):
        return formula.name
    return None


def _canonical(formula: LtlFormula) -> str:
    leaf = _leaf(formula)
    if leaf is not None:
        return leaf
    if type(formula) in _UNARY:
        return f"{_UNARY[type(formula)]} ({_canonical(formula.body)})"
    if type(formula) in _BINARY:
        return f"({_canonical(formula.left)}) {_BINARY[type(formula)]} ({_canonical(formula.right)})"
    if type(formula) in _NARY:
        joiner = f" {_NARY[type(formula)]} "
        return joiner.join(f"({_canonical(op)})" for op in _flatten(formula))
    raise TypeError(f"not an LTL formula: {formula!r}")


def _bare(formula: LtlFormula) -> bool:
    return _leaf(formula) is not None or type(formula) in _UNARY


def _listing(formula: LtlFormula) -> str:
    leaf = _leaf(formula)
    if leaf is not None:
        return leaf
    if type(formula) in _UNARY:
        body = _listing(formula.body)
        if _bare(formula.body):
            return f"{_UNARY[type(formula)]} {body}"
        return f"{_UNARY[type(formula)]} ( {body} )"

    def operand(child: LtlFormula) -> str:
        return _listing(child) if _bare(child) else f"({_listing(child)})"

    if type(formula) in _BINARY:
        return f"{operand(formula.left)} {_BINARY[type(formula)]} {operand(formula.right)}"
    if type(formula) in _NARY:
        joiner = f" {_NARY[type(formula)]} "
        return joiner.join(operand(op) for op in _flatten(formula))
    raise TypeError(f"not an LTL formula: {formula!r}")


def render_ltl(formula: LtlFormula, style: str = "canonical") -> str:
    """ASCII rendering.

    ``canonical`` parenthesises every operand: ``G ((a) -> (X (b)))``.
    ``smv`` is the LTLSPEC layout: ``G ( (p[1] | p[2]) -> X ( q[1] | q[2] ) )``.
    """
    if style == "canonical":
        return _canonical(formula)
    if style == "smv":
        return _listing(formula)
    raise ValueError(f"unknown rendering style {style!r}")


# ── emission ─────────────────────────────────────────────────────────────────

def boolean_input(sps: Sps) -> bool:
    return len(sps.alphabet) == 1 and not sps.uses_tau()


def input_actions(sps: Sps, bounds: BoundProfile) -> tuple[Action, ...]:
    """Values of ``ip``: tau when the SPS uses it, then req/ans of every counted type."""
    used = sps.used_types()
    unbounded = [u for u in used if bounds.n(u) == 0]
    if unbounded:
        raise SmvEmissionError(
            f"client types used by the SPS have bound 0: {', '.join(unbounded)}"
        )
    actions: list[Action] = [TAU] if sps.uses_tau() else []
    for u in sps.alphabet.types:
        if bounds.n(u) > 0:
            actions += [Action.req(u), Action.ans(u)]
    return tuple(actions)


def stay_put_completion(sps: Sps, actions: Iterable[Action]) -> Sps:
    """δ plus a self-loop for every (state, action) pair δ leaves undefined."""
    extra = [
        Transition(state, action, state)
        for state in sps.states
        for action in actions
        if not any(t.action == action for t in sps.outgoing(state))
    ]
    return Sps(sps.alphabet, sps.states, sps.transitions + tuple(extra), sps.initial, sps.final, sps.labels)


class _Emitter:
    def __init__(self, sps: Sps, bounds: BoundProfile):
        self.sps = sps
        self.bounds = bounds
        self.gmap = GroundingMap.for_profile(bounds)
        self.actions = input_actions(sps, bounds)
        self.boolean = boolean_input(sps)
        self.counted = [u for u in sps.alphabet.types if bounds.n(u) > 0]
        self.lines: list[str] = []
        self.manifest: dict[str, dict] = {}

    def ip(self, action: Action) -> str:
        if self.boolean:
            return "ip=TRUE" if action.kind is ActionKind.REQ else "ip=FALSE"
        if action.kind is ActionKind.TAU:
            return "ip=tau"
        return f"ip={action.kind.name.lower()}_{action.client_type}"

    def ctr(self, u: str) -> str:
        return "ctr" + self.gmap.prefix(u)

    def case(self, target: str, rows: list[tuple[str, str]]) -> None:
        width = max(len(guard) for guard, _ in rows)
        self.lines.append(f" next({target}):= case")
        for guard, value in rows:
            self.lines.append(f"{INDENT}{guard.ljust(width)} : {value};")
        self.lines.append(" esac;")

    def declarations(self) -> None:
        self.lines.append("MODULE main")
        if self.actions:
            if self.boolean:
                self.lines.append("IVAR ip : boolean;")
            else:
                values = ", ".join(self.ip(a)[len("ip="):] for a in self.actions)
                self.lines.append(f"IVAR ip : {{{values}}};")
            self.manifest["ip"] = {"role": "input", "values": [str(a) for a in self.actions]}
        self.lines.append(f"VAR loc : {{{', '.join(self.sps.states)}}};")
        self.manifest["loc"] = {"role": "server state", "values": list(self.sps.states)}
        for u in self.counted:
            n = self.bounds.n(u)
            i = self.sps.alphabet.index(u)
            prefix = self.gmap.prefix(u)
            self.lines.append(f"VAR {self.ctr(u)}: 0..{n};")
            self.lines.append(f"VAR p{prefix} : array 1..{n} of boolean;")
            self.lines.append(f"VAR q{prefix} : array 1..{n} of boolean;")
            origin = {"type": u, "type_index": i, "bound": n}
            self.manifest[self.ctr(u)] = {"role": "active client count", **origin}
            self.manifest[f"p{prefix}"] = {"role": "pending request flags", **origin}
            self.manifest[f"q{prefix}"] = {"role": "answer flags", **origin}

    def initialisation(self) -> None:
        self.lines.append("ASSIGN")
        initial = sorted(self.sps.initial, key=self.sps.states.index)
        if len(initial) == 1:
            self.lines.append(f" init(loc):={initial[0]};")
        else:
            self.lines.append(f" init(loc):={{{', '.join(initial)}}};")
        for u in self.counted:
            self.lines.append(f" init({self.ctr(u)}):=0;")
            for atom in self._flags(u, self.gmap.request_atom) + self._flags(u, self.gmap.answer_atom):
                self.lines.append(f" init({atom}):=FALSE;")

    def _flags(self, u: str, namer) -> list[str]:
        return [namer(u, j) for j in range(1, self.bounds.n(u) + 1)]

    def location(self) -> None:
        rows = []
        for state in self.sps.states:
            for action in self.actions:
                targets = [t.target for t in self.sps.outgoing(state) if t.action == action]
                if not targets or targets == [state]:
                    continue
                ordered = sorted(set(targets), key=self.sps.states.index)
                value = ordered[0] if len(ordered) == 1 else "{" + ", ".join(ordered) + "}"
                rows.append((f"loc={state} & {self.ip(action)}", value))
        if rows:
            self.case("loc", rows + [("TRUE", "loc")])
        else:
            self.lines.append(" next(loc):=loc;")

    def counters(self, u: str) -> None:
        n = self.bounds.n(u)
        ctr = self.ctr(u)
        req, ans = self.ip(Action.req(u)), self.ip(Action.ans(u))
        p, q = f"p{self.gmap.prefix(u)}", f"q{self.gmap.prefix(u)}"
        self.lines.append(f"--{ctr} counts the active clients of type {u}, from 0 to {n}.")
        self.lines.append(f"--a request at {n} and an answer at 0 leave it unchanged.")
        self.case(ctr, [
            (f"{req} & {ctr}<{n}", f"{ctr} + 1"),
            (f"{ans} & {ctr}>0", f"{ctr} - 1"),
            ("TRUE", ctr),
        ])
        self.lines.append(f"--{p}[j] is TRUE while the request held in slot j is pending.")
        for j in range(1, n + 1):
            atom = self.gmap.request_atom(u, j)
            self.case(atom, [
                (f"{atom}=FALSE & {req} & {ctr}={j - 1}", "TRUE"),
                (f"{atom}=TRUE & {ans} & {ctr}={j}", "FALSE"),
                ("TRUE", atom),
            ])
        self.lines.append(f"--{q}[j] is TRUE for the one instant after slot j is answered.")
        for j in range(1, n + 1):
            atom = self.gmap.answer_atom(u, j)
            self.case(atom, [
                (f"{atom}=FALSE & {ans} & {ctr}={j}", "TRUE"),
                (f"{atom}=TRUE", "FALSE"),
                ("TRUE", atom),
            ])

    def ltlspec(self, formula: LtlFormula) -> None:
        self.lines.append("")
        self.lines.append("LTLSPEC")
        self.lines.append(" " + render_ltl(self.localise(formula), style="smv"))

    def localise(self, formula: LtlFormula) -> LtlFormula:
        """Server propositions become disjunctions of ``loc=<state>``."""
        flags = self.gmap.atoms()

        def walk(node: LtlFormula) -> LtlFormula:
            if isinstance(node, ltl.Atom):
                if node.name in flags:
                    return node
                holders = [s for s in self.sps.states if node.name in self.sps.server_labels(s)]
                if not holders:
                    logger.warning("atom %s labels no state; emitted as FALSE", node.name)
                    return ltl.FALSE
                return ltl.disj(ltl.Atom(f"loc={s}") for s in holders)
            if isinstance(node, ltl.Const):
                return node
            if isinstance(node, (ltl.And, ltl.Or)):
                return type(node)(tuple(walk(op) for op in node.operands))
            if isinstance(node, (ltl.Implies, ltl.Until, ltl.Release)):
                return type(node)(walk(node.left), walk(node.right))
            return type(node)(walk(node.body))

        return walk(formula)


def emit_smv(sps: Sps, bounds: BoundProfile, formula: LtlFormula) -> SmvDocument:
    """SMV module for ``sps`` under ``bounds`` with ``formula`` as LTLSPEC."""
    if bounds.alphabet != sps.alphabet:
        raise SmvEmissionError(
            f"bound profile types {list(bounds.alphabet.types)} do not match the SPS types {list(sps.alphabet.types)}"
        )
    emitter = _Emitter(sps, bounds)
    emitter.declarations()
    emitter.initialisation()
    emitter.location()
    for u in emitter.counted:
        emitter.counters(u)
    emitter.ltlspec(formula)
    text = "\n".join(emitter.lines) + "\n"
    manifest = dict(emitter.manifest)
    manifest["encoding"] = {"discipline": "freeze", "completion": "stay-put"}
    logger.info("emitted SMV: %d lines", len(emitter.lines))
    return SmvDocument(text, manifest)
