#!/usr/bin/env python3
"""
sps_parser.py
─────────────
Text formats of the toolchain.

  .sps    SPS models:
              types h, l;
              states idle, busy;
              init idle;
              final idle;                 # optional
              labels busy: working;       # optional, repeatable
              trans idle -req(h)-> busy;
              trans busy -ans(h)-> idle;
              trans busy -tau-> busy;

  .mfstl  MFSTL formulas:
              G((E x:h)req_h(x) -> X (E y:h)ans_h(y))
          quantifiers (E x:h) / (A x:h), the type may be left out when the
          model has a single client type; with a single type the bare
          predicates p / q stand for req_<u> / ans_<u>. Precedence, loosest
          first: ->  |  &  U  then the unary operators ! X F G and quantifiers.

  .spsml  a model followed by a line ``MFSTLSPEC`` and a formula.

``#`` starts a comment in every format. Parsers never raise on bad input:
they return a ParseResult whose diagnostics carry line/column spans.
"""
from __future__ import annotations

import logging
import re
from collections.abc import Iterable
from dataclasses import dataclass, field
from pathlib import Path

from lark import Lark, Token, Transformer, v_args
from lark.exceptions import UnexpectedCharacters, UnexpectedEOF, UnexpectedInput, UnexpectedToken, VisitError
from rapidfuzz import fuzz, process

import mfstl
from sps_model import ServiceAlphabet, Sps, SpsInputError, Transition, parse_action

logger = logging.getLogger(__name__)

SOURCE_KINDS = {".sps": "sps-model", ".mfstl": "mfstl-spec", ".spsml": "combined"}
SECTION_MARKER = "MFSTLSPEC"
DEFAULT_CLIENT_TYPE = "u0"


# ── diagnostics ──────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    line: int
    column: int
    end_line: int
    end_column: int
    message: str

    def render(self, path: str = "<input>") -> str:
        return f"{path}:{self.line}:{self.column}: {self.severity}: {self.message}"

    def shifted(self, lines: int) -> Diagnostic:
        return Diagnostic(
            self.severity, self.line + lines, self.column,
            self.end_line + lines, self.end_column, self.message,
        )


@dataclass
class ParseResult:
    value: object = None
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def errors(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity == "error"]

    @property
    def ok(self) -> bool:
        return self.value is not None and not self.errors


@dataclass(frozen=True)
class SourceFile:
    path: Path
    text: str
    kind: str


def load_source(path: str | Path) -> SourceFile:
    path = Path(path)
    kind = SOURCE_KINDS.get(path.suffix)
    if kind is None:
        raise SpsInputError(f"unknown input kind {path.suffix!r}; expected .sps, .mfstl or .spsml")
    return SourceFile(path, path.read_text(encoding="utf-8"), kind)


def _text_end(text: str) -> tuple[int, int]:
    lines = text.split("\n")
    return len(lines), len(lines[-1]) + 1


def _whole(text: str, severity: str, message: str) -> Diagnostic:
    end_line, end_column = _text_end(text)
    return Diagnostic(severity, 1, 1, end_line, end_column, message)


def _at(token: Token, severity: str, message: str) -> Diagnostic:
    return Diagnostic(
        severity, token.line, token.column,
        token.end_line or token.line, token.end_column or token.column, message,
    )


def _syntax_error(text: str, exc: UnexpectedInput) -> Diagnostic:
    if isinstance(exc, UnexpectedEOF) or exc.line < 1:
        end_line, end_column = _text_end(text)
        return Diagnostic("error", end_line, end_column, end_line, end_column, "unexpected end of input")
    if isinstance(exc, UnexpectedToken):
        expected = ", ".join(sorted(exc.expected)[:6])
        return _at(exc.token, "error", f"unexpected {exc.token.value!r}; expected {expected}")
    if isinstance(exc, UnexpectedCharacters):
        char = text[exc.pos_in_stream] if exc.pos_in_stream < len(text) else ""
        return Diagnostic("error", exc.line, exc.column, exc.line, exc.column + 1, f"unexpected character {char!r}")
    return Diagnostic("error", exc.line, exc.column, exc.line, exc.column, str(exc))


def _suggest(name: str, choices: Iterable[str]) -> str:
    match = process.extractOne(name, list(choices), scorer=fuzz.ratio, score_cutoff=60)
    return f"; did you mean {match[0]}?" if match else ""


# ── SPS models ───────────────────────────────────────────────────────────────

SPS_GRAMMAR = r"""
start: statement*

?statement: TYPES names ";"                 -> types
          | STATES names ";"                -> states
          | INIT names? ";"                 -> init
          | FINAL names? ";"                -> final
          | LABELS NAME ":" names? ";"      -> labels
          | TRANS NAME ARROW NAME ";"       -> trans

names: NAME ("," NAME)*

TYPES: "types"
STATES: "states"
INIT: "init"
FINAL: "final"
LABELS: "labels"
TRANS: "trans"
ARROW: /-\s*(?:(?:req|ans)\s*\(\s*[A-Za-z_][A-Za-z0-9_]*\s*\)|tau)\s*->/
NAME: /[A-Za-z_][A-Za-z0-9_]*/
COMMENT: /#[^\n]*/

%import common.WS
%ignore WS
%ignore COMMENT
"""

_SPS_PARSER = Lark(SPS_GRAMMAR, parser="lalr")


@v_args(inline=True)
class _Statements(Transformer):
    def names(self, *tokens):
        return list(tokens)

    def types(self, keyword, names):
        return ("types", keyword, names)

    def states(self, keyword, names):
        return ("states", keyword, names)

    def init(self, keyword, names=None):
        return ("init", keyword, names or [])

    def final(self, keyword, names=None):
        return ("final", keyword, names or [])

    def labels(self, keyword, state, names=None):
        return ("labels", keyword, (state, names or []))

    def trans(self, keyword, source, arrow, target):
        return ("trans", keyword, (source, arrow, target))

    def start(self, *statements):
        return list(statements)


def _action_text(arrow: Token) -> str:
    return re.sub(r"\s+", "", str(arrow))[1:-2]


def parse_sps(text: str) -> ParseResult:
    """SPS model text → ParseResult(Sps | None, diagnostics)."""
    try:
        statements = _Statements().transform(_SPS_PARSER.parse(text))
    except UnexpectedInput as exc:
        return ParseResult(None, [_syntax_error(text, exc)])

    diagnostics: list[Diagnostic] = []
    sections: dict[str, tuple[Token, list[Token]]] = {}
    labels: dict[str, set[str]] = {}
    labelled: list[Token] = []
    transitions: list[tuple[Token, Token, Token]] = []
    for kind, keyword, payload in statements:
        if kind in ("types", "states", "init", "final"):
            if kind in sections:
                diagnostics.append(_at(keyword, "error", f"duplicate {kind} section"))
                continue
            sections[kind] = (keyword, payload)
        elif kind == "labels":
            labels_state, names = payload
            labels.setdefault(str(labels_state), set()).update(str(n) for n in names)
            labelled.append(labels_state)
        else:
            transitions.append(payload)

    def declared(kind: str) -> list[str]:
        names = []
        for token in sections.get(kind, (None, []))[1]:
            if str(token) in names:
                diagnostics.append(_at(token, "error", f"{token} declared twice in {kind}"))
            else:
                names.append(str(token))
        return names

    types = declared("types")
    states = declared("states")
    if not types:
        diagnostics.append(_whole(text, "error", "no client types declared (types ...;)"))
    if not states:
        diagnostics.append(_whole(text, "error", "no states declared (states ...;)"))

    def known_state(token: Token) -> bool:
        if str(token) in states:
            return True
        diagnostics.append(_at(token, "error", f"undeclared state {token}{_suggest(str(token), states)}"))
        return False

    init_keyword, init_tokens = sections.get("init", (None, []))
    if not init_tokens:
        where = _at(init_keyword, "error", "empty init: at least one initial state is required") if init_keyword else \
            _whole(text, "error", "empty init: at least one initial state is required")
        diagnostics.append(where)
    initial = [str(t) for t in init_tokens if known_state(t)]
    final = None
    if "final" in sections:
        final = [str(t) for t in sections["final"][1] if known_state(t)]
    for token in labelled:
        known_state(token)

    parsed: list[Transition] = []
    seen: set[Transition] = set()
    for source, arrow, target in transitions:
        ok = known_state(source) & known_state(target)
        action = parse_action(_action_text(arrow))
        if action.client_type is not None and action.client_type not in types:
            diagnostics.append(_at(
                arrow, "error",
                f"undeclared client type {action.client_type}{_suggest(action.client_type, types)}",
            ))
            ok = False
        if not ok:
            continue
        transition = Transition(str(source), action, str(target))
        if transition in seen:
            diagnostics.append(_at(arrow, "warning", f"duplicate transition {source} -{action}-> {target}"))
            continue
        seen.add(transition)
        parsed.append(transition)

    if any(d.severity == "error" for d in diagnostics):
        return ParseResult(None, diagnostics)
    try:
        sps = Sps(
            alphabet=ServiceAlphabet(tuple(types)),
            states=tuple(states),
            transitions=tuple(parsed),
            initial=frozenset(initial),
            final=None if final is None else frozenset(final),
            labels={s: frozenset(names) for s, names in labels.items() if names},
        )
    except SpsInputError as exc:
        return ParseResult(None, diagnostics + [_whole(text, "error", str(exc))])
    return ParseResult(sps, diagnostics)


def render_sps(sps: Sps) -> str:
    """Canonical DSL text; parsing it yields an equal Sps."""
    lines = [
        f"types {', '.join(sps.alphabet.types)};",
        f"states {', '.join(sps.states)};",
        f"init {', '.join(s for s in sps.states if s in sps.initial)};",
    ]
    if sps.final is not None:
        names = ", ".join(s for s in sps.states if s in sps.final)
        lines.append(f"final {names};" if names else "final;")
    for state in sps.states:
        props = sps.labels.get(state)
        if props:
            lines.append(f"labels {state}: {', '.join(sorted(props))};")
    for t in sps.transitions:
        lines.append(f"trans {t.source} -{t.action}-> {t.target};")
    return "\n".join(lines) + "\n"


# ── MFSTL formulas ───────────────────────────────────────────────────────────

MFSTL_GRAMMAR = r"""
?start: formula

?formula: disj
        | disj "->" formula             -> implies
?disj: conj
     | disj "|" conj                    -> or_
?conj: until
     | conj "&" until                   -> and_
?until: unary
      | unary "U" until                 -> until
?unary: atom
      | "!" unary                       -> not_
      | "X" unary                       -> next_
      | "F" unary                       -> finally_
      | "G" unary                       -> globally
      | QUANT unary                     -> quantified
?atom: "(" formula ")"
     | "TRUE"                           -> true
     | "FALSE"                          -> false
     | NAME "(" NAME ")"                -> pred
     | NAME "=" NAME                    -> eq
     | NAME                             -> prop

QUANT.2: /\(\s*[EA](?:\s+[A-Za-z_]\w*|[a-z]\d*)\s*(?::\s*[A-Za-z_]\w*\s*)?\)/
NAME: /[A-Za-z_][A-Za-z0-9_]*/
COMMENT: /#[^\n]*/

%import common.WS
%ignore WS
%ignore COMMENT
"""

_MFSTL_PARSER = Lark(MFSTL_GRAMMAR, parser="lalr")
_QUANT = re.compile(r"\(\s*([EA])\s*([A-Za-z_]\w*)\s*(?::\s*([A-Za-z_]\w*)\s*)?\)")

_MFO_NODES = (mfstl.Pred, mfstl.Eq, mfstl.MfoNot, mfstl.MfoOr, mfstl.MfoAnd, mfstl.MfoImplies, mfstl.Exists, mfstl.Forall)


class _QuantifierScopeError(Exception):
    def __init__(self, token: Token, message: str):
        super().__init__(message)
        self.token = token


def _is_mfo(node) -> bool:
    return isinstance(node, _MFO_NODES)


def _lift(node):
    return mfstl.Sentence(node) if _is_mfo(node) else node


@v_args(inline=True)
class _FormulaBuilder(Transformer):
    def true(self):
        return mfstl.TRUE

    def false(self):
        return mfstl.FALSE

    def prop(self, name):
        return mfstl.ServerProp(str(name))

    def pred(self, name, variable):
        return mfstl.Pred(str(name), str(variable))

    def eq(self, left, right):
        return mfstl.Eq(str(left), str(right))

    def _binary(self, left, right, mfo_kind, temporal_kind):
        if _is_mfo(left) and _is_mfo(right):
            return mfo_kind(left, right)
        return temporal_kind(_lift(left), _lift(right))

    def implies(self, left, right):
        return self._binary(left, right, mfstl.MfoImplies, mfstl.Implies)

    def or_(self, left, right):
        return self._binary(left, right, mfstl.MfoOr, mfstl.Or)

    def and_(self, left, right):
        return self._binary(left, right, mfstl.MfoAnd, mfstl.And)

    def until(self, left, right):
        return mfstl.Until(_lift(left), _lift(right))

    def not_(self, body):
        return mfstl.MfoNot(body) if _is_mfo(body) else mfstl.Not(body)

    def next_(self, body):
        return mfstl.Next(_lift(body))

    def finally_(self, body):
        return mfstl.Finally(_lift(body))

    def globally(self, body):
        return mfstl.Globally(_lift(body))

    def quantified(self, token, body):
        kind, variable, sort = _QUANT.fullmatch(str(token)).groups()
        if not _is_mfo(body):
            raise _QuantifierScopeError(
                token, f"quantifier over {variable} has a temporal or server-level body; "
                "quantifiers may only range over client formulas",
            )
        node = mfstl.Exists if kind == "E" else mfstl.Forall
        return node(variable, sort, body)


def infer_alphabet(formula: mfstl.MfstlFormula) -> ServiceAlphabet:
    """Client types named by binders and req_/ans_ predicates, in order of appearance."""
    found: dict[str, None] = {}
    for sentence in mfstl.mfo_sentences(formula):
        for node in _preorder(sentence):
            if isinstance(node, mfstl.QUANTIFIERS) and node.sort:
                found.setdefault(node.sort)
            elif isinstance(node, mfstl.Pred):
                sort = mfstl.predicate_sort(node.predicate)
                if sort:
                    found.setdefault(sort)
    return ServiceAlphabet(tuple(found) or (DEFAULT_CLIENT_TYPE,))


def _preorder(node):
    yield node
    if isinstance(node, (mfstl.MfoNot, *mfstl.QUANTIFIERS)):
        yield from _preorder(node.body)
    elif isinstance(node, mfstl.MFO_BINARY):
        yield from _preorder(node.left)
        yield from _preorder(node.right)


def _anchors(tree) -> list[tuple[tuple, Token, Token]]:
    """Predicates, equalities and quantifiers of the parse tree with their tokens, in text order."""
    found = []
    for sub in tree.iter_subtrees_topdown():
        if sub.data in ("pred", "eq"):
            left, right = sub.children
            found.append(((sub.data, str(left), str(right)), left, right))
        elif sub.data == "quantified":
            token = sub.children[0]
            _, variable, sort = _QUANT.fullmatch(str(token)).groups()
            found.append((("binder", variable, sort), token, token))
    return sorted(found, key=lambda anchor: (anchor[1].line, anchor[1].column))


def _anchored_by(key: tuple, node) -> bool:
    kind, first, second = key
    if isinstance(node, mfstl.Pred):
        return kind == "pred" and second == node.variable and first in (node.predicate, "p", "q")
    if isinstance(node, mfstl.Eq):
        return kind == "eq" and (first, second) == (node.left, node.right)
    if isinstance(node, mfstl.QUANTIFIERS):
        return kind == "binder" and first == node.variable and second in (None, node.sort)
    return False


def _issue_diagnostic(text: str, anchors, issue: mfstl.Issue) -> Diagnostic:
    for key, start, end in anchors:
        if issue.node is not None and _anchored_by(key, issue.node):
            return Diagnostic(
                issue.severity, start.line, start.column,
                end.end_line or end.line, end.end_column or end.column, issue.message,
            )
    return _whole(text, issue.severity, issue.message)


def parse_mfstl(text: str, alphabet: ServiceAlphabet | None = None) -> ParseResult:
    """MFSTL text → ParseResult(formula | None, diagnostics).

    Without ``alphabet`` the client types are inferred from the formula. With
    a single client type, bare ``p``/``q`` and untyped binders are resolved to
    it. Well-formedness issues point at the offending predicate, equality or
    quantifier.
    """
    try:
        tree = _MFSTL_PARSER.parse(text)
    except UnexpectedInput as exc:
        return ParseResult(None, [_syntax_error(text, exc)])
    try:
        formula = _lift(_FormulaBuilder().transform(tree))
    except VisitError as exc:
        if isinstance(exc.orig_exc, _QuantifierScopeError):
            return ParseResult(None, [_at(exc.orig_exc.token, "error", str(exc.orig_exc))])
        raise
    if alphabet is None:
        alphabet = infer_alphabet(formula)
    formula = mfstl.desugar_single_type(formula, alphabet)
    anchors = _anchors(tree)
    diagnostics = [
        _issue_diagnostic(text, anchors, issue)
        for issue in mfstl.check_well_formed(formula, alphabet)
    ]
    return ParseResult(formula, diagnostics)


def _wrap(node) -> str:
    text = render_mfstl(node)
    if isinstance(node, mfstl.Sentence):
        node = node.formula
    if isinstance(node, (mfstl.ServerProp, mfstl.Truth, mfstl.Pred)):
        return text
    return f"({text})"


def render_mfstl(node) -> str:
    """Formula text; parsing it back gives a structurally equal formula."""
    if isinstance(node, mfstl.Sentence):
        return render_mfstl(node.formula)
    if isinstance(node, mfstl.Truth):
        return "TRUE" if node.value else "FALSE"
    if isinstance(node, mfstl.ServerProp):
        return node.name
    if isinstance(node, mfstl.Pred):
        return f"{node.predicate}({node.variable})"
    if isinstance(node, mfstl.Eq):
        return f"{node.left} = {node.right}"
    if isinstance(node, (mfstl.Not, mfstl.MfoNot)):
        return f"!{_wrap(node.body)}"
    if isinstance(node, mfstl.QUANTIFIERS):
        letter = "E" if isinstance(node, mfstl.Exists) else "A"
        sort = f":{node.sort}" if node.sort else ""
        return f"({letter} {node.variable}{sort}){_wrap(node.body)}"
    for kinds, symbol in (
        ((mfstl.Next,), "X"), ((mfstl.Finally,), "F"), ((mfstl.Globally,), "G"),
    ):
        if isinstance(node, kinds):
            return f"{symbol} {_wrap(node.body)}"
    for kinds, symbol in (
        ((mfstl.Or, mfstl.MfoOr), "|"),
        ((mfstl.And, mfstl.MfoAnd), "&"),
        ((mfstl.Implies, mfstl.MfoImplies), "->"),
        ((mfstl.Until,), "U"),
    ):
        if isinstance(node, kinds):
            return f"{_wrap(node.left)} {symbol} {_wrap(node.right)}"
    raise TypeError(f"not an MFSTL formula: {node!r}")


# ── combined files ───────────────────────────────────────────────────────────

@dataclass(frozen=True)
class CombinedSpec:
    sps: Sps
    formula: mfstl.MfstlFormula


_MARKER_LINE = re.compile(rf"^\s*{SECTION_MARKER}\s*$", re.MULTILINE)


def parse_combined(text: str) -> ParseResult:
    """Model section, a ``MFSTLSPEC`` line, formula section."""
    markers = list(_MARKER_LINE.finditer(text))
    if len(markers) != 1:
        return ParseResult(None, [_whole(
            text, "error", f"a combined file needs exactly one {SECTION_MARKER} line; found {len(markers)}",
        )])
    marker = markers[0]
    model_text, formula_text = text[: marker.start()], text[marker.end():]
    offset = text.count("\n", 0, marker.end())
    model = parse_sps(model_text)
    if not model.ok:
        return ParseResult(None, model.diagnostics)
    formula = parse_mfstl(formula_text, model.value.alphabet)
    diagnostics = model.diagnostics + [d.shifted(offset) for d in formula.diagnostics]
    if not formula.ok:
        return ParseResult(None, diagnostics)
    return ParseResult(CombinedSpec(model.value, formula.value), diagnostics)


def parse_source(source: SourceFile) -> ParseResult:
    if source.kind == "sps-model":
        return parse_sps(source.text)
    if source.kind == "mfstl-spec":
        return parse_mfstl(source.text)
    return parse_combined(source.text)
