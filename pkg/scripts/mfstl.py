#!/usr/bin/env python3
"""
mfstl.py
────────
Monadic first-order separated temporal logic.

Two layers:

  * client formulas (MFO): typed quantifiers over client indices, monadic
    client predicates such as ``req_h(x)``, and equality between variables;
  * server formulas: LTL over server propositions whose other atoms are MFO
    SENTENCES. No variable is ever free across a temporal operator.

Derived connectives (and, implies, forall, F, G, TRUE/FALSE) are kept as
their own nodes so printing round-trips; their semantics is that of their
expansion.

Models are explicit traces. An infinite model is always a lasso (a finite
list of instants plus the index the last instant loops back to); a finite
prefix can only answer boolean and next-step questions inside the prefix.
"""
from __future__ import annotations

import logging
from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field
from typing import Union

from sps_model import ServiceAlphabet

logger = logging.getLogger(__name__)

REQ_PREFIX = "req_"
ANS_PREFIX = "ans_"


class MfstlEvaluationError(ValueError):
    """Unbound variable, bad model shape, or an unanswerable horizon."""


# ── client formulas ──────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Pred:
    predicate: str
    variable: str


@dataclass(frozen=True)
class Eq:
    left: str
    right: str


@dataclass(frozen=True)
class MfoNot:
    body: MfoFormula


@dataclass(frozen=True)
class MfoOr:
    left: MfoFormula
    right: MfoFormula


@dataclass(frozen=True)
class MfoAnd:
    left: MfoFormula
    right: MfoFormula


@dataclass(frozen=True)
class MfoImplies:
    left: MfoFormula
    right: MfoFormula


@dataclass(frozen=True)
class Exists:
    variable: str
    sort: str | None
    body: MfoFormula


@dataclass(frozen=True)
class Forall:
    variable: str
    sort: str | None
    body: MfoFormula


MfoFormula = Union[Pred, Eq, MfoNot, MfoOr, MfoAnd, MfoImplies, Exists, Forall]
MFO_BINARY = (MfoOr, MfoAnd, MfoImplies)
QUANTIFIERS = (Exists, Forall)


# ── server formulas ──────────────────────────────────────────────────────────

@dataclass(frozen=True)
class ServerProp:
    name: str


@dataclass(frozen=True)
class Sentence:
    formula: MfoFormula


@dataclass(frozen=True)
class Truth:
    value: bool


@dataclass(frozen=True)
class Not:
    body: MfstlFormula


@dataclass(frozen=True)
class Or:
    left: MfstlFormula
    right: MfstlFormula


@dataclass(frozen=True)
class And:
    left: MfstlFormula
    right: MfstlFormula


@dataclass(frozen=True)
class Implies:
    left: MfstlFormula
    right: MfstlFormula


@dataclass(frozen=True)
class Next:
    body: MfstlFormula


@dataclass(frozen=True)
class Until:
    left: MfstlFormula
    right: MfstlFormula


@dataclass(frozen=True)
class Finally:
    body: MfstlFormula


@dataclass(frozen=True)
class Globally:
    body: MfstlFormula


MfstlFormula = Union[
    ServerProp, Sentence, Truth, Not, Or, And, Implies, Next, Until, Finally, Globally
]
TRUE = Truth(True)
FALSE = Truth(False)
TEMPORAL_BINARY = (Or, And, Implies, Until)
TEMPORAL_UNARY = (Not, Next, Finally, Globally)


# ── structural helpers ───────────────────────────────────────────────────────

def predicate_sort(predicate: str) -> str | None:
    """``req_h`` / ``ans_h`` → ``h``; None for any other predicate."""
    for prefix in (REQ_PREFIX, ANS_PREFIX):
        if predicate.startswith(prefix) and len(predicate) > len(prefix):
            return predicate[len(prefix):]
    return None


def resolve_sort(sort: str | None, alphabet: ServiceAlphabet | None) -> str | None:
    """Untyped binders range over the sole client type, if there is one."""
    if sort is not None:
        return sort
    if alphabet is not None and len(alphabet) == 1:
        return alphabet.types[0]
    return None


def free_variables(formula: MfoFormula) -> frozenset[str]:
    if isinstance(formula, Pred):
        return frozenset({formula.variable})
    if isinstance(formula, Eq):
        return frozenset({formula.left, formula.right})
    if isinstance(formula, MfoNot):
        return free_variables(formula.body)
    if isinstance(formula, MFO_BINARY):
        return free_variables(formula.left) | free_variables(formula.right)
    if isinstance(formula, QUANTIFIERS):
        return free_variables(formula.body) - {formula.variable}
    raise TypeError(f"not an MFO formula: {formula!r}")


def mfo_sentences(formula: MfstlFormula) -> Iterator[MfoFormula]:
    """Embedded MFO atoms of a server formula, left to right."""
    if isinstance(formula, Sentence):
        yield formula.formula
    elif isinstance(formula, TEMPORAL_UNARY):
        yield from mfo_sentences(formula.body)
    elif isinstance(formula, TEMPORAL_BINARY):
        yield from mfo_sentences(formula.left)
        yield from mfo_sentences(formula.right)


def server_props(formula: MfstlFormula) -> frozenset[str]:
    if isinstance(formula, ServerProp):
        return frozenset({formula.name})
    if isinstance(formula, TEMPORAL_UNARY):
        return server_props(formula.body)
    if isinstance(formula, TEMPORAL_BINARY):
        return server_props(formula.left) | server_props(formula.right)
    return frozenset()


def binders(formula: MfoFormula) -> Iterator[Exists | Forall]:
    if isinstance(formula, QUANTIFIERS):
        yield formula
        yield from binders(formula.body)
    elif isinstance(formula, MfoNot):
        yield from binders(formula.body)
    elif isinstance(formula, MFO_BINARY):
        yield from binders(formula.left)
        yield from binders(formula.right)


def predicates(formula: MfoFormula) -> Iterator[Pred]:
    if isinstance(formula, Pred):
        yield formula
    elif isinstance(formula, (MfoNot, *QUANTIFIERS)):
        yield from predicates(formula.body)
    elif isinstance(formula, MFO_BINARY):
        yield from predicates(formula.left)
        yield from predicates(formula.right)


def is_temporal_free(formula: MfstlFormula) -> bool:
    if isinstance(formula, (Next, Until, Finally, Globally)):
        return False
    if isinstance(formula, Not):
        return is_temporal_free(formula.body)
    if isinstance(formula, (Or, And, Implies)):
        return is_temporal_free(formula.left) and is_temporal_free(formula.right)
    return True


def desugar_single_type(formula: MfstlFormula, alphabet: ServiceAlphabet) -> MfstlFormula:
    """Bare ``p``/``q`` become ``req_u``/``ans_u`` and binders get the sole sort ``u``."""
    if len(alphabet) != 1:
        return formula
    sort = alphabet.types[0]
    renames = {"p": REQ_PREFIX + sort, "q": ANS_PREFIX + sort}

    def mfo(node: MfoFormula) -> MfoFormula:
        if isinstance(node, Pred):
            return Pred(renames.get(node.predicate, node.predicate), node.variable)
        if isinstance(node, Eq):
            return node
        if isinstance(node, MfoNot):
            return MfoNot(mfo(node.body))
        if isinstance(node, MFO_BINARY):
            return type(node)(mfo(node.left), mfo(node.right))
        return type(node)(node.variable, node.sort or sort, mfo(node.body))

    def server(node: MfstlFormula) -> MfstlFormula:
        if isinstance(node, Sentence):
            return Sentence(mfo(node.formula))
        if isinstance(node, TEMPORAL_UNARY):
            return type(node)(server(node.body))
        if isinstance(node, TEMPORAL_BINARY):
            return type(node)(server(node.left), server(node.right))
        return node

    return server(formula)


# ── well-formedness ──────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Issue:
    severity: str  # "error" | "warning"
    message: str
    node: object = field(default=None, compare=False)  # the Pred, Eq or binder at fault


def check_well_formed(
    formula: MfstlFormula,
    alphabet: ServiceAlphabet | None = None,
    signatures: Mapping[str, str] | None = None,
) -> list[Issue]:
    """Sort and sentence-hood diagnostics; an empty list means well-formed.

    ``signatures`` declares extra client predicates as name → client type;
    ``req_<u>``/``ans_<u>`` are typed by their suffix.
    """
    issues: list[Issue] = []
    signatures = dict(signatures or {})

    def error(message: str, node: object = None) -> None:
        issues.append(Issue("error", message, node))

    def warning(message: str, node: object = None) -> None:
        issues.append(Issue("warning", message, node))

    def known_type(sort: str) -> bool:
        return alphabet is None or sort in alphabet

    def visit(node: MfoFormula, scope: dict[str, str | None]) -> None:
        if isinstance(node, Pred):
            if node.variable not in scope:
                error(f"free variable {node.variable} in {node.predicate}({node.variable}) under a temporal modality", node)
                return
            expected = predicate_sort(node.predicate) or signatures.get(node.predicate)
            if expected is None:
                if node.predicate not in ("p", "q") or alphabet is None or len(alphabet) != 1:
                    warning(f"unknown client predicate {node.predicate}", node)
                return
            if not known_type(expected):
                error(f"predicate {node.predicate} refers to unknown client type {expected}", node)
                return
            actual = resolve_sort(scope[node.variable], alphabet)
            if actual is not None and actual != expected:
                error(f"predicate {node.predicate} of sort {expected} applied to {node.variable} of sort {actual}", node)
        elif isinstance(node, Eq):
            for name in (node.left, node.right):
                if name not in scope:
                    error(f"free variable {name} in {node.left}={node.right} under a temporal modality", node)
            if node.left in scope and node.right in scope:
                left = resolve_sort(scope[node.left], alphabet)
                right = resolve_sort(scope[node.right], alphabet)
                if left != right:
                    error(f"equality across sorts: {node.left}:{left} = {node.right}:{right}", node)
        elif isinstance(node, MfoNot):
            visit(node.body, scope)
        elif isinstance(node, MFO_BINARY):
            visit(node.left, scope)
            visit(node.right, scope)
        else:
            sort = node.sort
            if sort is not None and not known_type(sort):
                error(f"unknown client type {sort} for variable {node.variable}", node)
            elif sort is None and alphabet is not None and len(alphabet) > 1:
                error(f"variable {node.variable} needs a type annotation: the alphabet has several client types", node)
            if node.variable in scope:
                outer = resolve_sort(scope[node.variable], alphabet)
                inner = resolve_sort(sort, alphabet)
                if outer != inner:
                    error(f"variable {node.variable} rebound at sort {inner} inside its scope at sort {outer}", node)
                else:
                    warning(f"variable {node.variable} shadows an enclosing binder", node)
            visit(node.body, {**scope, node.variable: sort})

    for sentence in mfo_sentences(formula):
        visit(sentence, {})
    return issues


def is_well_formed(formula: MfstlFormula, alphabet: ServiceAlphabet | None = None) -> bool:
    return not any(issue.severity == "error" for issue in check_well_formed(formula, alphabet))


# ── bound profile ────────────────────────────────────────────────────────────

BOUND_FACTOR = 4


@dataclass(frozen=True)
class BoundProfile:
    """Per client type: the variable names bound at that sort, r = |vars|, n = 4·r."""

    alphabet: ServiceAlphabet
    variables: Mapping[str, frozenset[str]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        variables = {u: frozenset(self.variables.get(u, ())) for u in self.alphabet.types}
        unknown = set(self.variables) - set(self.alphabet.types)
        if unknown:
            raise ValueError(f"bound profile names unknown client types: {sorted(unknown)}")
        object.__setattr__(self, "variables", variables)

    def r(self, client_type: str) -> int:
        return len(self.variables[client_type])

    def n(self, client_type: str) -> int:
        return BOUND_FACTOR * self.r(client_type)

    def as_dict(self) -> dict[str, dict[str, int]]:
        return {u: {"r": self.r(u), "n": self.n(u)} for u in self.alphabet.types}

    def describe(self) -> str:
        return "\n".join(f"{u}: r={self.r(u)} n={self.n(u)}" for u in self.alphabet.types)


def bound_profile(formula: MfstlFormula, alphabet: ServiceAlphabet) -> BoundProfile:
    """Count distinct variable names per sort across every embedded sentence.

    A name bound at two sorts in disjoint scopes counts once for each sort;
    re-quantifying a name at the sort it already has does not count again.
    """
    variables: dict[str, set[str]] = {u: set() for u in alphabet.types}
    for sentence in mfo_sentences(formula):
        for binder in binders(sentence):
            sort = resolve_sort(binder.sort, alphabet)
            if sort in variables:
                variables[sort].add(binder.variable)
    profile = BoundProfile(alphabet, {u: frozenset(names) for u, names in variables.items()})
    logger.info("bound profile: %s", "; ".join(profile.describe().splitlines()))
    return profile


# ── trace models ─────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Instant:
    """One time point: server propositions plus, per client type, the
    present client indices mapped to the client predicates they satisfy.
    The domain D of a type is exactly the key set of its map."""

    props: frozenset[str] = frozenset()
    clients: Mapping[str, Mapping[int, frozenset[str]]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "props", frozenset(self.props))
        clients = {
            u: {index: frozenset(preds) for index, preds in members.items()}
            for u, members in self.clients.items()
        }
        for u, members in clients.items():
            bad = [index for index in members if not isinstance(index, int) or index < 1]
            if bad:
                raise MfstlEvaluationError(f"client indices of {u} must be positive integers: {bad}")
        object.__setattr__(self, "clients", clients)

    def domain(self, client_type: str) -> frozenset[int]:
        return frozenset(self.clients.get(client_type, {}))

    def holds(self, client_type: str, index: int, predicate: str) -> bool:
        return predicate in self.clients.get(client_type, {}).get(index, frozenset())


@dataclass(frozen=True)
class TraceModel:
    """A finite prefix (``loop_start`` None) or a lasso looping back to ``loop_start``."""

    instants: tuple[Instant, ...]
    loop_start: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "instants", tuple(self.instants))
        if not self.instants:
            raise MfstlEvaluationError("a trace model needs at least one instant")
        if self.loop_start is not None and not 0 <= self.loop_start < len(self.instants):
            raise MfstlEvaluationError(
                f"loop start {self.loop_start} outside 0..{len(self.instants) - 1}"
            )

    @classmethod
    def lasso(cls, instants, loop_start: int = 0) -> TraceModel:
        return cls(tuple(instants), loop_start)

    @classmethod
    def finite(cls, instants) -> TraceModel:
        return cls(tuple(instants), None)

    @property
    def is_lasso(self) -> bool:
        return self.loop_start is not None

    def position(self, i: int) -> int:
        """Fold an absolute time index into the stored instants."""
        if i < 0:
            raise MfstlEvaluationError(f"negative time index {i}")
        size = len(self.instants)
        if i < size:
            return i
        if self.loop_start is None:
            raise MfstlEvaluationError(f"time index {i} beyond the finite prefix of length {size}")
        cycle = size - self.loop_start
        return self.loop_start + (i - self.loop_start) % cycle

    def successor(self, i: int) -> int:
        if i + 1 < len(self.instants):
            return i + 1
        if self.loop_start is None:
            raise MfstlEvaluationError("next step asked at the last instant of a finite prefix")
        return self.loop_start

    def window(self) -> int:
        """Stem plus two copies of the cycle."""
        stem = self.loop_start or 0
        return stem + 2 * (len(self.instants) - stem)

    def at(self, i: int) -> Instant:
        return self.instants[self.position(i)]


# ── satisfaction ─────────────────────────────────────────────────────────────

Valuation = Mapping[str, tuple[str, int]]


def eval_mfo(model: TraceModel, valuation: Valuation, i: int, formula: MfoFormula) -> bool:
    """Truth of a client formula at instant ``i`` under ``valuation``.

    The valuation maps a variable to ``(sort, index)``. A predicate holds only
    of present clients; equality compares indices and ignores presence.
    """
    instant = model.at(i)
    return _eval_mfo(instant, dict(valuation), formula, _sole_type(model))


def _sole_type(model: TraceModel) -> str | None:
    """The type untyped binders range over; "" (an empty domain) when no instant has clients."""
    types = {u for instant in model.instants for u in instant.clients}
    if not types:
        return ""
    return next(iter(types)) if len(types) == 1 else None


def _lookup(valuation: Mapping[str, tuple[str, int]], name: str) -> tuple[str, int]:
    try:
        return valuation[name]
    except KeyError:
        raise MfstlEvaluationError(f"unbound variable {name}") from None


def _eval_mfo(instant: Instant, valuation: dict, node: MfoFormula, sole: str | None) -> bool:
    if isinstance(node, Pred):
        sort, index = _lookup(valuation, node.variable)
        return index in instant.domain(sort) and instant.holds(sort, index, node.predicate)
    if isinstance(node, Eq):
        return _lookup(valuation, node.left)[1] == _lookup(valuation, node.right)[1]
    if isinstance(node, MfoNot):
        return not _eval_mfo(instant, valuation, node.body, sole)
    if isinstance(node, MfoOr):
        return _eval_mfo(instant, valuation, node.left, sole) or _eval_mfo(instant, valuation, node.right, sole)
    if isinstance(node, MfoAnd):
        return _eval_mfo(instant, valuation, node.left, sole) and _eval_mfo(instant, valuation, node.right, sole)
    if isinstance(node, MfoImplies):
        return not _eval_mfo(instant, valuation, node.left, sole) or _eval_mfo(instant, valuation, node.right, sole)
    if isinstance(node, QUANTIFIERS):
        sort = node.sort or sole
        if sort is None:
            raise MfstlEvaluationError(f"cannot infer the sort of untyped variable {node.variable}")
        results = (
            _eval_mfo(instant, {**valuation, node.variable: (sort, index)}, node.body, sole)
            for index in sorted(instant.domain(sort))
        )
        return any(results) if isinstance(node, Exists) else all(results)
    raise TypeError(f"not an MFO formula: {node!r}")


class _ServerEvaluator:
    def __init__(self, model: TraceModel):
        self.model = model
        self.sole = _sole_type(model)
        self.cache: dict[tuple[MfstlFormula, int], bool] = {}

    def horizon(self, node: MfstlFormula) -> None:
        if not self.model.is_lasso:
            raise MfstlEvaluationError(
                f"{type(node).__name__} needs an infinite model; got a finite prefix"
            )

    def run(self, node: MfstlFormula, i: int) -> bool:
        key = (node, i)
        if key not in self.cache:
            self.cache[key] = self._eval(node, i)
        return self.cache[key]

    def _eval(self, node: MfstlFormula, i: int) -> bool:
        if isinstance(node, Truth):
            return node.value
        if isinstance(node, ServerProp):
            return node.name in self.model.instants[i].props
        if isinstance(node, Sentence):
            return _eval_mfo(self.model.instants[i], {}, node.formula, self.sole)
        if isinstance(node, Not):
            return not self.run(node.body, i)
        if isinstance(node, Or):
            return self.run(node.left, i) or self.run(node.right, i)
        if isinstance(node, And):
            return self.run(node.left, i) and self.run(node.right, i)
        if isinstance(node, Implies):
            return not self.run(node.left, i) or self.run(node.right, i)
        if isinstance(node, Next):
            return self.run(node.body, self.model.successor(i))
        if isinstance(node, Until):
            self.horizon(node)
            return self._until(node.left, node.right, i)
        if isinstance(node, Finally):
            self.horizon(node)
            return self._until(TRUE, node.body, i)
        if isinstance(node, Globally):
            self.horizon(node)
            return not self._until(TRUE, Not(node.body), i)
        raise TypeError(f"not an MFSTL formula: {node!r}")

    def _until(self, left: MfstlFormula, right: MfstlFormula, i: int) -> bool:
        position = i
        for _ in range(self.model.window()):
            if self.run(right, position):
                return True
            if not self.run(left, position):
                return False
            position = self.model.successor(position)
        return False


def eval_mfstl(model: TraceModel, i: int, formula: MfstlFormula) -> bool:
    """Truth of a server formula at time ``i`` of ``model``."""
    return _ServerEvaluator(model).run(formula, model.position(i))
