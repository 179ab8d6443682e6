#!/usr/bin/env python3
"""
ltl.py
──────
Propositional LTL over atom names: the output of grounding, the input of the
checker and of SMV emission.

``And``/``Or`` are n-ary (at least two operands) so long grounded
disjunctions stay flat. ``Release`` only appears in negation normal form.

``eval_lasso`` decides a formula directly on an ultimately periodic word by
fixpoint iteration over the lasso positions; it shares no code with the
automaton construction and serves as its oracle.
"""
from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import Union


@dataclass(frozen=True)
class Const:
    value: bool


@dataclass(frozen=True)
class Atom:
    name: str


@dataclass(frozen=True)
class Not:
    body: LtlFormula


@dataclass(frozen=True)
class And:
    operands: tuple[LtlFormula, ...]


@dataclass(frozen=True)
class Or:
    operands: tuple[LtlFormula, ...]


@dataclass(frozen=True)
class Implies:
    left: LtlFormula
    right: LtlFormula


@dataclass(frozen=True)
class Next:
    body: LtlFormula


@dataclass(frozen=True)
class Until:
    left: LtlFormula
    right: LtlFormula


@dataclass(frozen=True)
class Release:
    left: LtlFormula
    right: LtlFormula


@dataclass(frozen=True)
class Finally:
    body: LtlFormula


@dataclass(frozen=True)
class Globally:
    body: LtlFormula


LtlFormula = Union[Const, Atom, Not, And, Or, Implies, Next, Until, Release, Finally, Globally]
TRUE = Const(True)
FALSE = Const(False)
UNARY = (Not, Next, Finally, Globally)
BINARY = (Implies, Until, Release)
NARY = (And, Or)


def conj(items: Iterable[LtlFormula]) -> LtlFormula:
    """Conjunction with constant folding and flattening; empty → TRUE."""
    return _fold(And, items, unit=True)


def disj(items: Iterable[LtlFormula]) -> LtlFormula:
    """Disjunction with constant folding and flattening; empty → FALSE."""
    return _fold(Or, items, unit=False)


def _fold(kind: type, items: Iterable[LtlFormula], unit: bool) -> LtlFormula:
    operands: list[LtlFormula] = []
    for item in items:
        if isinstance(item, Const):
            if item.value != unit:
                return Const(not unit)
            continue
        if isinstance(item, kind):
            operands.extend(item.operands)
        else:
            operands.append(item)
    if not operands:
        return Const(unit)
    if len(operands) == 1:
        return operands[0]
    return kind(tuple(operands))


def negate(formula: LtlFormula) -> LtlFormula:
    if isinstance(formula, Const):
        return Const(not formula.value)
    if isinstance(formula, Not):
        return formula.body
    return Not(formula)


def children(formula: LtlFormula) -> tuple[LtlFormula, ...]:
    if isinstance(formula, UNARY):
        return (formula.body,)
    if isinstance(formula, BINARY):
        return (formula.left, formula.right)
    if isinstance(formula, NARY):
        return formula.operands
    return ()


def atoms(formula: LtlFormula) -> frozenset[str]:
    if isinstance(formula, Atom):
        return frozenset({formula.name})
    found: set[str] = set()
    for child in children(formula):
        found |= atoms(child)
    return frozenset(found)


def size(formula: LtlFormula) -> int:
    return 1 + sum(size(child) for child in children(formula))


def is_temporal_free(formula: LtlFormula) -> bool:
    if isinstance(formula, (Next, Until, Release, Finally, Globally)):
        return False
    return all(is_temporal_free(child) for child in children(formula))


def nnf(formula: LtlFormula) -> LtlFormula:
    """Negation normal form over Const, Atom, Not(Atom), And, Or, Next, Until, Release."""
    return _nnf(formula, positive=True)


def _nnf(formula: LtlFormula, positive: bool) -> LtlFormula:
    if isinstance(formula, Const):
        return Const(formula.value == positive)
    if isinstance(formula, Atom):
        return formula if positive else Not(formula)
    if isinstance(formula, Not):
        return _nnf(formula.body, not positive)
    if isinstance(formula, And):
        parts = [_nnf(op, positive) for op in formula.operands]
        return conj(parts) if positive else disj(parts)
    if isinstance(formula, Or):
        parts = [_nnf(op, positive) for op in formula.operands]
        return disj(parts) if positive else conj(parts)
    if isinstance(formula, Implies):
        return _nnf(Or((Not(formula.left), formula.right)), positive)
    if isinstance(formula, Next):
        return Next(_nnf(formula.body, positive))
    if isinstance(formula, Finally):
        return _nnf(Until(TRUE, formula.body), positive)
    if isinstance(formula, Globally):
        return _nnf(Release(FALSE, formula.body), positive)
    if isinstance(formula, Until):
        left, right = _nnf(formula.left, positive), _nnf(formula.right, positive)
        return Until(left, right) if positive else Release(left, right)
    if isinstance(formula, Release):
        left, right = _nnf(formula.left, positive), _nnf(formula.right, positive)
        return Release(left, right) if positive else Until(left, right)
    raise TypeError(f"not an LTL formula: {formula!r}")


# ── direct evaluation ────────────────────────────────────────────────────────

def eval_propositional(formula: LtlFormula, true_atoms: Iterable[str]) -> bool:
    """Value of a temporal-free formula under an atom assignment."""
    if not is_temporal_free(formula):
        raise ValueError("eval_propositional needs a formula without temporal operators")
    labels = (frozenset(true_atoms),)
    return _LassoEvaluator(labels, 0).values(formula)[0]


def eval_lasso(
    formula: LtlFormula, labels: Sequence[Iterable[str]], loop_start: int, position: int = 0
) -> bool:
    """Truth of ``formula`` at ``position`` of the infinite word
    ``labels[:loop_start] (labels[loop_start:])^ω``."""
    frozen = tuple(frozenset(label) for label in labels)
    if not frozen:
        raise ValueError("a lasso needs at least one position")
    if not 0 <= loop_start < len(frozen):
        raise ValueError(f"loop start {loop_start} outside 0..{len(frozen) - 1}")
    if position >= len(frozen):
        cycle = len(frozen) - loop_start
        position = loop_start + (position - loop_start) % cycle
    return _LassoEvaluator(frozen, loop_start).values(formula)[position]


class _LassoEvaluator:
    def __init__(self, labels: tuple[frozenset[str], ...], loop_start: int):
        self.labels = labels
        self.size = len(labels)
        self.next = [j + 1 for j in range(self.size - 1)] + [loop_start]
        self.cache: dict[LtlFormula, tuple[bool, ...]] = {}

    def values(self, formula: LtlFormula) -> tuple[bool, ...]:
        if formula not in self.cache:
            self.cache[formula] = self._compute(formula)
        return self.cache[formula]

    def _compute(self, formula: LtlFormula) -> tuple[bool, ...]:
        positions = range(self.size)
        if isinstance(formula, Const):
            return (formula.value,) * self.size
        if isinstance(formula, Atom):
            return tuple(formula.name in label for label in self.labels)
        if isinstance(formula, Not):
            return tuple(not v for v in self.values(formula.body))
        if isinstance(formula, And):
            parts = [self.values(op) for op in formula.operands]
            return tuple(all(part[j] for part in parts) for j in positions)
        if isinstance(formula, Or):
            parts = [self.values(op) for op in formula.operands]
            return tuple(any(part[j] for part in parts) for j in positions)
        if isinstance(formula, Implies):
            left, right = self.values(formula.left), self.values(formula.right)
            return tuple((not left[j]) or right[j] for j in positions)
        if isinstance(formula, Next):
            body = self.values(formula.body)
            return tuple(body[self.next[j]] for j in positions)
        if isinstance(formula, Finally):
            return self._until((True,) * self.size, self.values(formula.body))
        if isinstance(formula, Globally):
            return self._release((False,) * self.size, self.values(formula.body))
        if isinstance(formula, Until):
            return self._until(self.values(formula.left), self.values(formula.right))
        if isinstance(formula, Release):
            return self._release(self.values(formula.left), self.values(formula.right))
        raise TypeError(f"not an LTL formula: {formula!r}")

    def _until(self, left: tuple[bool, ...], right: tuple[bool, ...]) -> tuple[bool, ...]:
        # Least fixpoint of  v = right | (left & X v).
        value = [False] * self.size
        changed = True
        while changed:
            changed = False
            for j in range(self.size):
                new = right[j] or (left[j] and value[self.next[j]])
                if new != value[j]:
                    value[j] = new
                    changed = True
        return tuple(value)

    def _release(self, left: tuple[bool, ...], right: tuple[bool, ...]) -> tuple[bool, ...]:
        # Greatest fixpoint of  v = right & (left | X v).
        value = [True] * self.size
        changed = True
        while changed:
            changed = False
            for j in range(self.size):
                new = right[j] and (left[j] or value[self.next[j]])
                if new != value[j]:
                    value[j] = new
                    changed = True
        return tuple(value)
