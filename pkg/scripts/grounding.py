#!/usr/bin/env python3
"""
grounding.py
────────────
Quantifier elimination: MFO sentences over the bounded client domains
become propositional formulas over request/answer flag atoms.

Client j of type u_i is represented by two atoms, the request flag and the
answer flag. With a single client type they are ``p[j]`` / ``q[j]``; with
several they carry the type index, ``p0[j]`` / ``q0[j]``, ``p1[j]`` ...

The quantifier domain of u_i is {1..n_i} with n_i = 4·r_i. The
``strict_prose`` option shrinks it to {1..r_i}.
"""
from __future__ import annotations

import logging
from collections.abc import Iterable, Mapping
from dataclasses import dataclass

import ltl
import mfstl
from mfstl import BoundProfile
from sps_model import ServiceAlphabet, Sps

logger = logging.getLogger(__name__)


class GroundingError(ValueError):
    """Unknown predicate, empty quantified domain, or an atom-name clash."""


@dataclass(frozen=True)
class GroundingMap:
    """Flag atom names and quantifier domain size per client type."""

    alphabet: ServiceAlphabet
    sizes: Mapping[str, int]

    def __post_init__(self) -> None:
        sizes = {u: int(self.sizes.get(u, 0)) for u in self.alphabet.types}
        if any(size < 0 for size in sizes.values()):
            raise GroundingError(f"domain sizes must be non-negative: {sizes}")
        object.__setattr__(self, "sizes", sizes)

    @classmethod
    def for_profile(cls, profile: BoundProfile, *, strict_prose: bool = False) -> GroundingMap:
        if strict_prose:
            return cls(profile.alphabet, {u: profile.r(u) for u in profile.alphabet.types})
        return cls(profile.alphabet, {u: profile.n(u) for u in profile.alphabet.types})

    def size(self, client_type: str) -> int:
        return self.sizes[client_type]

    def prefix(self, client_type: str) -> str:
        """Type suffix of the flag arrays: empty for a single client type."""
        if len(self.alphabet) == 1:
            return ""
        return str(self.alphabet.index(client_type))

    def request_atom(self, client_type: str, index: int) -> str:
        return f"p{self.prefix(client_type)}[{index}]"

    def answer_atom(self, client_type: str, index: int) -> str:
        return f"q{self.prefix(client_type)}[{index}]"

    def atoms(self) -> frozenset[str]:
        return frozenset(
            name
            for u in self.alphabet.types
            for j in range(1, self.size(u) + 1)
            for name in (self.request_atom(u, j), self.answer_atom(u, j))
        )


def _as_map(bounds: BoundProfile | GroundingMap, strict_prose: bool) -> GroundingMap:
    if isinstance(bounds, GroundingMap):
        return bounds
    return GroundingMap.for_profile(bounds, strict_prose=strict_prose)


def _predicate_atom(gmap: GroundingMap, pred: mfstl.Pred, sort: str, index: int) -> ltl.LtlFormula:
    name = pred.predicate
    if len(gmap.alphabet) == 1 and name in ("p", "q"):
        name = (mfstl.REQ_PREFIX if name == "p" else mfstl.ANS_PREFIX) + gmap.alphabet.types[0]
    target = mfstl.predicate_sort(name)
    if target is None or target not in gmap.alphabet:
        raise GroundingError(f"cannot ground client predicate {pred.predicate}: only req_<type> and ans_<type> are supported")
    if target != sort:
        raise GroundingError(f"predicate {pred.predicate} applied to {pred.variable} of sort {sort}")
    if name.startswith(mfstl.REQ_PREFIX):
        return ltl.Atom(gmap.request_atom(sort, index))
    return ltl.Atom(gmap.answer_atom(sort, index))


def _ground(node: mfstl.MfoFormula, gmap: GroundingMap, env: dict[str, tuple[str, int]]) -> ltl.LtlFormula:
    if isinstance(node, mfstl.Pred):
        if node.variable not in env:
            raise GroundingError(f"free variable {node.variable} in a client sentence")
        sort, index = env[node.variable]
        return _predicate_atom(gmap, node, sort, index)
    if isinstance(node, mfstl.Eq):
        for name in (node.left, node.right):
            if name not in env:
                raise GroundingError(f"free variable {name} in a client sentence")
        return ltl.Const(env[node.left][1] == env[node.right][1])
    if isinstance(node, mfstl.MfoNot):
        return ltl.negate(_ground(node.body, gmap, env))
    if isinstance(node, mfstl.MfoOr):
        return ltl.disj([_ground(node.left, gmap, env), _ground(node.right, gmap, env)])
    if isinstance(node, mfstl.MfoAnd):
        return ltl.conj([_ground(node.left, gmap, env), _ground(node.right, gmap, env)])
    if isinstance(node, mfstl.MfoImplies):
        left, right = _ground(node.left, gmap, env), _ground(node.right, gmap, env)
        if isinstance(left, ltl.Const):
            return right if left.value else ltl.TRUE
        if isinstance(right, ltl.Const):
            return ltl.TRUE if right.value else ltl.negate(left)
        return ltl.Implies(left, right)
    if isinstance(node, mfstl.QUANTIFIERS):
        sort = mfstl.resolve_sort(node.sort, gmap.alphabet)
        if sort is None or sort not in gmap.alphabet:
            raise GroundingError(f"variable {node.variable} has no known client type")
        size = gmap.size(sort)
        if size == 0:
            raise GroundingError(
                f"variable {node.variable} quantifies over {sort}, whose bound is 0"
            )
        parts = (_ground(node.body, gmap, {**env, node.variable: (sort, j)}) for j in range(1, size + 1))
        return ltl.disj(parts) if isinstance(node, mfstl.Exists) else ltl.conj(parts)
    raise TypeError(f"not an MFO formula: {node!r}")


def ground_mfo(
    sentence: mfstl.MfoFormula,
    bounds: BoundProfile | GroundingMap,
    *,
    strict_prose: bool = False,
) -> ltl.LtlFormula:
    """Propositional formula equivalent to ``sentence`` on the bounded domains."""
    return _ground(sentence, _as_map(bounds, strict_prose), {})


def ground_mfstl(
    formula: mfstl.MfstlFormula,
    bounds: BoundProfile | GroundingMap,
    *,
    strict_prose: bool = False,
) -> ltl.LtlFormula:
    """Replace every embedded sentence by its grounding; keep the temporal skeleton."""
    gmap = _as_map(bounds, strict_prose)
    clashes = sorted(mfstl.server_props(formula) & gmap.atoms())
    if clashes:
        raise GroundingError(f"server propositions collide with flag atoms: {', '.join(clashes)}")

    def walk(node: mfstl.MfstlFormula) -> ltl.LtlFormula:
        if isinstance(node, mfstl.Truth):
            return ltl.Const(node.value)
        if isinstance(node, mfstl.ServerProp):
            return ltl.Atom(node.name)
        if isinstance(node, mfstl.Sentence):
            return _ground(node.formula, gmap, {})
        if isinstance(node, mfstl.Not):
            return ltl.Not(walk(node.body))
        if isinstance(node, mfstl.Or):
            return ltl.disj([walk(node.left), walk(node.right)])
        if isinstance(node, mfstl.And):
            return ltl.conj([walk(node.left), walk(node.right)])
        if isinstance(node, mfstl.Implies):
            return ltl.Implies(walk(node.left), walk(node.right))
        if isinstance(node, mfstl.Next):
            return ltl.Next(walk(node.body))
        if isinstance(node, mfstl.Until):
            return ltl.Until(walk(node.left), walk(node.right))
        if isinstance(node, mfstl.Finally):
            return ltl.Finally(walk(node.body))
        if isinstance(node, mfstl.Globally):
            return ltl.Globally(walk(node.body))
        raise TypeError(f"not an MFSTL formula: {node!r}")

    grounded = walk(formula)
    logger.info("grounded formula: %d nodes over %d atoms", ltl.size(grounded), len(ltl.atoms(grounded)))
    return grounded


def check_atom_clash(gmap: GroundingMap, sps: Sps) -> None:
    """Server propositions of ``sps`` must not reuse flag atom names."""
    labels = {name for props in sps.labels.values() for name in props}
    clashes = sorted(labels & gmap.atoms())
    if clashes:
        raise GroundingError(f"server labels collide with flag atoms: {', '.join(clashes)}")


def flag_assignment(instant: mfstl.Instant, gmap: GroundingMap) -> frozenset[str]:
    """Flag atoms induced by a trace instant: p for present requesters, q for present answered."""
    true_atoms: set[str] = set()
    for u in gmap.alphabet.types:
        for index in instant.domain(u):
            if not 1 <= index <= gmap.size(u):
                continue
            if instant.holds(u, index, mfstl.REQ_PREFIX + u):
                true_atoms.add(gmap.request_atom(u, index))
            if instant.holds(u, index, mfstl.ANS_PREFIX + u):
                true_atoms.add(gmap.answer_atom(u, index))
    return frozenset(true_atoms)


def instant_of_flags(true_atoms: Iterable[str], gmap: GroundingMap, props: Iterable[str] = ()) -> mfstl.Instant:
    """Inverse of ``flag_assignment`` on the full domains {1..n_i}."""
    true_atoms = frozenset(true_atoms)
    clients: dict[str, dict[int, frozenset[str]]] = {}
    for u in gmap.alphabet.types:
        members: dict[int, frozenset[str]] = {}
        for j in range(1, gmap.size(u) + 1):
            preds = set()
            if gmap.request_atom(u, j) in true_atoms:
                preds.add(mfstl.REQ_PREFIX + u)
            if gmap.answer_atom(u, j) in true_atoms:
                preds.add(mfstl.ANS_PREFIX + u)
            members[j] = frozenset(preds)
        clients[u] = members
    return mfstl.Instant(frozenset(props), clients)
