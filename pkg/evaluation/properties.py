"""
evaluation/properties.py

Property checks behind the acceptance harness, shared with the test suite:

  * grounding adequacy: client-sentence semantics vs. the grounded formula,
    exhaustively over flag assignments that respect the p/q exclusion, or
    on sampled assignments for domains too wide to enumerate;
  * structure invariants of a bounded expansion (counter/flag coherence,
    exclusion, one-instant answer flags);
  * simulation agreement between the unbounded model and its expansion
    for every word up to a length, within the bound.

Random client sentences come from a seeded generator so a failing case can
be replayed from its seed.
"""

from __future__ import annotations

import itertools
import random
from collections.abc import Iterator, Sequence

from evaluation._pipeline import grounding, ltl, mfstl, sps_model

NO_FLAG, REQUEST_FLAG, ANSWER_FLAG = 0, 1, 2


# ── random client sentences ─────────────────────────────────────────────────

def random_sentence(
    rng: random.Random,
    alphabet: sps_model.ServiceAlphabet,
    max_quantifiers: int = 2,
    max_depth: int = 4,
) -> mfstl.MfoFormula:
    """A closed client sentence with 1..max_quantifiers typed binders."""
    remaining = [rng.randint(1, max_quantifiers)]
    fresh = itertools.count()

    def quantified(scope: list[tuple[str, str]], depth: int) -> mfstl.MfoFormula:
        remaining[0] -= 1
        variable = f"x{next(fresh)}"
        sort = rng.choice(alphabet.types)
        body = formula(scope + [(variable, sort)], depth - 1)
        node = rng.choice((mfstl.Exists, mfstl.Forall))
        return node(variable, sort, body)

    def formula(scope: list[tuple[str, str]], depth: int) -> mfstl.MfoFormula:
        if not scope:
            return quantified(scope, depth)
        options = ["pred", "eq"]
        if depth > 0:
            options += ["not", "and", "or", "implies"]
            if remaining[0] > 0:
                options += ["quantifier"]
        choice = rng.choice(options)
        if choice == "pred":
            variable, sort = rng.choice(scope)
            prefix = rng.choice((mfstl.REQ_PREFIX, mfstl.ANS_PREFIX))
            return mfstl.Pred(prefix + sort, variable)
        if choice == "eq":
            (left, sort), = rng.sample(scope, 1)
            same_sort = [name for name, s in scope if s == sort]
            return mfstl.Eq(left, rng.choice(same_sort))
        if choice == "quantifier":
            return quantified(scope, depth)
        if choice == "not":
            return mfstl.MfoNot(formula(scope, depth - 1))
        kind = {"and": mfstl.MfoAnd, "or": mfstl.MfoOr, "implies": mfstl.MfoImplies}[choice]
        return kind(formula(scope, depth - 1), formula(scope, depth - 1))

    return formula([], max_depth)


# ── grounding adequacy ───────────────────────────────────────────────────────

def sentence_types(sentence: mfstl.MfoFormula, alphabet: sps_model.ServiceAlphabet) -> list[str]:
    sorts = {mfstl.resolve_sort(binder.sort, alphabet) for binder in mfstl.binders(sentence)}
    return [u for u in alphabet.types if u in sorts]


def _flag_slots(gmap: grounding.GroundingMap, types: Sequence[str]) -> list[tuple[str, int]]:
    return [(u, j) for u in types for j in range(1, gmap.size(u) + 1)]


def _atoms_of(gmap: grounding.GroundingMap, slots, choice) -> frozenset[str]:
    atoms = set()
    for (u, j), flag in zip(slots, choice):
        if flag == REQUEST_FLAG:
            atoms.add(gmap.request_atom(u, j))
        elif flag == ANSWER_FLAG:
            atoms.add(gmap.answer_atom(u, j))
    return frozenset(atoms)


def flag_assignments(gmap: grounding.GroundingMap, types: Sequence[str]) -> Iterator[frozenset[str]]:
    """Every assignment of the flags of ``types`` in which no slot has both p and q."""
    slots = _flag_slots(gmap, types)
    for choice in itertools.product((NO_FLAG, REQUEST_FLAG, ANSWER_FLAG), repeat=len(slots)):
        yield _atoms_of(gmap, slots, choice)


def sampled_flag_assignments(
    gmap: grounding.GroundingMap, types: Sequence[str], rng: random.Random, samples: int
) -> Iterator[frozenset[str]]:
    """``samples`` random assignments drawn from the same space as flag_assignments."""
    slots = _flag_slots(gmap, types)
    for _ in range(samples):
        yield _atoms_of(gmap, slots, [rng.choice((NO_FLAG, REQUEST_FLAG, ANSWER_FLAG)) for _ in slots])


def adequacy_mismatches(
    sentence: mfstl.MfoFormula,
    gmap: grounding.GroundingMap,
    rng: random.Random | None = None,
    samples: int = 200,
) -> list[frozenset[str]]:
    """Flag assignments on which the sentence and its grounding disagree.

    Exhaustive unless ``rng`` is given; then ``samples`` assignments are drawn,
    which is how domains of size 8 are covered.
    """
    grounded = grounding.ground_mfo(sentence, gmap)
    types = sentence_types(sentence, gmap.alphabet)
    if rng is None:
        assignments = flag_assignments(gmap, types)
    else:
        assignments = sampled_flag_assignments(gmap, types, rng, samples)
    mismatches = []
    for true_atoms in assignments:
        model = mfstl.TraceModel.finite([grounding.instant_of_flags(true_atoms, gmap)])
        if mfstl.eval_mfo(model, {}, 0, sentence) != ltl.eval_propositional(grounded, true_atoms):
            mismatches.append(true_atoms)
    return mismatches


# ── bounded expansion ────────────────────────────────────────────────────────

def invariant_violations(structure) -> list[str]:
    """Coherence, exclusion and answer-pulse violations of an expanded structure."""
    gmap = structure.gmap
    types = gmap.alphabet.types
    problems: list[str] = []

    def slots(state, namer, u) -> set[int]:
        return {j for j in range(1, gmap.size(u) + 1) if namer(u, j) in state.flags}

    for state in structure.states:
        for i, u in enumerate(types):
            pending = slots(state, gmap.request_atom, u)
            answered = slots(state, gmap.answer_atom, u)
            if pending != set(range(1, state.counters[i] + 1)):
                problems.append(f"{state}: pending slots of {u} {sorted(pending)} disagree with the counter")
            if pending & answered:
                problems.append(f"{state}: slots of {u} both pending and answered {sorted(pending & answered)}")
            if len(answered) > 1:
                problems.append(f"{state}: several answer flags of {u}")

    all_answers = frozenset(gmap.answer_atom(u, j) for u in types for j in range(1, gmap.size(u) + 1))
    for t in structure.transitions:
        if t.source.flags & all_answers & t.target.flags:
            problems.append(f"{t.source} -{t.action}-> {t.target}: answer flag outlives one instant")
        for i, u in enumerate(types):
            answered = slots(t.target, gmap.answer_atom, u)
            if not answered:
                continue
            if t.action != sps_model.Action.ans(u) or answered != {t.source.counters[i]}:
                problems.append(f"{t.source} -{t.action}-> {t.target}: answer flag of {u} without a matching answer")
    return problems


def alphabet_actions(sps: sps_model.Sps) -> list[sps_model.Action]:
    actions = [sps_model.TAU] if sps.uses_tau() else []
    for u in sps.alphabet.types:
        actions += [sps_model.Action.req(u), sps_model.Action.ans(u)]
    return actions


def simulation_mismatches(sps: sps_model.Sps, structure, max_length: int) -> list[str]:
    """Words up to ``max_length`` whose (state, client counts) disagree.

    The structure must come from block expansion; runs of the unbounded
    model that leave the bound are cut off.
    """
    gmap = structure.gmap
    limits = tuple(gmap.size(u) for u in gmap.alphabet.types)
    actions = alphabet_actions(sps)

    def within(config: sps_model.Configuration) -> bool:
        return all(size <= limit for size, limit in zip(config.sizes(), limits))

    mismatches: list[str] = []
    frontier = [((), frozenset(sps_model.initial_configurations(sps)), frozenset(structure.initial))]
    for length in range(max_length + 1):
        following = []
        for word, configs, states in frontier:
            core = {(c.state, c.sizes()) for c in configs}
            bounded = {(s.state, s.counters) for s in states}
            if core != bounded:
                shown = ",".join(str(a) for a in word) or "(empty word)"
                mismatches.append(f"{shown}: model {sorted(core)} vs expansion {sorted(bounded)}")
            if length == max_length:
                continue
            for action in actions:
                next_configs = frozenset(
                    succ for c in configs for succ in sps_model.step(sps, c, action) if within(succ)
                )
                next_states = frozenset(
                    target for s in states for a, target in structure.successors(s) if a == action
                )
                if next_configs or next_states:
                    following.append((word + (action,), next_configs, next_states))
        frontier = following
    return mismatches
