#!/usr/bin/env python3
"""
bounded_expansion.py
────────────────────
The finite interpreted SPS: counters bounded by n_i plus request/answer flags.

A state is ``(s, σ, flags)``. From the initial states ``(s, 0…0, ∅)``,
every δ-transition fires with

    tau      σ and the p-flags unchanged
    req(u_i) σ[i] += 1, add p_i[σ[i]+1]
    ans(u_i) needs σ[i] ≥ 1; σ[i] -= 1, drop p_i[σ[i]], add q_i[σ[i]]

and every q-flag of the source is cleared in the successor, so an answer
flag is true for exactly one instant.

At a saturated counter (request at σ[i] = n_i) or an empty one (answer at
σ[i] = 0) the ``block`` discipline disables the transition. The ``freeze``
discipline takes it: the server state follows δ, counters and p-flags stay,
q-flags are still cleared. Freeze is the semantics of the emitted SMV.

Only reachable states are built.
"""
from __future__ import annotations

import logging
from collections import deque
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

import networkx as nx

import config
from grounding import GroundingMap, check_atom_clash, instant_of_flags
from mfstl import BoundProfile, TraceModel
from sps_model import Action, ActionKind, Sps, action_key

logger = logging.getLogger(__name__)

AT_BOUND_CHOICES = ("block", "freeze")


class ExpansionError(ValueError):
    """The bound profile does not cover the SPS."""


class CapacityError(RuntimeError):
    """A configured state or enumeration limit was exceeded."""


@dataclass(frozen=True)
class InterpretedState:
    state: str
    counters: tuple[int, ...]
    flags: frozenset[str] = frozenset()

    def sort_key(self) -> tuple:
        return (self.state, self.counters, tuple(sorted(self.flags)))

    def __str__(self) -> str:
        counters = ",".join(str(c) for c in self.counters)
        return f"({self.state}, <{counters}>, {{{', '.join(sorted(self.flags))}}})"


@dataclass(frozen=True)
class KripkeTransition:
    source: InterpretedState
    action: Action
    target: InterpretedState


class KripkeStructure:
    """Explicit labelled transition structure; immutable after construction.

    ``states`` keeps discovery order, which is the canonical order of every
    dump and of the checker's exploration.
    """

    def __init__(
        self,
        states: Iterable[InterpretedState],
        initial: Iterable[InterpretedState],
        transitions: Iterable[KripkeTransition],
        server_labels: Mapping[str, frozenset[str]],
        gmap: GroundingMap,
        at_bound: str,
        completed_deadlocks: Iterable[InterpretedState] = (),
    ):
        self.states: tuple[InterpretedState, ...] = tuple(states)
        self.initial: tuple[InterpretedState, ...] = tuple(initial)
        self.transitions: tuple[KripkeTransition, ...] = tuple(transitions)
        self.server_labels = {s: frozenset(p) for s, p in server_labels.items()}
        self.gmap = gmap
        self.at_bound = at_bound
        self.completed_deadlocks: tuple[InterpretedState, ...] = tuple(completed_deadlocks)
        self.order = {state: k for k, state in enumerate(self.states)}
        outgoing: dict[InterpretedState, list[tuple[Action, InterpretedState]]] = {s: [] for s in self.states}
        for t in self.transitions:
            outgoing[t.source].append((t.action, t.target))
        self._outgoing = {s: tuple(moves) for s, moves in outgoing.items()}

    def successors(self, state: InterpretedState) -> tuple[tuple[Action, InterpretedState], ...]:
        return self._outgoing[state]

    def label(self, state: InterpretedState) -> frozenset[str]:
        return self.server_labels.get(state.state, frozenset()) | state.flags

    def label_universe(self) -> frozenset[str]:
        props = {name for names in self.server_labels.values() for name in names}
        return frozenset(props) | self.gmap.atoms()

    def deadlocks(self) -> tuple[InterpretedState, ...]:
        return tuple(s for s in self.states if not self._outgoing[s])

    def __len__(self) -> int:
        return len(self.states)

    def to_networkx(self) -> nx.MultiDiGraph:
        graph = nx.MultiDiGraph()
        for state in self.states:
            graph.add_node(
                state,
                server_state=state.state,
                counters=state.counters,
                label=self.label(state),
                initial=state in self.initial,
            )
        for t in self.transitions:
            graph.add_edge(t.source, t.target, key=str(t.action), action=str(t.action))
        return graph


def label(state: InterpretedState, sps: Sps) -> frozenset[str]:
    """Server labels of the underlying state together with the flags."""
    return sps.server_labels(state.state) | state.flags


def _q_atoms(gmap: GroundingMap) -> frozenset[str]:
    return frozenset(
        gmap.answer_atom(u, j) for u in gmap.alphabet.types for j in range(1, gmap.size(u) + 1)
    )


def _fire(
    gmap: GroundingMap,
    source: InterpretedState,
    action: Action,
    target: str,
    at_bound: str,
    q_atoms: frozenset[str],
) -> InterpretedState | None:
    flags = source.flags - q_atoms
    counters = source.counters
    if action.kind is ActionKind.TAU:
        return InterpretedState(target, counters, flags)
    u = action.client_type
    i = gmap.alphabet.index(u)
    sigma = counters[i]
    if action.kind is ActionKind.REQ and sigma < gmap.size(u):
        counters = counters[:i] + (sigma + 1,) + counters[i + 1:]
        return InterpretedState(target, counters, flags | {gmap.request_atom(u, sigma + 1)})
    if action.kind is ActionKind.ANS and sigma >= 1:
        counters = counters[:i] + (sigma - 1,) + counters[i + 1:]
        flags = (flags - {gmap.request_atom(u, sigma)}) | {gmap.answer_atom(u, sigma)}
        return InterpretedState(target, counters, flags)
    if at_bound == "freeze":
        return InterpretedState(target, counters, flags)
    return None


def expand(
    sps: Sps,
    bounds: BoundProfile,
    at_bound: str = "block",
    *,
    max_states: int | None = None,
) -> KripkeStructure:
    """Reachable part of the interpreted SPS for ``bounds``."""
    if at_bound not in AT_BOUND_CHOICES:
        raise ExpansionError(f"at_bound must be one of {', '.join(AT_BOUND_CHOICES)}; got {at_bound!r}")
    if bounds.alphabet != sps.alphabet:
        raise ExpansionError(
            f"bound profile types {list(bounds.alphabet.types)} do not match the SPS types {list(sps.alphabet.types)}"
        )
    limit = config.MAX_STATES if max_states is None else max_states
    gmap = GroundingMap.for_profile(bounds)
    unbounded = [u for u in sps.used_types() if gmap.size(u) == 0]
    if unbounded:
        raise ExpansionError(
            f"client types used by the SPS have bound 0: {', '.join(unbounded)}; "
            "the formula must quantify over every type the model uses"
        )
    check_atom_clash(gmap, sps)
    q_atoms = _q_atoms(gmap)

    zeros = tuple(0 for _ in sps.alphabet.types)
    initial = [InterpretedState(s, zeros) for s in sorted(sps.initial)]
    seen: dict[InterpretedState, None] = dict.fromkeys(initial)
    transitions: list[KripkeTransition] = []
    queue = deque(initial)
    while queue:
        source = queue.popleft()
        moves: set[tuple[Action, InterpretedState]] = set()
        for t in sps.outgoing(source.state):
            target = _fire(gmap, source, t.action, t.target, at_bound, q_atoms)
            if target is not None:
                moves.add((t.action, target))
        for action, target in sorted(moves, key=lambda m: (action_key(sps.alphabet, m[0]), m[1].sort_key())):
            transitions.append(KripkeTransition(source, action, target))
            if target not in seen:
                seen[target] = None
                if len(seen) > limit:
                    raise CapacityError(f"bounded expansion exceeds {limit} states")
                queue.append(target)
        logger.debug("expanded %s: %d successors", source, len(moves))

    structure = KripkeStructure(seen, initial, transitions, sps.labels, gmap, at_bound)
    logger.info(
        "expanded structure: %d states, %d transitions (%s at bound)",
        len(structure.states), len(structure.transitions), at_bound,
    )
    return structure


def dump_structure(structure: KripkeStructure) -> str:
    """Canonical text: one line per state, then one line per transition."""
    index = {state: k for k, state in enumerate(structure.states)}
    lines = []
    for k, state in enumerate(structure.states):
        marker = "*" if state in structure.initial else " "
        counters = ",".join(str(c) for c in state.counters)
        flags = " ".join(sorted(state.flags))
        labels = " ".join(sorted(structure.label(state)))
        lines.append(f"{marker}S{k}: {state.state} <{counters}> flags[{flags}] labels[{labels}]")
    for t in structure.transitions:
        lines.append(f"S{index[t.source]} -{t.action}-> S{index[t.target]}")
    return "\n".join(lines) + "\n"


def trace_model_of(
    path: Sequence[InterpretedState], loop_start: int, structure: KripkeStructure
) -> TraceModel:
    """Client-level trace of a lasso path: full domains {1..n_i}, predicates read off the flags."""
    instants = [
        instant_of_flags(state.flags, structure.gmap, structure.server_labels.get(state.state, frozenset()))
        for state in path
    ]
    return TraceModel.lasso(instants, loop_start)
