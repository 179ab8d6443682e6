#!/usr/bin/env python3
"""
sps_model.py
────────────
Server transition systems with unboundedly many passive clients.

An ``Sps`` is a finite automaton over requests ``req(u)``, answers ``ans(u)``
and the silent action ``tau``. Its configurations pair a server state with
the finite set of active clients of each type; clients of type ``u`` are the
positive integers 1, 2, 3, ... in a fixed enumeration, so a request activates
the least inactive index and an answer retires the least active one.

Everything here is immutable and pure. The configuration space is infinite,
so exploration is depth-bounded: ``reachable`` and
``emptiness_witness_bounded`` never claim more than their depth allows.
"""
from __future__ import annotations

import enum
import logging
from collections import deque
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

logger = logging.getLogger(__name__)


class SpsInputError(ValueError):
    """Malformed SPS, or a state / client type the SPS does not declare."""


class SpsConfigurationError(ValueError):
    """An acceptance question was asked of an SPS without final states."""


# ── alphabet and actions ─────────────────────────────────────────────────────

@dataclass(frozen=True)
class ServiceAlphabet:
    """Ordered client types; the position of a type is its index i."""

    types: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "types", tuple(self.types))
        if not self.types:
            raise SpsInputError("service alphabet must declare at least one client type")
        if len(set(self.types)) != len(self.types):
            raise SpsInputError(f"duplicate client types in {list(self.types)}")

    def index(self, client_type: str) -> int:
        try:
            return self.types.index(client_type)
        except ValueError:
            raise SpsInputError(f"unknown client type: {client_type}") from None

    def __contains__(self, client_type: object) -> bool:
        return client_type in self.types

    def __len__(self) -> int:
        return len(self.types)


class ActionKind(enum.IntEnum):
    # Values fix the canonical action order: tau < req < ans.
    TAU = 0
    REQ = 1
    ANS = 2
    # Deadlock completion in the checker only; never part of an Sps.
    QUIESCENT = 3


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    client_type: str | None = None

    def __post_init__(self) -> None:
        typed = self.kind in (ActionKind.REQ, ActionKind.ANS)
        if typed != (self.client_type is not None):
            raise SpsInputError(f"{self.kind.name.lower()} action with client type {self.client_type!r}")

    @classmethod
    def req(cls, client_type: str) -> Action:
        return cls(ActionKind.REQ, client_type)

    @classmethod
    def ans(cls, client_type: str) -> Action:
        return cls(ActionKind.ANS, client_type)

    def __str__(self) -> str:
        if self.kind is ActionKind.TAU:
            return "tau"
        if self.kind is ActionKind.QUIESCENT:
            return "quiescent"
        return f"{self.kind.name.lower()}({self.client_type})"


TAU = Action(ActionKind.TAU)
QUIESCENT = Action(ActionKind.QUIESCENT)


def parse_action(text: str) -> Action:
    """``req(h)`` / ``ans(h)`` / ``tau`` → Action (no alphabet check)."""
    token = text.strip()
    if token == "tau":
        return TAU
    for kind in (ActionKind.REQ, ActionKind.ANS):
        prefix = kind.name.lower() + "("
        if token.startswith(prefix) and token.endswith(")"):
            name = token[len(prefix):-1].strip()
            if name:
                return Action(kind, name)
    raise SpsInputError(f"not an action: {text!r} (expected req(u), ans(u) or tau)")


# ── the automaton ────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Transition:
    source: str
    action: Action
    target: str


@dataclass(frozen=True)
class Sps:
    """Service for passive clients: states, δ, initial and optional final states.

    ``labels`` maps a state to the server propositions true in it. ``final``
    is ``None`` when the model declares no final states at all, which is
    different from an empty set of final states.
    """

    alphabet: ServiceAlphabet
    states: tuple[str, ...]
    transitions: tuple[Transition, ...]
    initial: frozenset[str]
    final: frozenset[str] | None = None
    labels: Mapping[str, frozenset[str]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "transitions", tuple(dict.fromkeys(self.transitions)))
        object.__setattr__(self, "initial", frozenset(self.initial))
        if self.final is not None:
            object.__setattr__(self, "final", frozenset(self.final))
        object.__setattr__(
            self, "labels", {state: frozenset(props) for state, props in self.labels.items()}
        )
        errors = validate_sps(self)
        if errors:
            raise SpsInputError("; ".join(errors))

    def outgoing(self, state: str) -> tuple[Transition, ...]:
        """δ-transitions leaving ``state`` in canonical order."""
        return tuple(
            sorted(
                (t for t in self.transitions if t.source == state),
                key=lambda t: (action_key(self.alphabet, t.action), t.target),
            )
        )

    def server_labels(self, state: str) -> frozenset[str]:
        return self.labels.get(state, frozenset())

    def used_types(self) -> tuple[str, ...]:
        used = {t.action.client_type for t in self.transitions if t.action.client_type}
        return tuple(u for u in self.alphabet.types if u in used)

    def uses_tau(self) -> bool:
        return any(t.action.kind is ActionKind.TAU for t in self.transitions)


def validate_sps(sps: Sps) -> list[str]:
    errors: list[str] = []
    declared = set(sps.states)
    if len(declared) != len(sps.states):
        errors.append("state names must be unique")
    if not sps.initial:
        errors.append("at least one initial state is required")
    for state in sorted(sps.initial - declared):
        errors.append(f"initial state {state} is not declared")
    for state in sorted((sps.final or frozenset()) - declared):
        errors.append(f"final state {state} is not declared")
    for state in sorted(set(sps.labels) - declared):
        errors.append(f"labelled state {state} is not declared")
    for t in sps.transitions:
        for endpoint in (t.source, t.target):
            if endpoint not in declared:
                errors.append(f"transition {t.source} -{t.action}-> {t.target}: state {endpoint} is not declared")
        if t.action.kind is ActionKind.QUIESCENT:
            errors.append(f"transition {t.source} -{t.action}-> {t.target}: quiescent is not an SPS action")
        elif t.action.client_type is not None and t.action.client_type not in sps.alphabet:
            errors.append(f"transition {t.source} -{t.action}-> {t.target}: unknown client type {t.action.client_type}")
    return errors


def action_key(alphabet: ServiceAlphabet, action: Action) -> tuple[int, int]:
    """Canonical action order: tau < req < ans, then client-type order."""
    index = alphabet.index(action.client_type) if action.client_type is not None else -1
    return (int(action.kind), index)


# ── configurations and runs ──────────────────────────────────────────────────

@dataclass(frozen=True)
class Configuration:
    """Server state and the active client indices per type (alphabet order)."""

    state: str
    active: tuple[frozenset[int], ...]

    def sort_key(self) -> tuple:
        return (self.state, tuple(tuple(sorted(indices)) for indices in self.active))

    def sizes(self) -> tuple[int, ...]:
        return tuple(len(indices) for indices in self.active)


@dataclass(frozen=True)
class Run:
    word: tuple[Action, ...]
    configs: tuple[Configuration, ...]


def initial_configurations(sps: Sps) -> tuple[Configuration, ...]:
    empty = tuple(frozenset() for _ in sps.alphabet.types)
    return tuple(Configuration(state, empty) for state in sorted(sps.initial))


def is_initial(sps: Sps, config: Configuration) -> bool:
    return config.state in sps.initial and not any(config.active)


def format_configuration(sps: Sps, config: Configuration) -> str:
    parts = [
        f"{client_type}={{{','.join(str(i) for i in sorted(indices))}}}"
        for client_type, indices in zip(sps.alphabet.types, config.active)
    ]
    return f"({config.state}, {', '.join(parts)})"


def _check_action(sps: Sps, action: Action) -> None:
    if action.kind is ActionKind.QUIESCENT:
        raise SpsInputError("quiescent is not an SPS action")
    if action.client_type is not None and action.client_type not in sps.alphabet:
        raise SpsInputError(f"unknown client type: {action.client_type}")


def _successor_active(
    sps: Sps, active: tuple[frozenset[int], ...], action: Action
) -> tuple[frozenset[int], ...] | None:
    if action.kind is ActionKind.TAU:
        return active
    i = sps.alphabet.index(action.client_type)
    clients = active[i]
    if action.kind is ActionKind.REQ:
        least_free = next(n for n in range(1, len(clients) + 2) if n not in clients)
        changed = clients | {least_free}
    else:
        if not clients:
            return None
        changed = clients - {min(clients)}
    return active[:i] + (changed,) + active[i + 1:]


def step(sps: Sps, config: Configuration, action: Action) -> frozenset[Configuration]:
    """Successors of ``config`` under ``action``; empty when the step is blocked."""
    if config.state not in sps.states:
        raise SpsInputError(f"unknown state: {config.state}")
    if len(config.active) != len(sps.alphabet):
        raise SpsInputError(
            f"configuration has {len(config.active)} client sets, alphabet has {len(sps.alphabet)} types"
        )
    _check_action(sps, action)
    active = _successor_active(sps, config.active, action)
    if active is None:
        return frozenset()
    return frozenset(
        Configuration(t.target, active)
        for t in sps.outgoing(config.state)
        if t.action == action
    )


def _sorted(configs: Iterable[Configuration]) -> list[Configuration]:
    return sorted(configs, key=Configuration.sort_key)


def run_all(sps: Sps, word: Sequence[Action]) -> frozenset[Run]:
    """Every run on ``word`` from every initial configuration."""
    for action in word:
        _check_action(sps, action)
    partial = [(config,) for config in initial_configurations(sps)]
    for action in word:
        partial = [
            trace + (successor,)
            for trace in partial
            for successor in _sorted(step(sps, trace[-1], action))
        ]
    return frozenset(Run(tuple(word), trace) for trace in partial)


def accepts(sps: Sps, word: Sequence[Action]) -> bool:
    if sps.final is None:
        raise SpsConfigurationError("acceptance needs final states; the SPS declares none")
    return any(run.configs[-1].state in sps.final for run in run_all(sps, word))


def _moves(sps: Sps, config: Configuration) -> list[tuple[Action, Configuration]]:
    """Enabled (action, successor) pairs in canonical order."""
    moves = []
    for t in sps.outgoing(config.state):
        active = _successor_active(sps, config.active, t.action)
        if active is not None:
            moves.append((t.action, Configuration(t.target, active)))
    return moves


def reachable(sps: Sps, depth: int) -> tuple[Configuration, ...]:
    """Configurations reachable in at most ``depth`` steps, in BFS order."""
    if depth < 0:
        raise SpsInputError("depth must be non-negative")
    layer = list(initial_configurations(sps))
    seen = dict.fromkeys(layer)
    for _ in range(depth):
        discovered = {
            successor
            for config in layer
            for _, successor in _moves(sps, config)
            if successor not in seen
        }
        layer = _sorted(discovered)
        if not layer:
            break
        seen.update(dict.fromkeys(layer))
    logger.debug("reachable(depth=%d): %d configurations", depth, len(seen))
    return tuple(seen)


def emptiness_witness_bounded(sps: Sps, depth: int) -> tuple[Action, ...] | None:
    """A shortest accepted word of length ≤ depth, or None.

    None only means that no witness exists within ``depth`` steps; it says
    nothing about the language beyond that horizon.
    """
    if sps.final is None:
        raise SpsConfigurationError("emptiness needs final states; the SPS declares none")
    if depth < 0:
        raise SpsInputError("depth must be non-negative")
    parent: dict[Configuration, tuple[Configuration, Action] | None] = {}
    queue: deque[tuple[Configuration, int]] = deque()
    for config in initial_configurations(sps):
        parent[config] = None
        queue.append((config, 0))
    while queue:
        config, distance = queue.popleft()
        if config.state in sps.final:
            word: list[Action] = []
            link = parent[config]
            while link is not None:
                config, action = link
                word.append(action)
                link = parent[config]
            return tuple(reversed(word))
        if distance == depth:
            continue
        for action, successor in _moves(sps, config):
            if successor not in parent:
                parent[successor] = (config, action)
                queue.append((successor, distance + 1))
    return None
