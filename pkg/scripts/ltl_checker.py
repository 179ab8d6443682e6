#!/usr/bin/env python3
"""
ltl_checker.py
──────────────
Explicit-state LTL model checking of a KripkeStructure.

    check(K, φ):  ¬φ  →  Büchi automaton  →  product with K  →  accepting lasso?

The automaton comes from the tableau construction (nodes carry the formulas
they promise now and next; propositional subformulas are kept whole as state
constraints), degeneralised with a round-robin counter. Emptiness is decided
on the explicit product: strongly connected components come from networkx,
the counterexample is the accepting lasso with the shortest stem, then the
shortest cycle, then the least action sequence in canonical order.

States without successors are completed with a ``quiescent`` self-loop so
every finite run becomes an infinite path; the verdict lists them.

``brute_force_check`` enumerates lassos directly and evaluates φ on each; it
shares nothing with the automaton path and is the oracle the tests use.
"""
from __future__ import annotations

import itertools
import logging
from collections import deque
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import networkx as nx

import config
import ltl
from bounded_expansion import CapacityError, InterpretedState, KripkeStructure, KripkeTransition
from ltl import LtlFormula
from sps_model import QUIESCENT, Action

logger = logging.getLogger(__name__)


class CheckerInputError(ValueError):
    """The structure has no initial state."""


# ── propositional satisfiability of tableau constraints ──────────────────────

def _assign(formula: LtlFormula, atom: str, value: bool) -> LtlFormula:
    if isinstance(formula, ltl.Atom):
        return ltl.Const(value) if formula.name == atom else formula
    if isinstance(formula, ltl.Const):
        return formula
    if isinstance(formula, ltl.Not):
        return ltl.negate(_assign(formula.body, atom, value))
    if isinstance(formula, ltl.And):
        return ltl.conj(_assign(op, atom, value) for op in formula.operands)
    if isinstance(formula, ltl.Or):
        return ltl.disj(_assign(op, atom, value) for op in formula.operands)
    if isinstance(formula, ltl.Implies):
        left = _assign(formula.left, atom, value)
        return ltl.disj([ltl.negate(left), _assign(formula.right, atom, value)])
    raise TypeError(f"not a propositional formula: {formula!r}")


def satisfiable(formula: LtlFormula) -> bool:
    """Splitting on atoms with constant folding after every assignment."""
    if isinstance(formula, ltl.Const):
        return formula.value
    atom = min(ltl.atoms(formula))
    return satisfiable(_assign(formula, atom, True)) or satisfiable(_assign(formula, atom, False))


# ── Büchi automata ───────────────────────────────────────────────────────────

@dataclass(frozen=True)
class BuchiAutomaton:
    """State-labelled Büchi automaton: entering state q reads a letter that
    satisfies ``constraint[q]``. Runs start in an initial state reading the
    first letter."""

    states: tuple[int, ...]
    initial: frozenset[int]
    accepting: frozenset[int]
    constraint: dict[int, LtlFormula]
    successors: dict[int, tuple[int, ...]]
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def transitions(self) -> tuple[tuple[int, LtlFormula, int], ...]:
        return tuple(
            (source, self.constraint[target], target)
            for source in self.states
            for target in self.successors[source]
        )

    def enabled(self, state: int, letter: frozenset[str]) -> bool:
        key = (state, letter)
        if key not in self._cache:
            self._cache[key] = ltl.eval_propositional(self.constraint[state], letter)
        return self._cache[key]

    def __len__(self) -> int:
        return len(self.states)


def _key(formula: LtlFormula) -> str:
    return repr(formula)


@dataclass
class _Node:
    incoming: set[int]
    new: set[LtlFormula]
    old: set[LtlFormula] = field(default_factory=set)
    next: set[LtlFormula] = field(default_factory=set)
    ident: int = -1

    def fork(self, *, new: Iterable[LtlFormula] = (), old: Iterable[LtlFormula] = (), nxt: Iterable[LtlFormula] = ()) -> _Node:
        child = _Node(set(self.incoming), set(self.new), set(self.old) | set(old), set(self.next) | set(nxt))
        child.new |= {f for f in new if f not in child.old}
        return child

    def propositional(self) -> LtlFormula:
        return ltl.conj(sorted((f for f in self.old if ltl.is_temporal_free(f)), key=_key))


_INIT = 0


def _tableau(formula: LtlFormula) -> list[_Node]:
    registry: dict[tuple[frozenset, frozenset], _Node] = {}
    nodes: list[_Node] = []
    stack = [_Node({_INIT}, {formula})]
    while stack:
        node = stack.pop()
        if not node.new:
            signature = (frozenset(node.old), frozenset(node.next))
            existing = registry.get(signature)
            if existing is not None:
                existing.incoming |= node.incoming
                continue
            if not satisfiable(node.propositional()):
                continue
            node.ident = len(nodes) + 1
            registry[signature] = node
            nodes.append(node)
            stack.append(_Node({node.ident}, set(node.next)))
            continue
        eta = min(node.new, key=_key)
        node.new.discard(eta)
        if eta in node.old:
            stack.append(node)
        elif ltl.is_temporal_free(eta):
            if eta == ltl.FALSE or ltl.nnf(ltl.Not(eta)) in node.old:
                continue
            if eta != ltl.TRUE:
                node.old.add(eta)
            stack.append(node)
        elif isinstance(eta, ltl.And):
            stack.append(node.fork(new=eta.operands, old=[eta]))
        elif isinstance(eta, ltl.Or):
            for operand in reversed(eta.operands):
                stack.append(node.fork(new=[operand], old=[eta]))
        elif isinstance(eta, ltl.Until):
            stack.append(node.fork(new=[eta.right], old=[eta]))
            stack.append(node.fork(new=[eta.left], old=[eta], nxt=[eta]))
        elif isinstance(eta, ltl.Release):
            stack.append(node.fork(new=[eta.left, eta.right], old=[eta]))
            stack.append(node.fork(new=[eta.right], old=[eta], nxt=[eta]))
        elif isinstance(eta, ltl.Next):
            stack.append(node.fork(old=[eta], nxt=[eta.body]))
        else:
            raise TypeError(f"formula not in negation normal form: {eta!r}")
    return nodes


def _untils(formula: LtlFormula) -> list[ltl.Until]:
    found: dict[LtlFormula, None] = {}

    def walk(node: LtlFormula) -> None:
        if isinstance(node, ltl.Until):
            found[node] = None
        for child in ltl.children(node):
            walk(child)

    walk(formula)
    return sorted(found, key=_key)


def ltl_to_buchi(formula: LtlFormula) -> BuchiAutomaton:
    """Büchi automaton accepting exactly the infinite words satisfying ``formula``."""
    normal = ltl.nnf(formula)
    nodes = _tableau(normal)
    acceptance = [
        frozenset(
            n.ident for n in nodes
            if u not in n.old or u.right in n.old or u.right == ltl.TRUE
        )
        for u in _untils(normal)
    ]
    everything = frozenset(n.ident for n in nodes)
    if not acceptance:
        acceptance = [everything]
    rounds = len(acceptance)

    predecessors = {n.ident: n.incoming for n in nodes}
    successors: dict[int, list[int]] = {n.ident: [] for n in nodes}
    for n in nodes:
        for source in n.incoming:
            if source != _INIT:
                successors[source].append(n.ident)

    # Degeneralise: state (q, k) waits for acceptance set k.
    number: dict[tuple[int, int], int] = {}
    for n in nodes:
        for k in range(rounds):
            number[(n.ident, k)] = len(number)
    by_ident = {n.ident: n for n in nodes}
    constraint = {}
    edges: dict[int, tuple[int, ...]] = {}
    for (q, k), state in number.items():
        constraint[state] = by_ident[q].propositional()
        k_next = (k + 1) % rounds if q in acceptance[k] else k
        edges[state] = tuple(number[(target, k_next)] for target in sorted(successors[q]))
    automaton = BuchiAutomaton(
        states=tuple(number.values()),
        initial=frozenset(number[(q, 0)] for q, incoming in predecessors.items() if _INIT in incoming),
        accepting=frozenset(number[(q, 0)] for q in acceptance[0]),
        constraint=constraint,
        successors=edges,
    )
    logger.info("buchi automaton: %d states, %d acceptance sets", len(automaton), rounds)
    return automaton


def _accepting_components(graph: nx.DiGraph, accepting) -> list[set]:
    """Non-trivial strongly connected components holding an accepting node."""
    found = []
    for component in nx.strongly_connected_components(graph):
        if len(component) == 1:
            (only,) = component
            if not graph.has_edge(only, only):
                continue
        if any(accepting(node) for node in component):
            found.append(component)
    return found


def accepts_lasso(automaton: BuchiAutomaton, stem: Sequence[Iterable[str]], cycle: Sequence[Iterable[str]]) -> bool:
    """Does ``automaton`` accept the word ``stem · cycle^ω``?"""
    if not cycle:
        raise ValueError("the cycle of a lasso cannot be empty")
    letters = [frozenset(x) for x in stem] + [frozenset(x) for x in cycle]
    loop_start = len(stem)
    following = [j + 1 for j in range(len(letters) - 1)] + [loop_start]
    graph = nx.DiGraph()
    queue = deque((0, q) for q in sorted(automaton.initial) if automaton.enabled(q, letters[0]))
    graph.add_nodes_from(queue)
    while queue:
        position, q = queue.popleft()
        nxt = following[position]
        for target in automaton.successors[q]:
            if automaton.enabled(target, letters[nxt]):
                node = (nxt, target)
                if node not in graph:
                    queue.append(node)
                graph.add_edge((position, q), node)
    return bool(_accepting_components(graph, lambda node: node[1] in automaton.accepting))


# ── verdicts ─────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Lasso:
    """``stem[0]`` is ``(None, initial state)``; the last cycle state equals the last stem state."""

    stem: tuple[tuple[Action | None, InterpretedState], ...]
    cycle: tuple[tuple[Action, InterpretedState], ...]

    def path(self) -> tuple[list[InterpretedState], int]:
        """Positions of the infinite path and the index the cycle returns to."""
        states = [state for _, state in self.stem] + [state for _, state in self.cycle[:-1]]
        return states, len(self.stem) - 1

    def actions(self) -> tuple[Action, ...]:
        return tuple(a for a, _ in self.stem[1:]) + tuple(a for a, _ in self.cycle)


@dataclass(frozen=True)
class Verdict:
    holds: bool
    counterexample: Lasso | None = None
    completed_deadlocks: tuple[InterpretedState, ...] = ()
    unknown_atoms: frozenset[str] = frozenset()


def complete_deadlocks(structure: KripkeStructure) -> KripkeStructure:
    """Add a quiescent self-loop to every state without successors."""
    stuck = structure.deadlocks()
    if not stuck:
        return structure
    logger.warning("completed %d deadlock states with quiescent self-loops", len(stuck))
    extra = [KripkeTransition(state, QUIESCENT, state) for state in stuck]
    return KripkeStructure(
        structure.states,
        structure.initial,
        structure.transitions + tuple(extra),
        structure.server_labels,
        structure.gmap,
        structure.at_bound,
        completed_deadlocks=stuck,
    )


def _unknown_atoms(structure: KripkeStructure, formula: LtlFormula) -> frozenset[str]:
    unknown = ltl.atoms(formula) - structure.label_universe()
    if unknown:
        logger.warning("atoms never labelled in the structure are false everywhere: %s", ", ".join(sorted(unknown)))
    return unknown


def _replays(structure: KripkeStructure, lasso: Lasso) -> bool:
    if lasso.stem[0][1] not in structure.initial or not lasso.cycle:
        return False
    steps = list(lasso.stem[1:]) + list(lasso.cycle)
    previous = lasso.stem[0][1]
    for action, state in steps:
        if (action, state) not in structure.successors(previous):
            return False
        previous = state
    return lasso.cycle[-1][1] == lasso.stem[-1][1]


def _verify_counterexample(structure: KripkeStructure, formula: LtlFormula, lasso: Lasso) -> None:
    if not _replays(structure, lasso):
        raise RuntimeError("counterexample does not replay in the structure")
    states, loop_start = lasso.path()
    if ltl.eval_lasso(formula, [structure.label(s) for s in states], loop_start):
        raise RuntimeError("counterexample satisfies the formula it should violate")


class _Product:
    def __init__(self, structure: KripkeStructure, automaton: BuchiAutomaton):
        self.structure = structure
        self.automaton = automaton
        self.edges: dict[tuple, list[tuple[Action, tuple]]] = {}
        self.parent: dict[tuple, tuple[tuple, Action] | None] = {}
        self.order: dict[tuple, int] = {}
        self.distance: dict[tuple, int] = {}

    def explore(self) -> None:
        queue: deque[tuple] = deque()
        for k in self.structure.initial:
            label = self.structure.label(k)
            for q in sorted(self.automaton.initial):
                if self.automaton.enabled(q, label):
                    self._discover((k, q), None, 0, queue)
        while queue:
            node = queue.popleft()
            k, q = node
            moves = []
            for action, target in self.structure.successors(k):
                label = self.structure.label(target)
                for q2 in self.automaton.successors[q]:
                    if self.automaton.enabled(q2, label):
                        succ = (target, q2)
                        moves.append((action, succ))
                        self._discover(succ, (node, action), self.distance[node] + 1, queue)
            self.edges[node] = moves

    def _discover(self, node: tuple, parent, distance: int, queue: deque) -> None:
        if node in self.order:
            return
        self.order[node] = len(self.order)
        self.parent[node] = parent
        self.distance[node] = distance
        queue.append(node)

    def graph(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(self.order)
        for node, moves in self.edges.items():
            graph.add_edges_from((node, succ) for _, succ in moves)
        return graph

    def stem_to(self, node: tuple) -> list[tuple[Action | None, tuple]]:
        steps = []
        link = self.parent[node]
        while link is not None:
            steps.append((link[1], node))
            node = link[0]
            link = self.parent[node]
        steps.append((None, node))
        return list(reversed(steps))

    def shortest_path(self, source: tuple, targets: set, within: set) -> dict[tuple, list[tuple[Action, tuple]]]:
        """Canonical shortest non-empty paths from ``source`` to each reachable target."""
        paths: dict[tuple, list[tuple[Action, tuple]]] = {}
        seen: set = set()
        queue: deque[tuple[tuple, list]] = deque()
        for action, succ in self.edges[source]:
            if succ in within and succ not in seen:
                seen.add(succ)
                queue.append((succ, [(action, succ)]))
        while queue:
            node, path = queue.popleft()
            if node in targets and node not in paths:
                paths[node] = path
            for action, succ in self.edges[node]:
                if succ in within and succ not in seen:
                    seen.add(succ)
                    queue.append((succ, path + [(action, succ)]))
        return paths


def check(structure: KripkeStructure, formula: LtlFormula) -> Verdict:
    """Does every infinite path from an initial state satisfy ``formula``?"""
    if not structure.initial:
        raise CheckerInputError("the structure has no initial state")
    unknown = _unknown_atoms(structure, formula)
    completed = complete_deadlocks(structure)
    automaton = ltl_to_buchi(ltl.Not(formula))
    product = _Product(completed, automaton)
    product.explore()
    logger.info("product: %d states", len(product.order))

    def accepting(node: tuple) -> bool:
        return node[1] in automaton.accepting

    components = _accepting_components(product.graph(), accepting)
    if not components:
        return Verdict(True, None, completed.completed_deadlocks, unknown)

    # Entry point of the lasso: the earliest-discovered node on an accepting cycle.
    entry = min(
        (node for component in components for node in component),
        key=lambda node: (product.distance[node], product.order[node]),
    )
    component = next(c for c in components if entry in c)
    best: list[tuple[Action, tuple]] | None = None
    for target in sorted((n for n in component if accepting(n)), key=product.order.__getitem__):
        if target == entry:
            back = product.shortest_path(entry, {entry}, component)
            candidate = back.get(entry)
        else:
            there = product.shortest_path(entry, {target}, component).get(target)
            back = product.shortest_path(target, {entry}, component).get(entry)
            candidate = there + back if there is not None and back is not None else None
        if candidate is not None and (best is None or len(candidate) < len(best)):
            best = candidate

    stem = tuple((action, node[0]) for action, node in product.stem_to(entry))
    cycle = tuple((action, node[0]) for action, node in best)
    lasso = Lasso(stem, cycle)
    _verify_counterexample(completed, formula, lasso)
    return Verdict(False, lasso, completed.completed_deadlocks, unknown)


def brute_force_check(
    structure: KripkeStructure,
    formula: LtlFormula,
    stem_max: int | None = None,
    cycle_max: int | None = None,
    *,
    max_states: int | None = None,
    max_lassos: int | None = None,
) -> Verdict:
    """Enumerate lassos by (stem length, cycle length, action order); first violation wins."""
    stem_max = config.BRUTE_STEM_MAX if stem_max is None else stem_max
    cycle_max = config.BRUTE_CYCLE_MAX if cycle_max is None else cycle_max
    max_states = config.BRUTE_MAX_STATES if max_states is None else max_states
    max_lassos = config.BRUTE_MAX_LASSOS if max_lassos is None else max_lassos
    if not structure.initial:
        raise CheckerInputError("the structure has no initial state")
    if len(structure) > max_states:
        raise CapacityError(f"brute-force oracle limited to {max_states} states; structure has {len(structure)}")
    unknown = _unknown_atoms(structure, formula)
    completed = complete_deadlocks(structure)
    counter = itertools.count(1)

    def paths(length: int):
        def extend(path):
            if len(path) == length + 1:
                yield path
                return
            for action, state in completed.successors(path[-1][1]):
                yield from extend(path + [(action, state)])

        for start in completed.initial:
            yield from extend([(None, start)])

    for stem_length in range(stem_max + 1):
        for cycle_length in range(1, cycle_max + 1):
            for path in paths(stem_length + cycle_length):
                if next(counter) > max_lassos:
                    raise CapacityError(f"brute-force oracle limited to {max_lassos} lassos")
                if path[-1][1] != path[stem_length][1]:
                    continue
                labels = [completed.label(state) for _, state in path[:-1]]
                if not ltl.eval_lasso(formula, labels, stem_length):
                    lasso = Lasso(tuple(path[: stem_length + 1]), tuple(path[stem_length + 1:]))
                    return Verdict(False, lasso, completed.completed_deadlocks, unknown)
    return Verdict(True, None, completed.completed_deadlocks, unknown)


def render_counterexample(verdict: Verdict, structure: KripkeStructure) -> str:
    """Numbered steps: action, server state, counters, true atoms."""
    if verdict.holds or verdict.counterexample is None:
        return "property holds\n"
    lasso = verdict.counterexample
    lines = [f"counterexample: stem {len(lasso.stem) - 1} steps, cycle {len(lasso.cycle)} steps"]

    def line(number: int, action: Action | None, state: InterpretedState) -> str:
        counters = ",".join(str(c) for c in state.counters)
        atoms = " ".join(sorted(structure.label(state)))
        return f"{number:>4}  {str(action) if action else 'init':<14}{state.state} <{counters}> {{{atoms}}}"

    for number, (action, state) in enumerate(lasso.stem):
        lines.append(line(number, action, state))
    lines.append("  -- cycle --")
    for number, (action, state) in enumerate(lasso.cycle, start=len(lasso.stem)):
        lines.append(line(number, action, state))
    if verdict.completed_deadlocks:
        lines.append(f"note: {len(verdict.completed_deadlocks)} deadlock states completed with quiescent self-loops")
    return "\n".join(lines) + "\n"
