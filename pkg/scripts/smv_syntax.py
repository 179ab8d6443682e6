#!/usr/bin/env python3
"""
smv_syntax.py
─────────────
Reader for the SMV subset that smv_backend emits, and an explicit-state
interpreter for it.

Subset: MODULE main; IVAR / VAR over boolean, enumerations, integer ranges
and boolean arrays; ASSIGN with init/next and case/esac over conjunctions
of comparisons; LTLSPEC. ``--`` starts a comment.

``simulate_smv`` builds the reachable state graph: a state is
``(loc, counters, true flag atoms)``, an edge is labelled with the input
value that caused it, which makes the graph directly comparable with a
bounded expansion.
"""
from __future__ import annotations

import itertools
import logging
import re
from collections import deque
from dataclasses import dataclass, field

import networkx as nx
from lark import Lark, Transformer, v_args
from lark.exceptions import LarkError, UnexpectedInput

import config
from bounded_expansion import CapacityError

logger = logging.getLogger(__name__)

SMV_GRAMMAR = r"""
start: "MODULE" NAME declaration* assign ltlspec*

declaration: "IVAR" NAME ":" type ";"       -> ivar
           | "VAR" NAME ":" type ";"        -> var

type: "boolean"                             -> boolean_type
    | "{" NAME ("," NAME)* "}"              -> enum_type
    | INT ".." INT                          -> range_type
    | "array" INT ".." INT "of" "boolean"   -> array_type

assign: "ASSIGN" assignment*

assignment: "init" "(" target ")" ":=" value ";"                 -> init
          | "next" "(" target ")" ":=" value ";"                 -> next_simple
          | "next" "(" target ")" ":=" "case" case_line+ "esac" ";" -> next_case

case_line: guard ":" value ";"

guard: condition ("&" condition)*

condition: "TRUE"                           -> always
         | target "=" operand               -> equals
         | target "<" INT                   -> less
         | target ">" INT                   -> greater

operand: "TRUE"                             -> true_value
       | "FALSE"                            -> false_value
       | INT                                -> int_value
       | NAME                               -> name_value

value: operand
     | NAME "[" INT "]"                     -> element_value
     | target "+" INT                       -> increment
     | target "-" INT                       -> decrement
     | "{" NAME ("," NAME)* "}"             -> choice

target: NAME                                -> scalar
      | NAME "[" INT "]"                    -> element

ltlspec: "LTLSPEC" ltl

?ltl: ltl_or
    | ltl_or "->" ltl                       -> ltl_implies
?ltl_or: ltl_and
       | ltl_or "|" ltl_and                 -> ltl_disj
?ltl_and: ltl_until
        | ltl_and "&" ltl_until             -> ltl_conj
?ltl_until: ltl_unary
          | ltl_unary "U" ltl_until         -> ltl_u
          | ltl_unary "V" ltl_until         -> ltl_v
?ltl_unary: ltl_atom
          | "!" ltl_unary                   -> ltl_not
          | "X" ltl_unary                   -> ltl_x
          | "F" ltl_unary                   -> ltl_f
          | "G" ltl_unary                   -> ltl_g
?ltl_atom: "(" ltl ")"
         | "TRUE"                           -> ltl_true
         | "FALSE"                          -> ltl_false
         | target                           -> ltl_prop
         | target "=" NAME                  -> ltl_eq

NAME: /[A-Za-z_][A-Za-z0-9_]*/
INT: /\d+/
COMMENT: /--[^\n]*/

%import common.WS
%ignore WS
%ignore COMMENT
"""

_PARSER = Lark(SMV_GRAMMAR, parser="lalr")


class SmvSyntaxError(ValueError):
    """Text outside the supported SMV subset."""


# ── model ────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Ref:
    """A scalar variable or one array element."""

    name: str
    index: int | None = None

    def __str__(self) -> str:
        return self.name if self.index is None else f"{self.name}[{self.index}]"


@dataclass(frozen=True)
class Condition:
    kind: str  # "always" | "eq" | "lt" | "gt"
    target: Ref | None = None
    operand: object = None


@dataclass(frozen=True)
class Value:
    kind: str  # "const" | "name" | "inc" | "dec" | "choice"
    payload: object


@dataclass
class SmvModel:
    inputs: dict[str, tuple] = field(default_factory=dict)
    variables: dict[str, tuple] = field(default_factory=dict)
    arrays: dict[str, tuple[int, int]] = field(default_factory=dict)
    init: dict[str, Value] = field(default_factory=dict)
    next: dict[str, list[tuple[tuple[Condition, ...], Value]]] = field(default_factory=dict)
    ltlspecs: list[str] = field(default_factory=list)

    def state_variables(self) -> list[str]:
        names = list(self.variables)
        for array, (low, high) in self.arrays.items():
            names.extend(str(Ref(array, j)) for j in range(low, high + 1))
        return names


_NAME = object()


@v_args(inline=True)
class _SmvBuilder(Transformer):
    # types
    def boolean_type(self):
        return ("bool", (False, True))

    def enum_type(self, *names):
        return ("enum", tuple(str(n) for n in names))

    def range_type(self, low, high):
        return ("range", tuple(range(int(low), int(high) + 1)))

    def array_type(self, low, high):
        return ("array", (int(low), int(high)))

    def ivar(self, name, kind):
        return ("ivar", str(name), kind)

    def var(self, name, kind):
        return ("var", str(name), kind)

    # targets and values
    def scalar(self, name):
        return Ref(str(name))

    def element(self, name, index):
        return Ref(str(name), int(index))

    def true_value(self):
        return True

    def false_value(self):
        return False

    def int_value(self, token):
        return int(token)

    def name_value(self, token):
        return (_NAME, str(token))

    def value(self, operand):
        if isinstance(operand, tuple) and operand and operand[0] is _NAME:
            return Value("name", operand[1])
        return Value("const", operand)

    def element_value(self, name, index):
        return Value("name", f"{name}[{int(index)}]")

    def increment(self, target, amount):
        return Value("inc", (target, int(amount)))

    def decrement(self, target, amount):
        return Value("dec", (target, int(amount)))

    def choice(self, *names):
        return Value("choice", tuple(str(n) for n in names))

    # guards
    def always(self):
        return Condition("always")

    def equals(self, target, operand):
        return Condition("eq", target, operand)

    def less(self, target, bound):
        return Condition("lt", target, int(bound))

    def greater(self, target, bound):
        return Condition("gt", target, int(bound))

    def guard(self, *conditions):
        return tuple(conditions)

    def case_line(self, guard, value):
        return (guard, value)

    def init(self, target, value):
        return ("init", target, value)

    def next_simple(self, target, value):
        return ("next", target, [((Condition("always"),), value)])

    def next_case(self, target, *lines):
        return ("next", target, list(lines))

    def assign(self, *assignments):
        return list(assignments)

    def ltlspec(self, formula):
        return ("ltlspec", formula)

    # LTL is kept as normalised text; nothing here interprets it
    def ltl_implies(self, left, right):
        return f"({left} -> {right})"

    def ltl_disj(self, left, right):
        return f"({left} | {right})"

    def ltl_conj(self, left, right):
        return f"({left} & {right})"

    def ltl_u(self, left, right):
        return f"({left} U {right})"

    def ltl_v(self, left, right):
        return f"({left} V {right})"

    def ltl_not(self, body):
        return f"!{body}"

    def ltl_x(self, body):
        return f"X {body}"

    def ltl_f(self, body):
        return f"F {body}"

    def ltl_g(self, body):
        return f"G {body}"

    def ltl_true(self):
        return "TRUE"

    def ltl_false(self):
        return "FALSE"

    def ltl_prop(self, target):
        return str(target)

    def ltl_eq(self, target, name):
        return f"{target}={name}"

    def start(self, name, *rest):
        model = SmvModel()
        for item in rest:
            if isinstance(item, list):
                for kind, target, value in item:
                    (model.init if kind == "init" else model.next)[str(target)] = value
            elif item[0] == "ltlspec":
                model.ltlspecs.append(item[1])
            else:
                role, var_name, (kind, domain) = item
                if role == "ivar":
                    model.inputs[var_name] = domain
                elif kind == "array":
                    model.arrays[var_name] = domain
                else:
                    model.variables[var_name] = domain
        return model


def parse_smv(text: str) -> SmvModel:
    """Parse the emitted subset into an SmvModel; raises SmvSyntaxError."""
    try:
        tree = _PARSER.parse(text)
    except UnexpectedInput as exc:
        raise SmvSyntaxError(f"line {exc.line}, column {exc.column}: unexpected input") from exc
    except LarkError as exc:
        raise SmvSyntaxError(str(exc)) from exc
    return _SmvBuilder().transform(tree)


def check_smv(text: str) -> list[str]:
    """Syntax and declaration errors; an empty list means the text is valid."""
    try:
        model = parse_smv(text)
    except SmvSyntaxError as exc:
        return [str(exc)]
    errors: list[str] = []
    declared = set(model.state_variables())
    known = declared | set(model.inputs)
    for name in model.state_variables():
        if name not in model.init:
            errors.append(f"{name} has no init assignment")
        if name not in model.next:
            errors.append(f"{name} has no next assignment")
    for target in list(model.init) + list(model.next):
        if target not in declared:
            errors.append(f"assignment to undeclared variable {target}")
    for rows in model.next.values():
        for guard, _ in rows:
            for condition in guard:
                if condition.target is not None and str(condition.target) not in known:
                    errors.append(f"guard reads undeclared variable {condition.target}")
    for array, (low, high) in model.arrays.items():
        for match in re.finditer(rf"\b{re.escape(array)}\[(\d+)\]", text):
            if not low <= int(match.group(1)) <= high:
                errors.append(f"index {match.group(1)} of {array} outside {low}..{high}")
    return errors


# ── interpretation ───────────────────────────────────────────────────────────

def _read(env: dict, name: object):
    if isinstance(name, Ref):
        return env[str(name)]
    return name


def _holds(condition: Condition, env: dict) -> bool:
    if condition.kind == "always":
        return True
    left = env[str(condition.target)]
    if condition.kind == "eq":
        right = condition.operand
        if isinstance(right, tuple) and right and right[0] is _NAME:
            right = env.get(right[1], right[1])
        return left == right
    if condition.kind == "lt":
        return left < condition.operand
    return left > condition.operand


def _evaluate(value: Value, env: dict) -> tuple:
    if value.kind == "const":
        return (value.payload,)
    if value.kind == "name":
        return (env.get(value.payload, value.payload),)
    if value.kind == "inc":
        target, amount = value.payload
        return (env[str(target)] + amount,)
    if value.kind == "dec":
        target, amount = value.payload
        return (env[str(target)] - amount,)
    return tuple(value.payload)


def _next_values(rows, env: dict) -> tuple:
    for guard, value in rows:
        if all(_holds(c, env) for c in guard):
            return _evaluate(value, env)
    raise SmvSyntaxError("no case applies")


@dataclass(frozen=True)
class SmvGraph:
    initial: frozenset
    states: tuple
    edges: frozenset  # (source, input value, target)

    def to_networkx(self) -> nx.MultiDiGraph:
        graph = nx.MultiDiGraph()
        for state in self.states:
            graph.add_node(state, initial=state in self.initial)
        for source, value, target in sorted(self.edges, key=repr):
            graph.add_edge(source, target, key=str(value), action=str(value))
        return graph


def _project(model: SmvModel, env: dict) -> tuple:
    """(loc, counters in declaration order, true array elements)."""
    counters = tuple(env[name] for name in model.variables if name != "loc")
    flags = frozenset(name for name in env if "[" in name and env[name] is True)
    return (env["loc"], counters, flags)


def simulate_smv(model: SmvModel, max_states: int | None = None) -> SmvGraph:
    """Reachable states and input-labelled edges of ``model``."""
    limit = config.MAX_STATES if max_states is None else max_states
    names = model.state_variables()
    first = [_evaluate(model.init[name], {}) for name in names]
    initial_envs = [dict(zip(names, combo)) for combo in itertools.product(*first)]
    if len(model.inputs) > 1:
        raise SmvSyntaxError("at most one input variable is supported")
    input_name, input_values = next(iter(model.inputs.items()), (None, (None,)))

    key = lambda env: tuple(env[n] for n in names)  # noqa: E731
    seen = {key(env): env for env in initial_envs}
    queue = deque(initial_envs)
    edges = set()
    while queue:
        env = queue.popleft()
        for value in input_values:
            scope = dict(env)
            if input_name is not None:
                scope[input_name] = value
            options = [_next_values(model.next[name], scope) for name in names]
            for combo in itertools.product(*options):
                successor = dict(zip(names, combo))
                edges.add((_project(model, env), value, _project(model, successor)))
                if key(successor) not in seen:
                    seen[key(successor)] = successor
                    if len(seen) > limit:
                        raise CapacityError(f"SMV simulation exceeds {limit} states")
                    queue.append(successor)
    logger.debug("simulated SMV: %d states, %d edges", len(seen), len(edges))
    return SmvGraph(
        initial=frozenset(_project(model, env) for env in initial_envs),
        states=tuple(_project(model, env) for env in seen.values()),
        edges=frozenset(edges),
    )


def input_token(value, boolean_type: str | None = None) -> str:
    """Input value → action spelling of the expansion (``req(u)``, ``ans(u)``, ``tau``).

    A boolean input encodes the sole client type ``boolean_type``: TRUE is the
    request, FALSE the answer.
    """
    if isinstance(value, bool):
        if boolean_type is None:
            raise SmvSyntaxError("a boolean input needs its client type")
        return f"req({boolean_type})" if value else f"ans({boolean_type})"
    if value == "tau":
        return "tau"
    for kind in ("req", "ans"):
        if isinstance(value, str) and value.startswith(kind + "_"):
            return f"{kind}({value[len(kind) + 1:]})"
    return str(value)
