"""Condition grammar: schema, expression trees, text format, and evaluation.

Conditions are disjunctions of conjunctions of relational terms, each
relational term comparing an arithmetic expression against zero. Signal
inputs are flattened to control-point variables named ``c_<signal>_<index>``;
inside a single relational term every control point must sit at the same
position.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    ConditionSyntaxError,
    DepthExceededError,
    GrammarViolationError,
    PositionMixError,
    SchemaError,
    UnknownVariableError,
)

REL_OPS = ("<", "<=", ">", ">=", "=", "!=")
ARITH_OPS = ("+", "-", "*", "/")

DEFAULT_EQ_TOL = 1e-6


# ---------------------------------------------------------------------------
# Schema


@dataclass(frozen=True)
class VariableSpec:
    name: str
    lower: float
    upper: float


@dataclass(frozen=True)
class SignalSpec:
    name: str
    n_points: int
    lower: float
    upper: float


_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


def control_point_name(signal: str, position: int) -> str:
    return f"c_{signal}_{position}"


@dataclass(frozen=True)
class InputSchema:
    """Declares the numeric inputs of a system under test.

    Plain variables are scalars; each signal expands to ``n_points`` control
    points sharing the signal's bounds, sampled every ``time_horizon/(n-1)``
    seconds.
    """

    variables: tuple[VariableSpec, ...] = ()
    signals: tuple[SignalSpec, ...] = ()
    time_horizon: float | None = None

    def __post_init__(self):
        names = [v.name for v in self.variables] + [s.name for s in self.signals]
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate variable/signal names: {sorted(names)}")
        for name in names:
            if not _IDENT_RE.match(name):
                raise SchemaError(f"invalid identifier: {name!r}")
        for v in self.variables:
            if not v.lower < v.upper:
                raise SchemaError(f"variable {v.name}: need lower < upper")
        if self.signals:
            if self.time_horizon is None or self.time_horizon < 0:
                raise SchemaError("signals require a nonnegative time_horizon")
            for s in self.signals:
                if s.n_points < 2:
                    raise SchemaError(
                        f"signal {s.name}: n_points must be >= 2 "
                        "(sampling interval undefined otherwise)"
                    )
                if not s.lower < s.upper:
                    raise SchemaError(f"signal {s.name}: need lower < upper")
        expanded = list(self.all_names())
        if len(set(expanded)) != len(expanded):
            raise SchemaError("control-point expansion collides with variable names")

    def all_names(self) -> list[str]:
        """All scalar names: plain variables followed by expanded control points."""
        names = [v.name for v in self.variables]
        for s in self.signals:
            names.extend(control_point_name(s.name, j) for j in range(s.n_points))
        return names

    def bounds(self, name: str) -> tuple[float, float]:
        for v in self.variables:
            if v.name == name:
                return (v.lower, v.upper)
        cp = self.control_point(name)
        if cp is not None:
            sig = self.signal(cp[0])
            return (sig.lower, sig.upper)
        raise UnknownVariableError(name)

    def signal(self, name: str) -> SignalSpec | None:
        for s in self.signals:
            if s.name == name:
                return s
        return None

    def control_point(self, name: str) -> tuple[str, int] | None:
        """Return (signal, position) if `name` is an expanded control point."""
        if not name.startswith("c_"):
            return None
        stem = name[2:]
        sig_name, sep, idx = stem.rpartition("_")
        if not sep or not idx.isdigit():
            return None
        sig = self.signal(sig_name)
        if sig is None or not 0 <= int(idx) < sig.n_points:
            return None
        return (sig_name, int(idx))

    def sampling_interval(self, signal: str) -> float:
        sig = self.signal(signal)
        if sig is None:
            raise SchemaError(f"unknown signal: {signal}")
        return self.time_horizon / (sig.n_points - 1)

    def has(self, name: str) -> bool:
        try:
            self.bounds(name)
            return True
        except UnknownVariableError:
            return False

    def validate_input(self, values: Mapping[str, float]) -> None:
        names = self.all_names()
        missing = [n for n in names if n not in values]
        extra = [n for n in values if n not in names]
        if missing or extra:
            raise SchemaError(f"input mismatch: missing={missing} extra={extra}")
        for n in names:
            lo, hi = self.bounds(n)
            if not lo <= values[n] <= hi:
                raise SchemaError(f"{n}={values[n]} outside [{lo}, {hi}]")

    def to_json_dict(self) -> dict:
        out = {
            "variables": [
                {"name": v.name, "lower": v.lower, "upper": v.upper}
                for v in self.variables
            ]
        }
        if self.signals:
            out["signals"] = [
                {"name": s.name, "n_points": s.n_points, "lower": s.lower, "upper": s.upper}
                for s in self.signals
            ]
            out["time_horizon"] = self.time_horizon
        return out

    @classmethod
    def from_json_dict(cls, d: Mapping) -> "InputSchema":
        variables = tuple(
            VariableSpec(v["name"], float(v["lower"]), float(v["upper"]))
            for v in d.get("variables", [])
        )
        signals = tuple(
            SignalSpec(s["name"], int(s["n_points"]), float(s["lower"]), float(s["upper"]))
            for s in d.get("signals", [])
        )
        horizon = d.get("time_horizon")
        return cls(variables, signals, None if horizon is None else float(horizon))


# ---------------------------------------------------------------------------
# Expression trees


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Arith:
    op: str  # one of + - * /
    left: "Expr"
    right: "Expr"


Expr = Const | Var | Arith


@dataclass(frozen=True)
class Rel:
    """Relational term: ``exp <op> 0``."""

    exp: Expr
    op: str


@dataclass(frozen=True)
class And:
    terms: tuple["Node", ...]


@dataclass(frozen=True)
class Or:
    terms: tuple["Node", ...]


Node = Rel | And | Or
Condition = Node


def conjunction(terms: Sequence[Node]) -> Node:
    terms = tuple(terms)
    return terms[0] if len(terms) == 1 else And(terms)


def disjunction(terms: Sequence[Node]) -> Node:
    terms = tuple(terms)
    return terms[0] if len(terms) == 1 else Or(terms)


def canonicalize(cond: Node) -> Node:
    """Flatten nested conjunctions/disjunctions into n-ary form."""
    if isinstance(cond, Rel):
        return cond
    if isinstance(cond, And):
        flat: list[Node] = []
        for t in cond.terms:
            t = canonicalize(t)
            flat.extend(t.terms if isinstance(t, And) else [t])
        return conjunction(flat)
    if isinstance(cond, Or):
        flat = []
        for t in cond.terms:
            t = canonicalize(t)
            flat.extend(t.terms if isinstance(t, Or) else [t])
        return disjunction(flat)
    raise GrammarViolationError(f"not a condition node: {cond!r}")


def disjuncts(cond: Node) -> list[Node]:
    """The condition's top-level disjuncts (itself if not a disjunction)."""
    c = canonicalize(cond)
    return list(c.terms) if isinstance(c, Or) else [c]


def rel_terms(cond: Node) -> list[Rel]:
    """All relational terms of a conjunction (or a lone relational term)."""
    if isinstance(cond, Rel):
        return [cond]
    if isinstance(cond, And):
        out: list[Rel] = []
        for t in cond.terms:
            out.extend(rel_terms(t))
        return out
    raise GrammarViolationError("expected a conjunction, got a disjunction")


# ---------------------------------------------------------------------------
# Text format

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>\|\||&&|<=|>=|!=|[<>=+\-*/()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            raise ConditionSyntaxError("unexpected character", pos)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, schema: InputSchema, max_depth: int | None):
        self.text = text
        self.schema = schema
        self.max_depth = max_depth
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.peek()
        if text != value:
            raise ConditionSyntaxError(f"got {text!r}", pos, expected=repr(value))
        return self.advance()

    def parse(self) -> Node:
        cond = self.or_term()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ConditionSyntaxError(f"trailing input {text!r}", pos)
        cond = canonicalize(cond)
        validate_condition(cond, self.schema, max_depth=self.max_depth)
        return cond

    def or_term(self) -> Node:
        terms = [self.and_term()]
        while self.peek()[1] == "||":
            self.advance()
            terms.append(self.and_term())
        return disjunction(terms)

    def and_term(self) -> Node:
        terms = [self.rel_term()]
        while self.peek()[1] == "&&":
            self.advance()
            terms.append(self.rel_term())
        return conjunction(terms)

    def rel_term(self) -> Node:
        # A '(' may open either a logical group or an arithmetic
        # subexpression; try the group first and backtrack on failure.
        if self.peek()[1] == "(":
            mark = self.i
            self.advance()
            try:
                inner = self.or_term()
                self.expect(")")
                return inner
            except ConditionSyntaxError:
                self.i = mark
        lhs = self.exp()
        kind, text, pos = self.peek()
        if text not in REL_OPS:
            raise ConditionSyntaxError(f"got {text!r}", pos, expected="relational operator")
        op = self.advance()[1]
        rhs = self.exp()
        if rhs == Const(0.0):
            return Rel(lhs, op)
        return Rel(Arith("-", lhs, rhs), op)

    def exp(self) -> Expr:
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.advance()[1]
            node = Arith(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.peek()[1] in ("*", "/"):
            op = self.advance()[1]
            node = Arith(op, node, self.factor())
        return node

    def factor(self) -> Expr:
        kind, text, pos = self.peek()
        if text == "(":
            self.advance()
            node = self.exp()
            self.expect(")")
            return node
        if text == "-":
            self.advance()
            kind, text, pos = self.peek()
            if kind != "num":
                raise ConditionSyntaxError(f"got {text!r}", pos, expected="number")
            self.advance()
            return Const(-float(text))
        if kind == "num":
            self.advance()
            return Const(float(text))
        if kind == "ident":
            self.advance()
            if not self.schema.has(text):
                raise UnknownVariableError(f"{text!r} is not declared in the schema")
            return Var(text)
        raise ConditionSyntaxError(f"got {text!r}", pos, expected="expression")


def parse_condition(text: str, schema: InputSchema, max_depth: int | None = None) -> Node:
    """Parse condition text; the result is canonical and schema-validated."""
    if not text.strip():
        raise ConditionSyntaxError("empty condition", 0)
    return _Parser(text, schema, max_depth).parse()


def parse_expression(text: str, schema: InputSchema) -> Expr:
    """Parse a bare arithmetic expression (no relational or logical operators)."""
    if not text.strip():
        raise ConditionSyntaxError("empty expression", 0)
    p = _Parser(text, schema, None)
    node = p.exp()
    kind, tok, pos = p.peek()
    if kind != "end":
        raise ConditionSyntaxError(f"trailing input {tok!r}", pos)
    return node


def format_number(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _print_exp(e: Expr, parent_prec: int = 0, right_side: bool = False) -> str:
    if isinstance(e, Const):
        return format_number(e.value)
    if isinstance(e, Var):
        return e.name
    prec = _PREC[e.op]
    text = f"{_print_exp(e.left, prec)} {e.op} {_print_exp(e.right, prec, right_side=True)}"
    if prec < parent_prec or (prec == parent_prec and right_side):
        return f"({text})"
    return text


def print_expression(e: Expr) -> str:
    """Canonical text of a bare arithmetic expression."""
    return _print_exp(e)


def print_condition(cond: Node) -> str:
    """Deterministic canonical text; round-trips through parse_condition."""
    cond = canonicalize(cond)
    if isinstance(cond, Rel):
        return f"{_print_exp(cond.exp)} {cond.op} 0"
    if isinstance(cond, And):
        return " && ".join(print_condition(t) for t in cond.terms)
    return " || ".join(print_condition(t) for t in cond.terms)


# ---------------------------------------------------------------------------
# Validation, size metrics


def _exp_positions(e: Expr, schema: InputSchema, out: set[int]) -> None:
    if isinstance(e, Var):
        if not schema.has(e.name):
            raise UnknownVariableError(f"{e.name!r} is not declared in the schema")
        cp = schema.control_point(e.name)
        if cp is not None:
            out.add(cp[1])
    elif isinstance(e, Arith):
        if e.op not in ARITH_OPS:
            raise GrammarViolationError(f"bad arithmetic operator {e.op!r}")
        _exp_positions(e.left, schema, out)
        _exp_positions(e.right, schema, out)
    elif not isinstance(e, Const):
        raise GrammarViolationError(f"not an arithmetic node: {e!r}")


def validate_condition(
    cond: Node, schema: InputSchema, max_depth: int | None = None
) -> None:
    """Check grammar shape, known variables, control-point positions and depth."""

    def walk(node: Node, under_or: bool) -> None:
        if isinstance(node, Or):
            if under_or:
                raise GrammarViolationError("disjunction nested under a disjunction")
            if len(node.terms) < 2:
                raise GrammarViolationError("disjunction needs >= 2 terms")
            for t in node.terms:
                if isinstance(t, Or):
                    raise GrammarViolationError("disjunction nested under a disjunction")
                walk(t, True)
        elif isinstance(node, And):
            if len(node.terms) < 2:
                raise GrammarViolationError("conjunction needs >= 2 terms")
            for t in node.terms:
                if isinstance(t, Or):
                    raise GrammarViolationError("disjunction nested under a conjunction")
                walk(t, True)
        elif isinstance(node, Rel):
            if node.op not in REL_OPS:
                raise GrammarViolationError(f"bad relational operator {node.op!r}")
            positions: set[int] = set()
            _exp_positions(node.exp, schema, positions)
            if len(positions) > 1:
                raise PositionMixError(
                    f"expression mixes control-point positions {sorted(positions)}"
                )
        else:
            raise GrammarViolationError(f"not a condition node: {node!r}")

    walk(cond, False)
    if max_depth is not None:
        d = condition_depth(cond)
        if d > max_depth:
            raise DepthExceededError(f"depth {d} exceeds maximum {max_depth}")


def _displayed_rel_exp(rel: Rel) -> Expr:
    # "exp - const <op> 0" reads as "exp <op> const"; size metrics use that form.
    e = rel.exp
    if isinstance(e, Arith) and e.op == "-" and isinstance(e.right, Const):
        return e.left
    return e


def _exp_ops(e: Expr) -> int:
    if isinstance(e, Arith):
        return 1 + _exp_ops(e.left) + _exp_ops(e.right)
    return 0


def _exp_depth(e: Expr) -> int:
    if isinstance(e, Arith):
        return 1 + max(_exp_depth(e.left), _exp_depth(e.right))
    return 0


def condition_length(cond: Node) -> int:
    """Operator count (relational + arithmetic + connectives) on the displayed form."""
    if isinstance(cond, Rel):
        return 1 + _exp_ops(_displayed_rel_exp(cond))
    return sum(condition_length(t) for t in cond.terms) + (len(cond.terms) - 1)


def condition_depth(cond: Node) -> int:
    """Tree depth on the displayed form; a bare `var <op> const` term has depth 1."""
    if isinstance(cond, Rel):
        return 1 + _exp_depth(_displayed_rel_exp(cond))
    return 1 + max(condition_depth(t) for t in cond.terms)


def iter_variables(cond: Node) -> Iterator[str]:
    if isinstance(cond, Rel):
        stack: list[Expr] = [cond.exp]
        while stack:
            e = stack.pop()
            if isinstance(e, Var):
                yield e.name
            elif isinstance(e, Arith):
                stack.extend((e.left, e.right))
    else:
        for t in cond.terms:
            yield from iter_variables(t)


# ---------------------------------------------------------------------------
# Evaluation


@dataclass(frozen=True)
class EvalResult:
    value: bool
    division_by_zero: bool = False

    def __bool__(self) -> bool:
        return self.value


def _eval_exp(e: Expr, values: Mapping[str, float], eq_tol: float) -> float | None:
    """Value of an expression, or None once a division guard trips."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return values[e.name]
    left = _eval_exp(e.left, values, eq_tol)
    right = _eval_exp(e.right, values, eq_tol)
    if left is None or right is None:
        return None
    if e.op == "+":
        return left + right
    if e.op == "-":
        return left - right
    if e.op == "*":
        return left * right
    if abs(right) <= eq_tol:
        return None
    return left / right


def _compare(value: float, op: str, eq_tol: float) -> bool:
    if op == "<":
        return value < 0
    if op == "<=":
        return value <= 0
    if op == ">":
        return value > 0
    if op == ">=":
        return value >= 0
    if op == "=":
        return abs(value) <= eq_tol
    return abs(value) > eq_tol


def evaluate(
    cond: Node, values: Mapping[str, float], eq_tol: float = DEFAULT_EQ_TOL
) -> EvalResult:
    """Evaluate a condition on one test input.

    Never raises on degenerate arithmetic: a relational term whose expression
    divides by a near-zero value is false and flags ``division_by_zero``.
    All terms are evaluated (no short-circuit) so the flag is deterministic.
    """
    flag = [False]

    def walk(node: Node) -> bool:
        if isinstance(node, Rel):
            v = _eval_exp(node.exp, values, eq_tol)
            if v is None:
                flag[0] = True
                return False
            return _compare(v, node.op, eq_tol)
        results = [walk(t) for t in node.terms]
        return all(results) if isinstance(node, And) else any(results)

    return EvalResult(walk(cond), flag[0])


def evaluate_many(
    cond: Node,
    matrix: np.ndarray,
    columns: Mapping[str, int],
    eq_tol: float = DEFAULT_EQ_TOL,
) -> np.ndarray:
    """Vectorized evaluation over rows of `matrix`; returns a boolean mask.

    Semantics match `evaluate` row by row (division guard included).
    """

    def exp_arrays(e: Expr) -> tuple[np.ndarray, np.ndarray]:
        if isinstance(e, Const):
            n = matrix.shape[0]
            return np.full(n, e.value), np.zeros(n, dtype=bool)
        if isinstance(e, Var):
            return matrix[:, columns[e.name]], np.zeros(matrix.shape[0], dtype=bool)
        lv, lbad = exp_arrays(e.left)
        rv, rbad = exp_arrays(e.right)
        bad = lbad | rbad
        with np.errstate(all="ignore"):
            if e.op == "+":
                return lv + rv, bad
            if e.op == "-":
                return lv - rv, bad
            if e.op == "*":
                return lv * rv, bad
            bad = bad | (np.abs(rv) <= eq_tol)
            out = np.divide(lv, np.where(np.abs(rv) <= eq_tol, 1.0, rv))
            return out, bad

    def walk(node: Node) -> np.ndarray:
        if isinstance(node, Rel):
            v, bad = exp_arrays(node.exp)
            with np.errstate(invalid="ignore"):
                if node.op == "<":
                    ok = v < 0
                elif node.op == "<=":
                    ok = v <= 0
                elif node.op == ">":
                    ok = v > 0
                elif node.op == ">=":
                    ok = v >= 0
                elif node.op == "=":
                    ok = np.abs(v) <= eq_tol
                else:
                    ok = np.abs(v) > eq_tol
            return ok & ~bad
        masks = [walk(t) for t in node.terms]
        out = masks[0]
        for m in masks[1:]:
            out = (out & m) if isinstance(node, And) else (out | m)
        return out

    return walk(cond)


# ---------------------------------------------------------------------------
# Subtree access (used by the evolutionary operators)


def all_subtrees(cond: Node) -> list[tuple[tuple[int, ...], object]]:
    """All (path, node) pairs in preorder, including arithmetic nodes."""
    out: list[tuple[tuple[int, ...], object]] = []

    def walk(node, path):
        out.append((path, node))
        if isinstance(node, (And, Or)):
            for k, t in enumerate(node.terms):
                walk(t, path + (k,))
        elif isinstance(node, Rel):
            walk(node.exp, path + (0,))
        elif isinstance(node, Arith):
            walk(node.left, path + (0,))
            walk(node.right, path + (1,))

    walk(cond, ())
    return out


def replace_subtree(cond, path: tuple[int, ...], new):
    """Return a copy of `cond` with the node at `path` replaced by `new`."""
    if not path:
        return new
    k, rest = path[0], path[1:]
    if isinstance(cond, (And, Or)):
        terms = list(cond.terms)
        terms[k] = replace_subtree(terms[k], rest, new)
        return type(cond)(tuple(terms))
    if isinstance(cond, Rel):
        return Rel(replace_subtree(cond.exp, rest, new), cond.op)
    if isinstance(cond, Arith):
        if k == 0:
            return Arith(cond.op, replace_subtree(cond.left, rest, new), cond.right)
        return Arith(cond.op, cond.left, replace_subtree(cond.right, rest, new))
    raise GrammarViolationError(f"path {path} does not exist in {cond!r}")
