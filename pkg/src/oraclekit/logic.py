"""Translation between control-point conditions and quantified signal formulas.

A condition over control points rewrites into a conjunction of universally
quantified relational constraints over the signals themselves: each control
point at grid position ``j`` becomes ``forall t in [j*I, (j+1)*I)`` with the
control point replaced by the signal symbol. Adjacent quantifiers with the
same body merge, and quantifiers over the same interval conjoin their bodies.

The last control point holds the signal's value at the horizon only, so it
maps to the closed singleton ``[b, b]``; merging a half-open run into it
yields a right-closed interval ending at the horizon.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import GridMisalignedError, NonSignalVariableError
from .grammar import (
    And,
    Arith,
    Const,
    Expr,
    InputSchema,
    Node,
    Or,
    Rel,
    Var,
    canonicalize,
    conjunction,
    control_point_name,
    disjuncts,
    disjunction,
    format_number,
    rel_terms,
    validate_condition,
)

_ALIGN_TOL = 1e-9


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    closed_right: bool = False

    def __post_init__(self):
        if self.lo > self.hi or (self.lo == self.hi and not self.closed_right):
            raise GridMisalignedError(f"empty interval [{self.lo}, {self.hi})")

    def text(self) -> str:
        bracket = "]" if self.closed_right else ")"
        return f"[{format_number(self.lo)}, {format_number(self.hi)}{bracket}"


@dataclass(frozen=True)
class QuantifiedConjunct:
    """One conjunct: relational constraints on signals over a time interval.

    ``interval`` is None for constant-only bodies, which need no quantifier.
    Body expressions use Var nodes named by the signal they constrain.
    """

    interval: Interval | None
    body: tuple[Rel, ...]


@dataclass(frozen=True)
class QuantifiedFormula:
    disjuncts: tuple[tuple[QuantifiedConjunct, ...], ...]


# ---------------------------------------------------------------------------
# Condition -> formula


def _signals_of_exp(e: Expr, schema: InputSchema) -> tuple[Expr, set[str], set[int]]:
    """Rewrite control points to signal symbols; collect signals and positions."""
    if isinstance(e, Const):
        return e, set(), set()
    if isinstance(e, Var):
        cp = schema.control_point(e.name)
        if cp is None:
            raise NonSignalVariableError(
                f"{e.name!r} is not a signal control point"
            )
        return Var(cp[0]), {cp[0]}, {cp[1]}
    left, ls, lp = _signals_of_exp(e.left, schema)
    right, rs, rp = _signals_of_exp(e.right, schema)
    return Arith(e.op, left, right), ls | rs, lp | rp


def _rel_to_conjunct(rel: Rel, schema: InputSchema) -> QuantifiedConjunct:
    body_exp, signals, positions = _signals_of_exp(rel.exp, schema)
    body = (Rel(body_exp, rel.op),)
    if not signals:
        return QuantifiedConjunct(None, body)
    intervals = {schema.sampling_interval(s) for s in signals}
    if len(intervals) > 1:
        raise GridMisalignedError(
            f"signals {sorted(signals)} have different sampling intervals"
        )
    step = intervals.pop()
    (position,) = positions  # single position is guaranteed by validation
    n_points = min(schema.signal(s).n_points for s in signals)
    b = schema.time_horizon
    if position == n_points - 1:
        return QuantifiedConjunct(Interval(b, b, closed_right=True), body)
    return QuantifiedConjunct(Interval(position * step, (position + 1) * step), body)


def _merge_adjacent(conjuncts: list[QuantifiedConjunct]) -> list[QuantifiedConjunct]:
    """Merge quantifiers with identical bodies over abutting domains."""
    by_body: dict[tuple[Rel, ...], list[Interval]] = {}
    order: list[tuple[Rel, ...]] = []
    unquantified: list[QuantifiedConjunct] = []
    for c in conjuncts:
        if c.interval is None:
            if c not in unquantified:
                unquantified.append(c)
            continue
        if c.body not in by_body:
            by_body[c.body] = []
            order.append(c.body)
        if c.interval not in by_body[c.body]:
            by_body[c.body].append(c.interval)
    merged: list[QuantifiedConjunct] = list(unquantified)
    for body in order:
        ivs = sorted(by_body[body], key=lambda iv: (iv.lo, iv.hi))
        run = ivs[0]
        for iv in ivs[1:]:
            if not run.closed_right and run.hi == iv.lo:
                run = Interval(run.lo, iv.hi, iv.closed_right)
            elif run.closed_right and run.hi == iv.lo:
                run = Interval(run.lo, iv.hi, iv.closed_right)
            else:
                merged.append(QuantifiedConjunct(run, body))
                run = iv
        merged.append(QuantifiedConjunct(run, body))
    return merged


def _conjoin_same_domain(conjuncts: list[QuantifiedConjunct]) -> list[QuantifiedConjunct]:
    """Conjoin bodies quantified over identical domains."""
    by_interval: dict[Interval | None, list[Rel]] = {}
    order: list[Interval | None] = []
    for c in conjuncts:
        if c.interval not in by_interval:
            by_interval[c.interval] = []
            order.append(c.interval)
        for rel in c.body:
            if rel not in by_interval[c.interval]:
                by_interval[c.interval].append(rel)
    return [QuantifiedConjunct(iv, tuple(by_interval[iv])) for iv in order]


def to_logic(cond: Node, schema: InputSchema) -> QuantifiedFormula:
    """Rewrite a control-point condition into a quantified signal formula."""
    validate_condition(cond, schema)
    out: list[tuple[QuantifiedConjunct, ...]] = []
    for d in disjuncts(cond):
        conjuncts = [_rel_to_conjunct(rel, schema) for rel in rel_terms(d)]
        conjuncts = _merge_adjacent(conjuncts)
        conjuncts = _conjoin_same_domain(conjuncts)
        out.append(tuple(conjuncts))
    return QuantifiedFormula(tuple(out))


# ---------------------------------------------------------------------------
# Formula -> condition


def _grid_index(x: float, step: float, what: str) -> int:
    k = x / step
    if abs(k - round(k)) > _ALIGN_TOL * max(1.0, abs(k)):
        raise GridMisalignedError(
            f"{what} {x} is not a multiple of the sampling interval {step}"
        )
    return round(k)


def _conjunct_positions(
    conjunct: QuantifiedConjunct, schema: InputSchema, signals: set[str]
) -> list[int]:
    steps = {schema.sampling_interval(s) for s in signals}
    if len(steps) > 1:
        raise GridMisalignedError(
            f"signals {sorted(signals)} have different sampling intervals"
        )
    step = steps.pop()
    n_points = min(schema.signal(s).n_points for s in signals)
    b = schema.time_horizon
    iv = conjunct.interval
    if not (0 <= iv.lo and iv.hi <= b):
        raise GridMisalignedError(f"interval {iv.text()} outside [0, {b}]")
    lo = _grid_index(iv.lo, step, "interval start")
    hi = _grid_index(iv.hi, step, "interval end")
    positions = [j for j in range(lo, hi) if j <= n_points - 2]
    if iv.closed_right:
        at_end = n_points - 1 if iv.hi == b else hi
        if at_end not in positions:
            positions.append(at_end)
    return positions


def _body_signals(body: tuple[Rel, ...], schema: InputSchema) -> set[str]:
    out: set[str] = set()

    def walk(e: Expr):
        if isinstance(e, Var):
            if schema.signal(e.name) is None:
                raise NonSignalVariableError(f"{e.name!r} is not a signal")
            out.add(e.name)
        elif isinstance(e, Arith):
            walk(e.left)
            walk(e.right)

    for rel in body:
        walk(rel.exp)
    return out


def _instantiate(e: Expr, position: int) -> Expr:
    if isinstance(e, Var):
        return Var(control_point_name(e.name, position))
    if isinstance(e, Arith):
        return Arith(e.op, _instantiate(e.left, position), _instantiate(e.right, position))
    return e


def from_logic(formula: QuantifiedFormula, schema: InputSchema) -> Node:
    """Rewrite a quantified signal formula back into a control-point condition."""
    out_disjuncts: list[Node] = []
    for conjuncts in formula.disjuncts:
        rels: list[Rel] = []
        for c in conjuncts:
            signals = _body_signals(c.body, schema)
            if c.interval is None:
                if signals:
                    raise NonSignalVariableError(
                        "signal constraint without a quantifier is not closed"
                    )
                rels.extend(c.body)
                continue
            if not signals:
                rels.extend(c.body)
                continue
            for j in _conjunct_positions(c, schema, signals):
                for rel in c.body:
                    rels.append(Rel(_instantiate(rel.exp, j), rel.op))
        out_disjuncts.append(conjunction(rels))
    cond = canonicalize(disjunction(out_disjuncts))
    validate_condition(cond, schema)
    return cond


# ---------------------------------------------------------------------------
# Canonical text


def _print_body_exp(e: Expr, parent_prec: int = 0, right_side: bool = False) -> str:
    if isinstance(e, Const):
        return format_number(e.value)
    if isinstance(e, Var):
        return f"{e.name}(t)"
    prec = {"+": 1, "-": 1, "*": 2, "/": 2}[e.op]
    text = (
        f"{_print_body_exp(e.left, prec)} {e.op} "
        f"{_print_body_exp(e.right, prec, right_side=True)}"
    )
    if prec < parent_prec or (prec == parent_prec and right_side):
        return f"({text})"
    return text


def _print_body_rel(rel: Rel) -> str:
    # "exp - const ~ 0" reads more naturally as "exp ~ const"
    e = rel.exp
    if isinstance(e, Arith) and e.op == "-" and isinstance(e.right, Const):
        return f"{_print_body_exp(e.left)} {rel.op} {format_number(e.right.value)}"
    return f"{_print_body_exp(e)} {rel.op} 0"


def format_formula(formula: QuantifiedFormula) -> str:
    """Deterministic canonical text of a quantified formula."""
    n_conjuncts = sum(len(d) for d in formula.disjuncts)
    wrap = n_conjuncts > 1 or len(formula.disjuncts) > 1
    parts = []
    for conjuncts in formula.disjuncts:
        texts = []
        for c in conjuncts:
            body = " && ".join(_print_body_rel(r) for r in c.body)
            text = body if c.interval is None else f"forall t in {c.interval.text()}: {body}"
            texts.append(f"({text})" if wrap else text)
        parts.append(" && ".join(texts))
    return " || ".join(parts)
