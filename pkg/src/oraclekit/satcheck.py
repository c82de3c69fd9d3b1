"""Sound, conservative satisfiability check for condition conjunctions.

Two phases over the schema's bounded input box:

1. witness search on a lattice plus uniform random samples; any point
   satisfying both conditions proves SAT,
2. interval refutation per DNF branch: starting from the variable box,
   relational terms narrow the feasible intervals (forward evaluation and
   backward propagation through the arithmetic); a branch whose box empties
   or whose terms become infeasible is proven UNSAT.

Anything neither phase settles is UNKNOWN, which callers must treat as
potentially satisfiable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .grammar import (
    Arith,
    Const,
    DEFAULT_EQ_TOL,
    Expr,
    InputSchema,
    Node,
    Rel,
    Var,
    disjuncts,
    evaluate,
    evaluate_many,
    rel_terms,
)

GRID_MAX_DIMS = 6
_MAX_ROUNDS = 8


@dataclass(frozen=True)
class SatBudget:
    samples: int = 4096
    grid_per_dim: int = 5


@dataclass(frozen=True)
class SatResult:
    status: str  # "sat" | "unsat" | "unknown"
    witness: dict[str, float] | None = None

    @property
    def is_sat(self) -> bool:
        return self.status == "sat"

    @property
    def is_unsat(self) -> bool:
        return self.status == "unsat"


# ---------------------------------------------------------------------------
# Interval arithmetic with open/closed endpoints

_INF = math.inf


def _wid_lo(x: float) -> float:
    return x - (abs(x) * 1e-12 + 1e-300) if math.isfinite(x) else x


def _wid_hi(x: float) -> float:
    return x + (abs(x) * 1e-12 + 1e-300) if math.isfinite(x) else x


@dataclass(frozen=True)
class _IV:
    lo: float
    hi: float
    lo_open: bool = False
    hi_open: bool = False

    def is_empty(self) -> bool:
        if self.lo > self.hi:
            return True
        return self.lo == self.hi and (self.lo_open or self.hi_open)

    def intersect(self, other: "_IV") -> "_IV":
        if self.lo > other.lo or (self.lo == other.lo and self.lo_open):
            lo, lo_open = self.lo, self.lo_open
        else:
            lo, lo_open = other.lo, other.lo_open
        if self.hi < other.hi or (self.hi == other.hi and self.hi_open):
            hi, hi_open = self.hi, self.hi_open
        else:
            hi, hi_open = other.hi, other.hi_open
        return _IV(lo, hi, lo_open, hi_open)

    def contains_zero_band(self, tol: float) -> bool:
        return self.lo <= tol and self.hi >= -tol


_FULL = _IV(-_INF, _INF)


def _add(a: _IV, b: _IV) -> _IV:
    return _IV(_wid_lo(a.lo + b.lo), _wid_hi(a.hi + b.hi),
               a.lo_open or b.lo_open, a.hi_open or b.hi_open)


def _sub(a: _IV, b: _IV) -> _IV:
    return _IV(_wid_lo(a.lo - b.hi), _wid_hi(a.hi - b.lo),
               a.lo_open or b.hi_open, a.hi_open or b.lo_open)


def _mul(a: _IV, b: _IV) -> _IV:
    # 0 * inf from degenerate boxes: treat as unbounded (conservative)
    cands = []
    for x in (a.lo, a.hi):
        for y in (b.lo, b.hi):
            v = x * y
            cands.append(0.0 if math.isnan(v) else v)
    if any(not math.isfinite(c) for c in cands):
        return _FULL
    return _IV(_wid_lo(min(cands)), _wid_hi(max(cands)))


def _div(a: _IV, b: _IV, tol: float) -> _IV:
    # a denominator range touching the near-zero band cannot be refuted
    if b.contains_zero_band(tol):
        return _FULL
    cands = [x / y for x in (a.lo, a.hi) for y in (b.lo, b.hi)]
    if any(not math.isfinite(c) for c in cands):
        return _FULL
    return _IV(_wid_lo(min(cands)), _wid_hi(max(cands)))


def _required(op: str, tol: float) -> _IV | None:
    if op == "<":
        return _IV(-_INF, 0.0, hi_open=True)
    if op == "<=":
        return _IV(-_INF, 0.0)
    if op == ">":
        return _IV(0.0, _INF, lo_open=True)
    if op == ">=":
        return _IV(0.0, _INF)
    if op == "=":
        return _IV(-tol, tol)
    return None  # "!=" carries no single-interval requirement


def _forward(e: Expr, box: dict[str, _IV], tol: float, memo: dict[int, _IV]) -> _IV:
    if isinstance(e, Const):
        iv = _IV(e.value, e.value)
    elif isinstance(e, Var):
        iv = box[e.name]
    else:
        left = _forward(e.left, box, tol, memo)
        right = _forward(e.right, box, tol, memo)
        if e.op == "+":
            iv = _add(left, right)
        elif e.op == "-":
            iv = _sub(left, right)
        elif e.op == "*":
            iv = _mul(left, right)
        else:
            iv = _div(left, right, tol)
    memo[id(e)] = iv
    return iv


def _backward(e: Expr, req: _IV, box: dict[str, _IV], tol: float, memo) -> bool:
    """Narrow the box so `e` can lie in `req`; False if that is impossible."""
    current = memo[id(e)]
    narrowed = current.intersect(req)
    if narrowed.is_empty():
        return False
    if isinstance(e, Const):
        return True
    if isinstance(e, Var):
        box[e.name] = box[e.name].intersect(narrowed)
        return not box[e.name].is_empty()
    left, right = memo[id(e.left)], memo[id(e.right)]
    if e.op == "+":
        return _backward(e.left, _sub(narrowed, right), box, tol, memo) and _backward(
            e.right, _sub(narrowed, left), box, tol, memo
        )
    if e.op == "-":
        return _backward(e.left, _add(narrowed, right), box, tol, memo) and _backward(
            e.right, _sub(left, narrowed), box, tol, memo
        )
    if e.op == "*":
        ok = True
        if not right.contains_zero_band(0.0):
            ok = _backward(e.left, _div(narrowed, right, 0.0), box, tol, memo)
        if ok and not left.contains_zero_band(0.0):
            ok = _backward(e.right, _div(narrowed, left, 0.0), box, tol, memo)
        return ok
    # division: left/right in narrowed
    ok = _backward(e.left, _mul(narrowed, right), box, tol, memo)
    if ok and not narrowed.contains_zero_band(0.0):
        ok = _backward(e.right, _div(left, narrowed, tol), box, tol, memo)
    return ok


def _branch_refuted(rels: list[Rel], box: dict[str, _IV], tol: float) -> bool:
    box = dict(box)
    for _ in range(_MAX_ROUNDS):
        changed = False
        for rel in rels:
            memo: dict[int, _IV] = {}
            rng = _forward(rel.exp, box, tol, memo)
            if rel.op == "!=":
                if rng.hi <= tol and rng.lo >= -tol:
                    return True
                continue
            req = _required(rel.op, tol)
            if rng.intersect(req).is_empty():
                return True
            before = dict(box)
            if not _backward(rel.exp, req, box, tol, memo):
                return True
            if any(box[k] != before[k] for k in box):
                changed = True
        if any(iv.is_empty() for iv in box.values()):
            return True
        if not changed:
            break
    return False


# ---------------------------------------------------------------------------
# Witness sampling


def sample_points(
    schema: InputSchema, budget: SatBudget, seed: int
) -> tuple[np.ndarray, dict[str, int]]:
    """Deterministic witness candidates: lattice (small dims) then uniforms."""
    names = schema.all_names()
    lo = np.array([schema.bounds(n)[0] for n in names])
    hi = np.array([schema.bounds(n)[1] for n in names])
    blocks = []
    if len(names) <= GRID_MAX_DIMS and budget.grid_per_dim >= 2:
        axes = [np.linspace(lo[i], hi[i], budget.grid_per_dim) for i in range(len(names))]
        blocks.append(np.array(list(product(*axes))))
    rng = np.random.default_rng(seed)
    blocks.append(lo + rng.random((budget.samples, len(names))) * (hi - lo))
    return np.vstack(blocks), {n: i for i, n in enumerate(names)}


# ---------------------------------------------------------------------------
# Public check


def check_conjunction(
    c1: Node,
    c2: Node,
    schema: InputSchema,
    budget: SatBudget | None = None,
    seed: int = 0,
    eq_tol: float = DEFAULT_EQ_TOL,
    _points: tuple[np.ndarray, dict[str, int]] | None = None,
) -> SatResult:
    """Decide satisfiability of ``c1 and c2`` over the schema box.

    SAT verdicts carry a witness that re-evaluates to true; UNSAT verdicts
    are backed by interval refutation of every DNF branch; everything else
    is UNKNOWN.
    """
    budget = budget or SatBudget()
    matrix, columns = _points if _points is not None else sample_points(schema, budget, seed)

    mask = evaluate_many(c1, matrix, columns, eq_tol) & evaluate_many(
        c2, matrix, columns, eq_tol
    )
    hits = np.flatnonzero(mask)
    if hits.size:
        row = matrix[hits[0]]
        witness = {n: float(row[i]) for n, i in columns.items()}
        if evaluate(c1, witness, eq_tol) and evaluate(c2, witness, eq_tol):
            return SatResult("sat", witness)

    base_box = {
        n: _IV(schema.bounds(n)[0], schema.bounds(n)[1]) for n in schema.all_names()
    }
    for d1 in disjuncts(c1):
        for d2 in disjuncts(c2):
            if not _branch_refuted(rel_terms(d1) + rel_terms(d2), base_box, eq_tol):
                return SatResult("unknown")
    return SatResult("unsat")
