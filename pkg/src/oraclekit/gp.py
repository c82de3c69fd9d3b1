"""Grammar-guided genetic programming over conditions.

Evolves conditions that explain the failing (or passing) rows of a labeled
training set. Fitness comes from spectrum-based suspiciousness formulas
computed on the counts of passing/failing rows satisfying a candidate; the
pass-side run uses the same formulas with the roles of the two classes
swapped.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .datasets import LabeledSet, Verdict
from .errors import EmptyTargetClassError, OracleKitError
from .grammar import (
    ARITH_OPS,
    And,
    Arith,
    Const,
    Expr,
    InputSchema,
    Node,
    Or,
    REL_OPS,
    Rel,
    Var,
    all_subtrees,
    condition_length,
    evaluate_many,
    print_condition,
    replace_subtree,
    validate_condition,
)

FITNESS_NAMES = ("ochiai", "tarantula", "naish")


@dataclass(frozen=True)
class GpConfig:
    pop_size: int = 50
    generations: int = 50
    mutation_rate: float = 0.1
    crossover_rate: float = 0.7
    max_depth: int = 5
    tournament_size: int = 7
    const_range: tuple[float, float] | None = None  # defaults to the schema hull
    fitness: str = "ochiai"
    target_verdict: Verdict = Verdict.FAIL
    best_k: int = 10
    retry_limit: int = 25
    seed: int = 0

    def __post_init__(self):
        if not (0 <= self.mutation_rate <= 1 and 0 <= self.crossover_rate <= 1):
            raise OracleKitError("rates must lie in [0, 1]")
        if min(self.pop_size, self.tournament_size) < 1 or self.generations < 0:
            raise OracleKitError("pop_size and tournament_size must be >= 1")
        if self.tournament_size > self.pop_size:
            raise OracleKitError("tournament_size cannot exceed pop_size")
        if self.fitness not in FITNESS_NAMES:
            raise OracleKitError(f"fitness must be one of {FITNESS_NAMES}")

    def to_json_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["target_verdict"] = self.target_verdict.value
        if self.const_range is not None:
            d["const_range"] = list(self.const_range)
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "GpConfig":
        kw = dict(d)
        if "target_verdict" in kw:
            kw["target_verdict"] = Verdict.parse(kw["target_verdict"])
        if kw.get("const_range") is not None:
            kw["const_range"] = tuple(kw["const_range"])
        return cls(**kw)


@dataclass(frozen=True)
class ScoredCondition:
    condition: Node
    fitness: float
    c_p: int
    c_f: int


# ---------------------------------------------------------------------------
# Spectrum counts and suspiciousness formulas


def count_spectrum(cond: Node, ts: LabeledSet) -> tuple[int, int]:
    """(passing, failing) row counts satisfying the condition."""
    mask = evaluate_many(cond, ts.matrix, ts.columns)
    passing = np.array([v is Verdict.PASS for v in ts.verdicts])
    return int(np.count_nonzero(mask & passing)), int(
        np.count_nonzero(mask & ~passing)
    )


def fitness_ochiai(c_f: int, c_p: int, n_f: int) -> float:
    if c_f == 0:
        return 0.0
    return c_f / np.sqrt(n_f * (c_p + c_f))


def fitness_tarantula(c_f: int, c_p: int, n_f: int, n_p: int) -> float:
    fail_ratio = c_f / n_f
    pass_ratio = c_p / n_p
    if fail_ratio + pass_ratio == 0:
        return 0.0
    return fail_ratio / (pass_ratio + fail_ratio)


def fitness_naish(c_f: int, c_p: int, n_f: int, n_p: int) -> float:
    if c_f == 0 and c_p == 0:
        # satisfied by nothing: pinned to the formula's minimum so that
        # vacuous conditions lose every tournament
        return -n_p / (1 + n_p)
    return c_f / n_f - c_p / (1 + n_p)


def _uniform_fitness(name: str) -> Callable[..., float]:
    if name == "ochiai":
        return lambda c_f, c_p, n_f, n_p: fitness_ochiai(c_f, c_p, n_f)
    if name == "tarantula":
        return fitness_tarantula
    return fitness_naish


def pass_dual(fn: Callable[..., float]) -> Callable[..., float]:
    """Same formula with failing and passing roles exchanged."""

    def dual(c_f: int = 0, c_p: int = 0, n_f: int = 0, n_p: int = 0) -> float:
        return fn(c_f=c_p, c_p=c_f, n_f=n_p, n_p=n_f)

    return dual


# ---------------------------------------------------------------------------
# Random growth


class _Grower:
    """Grows grammar-valid subtrees within a depth budget."""

    def __init__(self, schema: InputSchema, const_range: tuple[float, float],
                 rng: np.random.Generator):
        self.schema = schema
        self.lo, self.hi = const_range
        self.rng = rng
        self.max_pos = (
            max(s.n_points for s in schema.signals) - 1 if schema.signals else None
        )

    def pick_position(self) -> int | None:
        if self.max_pos is None:
            return None
        return int(self.rng.integers(self.max_pos + 1))

    def vars_at(self, position: int | None) -> list[str]:
        out = [v.name for v in self.schema.variables]
        if position is not None:
            for s in self.schema.signals:
                if position < s.n_points:
                    out.append(f"c_{s.name}_{position}")
        return out

    def const(self) -> Const:
        return Const(float(self.rng.uniform(self.lo, self.hi)))

    def atom(self, vars_: list[str]) -> Expr:
        if vars_ and self.rng.random() < 0.75:
            return Var(vars_[int(self.rng.integers(len(vars_)))])
        return self.const()

    def exp(self, budget: int, vars_: list[str]) -> Expr:
        if budget > 0 and self.rng.random() < 0.45:
            op = ARITH_OPS[int(self.rng.integers(len(ARITH_OPS)))]
            return Arith(op, self.exp(budget - 1, vars_), self.exp(budget - 1, vars_))
        return self.atom(vars_)

    def rel_term(self, budget: int) -> Rel:
        vars_ = self.vars_at(self.pick_position())
        op = REL_OPS[int(self.rng.integers(len(REL_OPS)))]
        shown = self.exp(budget - 1, vars_)
        if not isinstance(shown, Const) and self.rng.random() < 0.7:
            # var-versus-constant display form; the subtraction is free depth
            return Rel(Arith("-", shown, self.const()), op)
        return Rel(shown, op)

    def and_term(self, budget: int) -> Node:
        if budget >= 2 and self.rng.random() < 0.35:
            width = 2 + int(self.rng.random() < 0.25)
            return And(tuple(self.rel_term(budget - 1) for _ in range(width)))
        return self.rel_term(budget)

    def or_term(self, budget: int) -> Node:
        if budget >= 2 and self.rng.random() < 0.2:
            width = 2 + int(self.rng.random() < 0.25)
            return Or(tuple(self.and_term(budget - 1) for _ in range(width)))
        return self.and_term(budget)


def _schema_hull(schema: InputSchema) -> tuple[float, float]:
    bounds = [schema.bounds(n) for n in schema.all_names()]
    return (min(b[0] for b in bounds), max(b[1] for b in bounds))


def grow_random(
    schema: InputSchema,
    max_depth: int,
    const_range: tuple[float, float] | None = None,
    rng: np.random.Generator | None = None,
) -> Node:
    """Grow a random grammar-valid condition of bounded depth."""
    rng = rng if rng is not None else np.random.default_rng(0)
    grower = _Grower(schema, const_range or _schema_hull(schema), rng)
    cond = grower.or_term(max_depth)
    validate_condition(cond, schema, max_depth=max_depth)
    return cond


# ---------------------------------------------------------------------------
# Variation operators


def _kind(node) -> str:
    if isinstance(node, Or):
        return "or"
    if isinstance(node, And):
        return "and"
    if isinstance(node, Rel):
        return "rel"
    return "exp"


def _is_valid(cond: Node, schema: InputSchema, max_depth: int) -> bool:
    try:
        validate_condition(cond, schema, max_depth=max_depth)
        return True
    except OracleKitError:
        return False


def crossover_one_point(
    a: Node,
    b: Node,
    rng: np.random.Generator,
    schema: InputSchema,
    max_depth: int = 5,
    retry_limit: int = 25,
) -> tuple[Node, Node]:
    """Swap one same-kind subtree pair; invalid offspring are re-drawn.

    Returns the parents unchanged when no valid offspring emerge within
    `retry_limit` attempts.
    """
    subs_a = all_subtrees(a)
    by_kind_b: dict[str, list] = {}
    for path, node in all_subtrees(b):
        by_kind_b.setdefault(_kind(node), []).append((path, node))
    for _ in range(retry_limit):
        path_a, node_a = subs_a[int(rng.integers(len(subs_a)))]
        pool = by_kind_b.get(_kind(node_a))
        if not pool:
            continue
        path_b, node_b = pool[int(rng.integers(len(pool)))]
        child_a = replace_subtree(a, path_a, node_b)
        child_b = replace_subtree(b, path_b, node_a)
        if _is_valid(child_a, schema, max_depth) and _is_valid(child_b, schema, max_depth):
            return child_a, child_b
    return a, b


def mutate_one_point(
    a: Node,
    rng: np.random.Generator,
    schema: InputSchema,
    max_depth: int = 5,
    const_range: tuple[float, float] | None = None,
    retry_limit: int = 25,
) -> Node:
    """Replace one uniformly chosen subtree with fresh growth of the same kind."""
    grower = _Grower(schema, const_range or _schema_hull(schema), rng)
    subs = all_subtrees(a)
    for _ in range(retry_limit):
        path, node = subs[int(rng.integers(len(subs)))]
        kind = _kind(node)
        budget = max(1, max_depth - len(path))
        if isinstance(node, Const):
            # terminals regrow as fresh terminals of the same type, the usual
            # treatment for ephemeral constants
            new: object = grower.const()
        elif isinstance(node, Var):
            vars_ = grower.vars_at(grower.pick_position())
            if not vars_:
                continue
            new = Var(vars_[int(rng.integers(len(vars_)))])
        elif kind == "exp":
            vars_ = grower.vars_at(grower.pick_position())
            new = grower.exp(min(2, budget), vars_)
        elif kind == "rel":
            new = grower.rel_term(budget)
        elif kind == "and":
            new = grower.and_term(max(2, budget))
            if not isinstance(new, And):
                new = And((new, grower.rel_term(max(1, budget - 1))))
        else:
            new = grower.or_term(max(2, budget))
            if not isinstance(new, Or):
                new = Or((new, grower.and_term(max(1, budget - 1))))
        child = replace_subtree(a, path, new)
        if _is_valid(child, schema, max_depth):
            return child
    return a


# ---------------------------------------------------------------------------
# Evolution loop


def _survivor_tournaments(
    union: list[ScoredCondition], cfg: GpConfig, rng: np.random.Generator
) -> list[ScoredCondition]:
    """Fill the next population with tournament winners drawn without
    replacement from parents plus offspring (keeps the pool diverse)."""
    remaining = list(range(len(union)))
    survivors: list[ScoredCondition] = []
    for _ in range(cfg.pop_size):
        k = min(cfg.tournament_size, len(remaining))
        picks = rng.integers(len(remaining), size=k)
        best_slot = max(
            set(int(i) for i in picks),
            key=lambda i: (
                union[remaining[i]].fitness,
                -condition_length(union[remaining[i]].condition),
            ),
        )
        survivors.append(union[remaining[best_slot]])
        remaining.pop(best_slot)
    return survivors


def evolve(
    ts: LabeledSet,
    cfg: GpConfig,
    history: list[tuple[int, float, float]] | None = None,
) -> list[ScoredCondition]:
    """Evolve conditions explaining the rows with ``cfg.target_verdict``.

    Tournament selection draws the next population from parents plus
    offspring, the all-time best individual is re-inserted each generation,
    and the result is the deduplicated top slice with positive fitness.
    """
    n_p = ts.count(Verdict.PASS)
    n_f = ts.count(Verdict.FAIL)
    target_rows = n_f if cfg.target_verdict is Verdict.FAIL else n_p
    if len(ts) == 0 or target_rows == 0:
        raise EmptyTargetClassError(
            f"training set has no {cfg.target_verdict.value} rows"
        )

    base = _uniform_fitness(cfg.fitness)
    score_fn = base if cfg.target_verdict is Verdict.FAIL else pass_dual(base)
    passing = np.array([v is Verdict.PASS for v in ts.verdicts])
    columns = ts.columns
    const_range = cfg.const_range or _schema_hull(ts.schema)
    rng = np.random.default_rng(cfg.seed)

    def score(cond: Node) -> ScoredCondition:
        mask = evaluate_many(cond, ts.matrix, columns)
        c_p = int(np.count_nonzero(mask & passing))
        c_f = int(np.count_nonzero(mask & ~passing))
        fit = float(score_fn(c_f=c_f, c_p=c_p, n_f=n_f, n_p=n_p))
        return ScoredCondition(cond, fit, c_p, c_f)

    def tournament(pool: list[ScoredCondition]) -> ScoredCondition:
        # fitness ties break toward shorter conditions
        picks = rng.integers(len(pool), size=cfg.tournament_size)
        return max(
            (pool[int(i)] for i in picks),
            key=lambda s: (s.fitness, -condition_length(s.condition)),
        )

    population = [
        score(grow_random(ts.schema, cfg.max_depth, const_range, rng))
        for _ in range(cfg.pop_size)
    ]
    best = max(population, key=lambda s: s.fitness)
    if history is not None:
        history.append((0, best.fitness, float(np.mean([s.fitness for s in population]))))

    for gen in range(cfg.generations):
        offspring: list[Node] = []
        while len(offspring) < cfg.pop_size:
            p1, p2 = tournament(population), tournament(population)
            if rng.random() < cfg.crossover_rate:
                k1, k2 = crossover_one_point(
                    p1.condition, p2.condition, rng, ts.schema,
                    cfg.max_depth, cfg.retry_limit,
                )
            else:
                k1, k2 = p1.condition, p2.condition
            for kid in (k1, k2):
                if rng.random() < cfg.mutation_rate:
                    kid = mutate_one_point(
                        kid, rng, ts.schema, cfg.max_depth, const_range, cfg.retry_limit
                    )
                offspring.append(kid)
        union = population + [score(c) for c in offspring[: cfg.pop_size]]
        population = _survivor_tournaments(union, cfg, rng)
        gen_best = max(union, key=lambda s: s.fitness)
        if gen_best.fitness > best.fitness:
            best = gen_best
        if all(s.condition != best.condition for s in population):
            worst = min(range(len(population)), key=lambda i: population[i].fitness)
            population[worst] = best
        if history is not None:
            history.append(
                (gen + 1, best.fitness, float(np.mean([s.fitness for s in population])))
            )

    by_text: dict[str, ScoredCondition] = {}
    for s in population:
        text = print_condition(s.condition)
        if text not in by_text or s.fitness > by_text[text].fitness:
            by_text[text] = s
    ranked = sorted(
        (s for s in by_text.values() if s.fitness > 0),
        key=lambda s: (-s.fitness, print_condition(s.condition)),
    )
    return ranked[: cfg.best_k]
