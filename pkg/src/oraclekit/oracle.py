"""Assertion-based oracles: confidence, threshold filtering, consistency pruning.

An oracle is a set of ``condition => pass|fail`` assertions that never issue
conflicting verdicts. Conflicts between pass and fail assertions whose
conditions can hold simultaneously are resolved by a degree/length-guided
vertex removal on the bipartite conflict graph; satisfiability checks that
come back unknown are treated as conflicts, trading extra pruning for the
consistency guarantee.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .datasets import LabeledSet, Verdict
from .errors import OracleKitError
from .grammar import (
    InputSchema,
    Node,
    condition_length,
    evaluate,
    evaluate_many,
    parse_condition,
    print_condition,
    validate_condition,
)
from .satcheck import SatBudget, check_conjunction, sample_points


@dataclass(frozen=True)
class Assertion:
    condition: Node
    verdict: Verdict
    confidence: float

    def __post_init__(self):
        if self.verdict is Verdict.INCONCLUSIVE:
            raise OracleKitError("assertions carry a pass or fail verdict")
        if not 0 <= self.confidence <= 1:
            raise OracleKitError("confidence must lie in [0, 1]")


@dataclass(frozen=True)
class Oracle:
    assertions: tuple[Assertion, ...]
    theta: float
    schema: InputSchema


@dataclass(frozen=True)
class ConflictGraph:
    """Bipartite conflict structure between pass and fail assertions."""

    pass_ids: tuple[int, ...]
    fail_ids: tuple[int, ...]
    edges: frozenset[tuple[int, int]]  # (pass_id, fail_id)


def confidence(cond: Node, verdict: Verdict, ts: LabeledSet) -> float:
    """Precision of ``cond => verdict`` on the training set; 0 if nothing matches."""
    mask = evaluate_many(cond, ts.matrix, ts.columns)
    n_sat = int(mask.sum())
    if n_sat == 0:
        return 0.0
    agree = sum(
        1 for i in np.flatnonzero(mask) if ts.verdicts[int(i)] is verdict
    )
    return agree / n_sat


def threshold_filter(
    assertions: Sequence[Assertion], theta: float
) -> list[Assertion]:
    if not 0 <= theta <= 1:
        raise OracleKitError("theta must lie in [0, 1]")
    return [a for a in assertions if a.confidence >= theta]


def build_conflict_graph(
    assertions: Sequence[Assertion],
    schema: InputSchema,
    budget: SatBudget | None = None,
    seed: int = 0,
) -> ConflictGraph:
    """Edges join pass/fail pairs whose conjunction is SAT or unknown."""
    budget = budget or SatBudget()
    points = sample_points(schema, budget, seed)
    pass_ids = tuple(i for i, a in enumerate(assertions) if a.verdict is Verdict.PASS)
    fail_ids = tuple(i for i, a in enumerate(assertions) if a.verdict is Verdict.FAIL)
    edges = set()
    for i in pass_ids:
        for j in fail_ids:
            res = check_conjunction(
                assertions[i].condition,
                assertions[j].condition,
                schema,
                budget,
                seed,
                _points=points,
            )
            if not res.is_unsat:
                edges.add((i, j))
    return ConflictGraph(pass_ids, fail_ids, frozenset(edges))


def prune(
    assertions: Sequence[Assertion],
    schema: InputSchema,
    seed: int = 0,
    budget: SatBudget | None = None,
    removal_log: list[int] | None = None,
) -> list[Assertion]:
    """Remove assertions until no satisfiable pass/fail condition pair remains.

    Each round removes one conflicted vertex: the shortest-condition vertex
    among those with conflicts; degree breaks length ties, then the pass side
    is preferred, then a seeded random draw.
    """
    graph = build_conflict_graph(assertions, schema, budget, seed)
    edges = set(graph.edges)
    alive = set(graph.pass_ids) | set(graph.fail_ids)
    lengths = {i: condition_length(assertions[i].condition) for i in alive}
    rng = np.random.default_rng(seed)

    def degree(v: int) -> int:
        return sum(1 for e in edges if v in e)

    while edges:
        conflicted = sorted(v for v in alive if degree(v) >= 1)
        min_len = min(lengths[v] for v in conflicted)
        shortest = [v for v in conflicted if lengths[v] == min_len]
        if len(shortest) == 1:
            victim = shortest[0]
        else:
            max_deg = max(degree(v) for v in shortest)
            busiest = [v for v in shortest if degree(v) == max_deg]
            if len(busiest) == 1:
                victim = busiest[0]
            else:
                preferred = [v for v in busiest if v in graph.pass_ids] or busiest
                victim = preferred[int(rng.integers(len(preferred)))]
        if removal_log is not None:
            removal_log.append(victim)
        alive.discard(victim)
        edges = {e for e in edges if victim not in e}
    return [assertions[i] for i in sorted(alive)]


def dedupe_assertions(assertions: Sequence[Assertion]) -> list[Assertion]:
    """Merge syntactic duplicates, keeping the highest-confidence copy."""
    by_key: dict[tuple[str, Verdict], Assertion] = {}
    order: list[tuple[str, Verdict]] = []
    for a in assertions:
        key = (print_condition(a.condition), a.verdict)
        if key not in by_key:
            by_key[key] = a
            order.append(key)
        elif a.confidence > by_key[key].confidence:
            by_key[key] = a
    return [by_key[k] for k in order]


def build_oracle(
    condition_sources: Sequence[tuple[Node, Verdict]],
    ts: LabeledSet,
    theta: float,
    seed: int = 0,
    budget: SatBudget | None = None,
) -> Oracle:
    """Confidence scoring, threshold filtering, dedup, then consistency pruning."""
    scored = [
        Assertion(cond, verdict, confidence(cond, verdict, ts))
        for cond, verdict in condition_sources
    ]
    retained = threshold_filter(scored, theta)
    retained = dedupe_assertions(retained)
    consistent = prune(retained, ts.schema, seed=seed, budget=budget)
    return Oracle(tuple(consistent), theta, ts.schema)


def predict(oracle: Oracle, values: dict[str, float]) -> Verdict:
    """Fail if any fail assertion matches, else pass if any pass assertion matches."""
    for a in oracle.assertions:
        if a.verdict is Verdict.FAIL and evaluate(a.condition, values):
            return Verdict.FAIL
    for a in oracle.assertions:
        if a.verdict is Verdict.PASS and evaluate(a.condition, values):
            return Verdict.PASS
    return Verdict.INCONCLUSIVE


def predict_many(oracle: Oracle, matrix: np.ndarray, columns: dict[str, int]) -> list[Verdict]:
    """Vectorized `predict` over the rows of a matrix."""
    n = matrix.shape[0]
    fail_any = np.zeros(n, dtype=bool)
    pass_any = np.zeros(n, dtype=bool)
    for a in oracle.assertions:
        mask = evaluate_many(a.condition, matrix, columns)
        if a.verdict is Verdict.FAIL:
            fail_any |= mask
        else:
            pass_any |= mask
    out = []
    for i in range(n):
        if fail_any[i]:
            out.append(Verdict.FAIL)
        elif pass_any[i]:
            out.append(Verdict.PASS)
        else:
            out.append(Verdict.INCONCLUSIVE)
    return out


# ---------------------------------------------------------------------------
# Interchange format


def oracle_to_json_dict(oracle: Oracle) -> dict:
    return {
        "theta": oracle.theta,
        "assertions": [
            {
                "condition": print_condition(a.condition),
                "verdict": a.verdict.value,
                "confidence": a.confidence,
            }
            for a in oracle.assertions
        ],
        "schema": oracle.schema.to_json_dict(),
    }


def oracle_from_json_dict(d: dict) -> Oracle:
    schema = InputSchema.from_json_dict(d["schema"])
    assertions = []
    for a in d["assertions"]:
        cond = parse_condition(a["condition"], schema)
        validate_condition(cond, schema)
        assertions.append(
            Assertion(cond, Verdict.parse(a["verdict"]), float(a["confidence"]))
        )
    return Oracle(tuple(assertions), float(d["theta"]), schema)


def oracle_to_json(oracle: Oracle) -> str:
    return json.dumps(oracle_to_json_dict(oracle), indent=2, sort_keys=True) + "\n"


def oracle_from_json(text: str) -> Oracle:
    return oracle_from_json_dict(json.loads(text))
