"""End-to-end oracle inference pipelines, one per method name.

Method names: ``gp-ochiai``, ``gp-tarantula``, ``gp-naish`` (two evolution
runs each, one explaining failures and one explaining passes), ``dt``,
``dr``, and ``ensemble`` (the union of every other method's conditions,
re-scored and pruned together).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .datasets import LabeledSet, Verdict
from .errors import OracleKitError
from .gp import GpConfig, evolve
from .grammar import Node
from .mlrules import FeatureSpec, fit_decision_rules, fit_decision_tree
from .oracle import Oracle, build_oracle
from .satcheck import SatBudget

METHODS = ("gp-ochiai", "gp-tarantula", "gp-naish", "dt", "dr", "ensemble")

_PASS_SEED_OFFSET = 1_000_003
_METHOD_SEED_STRIDE = 7_777_777


@dataclass(frozen=True)
class InferSettings:
    gp: dict = field(default_factory=dict)  # GpConfig field overrides
    dt: dict = field(default_factory=dict)
    dr: dict = field(default_factory=dict)
    features: FeatureSpec = FeatureSpec()
    budget: SatBudget = SatBudget()

    @classmethod
    def from_json_dict(cls, d: dict, schema) -> "InferSettings":
        features = FeatureSpec()
        if "features" in d:
            features = FeatureSpec.from_json_dict(d["features"], schema)
        budget = SatBudget(**d.get("satcheck", {}))
        return cls(
            gp=dict(d.get("gp", {})),
            dt=dict(d.get("dt", {})),
            dr=dict(d.get("dr", {})),
            features=features,
            budget=budget,
        )


def _gp_sources(
    ts: LabeledSet, fitness: str, seed: int, overrides: dict
) -> list[tuple[Node, Verdict]]:
    sources: list[tuple[Node, Verdict]] = []
    for target, run_seed in (
        (Verdict.FAIL, seed),
        (Verdict.PASS, seed + _PASS_SEED_OFFSET),
    ):
        cfg = GpConfig(
            **{**overrides, "fitness": fitness, "target_verdict": target, "seed": run_seed}
        )
        for scored in evolve(ts, cfg):
            sources.append((scored.condition, target))
    return sources


def _model_sources(model) -> list[tuple[Node, Verdict]]:
    return [(r.condition, r.verdict) for r in model.rules]


def condition_sources(
    ts: LabeledSet,
    method: str,
    seed: int,
    settings: InferSettings | None = None,
) -> list[tuple[Node, Verdict]]:
    """Candidate (condition, verdict) pairs produced by one inference method."""
    settings = settings or InferSettings()
    if method in ("gp-ochiai", "gp-tarantula", "gp-naish"):
        return _gp_sources(ts, method.split("-", 1)[1], seed, settings.gp)
    if method == "dt":
        return _model_sources(fit_decision_tree(ts, settings.features, settings.dt))
    if method == "dr":
        return _model_sources(fit_decision_rules(ts, settings.features, settings.dr))
    if method == "ensemble":
        out: list[tuple[Node, Verdict]] = []
        for k, m in enumerate(("gp-ochiai", "gp-tarantula", "gp-naish", "dt", "dr")):
            out.extend(
                condition_sources(ts, m, seed + k * _METHOD_SEED_STRIDE, settings)
            )
        return out
    raise OracleKitError(f"unknown method {method!r}; expected one of {METHODS}")


def infer_oracle(
    ts: LabeledSet,
    method: str,
    theta: float,
    seed: int = 0,
    settings: InferSettings | None = None,
) -> Oracle:
    """Run one method end to end and assemble a consistent oracle."""
    settings = settings or InferSettings()
    sources = condition_sources(ts, method, seed, settings)
    return build_oracle(sources, ts, theta, seed=seed, budget=settings.budget)


def preprune_count(
    ts: LabeledSet,
    method: str,
    theta: float,
    seed: int = 0,
    settings: InferSettings | None = None,
) -> int:
    """Assertions that clear the confidence threshold before pruning."""
    from .oracle import Assertion, confidence, dedupe_assertions, threshold_filter

    settings = settings or InferSettings()
    scored = [
        Assertion(c, v, confidence(c, v, ts))
        for c, v in condition_sources(ts, method, seed, settings)
    ]
    return len(dedupe_assertions(threshold_filter(scored, theta)))
