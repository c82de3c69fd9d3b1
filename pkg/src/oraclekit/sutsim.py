"""Synthetic systems under test with controllable flaky verdicts.

A synthetic SUT is a ground-truth fail region expressed as a condition plus
a stochastic flip model. Verdicts are a pure function of (seed, input,
run index): randomness comes from hashing that key, so rerun matrices are
reproducible without stored state.
"""

from __future__ import annotations

import functools
import hashlib
import json
import struct
from dataclasses import dataclass

import numpy as np

from .datasets import RerunMatrix, Verdict, adaptive_random_generate, inputs_to_matrix
from .errors import OracleKitError
from .grammar import (
    InputSchema,
    Node,
    SignalSpec,
    VariableSpec,
    evaluate,
    parse_condition,
    print_condition,
    validate_condition,
)

_REFERENCE_SAMPLE = 10_000


@dataclass(frozen=True)
class ConstantFlip:
    p: float

    def __post_init__(self):
        if not 0 <= self.p < 1:
            raise OracleKitError("flip probability must lie in [0, 1)")


@dataclass(frozen=True)
class BoundaryFlip:
    """Flakiness concentrated near the pass/fail boundary.

    Flip probability is ``p_max * exp(-d / width)`` where ``d`` is the
    input's normalized distance to the nearest reference point of the
    opposite true class.
    """

    p_max: float
    width: float

    def __post_init__(self):
        if not 0 <= self.p_max < 1 or self.width <= 0:
            raise OracleKitError("need 0 <= p_max < 1 and width > 0")


FlipModel = ConstantFlip | BoundaryFlip


@dataclass(frozen=True)
class SyntheticSut:
    name: str
    schema: InputSchema
    ground_truth: Node  # satisfied => the true verdict is FAIL
    flip: FlipModel
    seed: int = 0
    fail_band: tuple[float, float] = (0.1, 0.6)  # expected base failure-rate range

    def __post_init__(self):
        validate_condition(self.ground_truth, self.schema)


def _key_uniform(seed: int, values: dict[str, float], names: list[str], run_index: int) -> float:
    """Deterministic uniform in [0, 1) keyed on (seed, input, run)."""
    h = hashlib.blake2b(digest_size=8)
    h.update(struct.pack("<qq", seed, run_index))
    for n in names:
        h.update(struct.pack("<d", float(values[n])))
    return int.from_bytes(h.digest(), "little") / 2**64


@functools.lru_cache(maxsize=64)
def _reference_split(sut: SyntheticSut) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Normalized reference points of each true class, for boundary distances."""
    names = sut.schema.all_names()
    lo = np.array([sut.schema.bounds(n)[0] for n in names])
    hi = np.array([sut.schema.bounds(n)[1] for n in names])
    rng = np.random.default_rng(sut.seed ^ 0x5EED)
    pts = lo + rng.random((_REFERENCE_SAMPLE, len(names))) * (hi - lo)
    from .grammar import evaluate_many

    fail_mask = evaluate_many(sut.ground_truth, pts, {n: i for i, n in enumerate(names)})
    norm = (pts - lo) / (hi - lo)
    return norm[fail_mask], norm[~fail_mask], lo, hi


def _flip_probability(sut: SyntheticSut, values: dict[str, float], truth: Verdict) -> float:
    if isinstance(sut.flip, ConstantFlip):
        return sut.flip.p
    fail_ref, pass_ref, lo, hi = _reference_split(sut)
    opposite = pass_ref if truth is Verdict.FAIL else fail_ref
    if opposite.shape[0] == 0:
        return 0.0
    names = sut.schema.all_names()
    x = (np.array([values[n] for n in names]) - lo) / (hi - lo)
    d = float(np.min(np.linalg.norm(opposite - x, axis=1)))
    return sut.flip.p_max * np.exp(-d / sut.flip.width)


def execute(sut: SyntheticSut, values: dict[str, float], run_index: int = 0) -> Verdict:
    """One simulated run: the true verdict, possibly flipped."""
    truth = Verdict.FAIL if evaluate(sut.ground_truth, values) else Verdict.PASS
    p = _flip_probability(sut, values, truth)
    if p > 0 and _key_uniform(sut.seed, values, sut.schema.all_names(), run_index) < p:
        return Verdict.PASS if truth is Verdict.FAIL else Verdict.FAIL
    return truth


def rerun_matrix(sut: SyntheticSut, inputs: list[dict[str, float]], n_runs: int) -> RerunMatrix:
    if n_runs < 1:
        raise OracleKitError("n_runs must be >= 1")
    verdicts = tuple(
        tuple(execute(sut, p, k) for k in range(n_runs)) for p in inputs
    )
    return RerunMatrix(sut.schema, inputs_to_matrix(sut.schema, inputs), verdicts)


def measure_failure_rate(sut: SyntheticSut, n: int = 1000, seed: int = 0) -> float:
    """Base (unflipped) failure rate over an adaptively generated sample."""
    pts = adaptive_random_generate(sut.schema, n, pool=10, seed=seed)
    fails = sum(1 for p in pts if evaluate(sut.ground_truth, p))
    return fails / n


# ---------------------------------------------------------------------------
# Catalog


def _sut(name, schema, text, flip, band, seed=0) -> SyntheticSut:
    return SyntheticSut(name, schema, parse_condition(text, schema), flip, seed, band)


def scenario_catalog() -> list[SyntheticSut]:
    """Named synthetic systems, each in a deterministic and a flaky variant."""
    router = InputSchema(
        variables=(
            VariableSpec("flow_1", 0, 200),
            VariableSpec("flow_2", 0, 200),
            VariableSpec("flow_3", 0, 200),
        )
    )
    ads = InputSchema(
        variables=(
            VariableSpec("speed", 0, 120),
            VariableSpec("road_slope", 0, 10),
            VariableSpec("time_of_day", 0, 24),
            VariableSpec("other_vehicles", 0, 5),
        )
    )
    autopilot = InputSchema(
        signals=(SignalSpec("th", 3, 0, 100), SignalSpec("p", 6, -1, 1)),
        time_horizon=500.0,
    )
    tworegion = InputSchema(
        variables=(VariableSpec("x", 0, 100), VariableSpec("y", 0, 100))
    )

    router_rule = "flow_1 + flow_2 + flow_3 - 400 > 0"
    ads_rule = "speed - 80 > 0 && road_slope - 5 > 0"
    autopilot_rule = "c_p_0 - 0.5 > 0 || c_p_1 - 0.5 > 0"
    tworegion_rule = "x - 25 < 0 && y - 25 < 0 || x - 75 > 0 && y - 75 > 0"

    return [
        _sut("router-capacity", router, router_rule, ConstantFlip(0.0), (0.10, 0.30)),
        _sut("router-capacity-flaky", router, router_rule, ConstantFlip(0.1), (0.10, 0.30)),
        _sut("ads-box", ads, ads_rule, ConstantFlip(0.0), (0.10, 0.30)),
        _sut("ads-box-flaky", ads, ads_rule, BoundaryFlip(0.5, 0.05), (0.10, 0.30)),
        _sut("autopilot-signal", autopilot, autopilot_rule, ConstantFlip(0.0), (0.30, 0.60)),
        _sut("autopilot-signal-flaky", autopilot, autopilot_rule, ConstantFlip(0.05), (0.30, 0.60)),
        _sut("two-region", tworegion, tworegion_rule, ConstantFlip(0.0), (0.10, 0.25)),
        _sut("two-region-flaky", tworegion, tworegion_rule, BoundaryFlip(0.4, 0.08), (0.10, 0.25)),
    ]


def catalog_scenario(name: str) -> SyntheticSut:
    for sut in scenario_catalog():
        if sut.name == name:
            return sut
    raise OracleKitError(
        f"unknown scenario {name!r}; available: {[s.name for s in scenario_catalog()]}"
    )


# ---------------------------------------------------------------------------
# Scenario files


def sut_to_json_dict(sut: SyntheticSut) -> dict:
    if isinstance(sut.flip, ConstantFlip):
        flip = {"model": "constant", "p": sut.flip.p}
    else:
        flip = {"model": "boundary", "p_max": sut.flip.p_max, "width": sut.flip.width}
    return {
        "name": sut.name,
        "schema": sut.schema.to_json_dict(),
        "ground_truth": print_condition(sut.ground_truth),
        "flip": flip,
        "seed": sut.seed,
        "fail_band": list(sut.fail_band),
    }


def sut_from_json_dict(d: dict) -> SyntheticSut:
    schema = InputSchema.from_json_dict(d["schema"])
    flip_d = d.get("flip", {"model": "constant", "p": 0.0})
    if flip_d["model"] == "constant":
        flip: FlipModel = ConstantFlip(float(flip_d["p"]))
    elif flip_d["model"] == "boundary":
        flip = BoundaryFlip(float(flip_d["p_max"]), float(flip_d["width"]))
    else:
        raise OracleKitError(f"unknown flip model {flip_d['model']!r}")
    return SyntheticSut(
        d["name"],
        schema,
        parse_condition(d["ground_truth"], schema),
        flip,
        int(d.get("seed", 0)),
        tuple(d.get("fail_band", (0.1, 0.6))),
    )


def sut_from_json(text: str) -> SyntheticSut:
    return sut_from_json_dict(json.loads(text))
