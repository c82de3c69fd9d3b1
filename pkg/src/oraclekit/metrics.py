"""Accuracy, misprediction, and robustness statistics for oracles."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .datasets import LabeledSet, RerunMatrix, Verdict
from .errors import OracleKitError, TestSetMismatchError
from .oracle import Oracle, predict_many


@dataclass(frozen=True)
class PerTest:
    index: int
    truth: Verdict
    predicted: Verdict


@dataclass(frozen=True)
class EvalReport:
    n_total: int
    n_conclusive: int
    n_correct: int
    accuracy: float
    relative_accuracy: float | None  # None when nothing was conclusive
    pass_as_fail: float
    fail_as_pass: float
    inconclusive_rate: float
    per_test: tuple[PerTest, ...]

    def to_json_dict(self) -> dict:
        return {
            "n_total": self.n_total,
            "n_conclusive": self.n_conclusive,
            "n_correct": self.n_correct,
            "accuracy": self.accuracy,
            "relative_accuracy": self.relative_accuracy,
            "pass_as_fail": self.pass_as_fail,
            "fail_as_pass": self.fail_as_pass,
            "inconclusive_rate": self.inconclusive_rate,
            "per_test": [
                {"index": p.index, "truth": p.truth.value, "predicted": p.predicted.value}
                for p in self.per_test
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n"


def report_from_predictions(
    truths: Sequence[Verdict], predictions: Sequence[Verdict]
) -> EvalReport:
    n = len(truths)
    if n == 0:
        raise OracleKitError("empty test set")
    per = tuple(PerTest(i, t, p) for i, (t, p) in enumerate(zip(truths, predictions)))
    conclusive = [p for p in per if p.predicted is not Verdict.INCONCLUSIVE]
    correct = [p for p in conclusive if p.predicted is p.truth]
    paf = sum(
        1 for p in per if p.truth is Verdict.PASS and p.predicted is Verdict.FAIL
    )
    fap = sum(
        1 for p in per if p.truth is Verdict.FAIL and p.predicted is Verdict.PASS
    )
    n_conclusive = len(conclusive)
    n_correct = len(correct)
    return EvalReport(
        n_total=n,
        n_conclusive=n_conclusive,
        n_correct=n_correct,
        accuracy=n_correct / n,
        relative_accuracy=(n_correct / n_conclusive) if n_conclusive else None,
        pass_as_fail=paf / n,
        fail_as_pass=fap / n,
        inconclusive_rate=(n - n_conclusive) / n,
        per_test=per,
    )


def evaluate_oracle(oracle: Oracle, test_set: LabeledSet) -> EvalReport:
    predictions = predict_many(oracle, test_set.matrix, test_set.columns)
    return report_from_predictions(test_set.verdicts, predictions)


def unique_correct(a: EvalReport, b: EvalReport) -> tuple[float, float]:
    """Fractions of tests predicted correctly by exactly one of two reports."""
    if a.n_total != b.n_total or any(
        pa.truth is not pb.truth for pa, pb in zip(a.per_test, b.per_test)
    ):
        raise TestSetMismatchError("reports must cover the same test set")
    only_a = only_b = 0
    for pa, pb in zip(a.per_test, b.per_test):
        ok_a = pa.predicted is pa.truth
        ok_b = pb.predicted is pb.truth
        only_a += ok_a and not ok_b
        only_b += ok_b and not ok_a
    return only_a / a.n_total, only_b / a.n_total


def aad(values: Sequence[float]) -> float:
    """Average absolute deviation from the mean."""
    if not values:
        raise OracleKitError("aad of an empty sequence")
    arr = np.asarray(values, dtype=float)
    return float(np.mean(np.abs(arr - arr.mean())))


_A12_LEVELS = (  # threshold on |a12 - 0.5|, label
    (0.21, "large"),
    (0.14, "medium"),
    (0.06, "small"),
)


def vargha_delaney_a12(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, str]:
    """Probability-of-superiority effect size with its magnitude label.

    Magnitudes follow the usual cutoffs: small from 0.56, medium from 0.64,
    large from 0.71, mirrored below 0.5 (0.44 / 0.36 / 0.29).
    """
    if not xs or not ys:
        raise OracleKitError("both samples must be nonempty")
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    wins = np.sum(x[:, None] > y[None, :])
    ties = np.sum(x[:, None] == y[None, :])
    a12 = float((wins + 0.5 * ties) / (len(x) * len(y)))
    label = "negligible"
    for cut, name in _A12_LEVELS:
        if abs(a12 - 0.5) >= cut - 1e-12:
            label = name
            break
    return a12, label


@dataclass(frozen=True)
class RobustnessResult:
    per_dataset_accuracies: tuple[float, ...]  # mean accuracy per rerun column
    aad: float
    raw: tuple[tuple[float, ...], ...]  # accuracy per (column, repeat)


def robustness_sweep(
    matrix: RerunMatrix,
    infer_fn: Callable[[LabeledSet, int], Oracle],
    test_set: LabeledSet,
    repeats: int = 1,
    seed: int = 0,
) -> RobustnessResult:
    """Train on every rerun column `repeats` times; summarize accuracy spread.

    `infer_fn(dataset, seed)` builds an oracle; repeats get distinct derived
    seeds so stochastic learners are exercised.
    """
    if repeats < 1:
        raise OracleKitError("repeats must be >= 1")
    raw: list[tuple[float, ...]] = []
    means: list[float] = []
    for k in range(matrix.n_runs):
        column = matrix.column_dataset(k)
        accs = []
        for r in range(repeats):
            derived_seed = seed + 100003 * k + r
            oracle = infer_fn(column, derived_seed)
            accs.append(evaluate_oracle(oracle, test_set).accuracy)
        raw.append(tuple(accs))
        means.append(float(np.mean(accs)))
    return RobustnessResult(tuple(means), aad(means), tuple(raw))
