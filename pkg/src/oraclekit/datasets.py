"""Labeled test data: verdicts, datasets, rerun matrices, and generation."""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import SchemaError
from .grammar import InputSchema, format_number


class Verdict(enum.Enum):
    PASS = "pass"
    FAIL = "fail"
    INCONCLUSIVE = "inconclusive"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, text: str) -> "Verdict":
        return cls(text.strip().lower())


@dataclass(frozen=True)
class LabeledSet:
    """Test inputs with pass/fail labels, stored as a row matrix."""

    schema: InputSchema
    matrix: np.ndarray  # shape (n, d), column order = schema.all_names()
    verdicts: tuple[Verdict, ...]
    name: str = ""

    def __post_init__(self):
        if self.matrix.ndim != 2 or self.matrix.shape[1] != len(self.schema.all_names()):
            raise SchemaError("matrix shape does not match the schema")
        if len(self.verdicts) != self.matrix.shape[0]:
            raise SchemaError("one verdict per row required")
        if any(v is Verdict.INCONCLUSIVE for v in self.verdicts):
            raise SchemaError("labeled rows must be pass or fail")

    def __len__(self) -> int:
        return self.matrix.shape[0]

    @property
    def columns(self) -> dict[str, int]:
        return {n: i for i, n in enumerate(self.schema.all_names())}

    def row(self, i: int) -> dict[str, float]:
        names = self.schema.all_names()
        return {n: float(self.matrix[i, j]) for j, n in enumerate(names)}

    def rows(self) -> Iterable[tuple[dict[str, float], Verdict]]:
        for i in range(len(self)):
            yield self.row(i), self.verdicts[i]

    def count(self, verdict: Verdict) -> int:
        return sum(1 for v in self.verdicts if v is verdict)

    @classmethod
    def from_rows(
        cls,
        schema: InputSchema,
        rows: Sequence[tuple[dict[str, float], Verdict]],
        name: str = "",
    ) -> "LabeledSet":
        names = schema.all_names()
        matrix = np.array([[r[0][n] for n in names] for r in rows], dtype=float)
        matrix = matrix.reshape(len(rows), len(names))
        return cls(schema, matrix, tuple(r[1] for r in rows), name)


@dataclass(frozen=True)
class RerunMatrix:
    """Verdicts from repeated executions of the same inputs, one column per run."""

    schema: InputSchema
    matrix: np.ndarray  # inputs, shape (n, d)
    verdicts: tuple[tuple[Verdict, ...], ...]  # shape (n, n_runs)

    def __post_init__(self):
        if len(self.verdicts) != self.matrix.shape[0]:
            raise SchemaError("one verdict row per input required")
        widths = {len(r) for r in self.verdicts}
        if len(widths) > 1 or (widths and widths.pop() < 1):
            raise SchemaError("verdict matrix must be rectangular with >= 1 run")

    @property
    def n_runs(self) -> int:
        return len(self.verdicts[0]) if self.verdicts else 0

    def __len__(self) -> int:
        return self.matrix.shape[0]

    def column_dataset(self, k: int, name: str = "") -> LabeledSet:
        """The dataset labeled by run `k` (0-based)."""
        labels = tuple(row[k] for row in self.verdicts)
        return LabeledSet(self.schema, self.matrix, labels, name or f"run_{k + 1}")


def flakiness_rate(m: RerunMatrix) -> float:
    """Fraction of inputs whose repeated runs disagree."""
    if m.n_runs < 2:
        raise SchemaError("flakiness requires at least two runs")
    flaky = sum(1 for row in m.verdicts if len(set(row)) > 1)
    return flaky / len(m)


def majority_filter(m: RerunMatrix, min_agreement: float) -> LabeledSet:
    """Keep inputs whose majority verdict reaches `min_agreement`, labeled by it."""
    if not 0.5 < min_agreement <= 1:
        raise SchemaError("min_agreement must be in (0.5, 1]")
    keep: list[int] = []
    labels: list[Verdict] = []
    for i, row in enumerate(m.verdicts):
        n_pass = sum(1 for v in row if v is Verdict.PASS)
        best = max(n_pass, len(row) - n_pass)
        if best / len(row) >= min_agreement:
            keep.append(i)
            labels.append(Verdict.PASS if n_pass * 2 > len(row) else Verdict.FAIL)
    return LabeledSet(m.schema, m.matrix[keep], tuple(labels), name="majority")


# ---------------------------------------------------------------------------
# Adaptive random generation


def adaptive_random_generate(
    schema: InputSchema, n: int, pool: int = 10, seed: int = 0
) -> list[dict[str, float]]:
    """Distance-maximizing random test inputs (fixed-size candidate set).

    The first point is uniform; every further point is the candidate, out of
    `pool` uniform draws, farthest (in min-min-max-normalized Euclidean
    distance) from the points already chosen.
    """
    if n < 1 or pool < 1:
        raise SchemaError("n and pool must be >= 1")
    names = schema.all_names()
    lo = np.array([schema.bounds(v)[0] for v in names])
    hi = np.array([schema.bounds(v)[1] for v in names])
    span = hi - lo
    rng = np.random.default_rng(seed)
    chosen = np.empty((n, len(names)))
    chosen[0] = lo + rng.random(len(names)) * span
    for i in range(1, n):
        cands = lo + rng.random((pool, len(names))) * span
        norm_c = (cands - lo) / span
        norm_sel = (chosen[:i] - lo) / span
        dists = np.linalg.norm(norm_c[:, None, :] - norm_sel[None, :, :], axis=2)
        chosen[i] = cands[int(np.argmax(dists.min(axis=1)))]
    return [{v: float(row[j]) for j, v in enumerate(names)} for row in chosen]


def inputs_to_matrix(
    schema: InputSchema, inputs: Sequence[dict[str, float]]
) -> np.ndarray:
    names = schema.all_names()
    return np.array([[p[v] for v in names] for p in inputs], dtype=float).reshape(
        len(inputs), len(names)
    )


# ---------------------------------------------------------------------------
# CSV / JSON interchange


def _write_csv(header: list[str], rows: Iterable[list[str]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def labeled_set_to_csv(ts: LabeledSet) -> str:
    names = ts.schema.all_names()
    rows = (
        [format_number(float(ts.matrix[i, j])) for j in range(len(names))]
        + [ts.verdicts[i].value]
        for i in range(len(ts))
    )
    return _write_csv(names + ["verdict"], rows)


def labeled_set_from_csv(text: str, schema: InputSchema, name: str = "") -> LabeledSet:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    names = schema.all_names()
    if header != names + ["verdict"]:
        raise SchemaError(f"csv header {header} does not match schema columns {names}")
    rows = [r for r in reader if r]
    matrix = np.array([[float(x) for x in r[:-1]] for r in rows], dtype=float)
    matrix = matrix.reshape(len(rows), len(names))
    verdicts = tuple(Verdict.parse(r[-1]) for r in rows)
    return LabeledSet(schema, matrix, verdicts, name)


def rerun_matrix_to_csv(m: RerunMatrix) -> str:
    names = m.schema.all_names()
    header = names + [f"verdict_{k + 1}" for k in range(m.n_runs)]
    rows = (
        [format_number(float(m.matrix[i, j])) for j in range(len(names))]
        + [v.value for v in m.verdicts[i]]
        for i in range(len(m))
    )
    return _write_csv(header, rows)


def rerun_matrix_from_csv(text: str, schema: InputSchema) -> RerunMatrix:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    names = schema.all_names()
    if header[: len(names)] != names:
        raise SchemaError(f"csv header {header} does not match schema columns {names}")
    n_runs = len(header) - len(names)
    if n_runs < 1 or header[len(names) :] != [f"verdict_{k + 1}" for k in range(n_runs)]:
        raise SchemaError("rerun csv needs verdict_1..verdict_k columns")
    rows = [r for r in reader if r]
    matrix = np.array([[float(x) for x in r[: len(names)]] for r in rows], dtype=float)
    matrix = matrix.reshape(len(rows), len(names))
    verdicts = tuple(
        tuple(Verdict.parse(x) for x in r[len(names) :]) for r in rows
    )
    return RerunMatrix(schema, matrix, verdicts)


def labeled_set_to_json_dict(ts: LabeledSet) -> dict:
    return {
        "schema": ts.schema.to_json_dict(),
        "name": ts.name,
        "rows": [
            {"input": inp, "verdict": v.value} for inp, v in ts.rows()
        ],
    }


def labeled_set_from_json_dict(d: dict) -> LabeledSet:
    schema = InputSchema.from_json_dict(d["schema"])
    rows = [
        ({k: float(x) for k, x in r["input"].items()}, Verdict.parse(r["verdict"]))
        for r in d["rows"]
    ]
    return LabeledSet.from_rows(schema, rows, d.get("name", ""))
