"""Command-line front end for the oracle inference pipeline.

Subcommands: ``gen`` (synthetic datasets), ``infer`` (train an oracle),
``predict``, ``eval``, ``sweep`` (verdict-threshold sweep), and ``robust``
(accuracy variation across rerun columns). Every command is deterministic
under a fixed seed and writes a run manifest next to its outputs.

Exit codes: 0 success, 2 validation error, 3 empty result (with warning),
1 internal error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .datasets import (
    LabeledSet,
    Verdict,
    adaptive_random_generate,
    inputs_to_matrix,
    labeled_set_from_csv,
    labeled_set_to_csv,
    rerun_matrix_from_csv,
    rerun_matrix_to_csv,
)
from .errors import OracleKitError
from .grammar import InputSchema, format_number
from .infer import METHODS, InferSettings, infer_oracle, preprune_count
from .metrics import evaluate_oracle, robustness_sweep
from .oracle import oracle_from_json, oracle_to_json, predict_many
from .sutsim import catalog_scenario, rerun_matrix, sut_from_json

CONFIG_ENV = "ORACLEKIT_CONFIG"

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_VALIDATION = 2
EXIT_EMPTY = 3


def _parallel_map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _load_config(path: str | None) -> dict:
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    return json.loads(Path(path).read_text())


def _merged(args: argparse.Namespace, config: dict, key: str, default):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _write_manifest(out_path: Path, command: str, config: dict, seed: int,
                    inputs: list[str], outputs: list[str], elapsed: float) -> None:
    digest = hashlib.sha256(
        json.dumps(config, sort_keys=True).encode()
    ).hexdigest()
    manifest = {
        "command": command,
        "config_digest": digest,
        "seed": seed,
        "inputs": sorted(inputs),
        "outputs": sorted(outputs),
        "version": __version__,
        "wall_clock_s": round(elapsed, 3),
    }
    path = out_path / "manifest.json" if out_path.is_dir() else Path(
        str(out_path) + ".manifest.json"
    )
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _read_schema(path: str) -> InputSchema:
    return InputSchema.from_json_dict(json.loads(Path(path).read_text()))


def _read_labeled(path: str, schema: InputSchema) -> LabeledSet:
    return labeled_set_from_csv(Path(path).read_text(), schema, name=Path(path).stem)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    path.write_text(buf.getvalue())


# ---------------------------------------------------------------------------
# Subcommands


def cmd_gen(args: argparse.Namespace, config: dict) -> int:
    t0 = time.monotonic()
    if args.scenario_file:
        sut = sut_from_json(Path(args.scenario_file).read_text())
    else:
        sut = catalog_scenario(args.scenario)
    n = _merged(args, config, "n", 100)
    runs = _merged(args, config, "runs", 10)
    seed = _merged(args, config, "seed", 0)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    inputs = adaptive_random_generate(sut.schema, n, seed=seed) if n > 0 else []
    if inputs:
        matrix = rerun_matrix(sut, inputs, runs)
        matrix_csv = rerun_matrix_to_csv(matrix)
        run_sets = [matrix.column_dataset(k) for k in range(runs)]
    else:
        names = sut.schema.all_names()
        matrix_csv = ",".join(names + [f"verdict_{k + 1}" for k in range(runs)]) + "\n"
        run_sets = []
    (out / "matrix.csv").write_text(matrix_csv)
    written = [str(out / "matrix.csv")]
    for k in range(runs):
        path = out / f"run_{k + 1}.csv"
        if run_sets:
            path.write_text(labeled_set_to_csv(run_sets[k]))
        else:
            path.write_text(",".join(sut.schema.all_names() + ["verdict"]) + "\n")
        written.append(str(path))
    (out / "schema.json").write_text(
        json.dumps(sut.schema.to_json_dict(), indent=2, sort_keys=True) + "\n"
    )
    written.append(str(out / "schema.json"))
    _write_manifest(out, "gen", config, seed, [], written, time.monotonic() - t0)
    return EXIT_OK


def cmd_infer(args: argparse.Namespace, config: dict) -> int:
    t0 = time.monotonic()
    schema = _read_schema(args.schema)
    ts = _read_labeled(args.train, schema)
    method = _merged(args, config, "method", "gp-ochiai")
    theta = _merged(args, config, "theta", 0.7)
    seed = _merged(args, config, "seed", 0)
    settings = InferSettings.from_json_dict(config, schema)
    oracle = infer_oracle(ts, method, theta, seed=seed, settings=settings)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(oracle_to_json(oracle))
    _write_manifest(
        out, "infer", config, seed, [args.train, args.schema], [str(out)],
        time.monotonic() - t0,
    )
    if not oracle.assertions:
        print("warning: oracle is empty (every input will be inconclusive)",
              file=sys.stderr)
        return EXIT_EMPTY
    return EXIT_OK


def cmd_predict(args: argparse.Namespace, config: dict) -> int:
    t0 = time.monotonic()
    oracle = oracle_from_json(Path(args.oracle).read_text())
    names = oracle.schema.all_names()
    reader = csv.reader(io.StringIO(Path(args.inputs).read_text()))
    header = next(reader)
    if header[: len(names)] != names:
        raise OracleKitError(
            f"inputs csv header {header} does not start with schema columns {names}"
        )
    rows = [r for r in reader if r]
    import numpy as np

    matrix = np.array([[float(x) for x in r[: len(names)]] for r in rows], dtype=float)
    matrix = matrix.reshape(len(rows), len(names))
    preds = predict_many(oracle, matrix, {n: i for i, n in enumerate(names)})
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(
        out,
        names + ["prediction"],
        [
            [format_number(float(matrix[i, j])) for j in range(len(names))]
            + [preds[i].value]
            for i in range(len(rows))
        ],
    )
    _write_manifest(
        out, "predict", config, 0, [args.oracle, args.inputs], [str(out)],
        time.monotonic() - t0,
    )
    return EXIT_OK


_METRIC_COLUMNS = [
    "accuracy", "relative_accuracy", "inconclusive_rate",
    "pass_as_fail", "fail_as_pass", "n_total", "n_conclusive", "n_correct",
]


def cmd_eval(args: argparse.Namespace, config: dict) -> int:
    t0 = time.monotonic()
    oracle = oracle_from_json(Path(args.oracle).read_text())
    ts = _read_labeled(args.test, oracle.schema)
    report = evaluate_oracle(oracle, ts)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.to_json())
    csv_path = out.with_suffix(".csv")
    d = report.to_json_dict()
    _write_csv(csv_path, _METRIC_COLUMNS, [[d[c] for c in _METRIC_COLUMNS]])
    _write_manifest(
        out, "eval", config, 0, [args.oracle, args.test],
        [str(out), str(csv_path)], time.monotonic() - t0,
    )
    return EXIT_OK


def _parse_thetas(text: str | None) -> list[float]:
    if not text:
        return [i / 100 for i in range(50, 101, 5)]
    return [float(x) for x in text.split(",")]


def cmd_sweep(args: argparse.Namespace, config: dict) -> int:
    t0 = time.monotonic()
    schema = _read_schema(args.schema)
    train = _read_labeled(args.train, schema)
    test = _read_labeled(args.test, schema)
    method = _merged(args, config, "method", "gp-ochiai")
    seed = _merged(args, config, "seed", 0)
    jobs = _merged(args, config, "jobs", 1)
    thetas = _parse_thetas(_merged(args, config, "thetas", None))
    settings = InferSettings.from_json_dict(config, schema)

    def cell(theta: float):
        oracle = infer_oracle(train, method, theta, seed=seed, settings=settings)
        pre = preprune_count(train, method, theta, seed=seed, settings=settings)
        report = evaluate_oracle(oracle, test)
        return theta, pre, len(oracle.assertions), report

    results = _parallel_map(cell, thetas, jobs)
    header = ["theta", "n_preprune", "n_assertions"] + _METRIC_COLUMNS
    rows = []
    for theta, pre, kept, report in results:
        d = report.to_json_dict()
        rows.append([theta, pre, kept] + [d[c] for c in _METRIC_COLUMNS])
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(out, header, rows)
    md_path = out.with_suffix(".md")
    md = [f"# Threshold sweep: {method}", ""]
    md.append("| " + " | ".join(header) + " |")
    md.append("|" + "---|" * len(header))
    for row in rows:
        md.append("| " + " | ".join(_fmt(x) for x in row) + " |")
    md_path.write_text("\n".join(md) + "\n")
    _write_manifest(
        out, "sweep", config, seed, [args.train, args.test, args.schema],
        [str(out), str(md_path)], time.monotonic() - t0,
    )
    return EXIT_OK


def cmd_robust(args: argparse.Namespace, config: dict) -> int:
    t0 = time.monotonic()
    schema = _read_schema(args.schema)
    matrix = rerun_matrix_from_csv(Path(args.matrix).read_text(), schema)
    test = _read_labeled(args.test, schema)
    method = _merged(args, config, "method", "gp-ochiai")
    theta = _merged(args, config, "theta", 0.7)
    seed = _merged(args, config, "seed", 0)
    repeats = _merged(args, config, "repeats", 5)
    settings = InferSettings.from_json_dict(config, schema)

    def infer_fn(ts: LabeledSet, cell_seed: int):
        return infer_oracle(ts, method, theta, seed=cell_seed, settings=settings)

    result = robustness_sweep(matrix, infer_fn, test, repeats=repeats, seed=seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(
        json.dumps(
            {
                "per_dataset_accuracies": list(result.per_dataset_accuracies),
                "aad": result.aad,
                "raw": [list(r) for r in result.raw],
            },
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    csv_path = out.with_suffix(".csv")
    _write_csv(
        csv_path,
        ["dataset", "mean_accuracy"],
        [[k + 1, acc] for k, acc in enumerate(result.per_dataset_accuracies)],
    )
    _write_manifest(
        out, "robust", config, seed, [args.matrix, args.test, args.schema],
        [str(out), str(csv_path)], time.monotonic() - t0,
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oraclekit", description=__doc__)
    p.add_argument("--config", help=f"JSON config file (or ${CONFIG_ENV})")
    sub = p.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen", help="generate a synthetic rerun dataset")
    g.add_argument("--scenario", help="catalog scenario name")
    g.add_argument("--scenario-file", help="scenario JSON file")
    g.add_argument("--n", type=int)
    g.add_argument("--runs", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(fn=cmd_gen)

    i = sub.add_parser("infer", help="infer an oracle from a labeled csv")
    i.add_argument("--train", required=True)
    i.add_argument("--schema", required=True)
    i.add_argument("--method", choices=METHODS)
    i.add_argument("--theta", type=float)
    i.add_argument("--seed", type=int)
    i.add_argument("--jobs", type=int)
    i.add_argument("--out", required=True, help="oracle json path")
    i.set_defaults(fn=cmd_infer)

    pr = sub.add_parser("predict", help="predict verdicts for inputs")
    pr.add_argument("--oracle", required=True)
    pr.add_argument("--inputs", required=True)
    pr.add_argument("--out", required=True)
    pr.set_defaults(fn=cmd_predict)

    e = sub.add_parser("eval", help="evaluate an oracle on a labeled csv")
    e.add_argument("--oracle", required=True)
    e.add_argument("--test", required=True)
    e.add_argument("--out", required=True, help="report json path")
    e.set_defaults(fn=cmd_eval)

    s = sub.add_parser("sweep", help="metric sweep over verdict thresholds")
    s.add_argument("--train", required=True)
    s.add_argument("--test", required=True)
    s.add_argument("--schema", required=True)
    s.add_argument("--method", choices=METHODS)
    s.add_argument("--thetas", help="comma-separated list (default 0.5..1.0 step 0.05)")
    s.add_argument("--seed", type=int)
    s.add_argument("--jobs", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_sweep)

    r = sub.add_parser("robust", help="accuracy variation across rerun columns")
    r.add_argument("--matrix", required=True)
    r.add_argument("--test", required=True)
    r.add_argument("--schema", required=True)
    r.add_argument("--method", choices=METHODS)
    r.add_argument("--theta", type=float)
    r.add_argument("--repeats", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--jobs", type=int)
    r.set_defaults(fn=cmd_robust)
    r.add_argument("--out", required=True)

    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _load_config(args.config)
        return args.fn(args, config)
    except OracleKitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # pragma: no cover - internal failure path
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
