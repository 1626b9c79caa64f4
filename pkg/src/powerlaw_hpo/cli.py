"""Command-line entry point for batch experiments.

Subcommands: ``run`` (HPO methods x benchmarks x seeds, trajectory CSVs
plus an aggregate), ``forecast`` (curve-forecasting report), ``synth``
(synthetic benchmark generation) and ``report`` (re-aggregation of a
trajectory directory).

All randomness flows from explicit seeds and wall-time columns are
written as 0.0, so every command is byte-reproducible; process timings
remain available through the Python API (RunSettings.record_wall_time).
Exit codes: 0 success, 2 usage, 3 data/schema, 4 internal.
"""

from __future__ import annotations

import argparse
import csv
import math
import re
import sys
from pathlib import Path

import numpy as np

from .baselines import BASELINE_RUNNERS
from .benchmarks import (
    BenchmarkFormatError,
    BenchmarkTable,
    generate_synthetic,
    load_benchmark,
    oracle,
    save_benchmark,
)
from .forecasting import ForecastModel, run_forecast_experiment
from .hpo_loop import TRAJECTORY_COLUMNS, RunSettings, Trajectory, run_dpl

METHODS = ("dpl", "rs", "sh", "hb", "asha")
FORECAST_MODELS = tuple(m.value for m in ForecastModel)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4

AGGREGATE_FILENAME = "aggregate.csv"
AGGREGATE_COLUMNS = ("method", "steps", "mean_normalized_regret", "stderr_normalized_regret", "n_runs")
FORECAST_COLUMNS = ("model", "fraction", "seed", "spearman", "mean_abs_rel_error")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([str(v) for v in row])


def _safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name)


def write_trajectory_csv(trajectory: Trajectory, out_dir: Path) -> Path:
    name = f"{trajectory.method}__{_safe_name(trajectory.dataset)}__seed{trajectory.seed}.csv"
    path = out_dir / name
    _write_csv(path, TRAJECTORY_COLUMNS, trajectory.to_rows())
    return path


def read_trajectory_rows(path: Path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != TRAJECTORY_COLUMNS:
            raise BenchmarkFormatError(
                f"{path}: expected trajectory columns {TRAJECTORY_COLUMNS}, got {reader.fieldnames}"
            )
        return list(reader)


def _lvcf(series: list[tuple[int, float]], grid: list[int]) -> list[float]:
    """Step-function (last value carried forward) evaluation on a grid.

    Grid points before the first observation take the first value.
    """
    out = []
    i = 0
    current = series[0][1]
    for step in grid:
        while i < len(series) and series[i][0] <= step:
            current = series[i][1]
            i += 1
        out.append(current)
    return out


def aggregate_trajectory_rows(rows: list[dict]) -> tuple[tuple[str, ...], list[tuple]]:
    """Mean and standard error of normalized regret per (method, step).

    Each (method, dataset, seed) trajectory becomes a step function on the
    union grid of all observed step counts; per method and grid point the
    mean is taken across seeds and then datasets (with one seed set per
    dataset this equals the pooled mean), and the standard error pools all
    (dataset, seed) samples.

    When the input carries wall times and every (dataset, seed) pair has a
    random-search run to normalize against, a mean_normalized_time column
    is appended (each run's clock divided by its random-search total, the
    fastest non-model-based reference).  Returns (header, rows).
    """
    if not rows:
        raise ValueError("no trajectory rows to aggregate")
    series: dict[tuple[str, str, str], list[tuple[int, float, float]]] = {}
    grid_points: set[int] = set()
    rs_total: dict[tuple[str, str], float] = {}
    for row in rows:
        key = (row["method"], row["dataset"], row["seed"])
        step = int(row["steps"])
        wall = float(row["wall_time_s"])
        series.setdefault(key, []).append((step, float(row["normalized_regret"]), wall))
        grid_points.add(step)
        if row["method"] == "rs":
            group = (row["dataset"], row["seed"])
            rs_total[group] = max(rs_total.get(group, 0.0), wall)
    grid = sorted(grid_points)
    for s in series.values():
        s.sort()
    with_times = all(
        rs_total.get((dataset, seed), 0.0) > 0.0 for _, dataset, seed in series
    )
    by_method: dict[str, list[list[float]]] = {}
    times_by_method: dict[str, list[list[float]]] = {}
    for (method, dataset, seed), s in sorted(series.items()):
        by_method.setdefault(method, []).append(_lvcf([(st, v) for st, v, _ in s], grid))
        if with_times:
            scale = rs_total[(dataset, seed)]
            times_by_method.setdefault(method, []).append(
                _lvcf([(st, w / scale) for st, v, w in s], grid)
            )
    header = AGGREGATE_COLUMNS + (("mean_normalized_time",) if with_times else ())
    out = []
    for method in sorted(by_method):
        runs = np.asarray(by_method[method])  # (n_runs, n_grid)
        mean = runs.mean(axis=0)
        if runs.shape[0] > 1:
            stderr = runs.std(axis=0, ddof=1) / math.sqrt(runs.shape[0])
        else:
            stderr = np.zeros(runs.shape[1])
        times = np.asarray(times_by_method[method]).mean(axis=0) if with_times else None
        for j, step in enumerate(grid):
            record = (method, step, float(mean[j]), float(stderr[j]), runs.shape[0])
            if times is not None:
                record += (float(times[j]),)
            out.append(record)
    return header, out


def _run_one(method: str, table: BenchmarkTable, seed: int, budget_multiplier: int) -> Trajectory:
    settings = RunSettings(seed=seed, budget_multiplier=budget_multiplier)
    if method == "dpl":
        return run_dpl(table, settings)
    return BASELINE_RUNNERS[method](table, settings)


def cmd_run(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    tables = [load_benchmark(p) for p in args.benchmarks]
    for table in tables:
        for method in args.methods:
            for seed in args.seeds:
                trajectory = _run_one(method, table, seed, args.budget_multiplier)
                write_trajectory_csv(trajectory, out_dir)
    # aggregate by re-reading the files so `run` and `report` agree exactly
    return _aggregate_directory(out_dir, out_dir / AGGREGATE_FILENAME)


def _aggregate_directory(in_dir: Path, out_path: Path) -> int:
    files = sorted(p for p in in_dir.glob("*.csv") if p.name != AGGREGATE_FILENAME)
    if not files:
        print(f"error: no trajectory CSVs in {in_dir}", file=sys.stderr)
        return EXIT_DATA
    rows: list[dict] = []
    for path in files:
        rows.extend(read_trajectory_rows(path))
    header, aggregated = aggregate_trajectory_rows(rows)
    _write_csv(out_path, header, aggregated)
    return EXIT_OK


def cmd_report(args) -> int:
    in_dir = Path(args.in_dir)
    if not in_dir.is_dir():
        print(f"error: {in_dir} is not a directory", file=sys.stderr)
        return EXIT_DATA
    return _aggregate_directory(in_dir, Path(args.out))


def cmd_forecast(args) -> int:
    table = load_benchmark(args.benchmark)
    rows = []
    for model_name in args.models:
        model = ForecastModel(model_name)
        for fraction in args.fractions:
            for seed in args.seeds:
                report = run_forecast_experiment(table, fraction, model, seed=seed)
                rows.append(
                    (model.value, fraction, seed, report.spearman, report.mean_abs_rel_error)
                )
    _write_csv(Path(args.out), FORECAST_COLUMNS, rows)
    return EXIT_OK


def cmd_synth(args) -> int:
    table = generate_synthetic(
        seed=args.seed,
        n_configs=args.configs,
        hp_dim=args.hp_dim,
        b_max=args.b_max,
        noise_std=args.noise,
    )
    save_benchmark(table, args.out)
    print(f"wrote {args.out} (oracle loss {oracle(table)!r})")
    return EXIT_OK


def _int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _float_list(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _str_list(text: str) -> list[str]:
    return [tok.strip() for tok in text.split(",") if tok.strip() != ""]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="powerlaw-hpo",
        description="Multi-fidelity HPO experiments with power-law surrogates",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run HPO methods on benchmark files")
    p_run.add_argument("--benchmarks", nargs="+", required=True, help="benchmark JSON paths")
    p_run.add_argument("--methods", type=_str_list, required=True, help=f"comma list of {METHODS}")
    p_run.add_argument("--seeds", type=_int_list, required=True, help="comma list of seeds")
    p_run.add_argument("--budget-multiplier", type=int, default=20,
                       help="step budget = multiplier * b_max (default 20)")
    p_run.add_argument("--out", required=True, help="output directory for CSVs")
    p_run.set_defaults(fn=cmd_run)

    p_fc = sub.add_parser("forecast", help="learning-curve forecasting experiment")
    p_fc.add_argument("--benchmark", required=True)
    p_fc.add_argument("--fractions", type=_float_list, required=True,
                      help="comma list of observed curve fractions in (0,1)")
    p_fc.add_argument("--models", type=_str_list, required=True,
                      help=f"comma list of {FORECAST_MODELS}")
    p_fc.add_argument("--seeds", type=_int_list, required=True)
    p_fc.add_argument("--out", required=True, help="output CSV path")
    p_fc.set_defaults(fn=cmd_forecast)

    p_sy = sub.add_parser("synth", help="generate a synthetic benchmark file")
    p_sy.add_argument("--seed", type=int, default=0)
    p_sy.add_argument("--configs", type=int, default=200)
    p_sy.add_argument("--hp-dim", type=int, default=2)
    p_sy.add_argument("--b-max", type=int, default=25)
    p_sy.add_argument("--noise", type=float, default=0.0)
    p_sy.add_argument("--out", required=True)
    p_sy.set_defaults(fn=cmd_synth)

    p_rep = sub.add_parser("report", help="aggregate a directory of trajectory CSVs")
    p_rep.add_argument("--in", dest="in_dir", required=True)
    p_rep.add_argument("--out", required=True)
    p_rep.set_defaults(fn=cmd_report)
    return parser


def _validate(parser: argparse.ArgumentParser, args) -> None:
    if args.command == "run":
        if not args.methods:
            parser.error("--methods must not be empty")
        for m in args.methods:
            if m not in METHODS:
                parser.error(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
        if not args.seeds:
            parser.error("--seeds must not be empty")
        if args.budget_multiplier < 1:
            parser.error("--budget-multiplier must be >= 1")
    elif args.command == "forecast":
        if not args.fractions:
            parser.error("--fractions must not be empty")
        for f in args.fractions:
            if not 0.0 < f < 1.0:
                parser.error(f"fractions must lie in (0, 1), got {f}")
        if not args.models:
            parser.error("--models must not be empty")
        for m in args.models:
            if m not in FORECAST_MODELS:
                parser.error(f"unknown model {m!r}; choose from {', '.join(FORECAST_MODELS)}")
        if not args.seeds:
            parser.error("--seeds must not be empty")
    elif args.command == "synth":
        if args.configs < 1:
            parser.error("--configs must be >= 1")
        if args.hp_dim < 1 or args.b_max < 1:
            parser.error("--hp-dim and --b-max must be >= 1")
        if args.noise < 0:
            parser.error("--noise must be >= 0")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _validate(parser, args)
    try:
        return args.fn(args)
    except (BenchmarkFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - last-resort diagnostics
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
