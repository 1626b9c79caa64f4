"""Tabular learning-curve benchmarks: ingestion, scaling, oracle and
synthetic generation.

File format (UTF-8 JSON, no comments): an object with
  name: string
  metric: "loss" | "accuracy"
  b_max: integer
  hyperparameters: [{name, min, max}, ...]
  configs: [{id: int, values: [...], curve: [...]}, ...]
  generator (optional): {"coefficients": [[alpha, beta, gamma], ...]}

Accuracy-direction curves are assumed to lie in [0, 1] and are converted
to losses (1 - value) at load time; everything downstream minimizes.
Loaders for external curve collections should apply any source-specific
trimming (e.g. dropping unreliable first/last steps) before writing files
in this format; the loader itself does not alter curves.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np


class BenchmarkFormatError(ValueError):
    """Schema violation in a benchmark file, with a field-path diagnostic."""


@dataclass(frozen=True)
class BenchmarkTable:
    """Immutable map from configuration to full learning curve.

    ``raw_curves`` keeps the file's values (in its declared metric
    direction) so tables round-trip bit-exactly; ``loss_curves`` is the
    minimization-oriented view used everywhere else.
    """

    name: str
    metric_direction: str          # "loss" or "accuracy"
    b_max: int
    hp_names: tuple[str, ...]
    bounds: tuple[tuple[float, float], ...]
    config_ids: tuple[int, ...]
    raw_values: np.ndarray         # (n, hp_dim)
    raw_curves: np.ndarray         # (n, b_max), as stored in the file
    loss_curves: np.ndarray        # (n, b_max)
    scaled_values: np.ndarray      # (n, hp_dim), min-max scaled
    generator_coefficients: np.ndarray | None = None  # (n, 3) if synthetic

    def __post_init__(self):
        for arr in (self.raw_values, self.raw_curves, self.loss_curves, self.scaled_values):
            arr.setflags(write=False)
        if self.generator_coefficients is not None:
            self.generator_coefficients.setflags(write=False)

    @property
    def n_configs(self) -> int:
        return len(self.config_ids)

    @property
    def hp_dim(self) -> int:
        return len(self.hp_names)

    def index_of(self, config_id: int) -> int:
        try:
            return self._id_index[config_id]
        except AttributeError:
            object.__setattr__(
                self, "_id_index", {cid: i for i, cid in enumerate(self.config_ids)}
            )
            return self._id_index[config_id]


def _scale_row(bounds, names, v: np.ndarray) -> np.ndarray:
    out = np.empty_like(v)
    for i, (lo, hi) in enumerate(bounds):
        if not (lo <= v[i] <= hi):
            raise ValueError(
                f"value {v[i]} for {names[i]} outside bounds [{lo}, {hi}]"
            )
        out[i] = 0.0 if hi == lo else (v[i] - lo) / (hi - lo)
    return out


def scale_config(table: BenchmarkTable, raw_values) -> np.ndarray:
    """Min-max scale one hyperparameter vector into [0, 1] per dimension.

    Uses the declared search-space bounds, not observed extrema; a
    degenerate dimension (min == max) maps to 0.
    """
    v = np.asarray(raw_values, dtype=float)
    if v.shape != (table.hp_dim,):
        raise ValueError(f"expected {table.hp_dim} values, got shape {v.shape}")
    return _scale_row(table.bounds, table.hp_names, v)


def evaluate(table: BenchmarkTable, config_id: int, budget: int) -> float:
    """Loss of a configuration at an exact budget step (pure lookup)."""
    if not 1 <= budget <= table.b_max:
        raise ValueError(f"budget {budget} outside [1, {table.b_max}]")
    try:
        row = table.index_of(config_id)
    except KeyError:
        raise KeyError(f"unknown config id {config_id}") from None
    return float(table.loss_curves[row, budget - 1])


def oracle(table: BenchmarkTable) -> float:
    """Global minimum loss over all configurations and budgets."""
    if table.n_configs == 0:
        raise ValueError("empty table")
    return float(table.loss_curves.min())


def config_best_losses(table: BenchmarkTable) -> np.ndarray:
    """Per-config best (lowest) loss at any budget."""
    return table.loss_curves.min(axis=1)


def normalized_regret(regret: float, table: BenchmarkTable) -> float:
    """Regret divided by the best-to-worst span of per-config best losses."""
    best = config_best_losses(table)
    span = float(best.max() - best.min())
    if span <= 0:
        raise ValueError("degenerate table: best and worst configs coincide")
    return max(regret, 0.0) / span


def _require(cond: bool, path: str, msg: str):
    if not cond:
        raise BenchmarkFormatError(f"{path}: {msg}")


def _as_table(doc: dict, source: str) -> BenchmarkTable:
    _require(isinstance(doc, dict), source, "top level must be an object")
    for key in ("name", "metric", "b_max", "hyperparameters", "configs"):
        _require(key in doc, source, f"missing required key '{key}'")
    _require(isinstance(doc["name"], str), "name", "must be a string")
    metric = doc["metric"]
    _require(metric in ("loss", "accuracy"), "metric", f"must be 'loss' or 'accuracy', got {metric!r}")
    b_max = doc["b_max"]
    _require(isinstance(b_max, int) and b_max >= 1, "b_max", "must be a positive integer")

    hps = doc["hyperparameters"]
    _require(isinstance(hps, list) and hps, "hyperparameters", "must be a non-empty array")
    names, bounds = [], []
    for i, hp in enumerate(hps):
        path = f"hyperparameters[{i}]"
        _require(isinstance(hp, dict), path, "must be an object")
        for key in ("name", "min", "max"):
            _require(key in hp, path, f"missing '{key}'")
        _require(isinstance(hp["name"], str), f"{path}.name", "must be a string")
        lo, hi = hp["min"], hp["max"]
        _require(
            isinstance(lo, (int, float)) and isinstance(hi, (int, float)) and lo <= hi,
            path, f"bounds must be numbers with min <= max, got ({lo!r}, {hi!r})",
        )
        names.append(hp["name"])
        bounds.append((float(lo), float(hi)))

    configs = doc["configs"]
    _require(isinstance(configs, list) and configs, "configs", "must be a non-empty array")
    ids, values, curves = [], [], []
    seen = set()
    for i, cfg in enumerate(configs):
        path = f"configs[{i}]"
        _require(isinstance(cfg, dict), path, "must be an object")
        for key in ("id", "values", "curve"):
            _require(key in cfg, path, f"missing '{key}'")
        cid = cfg["id"]
        _require(isinstance(cid, int), f"{path}.id", "must be an integer")
        _require(cid not in seen, f"{path}.id", f"duplicate config id {cid}")
        seen.add(cid)
        vals = cfg["values"]
        _require(
            isinstance(vals, list) and len(vals) == len(names),
            f"{path}.values", f"must have {len(names)} entries",
        )
        vals = [float(v) for v in vals]
        for j, v in enumerate(vals):
            lo, hi = bounds[j]
            _require(
                lo <= v <= hi,
                f"{path}.values[{j}]",
                f"value {v} outside bounds [{lo}, {hi}] (config id {cid})",
            )
        curve = cfg["curve"]
        _require(
            isinstance(curve, list) and len(curve) == b_max,
            f"{path}.curve",
            f"expected length b_max={b_max}, got {len(curve) if isinstance(curve, list) else '?'}"
            f" (config id {cid})",
        )
        curve = [float(v) for v in curve]
        _require(
            all(math.isfinite(v) for v in curve),
            f"{path}.curve", f"non-finite value (config id {cid})",
        )
        ids.append(cid)
        values.append(vals)
        curves.append(curve)

    gen = None
    if "generator" in doc:
        path = "generator.coefficients"
        _require(isinstance(doc["generator"], dict), "generator", "must be an object")
        coeffs = doc["generator"].get("coefficients")
        _require(
            isinstance(coeffs, list) and len(coeffs) == len(ids),
            path, "must list one [alpha, beta, gamma] per config",
        )
        for i, row in enumerate(coeffs):
            _require(
                isinstance(row, list) and len(row) == 3,
                f"{path}[{i}]", "must be [alpha, beta, gamma]",
            )
        gen = np.asarray(coeffs, dtype=float)

    raw_values = np.asarray(values, dtype=float)
    raw_curves = np.asarray(curves, dtype=float)
    loss_curves = 1.0 - raw_curves if metric == "accuracy" else raw_curves.copy()
    scaled = np.stack([_scale_row(bounds, names, row) for row in raw_values])
    return BenchmarkTable(
        name=doc["name"],
        metric_direction=metric,
        b_max=b_max,
        hp_names=tuple(names),
        bounds=tuple(bounds),
        config_ids=tuple(ids),
        raw_values=raw_values,
        raw_curves=raw_curves,
        loss_curves=loss_curves,
        scaled_values=scaled,
        generator_coefficients=gen,
    )


def load_benchmark(path) -> BenchmarkTable:
    """Load and validate a benchmark file; errors carry field paths."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise BenchmarkFormatError(f"{path}: invalid JSON ({exc})") from exc
    return _as_table(doc, str(path))


def table_to_document(table: BenchmarkTable) -> dict:
    doc = {
        "name": table.name,
        "metric": table.metric_direction,
        "b_max": table.b_max,
        "hyperparameters": [
            {"name": n, "min": lo, "max": hi}
            for n, (lo, hi) in zip(table.hp_names, table.bounds)
        ],
        "configs": [
            {
                "id": int(cid),
                "values": table.raw_values[i].tolist(),
                "curve": table.raw_curves[i].tolist(),
            }
            for i, cid in enumerate(table.config_ids)
        ],
    }
    if table.generator_coefficients is not None:
        doc["generator"] = {"coefficients": table.generator_coefficients.tolist()}
    return doc


def save_benchmark(table: BenchmarkTable, path) -> None:
    """Write a table back to disk in the benchmark JSON schema."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(table_to_document(table), fh)
        fh.write("\n")


# Coefficient ranges for synthetic curves; curve values stay within (0, 1.5).
SYNTH_ALPHA_RANGE = (0.05, 0.5)
SYNTH_BETA_RANGE = (0.3, 1.0)
SYNTH_GAMMA_RANGE = (0.3, 3.0)


def _smooth_unit_map(x: np.ndarray, weights: np.ndarray, phases: np.ndarray) -> np.ndarray:
    """Fixed smooth map [0,1]^d -> (0,1): tanh of a random affine+sine mix."""
    lin = x @ weights[:-1] + weights[-1]
    wob = np.sin(2.0 * np.pi * (x @ phases[:-1]) + phases[-1])
    return 0.5 * (1.0 + np.tanh(lin + 0.3 * wob))


def generate_synthetic(
    seed: int,
    n_configs: int = 200,
    hp_dim: int = 2,
    b_max: int = 25,
    noise_std: float = 0.0,
) -> BenchmarkTable:
    """Build a power-law benchmark with stored ground-truth coefficients.

    Hyperparameter vectors are uniform in [0,1]^hp_dim and map smoothly to
    (alpha, beta, gamma); curves are alpha + beta * step^(-gamma) over raw
    steps 1..b_max, plus optional Gaussian noise clipped into (0, 1.5).
    """
    if n_configs < 1:
        raise ValueError("n_configs must be >= 1")
    if hp_dim < 1 or b_max < 1:
        raise ValueError("hp_dim and b_max must be >= 1")
    rng = np.random.default_rng([int(seed), 0xBE7C])
    x = rng.uniform(0.0, 1.0, size=(n_configs, hp_dim))
    ranges = (SYNTH_ALPHA_RANGE, SYNTH_BETA_RANGE, SYNTH_GAMMA_RANGE)
    coeffs = np.empty((n_configs, 3))
    for j, (lo, hi) in enumerate(ranges):
        weights = rng.normal(0.0, 1.5, size=hp_dim + 1)
        phases = rng.normal(0.0, 1.0, size=hp_dim + 1)
        coeffs[:, j] = lo + (hi - lo) * _smooth_unit_map(x, weights, phases)
    steps = np.arange(1, b_max + 1, dtype=float)
    curves = coeffs[:, [0]] + coeffs[:, [1]] * steps[None, :] ** (-coeffs[:, [2]])
    if noise_std > 0:
        curves = curves + rng.normal(0.0, noise_std, size=curves.shape)
        curves = np.clip(curves, 1e-6, 1.5)
    doc = {
        "name": f"synthetic-s{seed}-n{n_configs}-d{hp_dim}-b{b_max}",
        "metric": "loss",
        "b_max": int(b_max),
        "hyperparameters": [
            {"name": f"x{j}", "min": 0.0, "max": 1.0} for j in range(hp_dim)
        ],
        "configs": [
            {"id": i, "values": x[i].tolist(), "curve": curves[i].tolist()}
            for i in range(n_configs)
        ],
        "generator": {"coefficients": coeffs.tolist()},
    }
    return _as_table(doc, "<synthetic>")
