"""Main multi-fidelity optimization loop and shared run bookkeeping.

One HPO iteration = one surrogate fit/refine plus one step-block
evaluation on the benchmark.  Budgets cross into the surrogate and
acquisition as step / b_max in (0, 1]; the benchmark side works in raw
integer steps.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import acquisition
from .acquisition import Candidate, FullyEvaluatedError
from .benchmarks import (
    BenchmarkFormatError,
    BenchmarkTable,
    config_best_losses,
    evaluate,
    oracle,
)
from .history import History, Observation
from .surrogate import DplEnsemble, TrainerSchedule, TrainingData, should_restart

TRAJECTORY_COLUMNS = (
    "seed",
    "method",
    "dataset",
    "steps",
    "wall_time_s",
    "incumbent_loss",
    "regret",
    "normalized_regret",
)


@dataclass(frozen=True)
class RunSettings:
    """Shared run parameters for the DPL loop and every baseline.

    ``total_step_budget`` defaults to budget_multiplier * b_max (the cost
    of fully evaluating that many configurations).  Wall-clock recording
    is off by default so trajectories are bit-reproducible; turn it on
    for overhead measurements only.
    """

    seed: int = 0
    total_step_budget: int | None = None
    b_step: int = 1
    budget_multiplier: int = 20
    record_wall_time: bool = False

    def resolve_budget(self, table: BenchmarkTable) -> int:
        if self.total_step_budget is not None:
            if self.total_step_budget < 1:
                raise ValueError("total_step_budget must be >= 1")
            return self.total_step_budget
        return self.budget_multiplier * table.b_max


@dataclass(frozen=True)
class TrajectoryPoint:
    steps_consumed: int
    wall_time: float
    incumbent_loss: float
    incumbent_regret: float


@dataclass
class Trajectory:
    method: str
    dataset: str
    seed: int
    normalization_span: float
    points: list[TrajectoryPoint] = field(default_factory=list)
    exhausted_pool: bool = False

    def final_normalized_regret(self) -> float:
        if not self.points:
            raise ValueError("empty trajectory")
        return self.points[-1].incumbent_regret / self.normalization_span

    def to_rows(self) -> list[tuple]:
        return [
            (
                self.seed,
                self.method,
                self.dataset,
                p.steps_consumed,
                p.wall_time,
                p.incumbent_loss,
                p.incumbent_regret,
                p.incumbent_regret / self.normalization_span,
            )
            for p in self.points
        ]


def incumbent_regret(history: History, table: BenchmarkTable) -> float:
    """Best observed loss at any budget minus the benchmark-wide oracle."""
    if len(history) == 0:
        raise ValueError("history is empty")
    best = min(obs.loss for obs in history)
    return best - oracle(table)


class RunContext:
    """Budget accounting, history and trajectory recording for one run.

    Step costs are incremental: advancing a configuration charges only the
    steps beyond its previous high-water mark, and a lookup at or below
    that mark is free (the curve prefix was already paid for).  No
    evaluation may exceed the total step budget.
    """

    def __init__(self, table: BenchmarkTable, settings: RunSettings, method: str):
        self.table = table
        self.settings = settings
        self.total_step_budget = settings.resolve_budget(table)
        self.steps_consumed = 0
        self.high_water: dict[int, int] = {}
        self.history = History()
        best = config_best_losses(table)
        span = float(best.max() - best.min())
        if span <= 0 and table.n_configs > 1:
            raise BenchmarkFormatError(
                f"benchmark {table.name!r} is degenerate: all configurations share "
                "the same best loss, so regret cannot be normalized"
            )
        self.oracle_loss = oracle(table)
        self.trajectory = Trajectory(
            method=method,
            dataset=table.name,
            seed=settings.seed,
            normalization_span=span if span > 0 else 1.0,
        )
        self._incumbent = math.inf
        self._t0 = time.process_time()

    def _now(self) -> float:
        return time.process_time() - self._t0 if self.settings.record_wall_time else 0.0

    def cost_of(self, config_id: int, budget: int) -> int:
        return max(0, budget - self.high_water.get(config_id, 0))

    def can_afford(self, config_id: int, budget: int) -> bool:
        return self.steps_consumed + self.cost_of(config_id, budget) <= self.total_step_budget

    @property
    def remaining(self) -> int:
        return self.total_step_budget - self.steps_consumed

    def observe(self, config_id: int, budget: int) -> float:
        """Evaluate a config at a budget, charging incremental steps.

        New observations (budget above the high-water mark) enter the
        history and extend the trajectory; re-reads of already-paid curve
        points are free and leave both untouched.
        """
        cost = self.cost_of(config_id, budget)
        loss = evaluate(self.table, config_id, budget)
        if cost == 0:
            return loss
        if self.steps_consumed + cost > self.total_step_budget:
            raise RuntimeError(
                f"evaluation of config {config_id} at budget {budget} would exceed "
                f"the step budget ({self.steps_consumed}+{cost}>{self.total_step_budget})"
            )
        self.steps_consumed += cost
        self.high_water[config_id] = budget
        self.history.append(Observation(config_id=config_id, budget=budget, loss=loss))
        self._incumbent = min(self._incumbent, loss)
        self.trajectory.points.append(
            TrajectoryPoint(
                steps_consumed=self.steps_consumed,
                wall_time=self._now(),
                incumbent_loss=self._incumbent,
                incumbent_regret=self._incumbent - self.oracle_loss,
            )
        )
        return loss

    def candidate_pool(self) -> list[Candidate]:
        """Configs not yet fully evaluated, as acquisition candidates."""
        return [
            Candidate(config_id=cid, scaled_vector=self.table.scaled_values[i])
            for i, cid in enumerate(self.table.config_ids)
            if self.high_water.get(cid, 0) < self.table.b_max
        ]


def seed_initial_design(ctx: RunContext, rng: np.random.Generator, budget: int) -> int:
    """Evaluate one uniformly drawn configuration at the given budget."""
    cid = int(ctx.table.config_ids[rng.integers(0, ctx.table.n_configs)])
    ctx.observe(cid, budget)
    return cid


def _training_data(ctx: RunContext) -> TrainingData:
    rows = [
        (ctx.table.scaled_values[ctx.table.index_of(o.config_id)], o.budget, o.loss)
        for o in ctx.history
    ]
    configs = np.stack([r[0] for r in rows])
    budgets = np.array([r[1] for r in rows], dtype=float) / float(ctx.table.b_max)
    losses = np.array([r[2] for r in rows], dtype=float)
    return TrainingData(configs=configs, budgets=budgets, losses=losses)


def run_dpl(
    table: BenchmarkTable,
    settings: RunSettings,
    make_ensemble=None,
    schedule: TrainerSchedule | None = None,
) -> Trajectory:
    """Run the power-law-surrogate HPO loop until the step budget is spent.

    Per iteration: train the ensemble (full retrain during the first 10
    iterations and after a stagnation restart, 20-epoch refinement
    otherwise), pick the candidate maximizing Expected Improvement at full
    budget, advance it by one budget step, and record the observation.
    Fully deterministic for a given seed unless wall-time recording is on.

    ``make_ensemble`` exists for tests that substitute a surrogate double;
    it receives (hp_dim, seed) and must provide fit_initial / refine /
    restart / posterior_batch.
    """
    ctx = RunContext(table, settings, method="dpl")
    if schedule is None:
        schedule = TrainerSchedule.for_curve_length(table.b_max)
    rng = np.random.default_rng([settings.seed, 0])
    seed_initial_design(ctx, rng, budget=1)  # one config for one step

    factory = make_ensemble or (lambda hp_dim, seed: DplEnsemble(hp_dim=hp_dim, seed=seed))
    ensemble = factory(table.hp_dim, settings.seed)

    iteration = 0
    restart_pending = False
    while ctx.remaining > 0:
        iteration += 1
        data = _training_data(ctx)
        if iteration <= schedule.initial_phase_iterations:
            fit_loss = ensemble.fit_initial(data, schedule)
        elif restart_pending:
            fit_loss = ensemble.restart(data, schedule)
        else:
            fit_loss = ensemble.refine(data, len(data) - 1, schedule)
        restart_pending = should_restart(schedule, fit_loss)

        pool = ctx.candidate_pool()
        if not pool:
            ctx.trajectory.exhausted_pool = True
            break
        selected = acquisition.select_next(pool, ensemble, ctx.history)
        try:
            budget = acquisition.next_budget(selected, ctx.history, settings.b_step, table.b_max)
        except FullyEvaluatedError:  # pool filtering should prevent this
            ctx.trajectory.exhausted_pool = True
            break
        if ctx.cost_of(selected.config_id, budget) > ctx.remaining:
            break
        ctx.observe(selected.config_id, budget)
    return ctx.trajectory
