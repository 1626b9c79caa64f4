import numpy as np
import pytest

from powerlaw_hpo.benchmarks import evaluate, generate_synthetic, oracle
from powerlaw_hpo.history import History, Observation
from powerlaw_hpo.hpo_loop import (
    RunContext,
    RunSettings,
    incumbent_regret,
    run_dpl,
)
from powerlaw_hpo.surrogate import TrainerSchedule


def _fast_schedule(b_max):
    # keeps loop-level tests quick; the surrogate itself is tested elsewhere
    return TrainerSchedule.for_curve_length(
        b_max, initial_epochs=20, refine_epochs=5, initial_phase_iterations=3
    )


class _OracleEnsemble:
    """Test double: zero-variance posterior equal to the true final loss."""

    def __init__(self, table):
        self.finals = {tuple(np.round(table.scaled_values[i], 12)): table.loss_curves[i, -1]
                       for i in range(table.n_configs)}
        self.last_fit_loss = 0.0

    def fit_initial(self, data, schedule):
        return 0.0

    def refine(self, data, newest_index, schedule):
        return 0.0

    def restart(self, data, schedule):
        return 0.0

    def posterior_batch(self, configs, b_norm):
        configs = np.atleast_2d(configs)
        means = np.array([self.finals[tuple(np.round(v, 12))] for v in configs])
        return means, np.zeros(len(means))


class TestRunDpl:
    def test_single_config_advances_step_by_step(self, tiny_table):
        single = generate_synthetic(seed=1, n_configs=1, hp_dim=2, b_max=30)
        settings = RunSettings(seed=0, total_step_budget=10)
        traj = run_dpl(single, settings, schedule=_fast_schedule(30))
        steps = [p.steps_consumed for p in traj.points]
        assert steps == list(range(1, 11))
        assert len(traj.points) == 10
        assert not traj.exhausted_pool

    def test_pool_exhaustion_flagged(self):
        single = generate_synthetic(seed=1, n_configs=1, hp_dim=2, b_max=4)
        settings = RunSettings(seed=0, total_step_budget=40)
        traj = run_dpl(single, settings, schedule=_fast_schedule(4))
        assert traj.exhausted_pool
        assert traj.points[-1].steps_consumed == 4

    def test_same_seed_identical_trajectories(self, tiny_table):
        settings = RunSettings(seed=3, total_step_budget=15)
        a = run_dpl(tiny_table, settings, schedule=_fast_schedule(tiny_table.b_max))
        b = run_dpl(tiny_table, settings, schedule=_fast_schedule(tiny_table.b_max))
        assert a.points == b.points

    def test_budget_conservation_and_monotone_incumbent(self, tiny_table):
        settings = RunSettings(seed=1, total_step_budget=25)
        traj = run_dpl(tiny_table, settings, schedule=_fast_schedule(tiny_table.b_max))
        steps = [p.steps_consumed for p in traj.points]
        assert all(a < b for a, b in zip(steps, steps[1:]))
        assert steps[-1] <= 25
        incumbents = [p.incumbent_loss for p in traj.points]
        assert all(a >= b for a, b in zip(incumbents, incumbents[1:]))

    def test_per_config_budget_contiguity(self, tiny_table, monkeypatch):
        settings = RunSettings(seed=5, total_step_budget=30)
        observed = []
        orig = RunContext.observe

        def spy(ctx, cid, budget):
            observed.append((cid, budget))
            return orig(ctx, cid, budget)

        monkeypatch.setattr(RunContext, "observe", spy)
        run_dpl(tiny_table, settings, make_ensemble=lambda d, s: _OracleEnsemble(tiny_table))
        budgets_seen: dict[int, list[int]] = {}
        for cid, budget in observed:
            budgets_seen.setdefault(cid, []).append(budget)
        for budgets in budgets_seen.values():
            assert budgets == list(range(1, len(budgets) + 1))

    def test_oracle_double_advances_only_best_candidates(self, monkeypatch):
        # with a perfectly accurate zero-variance surrogate, every advance
        # after the initial design targets the config whose true final loss
        # is minimal among the candidates
        for seed in range(3):
            table = generate_synthetic(seed=seed + 40, n_configs=5, hp_dim=2, b_max=6)
            finals = dict(zip(table.config_ids, table.loss_curves[:, -1]))
            best_id = min(finals, key=finals.get)
            observed = []
            orig = RunContext.observe

            def spy(ctx, cid, budget, _rec=observed):
                _rec.append(cid)
                return orig(ctx, cid, budget)

            monkeypatch.setattr(RunContext, "observe", spy)
            settings = RunSettings(seed=seed, total_step_budget=6)
            run_dpl(table, settings, make_ensemble=lambda d, s: _OracleEnsemble(table))
            monkeypatch.undo()
            assert observed[1:], "loop must advance beyond the initial design"
            assert all(cid == best_id for cid in observed[1:])


class TestIncumbentRegret:
    def test_simple_difference(self, tiny_table):
        h = History()
        h.append(Observation(config_id=0, budget=1, loss=oracle(tiny_table) + 0.05))
        assert incumbent_regret(h, tiny_table) == pytest.approx(0.05)

    def test_zero_when_oracle_found(self, tiny_table):
        h = History()
        h.append(Observation(config_id=0, budget=1, loss=oracle(tiny_table)))
        assert incumbent_regret(h, tiny_table) == 0.0

    def test_brute_force_equivalence(self):
        rng = np.random.default_rng(0)
        for seed in range(10):
            table = generate_synthetic(seed=seed, n_configs=6, hp_dim=2, b_max=5,
                                       noise_std=0.05)
            h = History()
            for cid in table.config_ids[:3]:
                for b in range(1, 4):
                    h.append(Observation(config_id=cid, budget=b,
                                         loss=evaluate(table, cid, b)))
            brute_best = min(evaluate(table, cid, b)
                             for cid in table.config_ids[:3] for b in range(1, 4))
            brute_oracle = min(evaluate(table, cid, b)
                               for cid in table.config_ids
                               for b in range(1, table.b_max + 1))
            assert incumbent_regret(h, table) == brute_best - brute_oracle

    def test_empty_history_rejected(self, tiny_table):
        with pytest.raises(ValueError):
            incumbent_regret(History(), tiny_table)


class TestRunContext:
    def test_incremental_cost_accounting(self, tiny_table):
        ctx = RunContext(tiny_table, RunSettings(seed=0, total_step_budget=100), "t")
        cid = tiny_table.config_ids[0]
        ctx.observe(cid, 2)
        assert ctx.steps_consumed == 2
        ctx.observe(cid, 5)
        assert ctx.steps_consumed == 5
        # re-reading inside the paid prefix is free and adds nothing
        before_points = len(ctx.trajectory.points)
        ctx.observe(cid, 3)
        assert ctx.steps_consumed == 5
        assert len(ctx.trajectory.points) == before_points
        assert len(ctx.history) == 2

    def test_budget_ceiling_enforced(self, tiny_table):
        ctx = RunContext(tiny_table, RunSettings(seed=0, total_step_budget=3), "t")
        cid = tiny_table.config_ids[0]
        assert not ctx.can_afford(cid, 5)
        with pytest.raises(RuntimeError):
            ctx.observe(cid, 5)

    def test_candidate_pool_excludes_fully_evaluated(self, tiny_table):
        ctx = RunContext(tiny_table, RunSettings(seed=0, total_step_budget=100), "t")
        cid = tiny_table.config_ids[0]
        ctx.observe(cid, tiny_table.b_max)
        pool_ids = {c.config_id for c in ctx.candidate_pool()}
        assert cid not in pool_ids
        assert len(pool_ids) == tiny_table.n_configs - 1


class TestTrajectory:
    def test_rows_carry_normalization(self, tiny_table):
        settings = RunSettings(seed=2, total_step_budget=10)
        traj = run_dpl(tiny_table, settings, schedule=_fast_schedule(tiny_table.b_max))
        rows = traj.to_rows()
        assert len(rows) == len(traj.points)
        for row, point in zip(rows, traj.points):
            assert row[0] == 2 and row[1] == "dpl"
            assert row[7] == pytest.approx(point.incumbent_regret / traj.normalization_span)

    def test_wall_time_zero_by_default(self, tiny_table):
        settings = RunSettings(seed=2, total_step_budget=8)
        traj = run_dpl(tiny_table, settings, schedule=_fast_schedule(tiny_table.b_max))
        assert all(p.wall_time == 0.0 for p in traj.points)

    def test_wall_time_recorded_when_enabled(self, tiny_table):
        settings = RunSettings(seed=2, total_step_budget=8, record_wall_time=True)
        traj = run_dpl(tiny_table, settings, schedule=_fast_schedule(tiny_table.b_max))
        times = [p.wall_time for p in traj.points]
        assert all(a <= b for a, b in zip(times, times[1:]))
        assert times[-1] > 0.0
