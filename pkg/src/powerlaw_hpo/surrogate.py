"""Probabilistic power-law surrogate: an ensemble of small networks whose
heads emit power-law coefficients, plus the fit/refine/restart schedule.

Budgets entering this module are already normalized to (0, 1]; the network
body sees only the (scaled) hyperparameter vector, never the budget.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .neural_core import (
    AdamState,
    DenseNetwork,
    GradientBundle,
    adam_step,
    backward,
    forward,
    init_weights,
    sigmoid,
)

HIDDEN_WIDTH = 128
N_HIDDEN_LAYERS = 2
RAW_HEAD_WIDTH = 5  # alpha, (beta, beta-gate), (gamma, gamma-gate)
DEFAULT_ENSEMBLE_SIZE = 5


@dataclass
class TrainerSchedule:
    """Epoch counts and the stagnation/restart bookkeeping.

    The restart threshold is measured in HPO iterations: a restart fires
    once the surrogate fitting loss has not improved for more than
    ceil(1.2 * learning-curve length) iterations.
    """

    initial_epochs: int = 250
    refine_epochs: int = 20
    initial_phase_iterations: int = 10
    restart_threshold_iterations: int = 60
    batch_size: int = 64
    iterations_since_improvement: int = 0
    best_fit_loss: float = math.inf

    @classmethod
    def for_curve_length(cls, lc_length: int, **kwargs) -> "TrainerSchedule":
        threshold = max(1, math.ceil(1.2 * lc_length))
        return cls(restart_threshold_iterations=threshold, **kwargs)

    def reset_stagnation(self) -> None:
        self.iterations_since_improvement = 0
        self.best_fit_loss = math.inf


def should_restart(schedule: TrainerSchedule, current_fit_loss: float) -> bool:
    """Tick the stagnation counter with this iteration's fit loss.

    Improvement (loss below best by more than 1e-9) resets the counter; a
    non-finite loss requests a restart immediately.
    """
    if not math.isfinite(current_fit_loss):
        return True
    if current_fit_loss < schedule.best_fit_loss - 1e-9:
        schedule.best_fit_loss = current_fit_loss
        schedule.iterations_since_improvement = 0
    else:
        schedule.iterations_since_improvement += 1
    return schedule.iterations_since_improvement > schedule.restart_threshold_iterations


@dataclass(frozen=True)
class Posterior:
    mean: float
    variance: float


@dataclass(frozen=True)
class TrainingData:
    """Observed (config vector, normalized budget, loss) triples."""

    configs: np.ndarray   # (n, hp_dim), min-max scaled
    budgets: np.ndarray   # (n,), in (0, 1]
    losses: np.ndarray    # (n,)

    def __post_init__(self):
        object.__setattr__(self, "configs", np.asarray(self.configs, dtype=float))
        object.__setattr__(self, "budgets", np.asarray(self.budgets, dtype=float))
        object.__setattr__(self, "losses", np.asarray(self.losses, dtype=float))
        n = self.configs.shape[0]
        if self.budgets.shape != (n,) or self.losses.shape != (n,):
            raise ValueError("configs/budgets/losses row counts differ")
        if n and (self.budgets.min() <= 0 or self.budgets.max() > 1):
            raise ValueError("budgets must be normalized to (0, 1]")

    def __len__(self) -> int:
        return self.configs.shape[0]


def _power_law_head(raw: np.ndarray, b_norm: np.ndarray):
    """Map raw 5-unit output to alpha + beta * b^(-gamma).

    beta and gamma are pair-gated GLUs (value unit times the sigmoid of its
    gate unit); alpha is left unconstrained.
    """
    sig_b = sigmoid(raw[:, 2])
    sig_g = sigmoid(raw[:, 4])
    beta = raw[:, 1] * sig_b
    gamma = raw[:, 3] * sig_g
    lnb = np.log(b_norm)
    power = np.exp(-gamma * lnb)
    pred = raw[:, 0] + beta * power
    cache = (raw, sig_b, sig_g, beta, power, lnb)
    return pred, cache


def _power_law_head_backward(cache, d_pred: np.ndarray) -> np.ndarray:
    raw, sig_b, sig_g, beta, power, lnb = cache
    d_raw = np.empty_like(raw)
    d_beta = d_pred * power
    d_gamma = d_pred * beta * (-lnb) * power
    d_raw[:, 0] = d_pred
    d_raw[:, 1] = d_beta * sig_b
    d_raw[:, 2] = d_beta * raw[:, 1] * sig_b * (1.0 - sig_b)
    d_raw[:, 3] = d_gamma * sig_g
    d_raw[:, 4] = d_gamma * raw[:, 3] * sig_g * (1.0 - sig_g)
    return d_raw


class DplNetwork:
    """One ensemble member: dense body conditioned on the configuration,
    with a power-law head combining the raw outputs with the budget."""

    def __init__(self, hp_dim: int, seed, hidden_width: int = HIDDEN_WIDTH):
        self.hp_dim = int(hp_dim)
        dims = (self.hp_dim,) + (hidden_width,) * N_HIDDEN_LAYERS + (RAW_HEAD_WIDTH,)
        self.body = DenseNetwork.create(dims, seed)
        # optimizing the whole network as one flat vector keeps updates cheap
        self.adam = AdamState.for_params([self.body.flat_params])
        self._grad = GradientBundle.zeros_for(self.body)
        self.init_seed = seed

    def reinitialize(self, seed) -> None:
        init_weights(self.body, seed)
        self.adam = AdamState.for_params([self.body.flat_params])
        self.init_seed = seed

    def predict(self, configs: np.ndarray, b_norm) -> np.ndarray:
        configs = np.atleast_2d(np.asarray(configs, dtype=float))
        b = np.broadcast_to(np.asarray(b_norm, dtype=float), (configs.shape[0],))
        if np.any(b <= 0) or np.any(b > 1):
            raise ValueError("normalized budget must lie in (0, 1]")
        raw, _ = forward(self.body, configs)
        with np.errstate(over="ignore", invalid="ignore"):
            pred, _ = _power_law_head(raw, b)
        return pred

    def train_batch(self, data: TrainingData, idx: np.ndarray) -> float:
        """One Adam step on the L1 loss over a batch; returns the batch loss."""
        x = data.configs[idx]
        b = data.budgets[idx]
        y = data.losses[idx]
        raw, cache = forward(self.body, x)
        with np.errstate(over="ignore", invalid="ignore"):
            pred, head_cache = _power_law_head(raw, b)
            diff = pred - y
            loss = float(np.mean(np.abs(diff)))
            if not math.isfinite(loss):
                return loss
            d_pred = np.sign(diff) / diff.size
            d_raw = _power_law_head_backward(head_cache, d_pred)
        backward(self.body, cache, d_raw, out=self._grad)
        adam_step([self.body.flat_params], [self._grad.flat], self.adam)
        return loss

    def full_loss(self, data: TrainingData) -> float:
        pred = self.predict(data.configs, data.budgets)
        with np.errstate(invalid="ignore"):
            return float(np.mean(np.abs(pred - data.losses)))


class ConditionedNetwork:
    """Ablation variant: plain regression on (config, budget) with a linear
    output and no power-law structure.  Trained with the same schedule."""

    def __init__(self, hp_dim: int, seed, hidden_width: int = HIDDEN_WIDTH):
        self.hp_dim = int(hp_dim)
        dims = (self.hp_dim + 1,) + (hidden_width,) * N_HIDDEN_LAYERS + (1,)
        self.body = DenseNetwork.create(dims, seed)
        self.adam = AdamState.for_params([self.body.flat_params])
        self._grad = GradientBundle.zeros_for(self.body)
        self.init_seed = seed

    def reinitialize(self, seed) -> None:
        init_weights(self.body, seed)
        self.adam = AdamState.for_params([self.body.flat_params])
        self.init_seed = seed

    def _stack(self, configs: np.ndarray, b: np.ndarray) -> np.ndarray:
        configs = np.atleast_2d(np.asarray(configs, dtype=float))
        if configs.shape[1] != self.hp_dim:
            raise ValueError(
                f"expected config dimension {self.hp_dim} (budget is appended "
                f"internally), got {configs.shape[1]}"
            )
        return np.column_stack([configs, b])

    def predict(self, configs: np.ndarray, b_norm) -> np.ndarray:
        configs = np.atleast_2d(np.asarray(configs, dtype=float))
        b = np.broadcast_to(np.asarray(b_norm, dtype=float), (configs.shape[0],))
        out, _ = forward(self.body, self._stack(configs, b))
        return out[:, 0]

    def train_batch(self, data: TrainingData, idx: np.ndarray) -> float:
        x = self._stack(data.configs[idx], data.budgets[idx])
        y = data.losses[idx]
        out, cache = forward(self.body, x)
        diff = out[:, 0] - y
        loss = float(np.mean(np.abs(diff)))
        if not math.isfinite(loss):
            return loss
        d_out = (np.sign(diff) / diff.size)[:, None]
        backward(self.body, cache, d_out, out=self._grad)
        adam_step([self.body.flat_params], [self._grad.flat], self.adam)
        return loss

    def full_loss(self, data: TrainingData) -> float:
        pred = self.predict(data.configs, data.budgets)
        with np.errstate(invalid="ignore"):
            return float(np.mean(np.abs(pred - data.losses)))


def member_init_seed(ensemble_seed: int, member_index: int, init_round: int) -> list[int]:
    """Seed material for (re)initializing one member's weights."""
    return [int(ensemble_seed), 1, int(member_index), int(init_round)]


def _batch_rng_seed(ensemble_seed: int, member_index: int, fit_round: int) -> list[int]:
    return [int(ensemble_seed), 2, int(member_index), int(fit_round)]


def train_member_epochs(
    member,
    data: TrainingData,
    epochs: int,
    batch_size: int,
    rng: np.random.Generator,
    oversample_index: int | None = None,
    batch_log: list | None = None,
) -> float:
    """Mini-batch training loop shared by all member types.

    When ``oversample_index`` is given, that row is appended to every
    mini-batch so the newest observation is learned as fast as old ones.
    Returns the final full-data L1 loss (inf if training diverged).
    """
    n = len(data)
    if n == 0:
        raise ValueError("cannot train on an empty dataset")
    bs = min(batch_size, n)
    for _ in range(epochs):
        perm = rng.permutation(n)
        for start in range(0, n, bs):
            idx = perm[start : start + bs]
            if oversample_index is not None:
                idx = np.append(idx, oversample_index)
            if batch_log is not None:
                batch_log.append(idx.copy())
            loss = member.train_batch(data, idx)
            if not math.isfinite(loss):
                return math.inf
    final = member.full_loss(data)
    return final if math.isfinite(final) else math.inf


class DplEnsemble:
    """K independently initialized surrogate members plus trainer state.

    All randomness is derived from the ensemble seed, a per-member index
    and monotone round counters, so fits, refinements and restarts are
    reproducible and snapshots can resume mid-run.
    """

    def __init__(
        self,
        hp_dim: int,
        seed: int,
        n_members: int = DEFAULT_ENSEMBLE_SIZE,
        hidden_width: int = HIDDEN_WIDTH,
        member_factory=DplNetwork,
    ):
        if n_members < 1:
            raise ValueError("ensemble needs at least one member")
        self.hp_dim = int(hp_dim)
        self.seed = int(seed)
        self.n_members = int(n_members)
        self.hidden_width = hidden_width
        self.init_round = 0
        self.fit_round = 0
        self.restart_count = 0
        self.fitted = False
        self.last_fit_loss = math.inf
        self.members = [
            member_factory(hp_dim, member_init_seed(self.seed, k, 0), hidden_width)
            for k in range(self.n_members)
        ]

    def fit_initial(self, data: TrainingData, schedule: TrainerSchedule) -> float:
        """Re-initialize every member and train for the initial epoch count.

        Each member draws fresh weights from its own seed and sees its own
        shuffled mini-batch sequence.  Returns the member-averaged final L1
        loss (inf signals a restart, never an exception).
        """
        self.init_round += 1
        losses = []
        for k, member in enumerate(self.members):
            member.reinitialize(member_init_seed(self.seed, k, self.init_round))
            rng = np.random.default_rng(_batch_rng_seed(self.seed, k, self.fit_round))
            losses.append(
                train_member_epochs(member, data, schedule.initial_epochs, schedule.batch_size, rng)
            )
        self.fit_round += 1
        self.fitted = True
        self.last_fit_loss = float(np.mean(losses))
        return self.last_fit_loss

    def refine(
        self,
        data: TrainingData,
        newest_index: int,
        schedule: TrainerSchedule,
        batch_log: list | None = None,
    ) -> float:
        """Continue training every member, oversampling the newest observation."""
        if not self.fitted:
            raise RuntimeError("refine called before fit_initial")
        if not 0 <= newest_index < len(data):
            raise ValueError(f"newest_index {newest_index} out of range")
        losses = []
        for k, member in enumerate(self.members):
            rng = np.random.default_rng(_batch_rng_seed(self.seed, k, self.fit_round))
            losses.append(
                train_member_epochs(
                    member,
                    data,
                    schedule.refine_epochs,
                    schedule.batch_size,
                    rng,
                    oversample_index=newest_index,
                    batch_log=batch_log,
                )
            )
        self.fit_round += 1
        self.last_fit_loss = float(np.mean(losses))
        return self.last_fit_loss

    def restart(self, data: TrainingData, schedule: TrainerSchedule) -> float:
        """Replay the initial fit with fresh weights after stagnation."""
        self.restart_count += 1
        schedule.reset_stagnation()
        return self.fit_initial(data, schedule)

    def member_predictions(self, configs, b_norm) -> np.ndarray:
        """(K, n) matrix of member predictions."""
        configs = np.atleast_2d(np.asarray(configs, dtype=float))
        return np.stack([m.predict(configs, b_norm) for m in self.members])

    def posterior(self, config, b_norm: float) -> Posterior:
        mean, var = self.posterior_batch(np.atleast_2d(config), b_norm)
        return Posterior(mean=float(mean[0]), variance=float(var[0]))

    def posterior_batch(self, configs, b_norm) -> tuple[np.ndarray, np.ndarray]:
        """Ensemble mean and population variance (divisor K) per config row.

        Computed relative to the first member's prediction so identical
        members yield exactly zero variance.
        """
        preds = self.member_predictions(configs, b_norm)
        dev = preds - preds[0]
        dev_mean = dev.mean(axis=0)
        mean = preds[0] + dev_mean
        var = np.maximum(np.mean(dev * dev, axis=0) - dev_mean**2, 0.0)
        return mean, var


def predict_member(member: DplNetwork, config, b_norm: float) -> float:
    """Single-member prediction at one (config, normalized budget) point."""
    return float(member.predict(np.atleast_2d(config), b_norm)[0])


def fit_initial(ensemble: DplEnsemble, data: TrainingData, schedule: TrainerSchedule) -> float:
    return ensemble.fit_initial(data, schedule)


def refine(
    ensemble: DplEnsemble,
    data: TrainingData,
    newest_index: int,
    schedule: TrainerSchedule,
    batch_log: list | None = None,
) -> float:
    return ensemble.refine(data, newest_index, schedule, batch_log=batch_log)


def posterior(ensemble: DplEnsemble, config, b_norm: float) -> Posterior:
    return ensemble.posterior(config, b_norm)


def predict_conditioned_nn(network: ConditionedNetwork, config, b_norm: float) -> float:
    """Prediction of the conditioned plain-NN variant at one point."""
    return float(network.predict(np.atleast_2d(config), b_norm)[0])


SNAPSHOT_VERSION = 1


def ensemble_snapshot(ensemble: DplEnsemble, schedule: TrainerSchedule) -> dict:
    """Versioned JSON-serializable snapshot (seeds, counters, parameters)."""
    members = []
    for m in ensemble.members:
        members.append(
            {
                "init_seed": list(m.init_seed) if isinstance(m.init_seed, (list, tuple)) else m.init_seed,
                "layer_dims": list(m.body.layer_dims),
                "params": m.body.flat_params.tolist(),
                "adam": {
                    "first_moment": m.adam.first_moment[0].tolist(),
                    "second_moment": m.adam.second_moment[0].tolist(),
                    "step_count": m.adam.step_count,
                    "lr": m.adam.lr,
                },
            }
        )
    return {
        "version": SNAPSHOT_VERSION,
        "seed": ensemble.seed,
        "hp_dim": ensemble.hp_dim,
        "n_members": ensemble.n_members,
        "hidden_width": ensemble.hidden_width,
        "init_round": ensemble.init_round,
        "fit_round": ensemble.fit_round,
        "restart_count": ensemble.restart_count,
        "fitted": ensemble.fitted,
        "last_fit_loss": ensemble.last_fit_loss,
        "schedule": {
            "initial_epochs": schedule.initial_epochs,
            "refine_epochs": schedule.refine_epochs,
            "initial_phase_iterations": schedule.initial_phase_iterations,
            "restart_threshold_iterations": schedule.restart_threshold_iterations,
            "batch_size": schedule.batch_size,
            "iterations_since_improvement": schedule.iterations_since_improvement,
            "best_fit_loss": schedule.best_fit_loss if math.isfinite(schedule.best_fit_loss) else None,
        },
        "members": members,
    }


def ensemble_from_snapshot(doc: dict) -> tuple[DplEnsemble, TrainerSchedule]:
    """Rebuild an ensemble and its schedule from a snapshot document."""
    if doc.get("version") != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot version {doc.get('version')!r}")
    ens = DplEnsemble(
        hp_dim=doc["hp_dim"],
        seed=doc["seed"],
        n_members=doc["n_members"],
        hidden_width=doc["hidden_width"],
    )
    ens.init_round = doc["init_round"]
    ens.fit_round = doc["fit_round"]
    ens.restart_count = doc["restart_count"]
    ens.fitted = doc["fitted"]
    ens.last_fit_loss = doc["last_fit_loss"]
    for member, mdoc in zip(ens.members, doc["members"]):
        dims = tuple(mdoc["layer_dims"])
        if dims != member.body.layer_dims:
            raise ValueError(f"snapshot layer_dims {dims} != expected {member.body.layer_dims}")
        member.init_seed = mdoc["init_seed"]
        member.body.flat_params[...] = np.asarray(mdoc["params"], dtype=float)
        adam = mdoc["adam"]
        member.adam = AdamState(
            first_moment=[np.asarray(adam["first_moment"], dtype=float)],
            second_moment=[np.asarray(adam["second_moment"], dtype=float)],
            step_count=adam["step_count"],
            lr=adam["lr"],
        )
    sdoc = doc["schedule"]
    schedule = TrainerSchedule(
        initial_epochs=sdoc["initial_epochs"],
        refine_epochs=sdoc["refine_epochs"],
        initial_phase_iterations=sdoc["initial_phase_iterations"],
        restart_threshold_iterations=sdoc["restart_threshold_iterations"],
        batch_size=sdoc["batch_size"],
        iterations_since_improvement=sdoc["iterations_since_improvement"],
        best_fit_loss=math.inf if sdoc["best_fit_loss"] is None else sdoc["best_fit_loss"],
    )
    return ens, schedule


def snapshot_to_json(ensemble: DplEnsemble, schedule: TrainerSchedule) -> str:
    return json.dumps(ensemble_snapshot(ensemble, schedule))


def snapshot_from_json(text: str) -> tuple[DplEnsemble, TrainerSchedule]:
    return ensemble_from_snapshot(json.loads(text))
