"""Supervised training of the classifier and shot-noise evaluation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import vqc
from .errors import TrainError
from .expert import ReplayMemory
from .io import write_csv
from .vqc import Exact, Shots, SpsaConfig, VqcModel

GD = "parameter_shift_gd"
SPSA = "spsa"
DEFAULT_SHOTS = (100, 1000, 5000, 10000)


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    event_ids: np.ndarray

    def __post_init__(self):
        n = len(self.X)
        if len(self.y) != n or len(self.event_ids) != n:
            raise TrainError("dataset columns differ in length")

    def __len__(self):
        return len(self.X)

    @property
    def pairs(self) -> tuple[np.ndarray, np.ndarray]:
        return self.X, self.y

    @property
    def events(self) -> list[int]:
        return sorted(set(int(e) for e in self.event_ids))

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.X[idx], self.y[idx], self.event_ids[idx])


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 300
    learning_rate: float = 0.1
    optimizer: str = GD
    seed: int = 0
    backend: vqc.Backend = field(default_factory=Exact)
    spsa: SpsaConfig | None = None

    def __post_init__(self):
        if self.epochs < 0:
            raise TrainError("epochs must be nonnegative")
        if not self.learning_rate > 0:
            raise TrainError("learning_rate must be positive")
        if self.optimizer not in (GD, SPSA):
            raise TrainError(f"optimizer must be {GD!r} or {SPSA!r}")
        if self.optimizer == GD and isinstance(self.backend, Shots):
            raise TrainError("parameter-shift descent runs on the exact backend; use spsa with shots")


@dataclass(frozen=True)
class AccuracyReport:
    shots_config: int
    runs: tuple[float, ...]

    def __post_init__(self):
        if not self.runs:
            raise TrainError("an accuracy report needs at least one run")

    @property
    def min(self) -> float:
        return min(self.runs)

    @property
    def max(self) -> float:
        return max(self.runs)

    @property
    def mean(self) -> float:
        return float(np.mean(self.runs))

    @property
    def spread(self) -> float:
        return self.max - self.min


@dataclass(frozen=True)
class EventGrid:
    event_id: int
    shots_configs: tuple[int, ...]
    grid: np.ndarray  # bool, (len(shots_configs), runs)

    @property
    def all_true(self) -> bool:
        return bool(self.grid.all())

    def row(self, shots: int) -> np.ndarray:
        return self.grid[self.shots_configs.index(shots)]


def split_dataset(memory: ReplayMemory, n_test_events: int = 18, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Partition by event: every window of an event lands on the same side."""
    X, y, e = memory.arrays()
    events = sorted(set(int(v) for v in e))
    if len(events) <= n_test_events:
        raise TrainError(f"need more than {n_test_events} events to split, have {len(events)}")
    test_events = np.random.default_rng(seed).choice(events, n_test_events, replace=False)
    is_test = np.isin(e, test_events)
    full = Dataset(X, y, e)
    return full.subset(np.flatnonzero(~is_test)), full.subset(np.flatnonzero(is_test))


def train(model: VqcModel, train_set: Dataset, config: TrainConfig) -> tuple[VqcModel, list[float]]:
    """Fit ``model`` and return (best model seen, per-epoch exact loss).

    ``history[0]`` is the loss before any update and ``history[k]`` the loss
    after epoch k.  The returned parameters are those with the lowest
    recorded loss, so the final loss never exceeds the initial one.
    """
    if len(train_set) == 0:
        raise TrainError("training set is empty")
    obj = vqc._Objective(model, train_set.pairs)
    theta = model.params.copy()
    best_theta, best_loss = theta.copy(), obj.loss(theta)
    history = [best_loss]
    spsa = config.spsa or SpsaConfig(a=config.learning_rate, seed=config.seed)

    for epoch in range(config.epochs):
        if config.optimizer == GD:
            _, grad = obj.gradient(theta)
            theta = theta - config.learning_rate * grad
        else:
            theta = vqc.spsa_step(model.with_params(theta), train_set.pairs, epoch, spsa, config.backend)
        current = obj.loss(theta)
        if not np.isfinite(current) or not np.all(np.isfinite(theta)):
            raise TrainError(f"loss became non-finite at epoch {epoch + 1}")
        history.append(current)
        if current < best_loss:
            best_theta, best_loss = theta.copy(), current
    return model.with_params(best_theta), history


def train_restarts(model: VqcModel, train_set: Dataset, config: TrainConfig,
                   restarts: int = 1) -> tuple[VqcModel, list[float], int]:
    """Best of ``restarts`` independent fits, ranked by final training loss only.

    Restart 0 starts from ``model.params``; restart r > 0 from a fresh draw
    seeded with ``model.seed + r``.  Returns (model, history, restart index).
    """
    if restarts < 1:
        raise TrainError("restarts must be positive")
    best = None
    for r in range(restarts):
        start = model if r == 0 else model.with_params(vqc.init_params(model.ansatz, model.seed + r))
        fitted, history = train(start, train_set, config)
        if best is None or min(history) < min(best[1]):
            best = (fitted, history, r)
    return best


def _exact_probs(model, test_set):
    if len(test_set) == 0:
        raise TrainError("test set is empty")
    return vqc.forward_batch(model, test_set.X, Exact())


def _decisions(model, probs, shots, seed):
    if shots is None:
        return vqc.decide(probs, model.n_classes)
    sampled = vqc.sample_distributions(probs, int(shots), np.random.default_rng(seed))
    return vqc.decide(sampled, model.n_classes)


def evaluate_accuracy(model: VqcModel, test_set: Dataset, shots: int | None, run_seed: int = 0) -> float:
    """Fraction of windows classified correctly; ``shots=None`` uses the exact backend."""
    pred = _decisions(model, _exact_probs(model, test_set), shots, run_seed)
    return float(np.mean(pred == test_set.y))


def run_seed(base_seed: int, run_index: int) -> int:
    return base_seed + run_index


def shots_sweep(model: VqcModel, test_set: Dataset, shots_list=DEFAULT_SHOTS, runs_per_config: int = 10,
                base_seed: int = 0) -> list[AccuracyReport]:
    """Accuracy of ``runs_per_config`` seeded evaluations per shot count, ascending."""
    if not shots_list:
        raise TrainError("shots_list is empty")
    if runs_per_config < 1:
        raise TrainError("runs_per_config must be positive")
    probs = _exact_probs(model, test_set)
    reports = []
    for shots in sorted(int(s) for s in shots_list):
        accs = tuple(
            float(np.mean(_decisions(model, probs, shots, run_seed(base_seed, r)) == test_set.y))
            for r in range(runs_per_config)
        )
        reports.append(AccuracyReport(shots, accs))
    return reports


def event_heatmap(model: VqcModel, test_set: Dataset, shots_configs=DEFAULT_SHOTS, runs: int = 10,
                  base_seed: int = 0) -> list[EventGrid]:
    """Per event, whether all of its windows are right for each (shots, run) cell.

    Runs use the same seeds as :func:`shots_sweep`, so the two views agree.
    """
    shots_configs = tuple(sorted(int(s) for s in shots_configs))
    probs = _exact_probs(model, test_set)
    events = test_set.events
    cells = np.zeros((len(events), len(shots_configs), runs), dtype=bool)
    for i, shots in enumerate(shots_configs):
        for r in range(runs):
            ok = _decisions(model, probs, shots, run_seed(base_seed, r)) == test_set.y
            for k, ev in enumerate(events):
                cells[k, i, r] = ok[test_set.event_ids == ev].all()
    return [EventGrid(ev, shots_configs, cells[k]) for k, ev in enumerate(events)]


def event_correct(model: VqcModel, test_set: Dataset, shots: int | None = None, seed: int = 0) -> dict[int, bool]:
    ok = _decisions(model, _exact_probs(model, test_set), shots, seed) == test_set.y
    return {ev: bool(ok[test_set.event_ids == ev].all()) for ev in test_set.events}


# -- exports ---------------------------------------------------------------


def write_accuracy_csv(path, reports: list[AccuracyReport]) -> None:
    rows = [(rep.shots_config, r, acc) for rep in reports for r, acc in enumerate(rep.runs)]
    write_csv(path, ("shots", "run", "accuracy"), rows)


def write_accuracy_summary_csv(path, reports: list[AccuracyReport], exact_accuracy: float | None = None) -> None:
    rows = [(rep.shots_config, rep.min, rep.mean, rep.max) for rep in reports]
    if exact_accuracy is not None:
        rows.append(("exact", exact_accuracy, exact_accuracy, exact_accuracy))
    write_csv(path, ("shots", "min", "mean", "max"), rows)


def write_heatmap_csv(path, grids: list[EventGrid]) -> None:
    rows = [
        (g.event_id, shots, r, int(g.grid[i, r]))
        for g in grids
        for i, shots in enumerate(g.shots_configs)
        for r in range(g.grid.shape[1])
    ]
    write_csv(path, ("event_id", "shots", "run", "correct"), rows)


def write_loss_csv(path, history: list[float]) -> None:
    write_csv(path, ("epoch", "loss"), enumerate(history))
