"""Closed-loop deployment of the trained classifier as a PI gain scheduler.

Every ``update_period`` the scheduler reads the three most recent samples of
the frequency deviation (Hz), asks the classifier for a lookup-table class
and switches the PI gains.  Switching is bumpless: the integrator absorbs
the change in the proportional term so the reference power is continuous.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import vqc
from .errors import PlantError, QlfcError
from .expert import LookupTable, gain_costs
from .io import write_csv
from .plant import (
    LoadEvent,
    PiGains,
    PlantParams,
    SimResult,
    _check_run,
    bumpless_integrator,
    integrate,
    simulate,
)
from .vqc import Exact, Shots, VqcModel

PM_OFFSET = 1.2


@dataclass(frozen=True)
class DeployConfig:
    model: VqcModel
    table: LookupTable
    event: LoadEvent
    plant: PlantParams = field(default_factory=PlantParams)
    backend: vqc.Backend = field(default_factory=Exact)
    update_period: float = 0.1
    sampling_period: float = 0.1
    duration: float = 60.0
    dt: float = 1e-3

    def __post_init__(self):
        if self.model.n_classes > self.table.n_classes:
            raise QlfcError("model has more classes than the lookup table")
        if self.update_period < self.dt:
            raise PlantError("update_period must be at least the plant step")
        for name in ("update_period", "sampling_period"):
            _steps(getattr(self, name), self.dt, name)
        ratio = self.update_period / self.sampling_period
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise PlantError("update_period must be an integer multiple of sampling_period")


def _steps(period, dt, name):
    n = int(round(period / dt))
    if n < 1 or abs(n * dt - period) > 1e-9 * max(1.0, period):
        raise PlantError(f"{name} must be a whole number of plant steps")
    return n


@dataclass(frozen=True)
class Decision:
    t: float
    window: tuple[float, float, float]
    cls: int
    gains: PiGains


@dataclass
class ClosedLoopResult:
    result: SimResult
    decisions: list[Decision]

    @property
    def switches(self) -> list[Decision]:
        return [d for prev, d in zip(self.decisions, self.decisions[1:]) if d.cls != prev.cls]

    def decisions_csv(self, path) -> None:
        rows = ((d.t, *d.window, d.cls, d.gains.Kp, d.gains.Ki) for d in self.decisions)
        write_csv(path, ("t", "df_t-3_hz", "df_t-2_hz", "df_t-1_hz", "class", "Kp", "Ki"), rows)


def _classifier(model: VqcModel, backend):
    evaluate = vqc.exact_evaluator(model)
    if isinstance(backend, Shots):
        rng = np.random.default_rng(backend.seed)

        def classify(window):
            p = vqc.sample_distributions(evaluate(window[None, :]), backend.shots, rng)
            return int(vqc.decide(p[0], model.n_classes))

    else:

        def classify(window):
            return int(vqc.decide(evaluate(window[None, :])[0], model.n_classes))

    return classify


def closed_loop_simulate(cfg: DeployConfig) -> ClosedLoopResult:
    """Run the event with the classifier choosing gains online.

    The window at decision time t holds the deviations at t - 2T, t - T and
    t (T the sampling period); instants before the start read as zero.
    """
    p, dt = cfg.plant, cfg.dt
    n = _check_run(cfg.duration, dt)
    if cfg.event.steps and cfg.event.final_time >= cfg.duration:
        raise PlantError("duration must exceed the last load-step time")
    per_update = _steps(cfg.update_period, dt, "update_period")
    per_sample = _steps(cfg.sampling_period, dt, "sampling_period")
    load = cfg.event.load_profile(n, dt)
    classify = _classifier(cfg.model, cfg.backend)

    states = np.zeros((n + 1, 4))
    kp = np.zeros(n + 1)
    decisions: list[Decision] = []
    x = np.zeros(4)
    gains = None
    for k0 in range(0, n, per_update):
        k1 = min(k0 + per_update, n)
        idx = k0 - per_sample * np.arange(2, -1, -1)
        window = np.where(idx >= 0, states[np.maximum(idx, 0), 0], 0.0) * p.f_base
        cls = classify(window)
        new = cfg.table[cls]
        if gains is not None and new != gains:
            x = x.copy()
            x[3] = bumpless_integrator(x[3], x[0], gains, new)
        gains = new
        decisions.append(Decision(k0 * dt, tuple(float(v) for v in window), cls, gains))
        out = integrate(x, gains, load[k0:k1], dt, p, t0=k0 * dt)
        states[k0 : k1 + 1] = out
        kp[k0 : k1 + 1] = gains.Kp
        x = out[-1]

    t = np.arange(n + 1) * dt
    df = states[:, 0]
    p_c = kp * -df + states[:, 3] - df / p.R
    res = SimResult(dt, t, df.copy(), states[:, 2].copy(), p_c, p.f_base, cfg.event.final_time)
    return ClosedLoopResult(res, decisions)


def reference_power(result: SimResult, p: PlantParams) -> np.ndarray:
    """Controller output Kp * e + I, recovered from the exported series."""
    # P_c = P_ref - df / R, so the droop term is added back
    return result.p_c + result.delta_f / p.R


@dataclass(frozen=True)
class Comparison:
    event_id: int
    optimal_class: int
    suboptimal_class: int
    optimal: SimResult
    suboptimal: SimResult

    @property
    def deltas(self) -> dict:
        """Suboptimal minus optimal for each headline metric."""
        a, b = self.optimal.metrics, self.suboptimal.metrics
        return {
            "nadir_hz": b.nadir_hz - a.nadir_hz,
            "settling_time_s": b.settling_time_s - a.settling_time_s,
            "ISE": b.ise - a.ise,
        }

    def to_dict(self) -> dict:
        return {
            "event_id": self.event_id,
            "optimal": {"class": self.optimal_class, **self.optimal.metrics.as_dict()},
            "suboptimal": {"class": self.suboptimal_class, **self.suboptimal.metrics.as_dict()},
            "deltas": self.deltas,
        }

    def series_csv(self, path, decimate: int = 1) -> None:
        a, b = self.optimal, self.suboptimal
        rows = (
            (float(a.t[k]), float(a.f_hz[k]), float(b.f_hz[k]), float(a.p_m[k]), float(b.p_m[k]))
            for k in range(0, len(a.t), decimate)
        )
        write_csv(path, ("t", "f_opt_hz", "f_sub_hz", "P_m_opt_pu", "P_m_sub_pu"), rows)


def compare_optimal_suboptimal(event: LoadEvent, table: LookupTable, p: PlantParams, cost: str = "ISE",
                               duration: float = 60.0, dt: float = 1e-3,
                               optimal_class: int | None = None,
                               suboptimal_class: int | None = None) -> Comparison:
    """Static-gain runs under the event's expert class and its costliest rival.

    Both classes default to the expert's choice (cheapest table entry) and
    the most expensive other entry; either can be forced.
    """
    if table.n_classes < 2:
        raise QlfcError("comparison needs a lookup table with at least two classes")
    if optimal_class is None or suboptimal_class is None:
        costs = gain_costs(event, table.entries, p, cost, duration, dt)
        if optimal_class is None:
            optimal_class = min(range(len(costs)), key=lambda k: (costs[k], table[k].Ki, table[k].Kp))
        if suboptimal_class is None:
            others = [k for k in range(len(costs)) if k != optimal_class]
            suboptimal_class = max(others, key=lambda k: (costs[k], -k))
    opt = simulate(p, table[optimal_class], event, duration, dt)
    sub = simulate(p, table[suboptimal_class], event, duration, dt)
    return Comparison(event.id, optimal_class, suboptimal_class, opt, sub)


@dataclass(frozen=True)
class FleetStats:
    freq_min: float
    freq_mean: float
    freq_max: float
    pm_min: float
    pm_mean: float
    pm_max: float
    pm_offset: float = PM_OFFSET
    n_runs: int = 1
    n_samples: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def fleet_statistics(results, pm_offset: float = PM_OFFSET) -> FleetStats:
    """Pooled extrema and mean of frequency (Hz) and P_m (+offset) over all samples."""
    results = list(results)
    return fleet_stats_from_arrays([r.f_hz for r in results], [r.p_m for r in results], pm_offset)


def fleet_stats_from_arrays(f_hz_runs, p_m_runs, pm_offset: float = PM_OFFSET) -> FleetStats:
    """Same as :func:`fleet_statistics` for raw per-run frequency (Hz) and P_m arrays."""
    if len(f_hz_runs) == 0 or len(f_hz_runs) != len(p_m_runs):
        raise QlfcError("fleet statistics need at least one run, with matching series")
    f = np.concatenate([np.asarray(a, dtype=float) for a in f_hz_runs])
    pm = np.concatenate([np.asarray(a, dtype=float) for a in p_m_runs]) + pm_offset
    if f.size == 0 or f.size != pm.size:
        raise QlfcError("fleet statistics need nonempty series of equal length")
    return FleetStats(
        float(f.min()), float(math.fsum(f) / f.size), float(f.max()),
        float(pm.min()), float(math.fsum(pm) / pm.size), float(pm.max()),
        pm_offset, len(f_hz_runs), int(f.size),
    )
