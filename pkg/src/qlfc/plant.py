"""Diesel-generator secondary frequency control loop.

Block cascade, all quantities per-unit deviations from the operating point::

    e      = -df                         (regulate df to zero)
    P_ref  = Kp * e + I,   dI/dt = Ki * e
    P_c    = P_ref - df / R               (droop)
    dx_gov = (P_c - x_gov) / T_G          (governor lag)
    dP_m   = (x_gov - P_m) / T_DG         (engine lag, optional ramp limit)
    d df   = (P_m - P_L - D * df) / H     (inertia and load damping)

The integrator stores ``I = integral of Ki * e`` rather than ``integral of e``
so a gain change only affects future accumulation; see
:func:`bumpless_integrator` for the proportional-term correction applied
when the scheduler switches gains.

Integration is classical fixed-step RK4 with the load held constant over
each step at its value at the step's start.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import DivergenceError, PlantError

DIVERGENCE_LIMIT = 1e6


@dataclass(frozen=True)
class PlantParams:
    T_G: float = 0.1
    T_DG: float = 0.5
    H: float = 10.0
    D: float = 0.8
    R: float = 0.05
    f_base: float = 60.0
    # max |dP_m/dt| in pu/s; None leaves the engine a pure first-order lag
    ramp_limit: float | None = None

    def __post_init__(self):
        for name in ("T_G", "T_DG", "H", "D", "R", "f_base"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise PlantError(f"{name} must be a positive finite number, got {v!r}")
        if self.ramp_limit is not None and not self.ramp_limit > 0:
            raise PlantError("ramp_limit must be positive or None")

    @property
    def linear(self) -> bool:
        return self.ramp_limit is None

    def _kernel_args(self):
        # reciprocals of T_G, T_DG, H and R; the kernels multiply instead of divide
        ramp = -1.0 if self.ramp_limit is None else float(self.ramp_limit)
        return 1.0 / self.T_G, 1.0 / self.T_DG, 1.0 / self.H, float(self.D), 1.0 / self.R, ramp


@dataclass(frozen=True)
class PiGains:
    Kp: float
    Ki: float

    def __post_init__(self):
        if not (self.Kp >= 0 and self.Ki >= 0):
            raise PlantError(f"PI gains must be nonnegative, got Kp={self.Kp}, Ki={self.Ki}")

    def as_tuple(self):
        return (float(self.Kp), float(self.Ki))


@dataclass(frozen=True)
class PlantState:
    delta_f: float = 0.0
    x_gov: float = 0.0
    x_eng: float = 0.0
    integ: float = 0.0
    t: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.delta_f, self.x_gov, self.x_eng, self.integ])


@dataclass(frozen=True)
class LoadEvent:
    id: int
    steps: tuple[tuple[float, float], ...]

    def __post_init__(self):
        steps = tuple((float(t), float(d)) for t, d in self.steps)
        times = [t for t, _ in steps]
        if any(t < 0 for t in times) or any(b <= a for a, b in zip(times, times[1:])):
            raise PlantError(f"event {self.id}: step times must be >= 0 and strictly increasing")
        object.__setattr__(self, "steps", steps)

    @property
    def onset(self) -> float:
        return self.steps[0][0] if self.steps else 0.0

    @property
    def final_time(self) -> float:
        return self.steps[-1][0] if self.steps else 0.0

    def load_at(self, t: float) -> float:
        return sum(d for ts, d in self.steps if ts <= t)

    def load_profile(self, n_steps: int, dt: float) -> np.ndarray:
        """Load applied during each integration step (value at the step start)."""
        u = np.zeros(n_steps)
        for ts, d in self.steps:
            k0 = int(math.ceil(ts / dt - 1e-9))
            if k0 < n_steps:
                u[k0:] += d
        return u


# -- numerical kernels -----------------------------------------------------


@njit(cache=True, inline="always")
def _rhs(df, xg, xe, integ, kp, ki, dpl, tg, tdg, h, d, r, ramp):
    # the time constants arrive as reciprocals (see PlantParams._kernel_args)
    e = -df
    pc = kp * e + integ - df * r
    dxg = (pc - xg) * tg
    dxe = (xg - xe) * tdg
    if ramp > 0.0:
        if dxe > ramp:
            dxe = ramp
        elif dxe < -ramp:
            dxe = -ramp
    ddf = (xe - dpl - d * df) * h
    return ddf, dxg, dxe, ki * e


@njit(cache=True)
def _rk4(x0, kp, ki, load, dt, tg, tdg, h, d, r, ramp, limit, out):
    """Integrate len(load) steps from x0, writing states to out[1:].

    Returns the index of the first non-finite / out-of-bounds step, or -1.
    """
    df, xg, xe, it = x0[0], x0[1], x0[2], x0[3]
    out[0, 0] = df
    out[0, 1] = xg
    out[0, 2] = xe
    out[0, 3] = it
    half = 0.5 * dt
    for k in range(load.shape[0]):
        u = load[k]
        a1, b1, c1, d1 = _rhs(df, xg, xe, it, kp, ki, u, tg, tdg, h, d, r, ramp)
        a2, b2, c2, d2 = _rhs(df + half * a1, xg + half * b1, xe + half * c1, it + half * d1,
                              kp, ki, u, tg, tdg, h, d, r, ramp)
        a3, b3, c3, d3 = _rhs(df + half * a2, xg + half * b2, xe + half * c2, it + half * d2,
                              kp, ki, u, tg, tdg, h, d, r, ramp)
        a4, b4, c4, d4 = _rhs(df + dt * a3, xg + dt * b3, xe + dt * c3, it + dt * d3,
                              kp, ki, u, tg, tdg, h, d, r, ramp)
        df += dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        xg += dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        xe += dt / 6.0 * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
        it += dt / 6.0 * (d1 + 2.0 * d2 + 2.0 * d3 + d4)
        out[k + 1, 0] = df
        out[k + 1, 1] = xg
        out[k + 1, 2] = xe
        out[k + 1, 3] = it
        m = abs(df) + abs(xg) + abs(xe) + abs(it)
        if not (m < limit):
            return k + 1
    return -1


@njit(cache=True)
def _rk4_cost(kp, ki, load, dt, tg, tdg, h, d, r, ramp, limit):
    """Trapezoid ISE and ITAE of df from the zero state, without storing the path.

    Returns (ise, itae, k) where k >= 0 flags divergence at step k.
    """
    df = xg = xe = it = 0.0
    half = 0.5 * dt
    ise = 0.0
    itae = 0.0
    for k in range(load.shape[0]):
        u = load[k]
        prev = df
        a1, b1, c1, d1 = _rhs(df, xg, xe, it, kp, ki, u, tg, tdg, h, d, r, ramp)
        a2, b2, c2, d2 = _rhs(df + half * a1, xg + half * b1, xe + half * c1, it + half * d1,
                              kp, ki, u, tg, tdg, h, d, r, ramp)
        a3, b3, c3, d3 = _rhs(df + half * a2, xg + half * b2, xe + half * c2, it + half * d2,
                              kp, ki, u, tg, tdg, h, d, r, ramp)
        a4, b4, c4, d4 = _rhs(df + dt * a3, xg + dt * b3, xe + dt * c3, it + dt * d3,
                              kp, ki, u, tg, tdg, h, d, r, ramp)
        df += dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        xg += dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        xe += dt / 6.0 * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
        it += dt / 6.0 * (d1 + 2.0 * d2 + 2.0 * d3 + d4)
        ise += half * (prev * prev + df * df)
        itae += half * (k * dt * abs(prev) + (k + 1) * dt * abs(df))
        if not (abs(df) + abs(xg) + abs(xe) + abs(it) < limit):
            return ise, itae, k + 1
    return ise, itae, -1


def derivatives(state: PlantState, gains: PiGains, delta_PL: float, p: PlantParams) -> PlantState:
    """Time derivative of the loop state; the ``t`` field carries dt/dt = 1."""
    ddf, dxg, dxe, dint = _rhs(
        float(state.delta_f), float(state.x_gov), float(state.x_eng), float(state.integ),
        float(gains.Kp), float(gains.Ki), float(delta_PL), *p._kernel_args(),
    )
    return PlantState(ddf, dxg, dxe, dint, 1.0)


def integrate(x0, gains: PiGains, load: np.ndarray, dt: float, p: PlantParams, t0: float = 0.0) -> np.ndarray:
    """RK4 over ``len(load)`` steps; returns states of shape (len(load) + 1, 4).

    Raises DivergenceError when the state leaves the finite region.
    """
    out = np.empty((len(load) + 1, 4))
    bad = _rk4(np.asarray(x0, dtype=float), float(gains.Kp), float(gains.Ki),
               np.ascontiguousarray(load, dtype=float), float(dt), *p._kernel_args(),
               DIVERGENCE_LIMIT, out)
    if bad >= 0:
        raise DivergenceError(t0 + bad * dt)
    return out


# -- results ---------------------------------------------------------------


@dataclass(frozen=True)
class Metrics:
    nadir_hz: float
    settling_time_s: float
    ise: float
    itae: float
    overshoot: float
    settled: bool = True

    def as_dict(self) -> dict:
        return {
            "nadir_hz": self.nadir_hz,
            "settling_time_s": self.settling_time_s,
            "ISE": self.ise,
            "ITAE": self.itae,
            "overshoot": self.overshoot,
            "settled": self.settled,
        }


@dataclass
class SimResult:
    dt: float
    t: np.ndarray
    delta_f: np.ndarray
    p_m: np.ndarray
    p_c: np.ndarray
    f_base: float = 60.0
    disturbance_time: float = 0.0
    metrics: Metrics = field(init=False)

    def __post_init__(self):
        self.metrics = metrics(self.t, self.delta_f, self.f_base, self.disturbance_time)

    @property
    def f_hz(self) -> np.ndarray:
        return self.f_base * (1.0 + self.delta_f)

    def rows(self, decimate: int = 1):
        f = self.f_hz
        for k in range(0, len(self.t), decimate):
            yield (float(self.t[k]), float(self.delta_f[k]), float(f[k]), float(self.p_m[k]), float(self.p_c[k]))

    def to_csv(self, path, decimate: int = 1) -> None:
        from .io import write_csv

        write_csv(path, SERIES_HEADER, self.rows(decimate))


SERIES_HEADER = ("t", "delta_f_pu", "f_hz", "P_m_pu", "P_c_pu")


def _trapz(y, t):
    return float(np.trapezoid(y, t)) if hasattr(np, "trapezoid") else float(np.trapz(y, t))


def metrics(t, delta_f, f_base: float = 60.0, disturbance_time: float = 0.0) -> Metrics:
    """Performance figures of a frequency-deviation series (per-unit).

    Settling time is measured from ``disturbance_time`` (the last load step)
    to the last sample whose |df| exceeds 2 % of the largest |df| seen after
    that instant.  ``settled`` is False when that sample is the final one.
    """
    t = np.asarray(t, dtype=float)
    df = np.asarray(delta_f, dtype=float)
    if df.size == 0:
        raise PlantError("metrics need a nonempty series")
    nadir = f_base * (1.0 + float(df.min()))
    ise = _trapz(df**2, t)
    itae = _trapz(t * np.abs(df), t)

    after = t >= disturbance_time - 1e-12
    seg, tseg = df[after], t[after]
    peak = float(np.max(np.abs(seg))) if seg.size else 0.0
    if peak == 0.0:
        return Metrics(nadir, 0.0, ise, itae, 0.0, True)
    outside = np.nonzero(np.abs(seg) > 0.02 * peak)[0]
    last = int(outside[-1])
    settling = float(tseg[last] - disturbance_time)
    settled = last < seg.size - 1

    dominant = seg[int(np.argmax(np.abs(seg)))]
    opposite = np.max(-np.sign(dominant) * seg)
    overshoot = max(0.0, float(opposite)) / peak
    return Metrics(nadir, settling, ise, itae, overshoot, settled)


def _check_run(duration, dt):
    if not dt > 0:
        raise PlantError("dt must be positive")
    if not duration > 0:
        raise PlantError("duration must be positive")
    n = int(round(duration / dt))
    if abs(n * dt - duration) > 1e-9 * max(1.0, duration):
        raise PlantError(f"duration {duration} is not a whole number of steps of {dt}")
    return n


def simulate(p: PlantParams, gains: PiGains, event: LoadEvent, duration: float, dt: float = 1e-3) -> SimResult:
    """Static-gain response to ``event`` from the zero state."""
    n = _check_run(duration, dt)
    if event.steps and event.final_time >= duration:
        raise PlantError("duration must exceed the last load-step time")
    load = event.load_profile(n, dt)
    x = integrate(np.zeros(4), gains, load, dt, p)
    t = np.arange(n + 1) * dt
    p_c = gains.Kp * -x[:, 0] + x[:, 3] - x[:, 0] / p.R
    return SimResult(dt, t, x[:, 0].copy(), x[:, 2].copy(), p_c, p.f_base, event.final_time)


def response_cost(p: PlantParams, gains: PiGains, event: LoadEvent, duration: float,
                  dt: float = 1e-3, kind: str = "ISE") -> float:
    """ISE or ITAE of the static-gain response, computed without keeping the series.

    Agrees with ``simulate(...).metrics`` up to rounding; raises DivergenceError
    like :func:`simulate`.
    """
    kind = kind.upper()
    if kind not in ("ISE", "ITAE"):
        raise PlantError(f"unknown cost functional {kind!r}")
    n = _check_run(duration, dt)
    load = event.load_profile(n, dt)
    ise, itae, bad = _rk4_cost(float(gains.Kp), float(gains.Ki), load, float(dt), *p._kernel_args(), DIVERGENCE_LIMIT)
    if bad >= 0:
        raise DivergenceError(bad * dt)
    return ise if kind == "ISE" else itae


def bumpless_integrator(integ: float, delta_f: float, old: PiGains, new: PiGains) -> float:
    """Integrator value that keeps Kp * e + I continuous across a gain switch."""
    return integ + (old.Kp - new.Kp) * (-delta_f)


def cost(result: SimResult, kind: str = "ISE") -> float:
    kind = kind.upper()
    if kind == "ISE":
        return result.metrics.ise
    if kind == "ITAE":
        return result.metrics.itae
    raise PlantError(f"unknown cost functional {kind!r}")
