"""Lyapunov sum, linear/quadratic rate split, on-road energy, and the
propagator/generator classifier."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.signal import find_peaks

from .equilibria import solve_fixed_point
from .integrator import Trajectory
from .model import SpecError, SystemSpec

ASYMPTOTICALLY_STABLE = "AsymptoticallyStable"
OSCILLATORY = "Oscillatory"
DIVERGENT = "Divergent"
INDETERMINATE = "Indeterminate"
VERDICTS = (ASYMPTOTICALLY_STABLE, OSCILLATORY, DIVERGENT, INDETERMINATE)


class MetricsError(ValueError):
    """Too few cycles in the window to measure an oscillation."""


@dataclass(frozen=True)
class Thresholds:
    eps_conv: float = 1e-6
    eps_state: float = 1e-3
    eps_osc: float = 1e-3
    window: float = 0.2
    amplitude_tol: float = 0.05


@dataclass
class DiagnosticsSeries:
    times: np.ndarray
    v: np.ndarray
    l_rate: np.ndarray
    q_rate: np.ndarray
    r: np.ndarray
    b_used: np.ndarray

    @property
    def abs_r(self) -> np.ndarray:
        return np.abs(self.r)

    @property
    def dv(self) -> np.ndarray:
        return self.l_rate - self.q_rate

    def columns(self) -> dict:
        return {"V": self.v, "L": self.l_rate, "Q": self.q_rate, "R": self.r, "absR": self.abs_r}

    def to_csv(self, fh):
        fh.write("t,V,L,Q,R,absR\n")
        cols = np.column_stack([self.times, *self.columns().values()])
        for row in cols:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")


@dataclass
class Classification:
    verdict: str
    convergence_time: Optional[float] = None
    cycle_period: Optional[float] = None
    cycle_amplitude: Optional[list] = None
    final_r: float = float("nan")
    onset_time: Optional[float] = None
    note: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["final_r"] != d["final_r"]:
            d["final_r"] = None
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def lyapunov_sum(state) -> float:
    return float(np.sum(state))


def lyapunov_rate(spec: SystemSpec, state) -> tuple[float, float]:
    """``(l, q)`` with ``dV/dt = l - q`` for the sum ``V`` of all elements.

    Element ``j`` feeds element ``j - gen_offset`` generatively, so its linear
    weight is that element's ``k1`` minus its own ``k2``.
    """
    x = np.asarray(state, dtype=np.float64)
    fed = (np.arange(spec.n) - spec.gen_offset) % spec.n
    l = float(np.sum((spec.k1[fed] - spec.k2) * x))
    q = float(np.sum(spec.k3 * x * x[spec.sup_index]))
    return l, q


def onroad_energy(spec: SystemSpec, b, state) -> float:
    """Signed ``sum_i k3[i] * d[i] * d[i + sup_offset]`` with ``d = state - b``."""
    d = np.asarray(state, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    if d.shape != (spec.n,):
        raise SpecError(f"state and b must have length {spec.n}")
    return float(np.sum(spec.k3 * d * d[spec.sup_index]))


def reference_points(spec: SystemSpec, trajectory: Trajectory, seed_mode: str = "averaged",
                     base=None) -> np.ndarray:
    """Per-sample fixed point to measure deviations against.

    Before any input is active this is the fixed point of ``spec``; from each
    schedule switch time on it is the fixed point of the field with the then
    active constant inputs folded in.
    """
    times = trajectory.times
    sched = trajectory.schedule
    if base is None:
        base = solve_fixed_point(spec, seed_mode=seed_mode).b
    out = np.tile(np.asarray(base, dtype=np.float64), (len(times), 1))
    prev = base
    for t_switch in sched.switch_times():
        u = sched.forcing(spec.n, t_switch)
        b = solve_fixed_point(spec, seed=prev, forcing=u).b if np.any(u) else base
        out[times >= t_switch] = b
        prev = b
    return out


def diagnostics_series(spec: SystemSpec, trajectory: Trajectory, b) -> DiagnosticsSeries:
    """Evaluate V, the rate split and R at every sample.

    ``b`` is one fixed point or an array with one row per sample.
    """
    x = np.asarray(trajectory.states, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if b.ndim == 1:
        b = np.broadcast_to(b, x.shape)
    if b.shape != x.shape or x.shape[1] != spec.n:
        raise SpecError(f"reference points shape {b.shape} does not match states {x.shape}")
    fed = (np.arange(spec.n) - spec.gen_offset) % spec.n
    s = spec.sup_index
    v = x.sum(axis=1)
    l_rate = x @ (spec.k1[fed] - spec.k2)
    q_rate = (spec.k3 * x * x[:, s]).sum(axis=1)
    d = x - b
    r = (spec.k3 * d * d[:, s]).sum(axis=1)
    return DiagnosticsSeries(np.asarray(trajectory.times, dtype=np.float64), v, l_rate, q_rate, r,
                             np.array(b))


def _window(n_samples, fraction):
    return max(1, int(np.ceil(n_samples * fraction)))


def oscillation_metrics(trajectory: Trajectory, window: float = 0.2) -> tuple[float, np.ndarray]:
    """``(period, amplitudes)`` over the trailing window.

    The period is the mean spacing of element-1 peaks; amplitudes are
    per-element peak-to-peak values.
    """
    x = np.asarray(trajectory.states)
    k = _window(len(x), window)
    xw, tw = x[-k:], np.asarray(trajectory.times)[-k:]
    span = xw[:, 0].max() - xw[:, 0].min()
    peaks, _ = find_peaks(xw[:, 0], prominence=max(span * 0.1, 1e-12))
    if len(peaks) < 3:
        raise MetricsError(f"{len(peaks)} peaks in the trailing window, need at least 3")
    period = float(np.mean(np.diff(tw[peaks])))
    return period, xw.max(axis=0) - xw.min(axis=0)


def cycle_amplitudes(trajectory: Trajectory, window: float = 0.2) -> np.ndarray:
    """Per-cycle peak-to-peak amplitudes, one row per complete element-1 cycle."""
    x = np.asarray(trajectory.states)
    k = _window(len(x), window)
    xw = x[-k:]
    span = xw[:, 0].max() - xw[:, 0].min()
    peaks, _ = find_peaks(xw[:, 0], prominence=max(span * 0.1, 1e-12))
    rows = [xw[a:b + 1].max(axis=0) - xw[a:b + 1].min(axis=0) for a, b in zip(peaks, peaks[1:])]
    return np.array(rows).reshape(-1, x.shape[1])


def convergence_time(times, deviation, eps_state) -> Optional[float]:
    """First sample time after which ``deviation`` stays below ``eps_state``."""
    above = np.flatnonzero(deviation >= eps_state)
    if len(above) == 0:
        return float(times[0])
    if above[-1] + 1 >= len(times):
        return None
    return float(times[above[-1] + 1])


def onset_time(series: DiagnosticsSeries, eps_osc: float = 1e-3) -> Optional[float]:
    """First time ``|R|`` exceeds ``eps_osc``."""
    hit = np.flatnonzero(series.abs_r > eps_osc)
    return float(series.times[hit[0]]) if len(hit) else None


def block_means(times, values, width: float) -> tuple[np.ndarray, np.ndarray]:
    """Means over consecutive blocks of ``width`` seconds (trailing partial block dropped)."""
    times = np.asarray(times)
    edges = np.arange(times[0], times[-1] + 1e-9 * width, width)
    if len(edges) < 2:
        return np.array([]), np.array([])
    idx = np.searchsorted(edges, times, side="right") - 1
    centers, means = [], []
    for j in range(len(edges) - 1):
        sel = idx == j
        if np.any(sel):
            centers.append(edges[j] + width / 2)
            means.append(float(np.mean(values[sel])))
    return np.array(centers), np.array(means)


def classify(series: DiagnosticsSeries, trajectory: Trajectory,
             thresholds: Thresholds = Thresholds()) -> Classification:
    """Classify a run as propagator (stable), generator (oscillatory) or neither."""
    th = thresholds
    onset = onset_time(series, th.eps_osc)
    if trajectory.diverged:
        fail = trajectory.failure
        return Classification(DIVERGENT, onset_time=onset,
                              note=f"diverged at t={getattr(fail, 'time', None)}")
    n_samples = len(series.times)
    if len(trajectory.times) != n_samples:
        raise SpecError("series and trajectory lengths differ")
    k = _window(n_samples, th.window)
    abs_r = series.abs_r
    final_r = float(np.mean(abs_r[-k:]))
    deviation = np.abs(np.asarray(trajectory.states) - series.b_used).max(axis=1)
    if final_r < th.eps_conv and deviation[-k:].max() < th.eps_state:
        return Classification(ASYMPTOTICALLY_STABLE,
                              convergence_time=convergence_time(series.times, deviation, th.eps_state),
                              final_r=final_r, onset_time=onset)
    if final_r > th.eps_osc:
        try:
            period, amps = oscillation_metrics(trajectory, th.window)
        except MetricsError as exc:
            return Classification(INDETERMINATE, final_r=final_r, onset_time=onset,
                                  note=f"{exc}; extend t_end")
        cycles = cycle_amplitudes(trajectory, th.window)
        active = amps > th.eps_state
        if len(cycles) >= 2 and np.any(active):
            c = cycles[:, active]
            rel = np.abs(np.diff(c, axis=0)) / np.maximum(c[:-1], 1e-300)
            if np.all(rel <= th.amplitude_tol):
                return Classification(OSCILLATORY, cycle_period=period,
                                      cycle_amplitude=amps.tolist(), final_r=final_r,
                                      onset_time=onset)
        return Classification(INDETERMINATE, final_r=final_r, onset_time=onset,
                              note="cycle amplitudes not yet stable; extend t_end")
    return Classification(INDETERMINATE, final_r=final_r, onset_time=onset,
                          note="slow transient; extend t_end")
