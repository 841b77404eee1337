"""Fixed-step RK4 integration with scheduled additive inputs."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .model import SpecError, SystemSpec, vector_field

OVERFLOW_GUARD = 1e12


class NumericalError(ArithmeticError):
    """Base class for numerical failures; carries the simulation time."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class IntegrationBlowup(NumericalError):
    """Non-finite values appeared during a step."""


class DivergenceError(IntegrationBlowup):
    """A component exceeded the overflow guard."""


class PositivityWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 0.01
    t_end: float = 100.0
    record_stride: int = 10

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not (self.t_end > 0 and math.isfinite(self.t_end)):
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if self.dt > self.t_end:
            raise ValueError(f"dt={self.dt} exceeds t_end={self.t_end}")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ValueError(f"record_stride must be an integer >= 1, got {self.record_stride}")

    @property
    def n_steps(self) -> int:
        # tolerance so that t_end/dt = 10000.000000001 still means 10000 steps
        return max(1, math.ceil(self.t_end / self.dt - 1e-9))

    @property
    def last_dt(self) -> float:
        """Length of the final step, shortened so the run ends exactly at ``t_end``."""
        last = self.t_end - (self.n_steps - 1) * self.dt
        return self.dt if abs(last - self.dt) <= 1e-9 * self.dt else last

    def sample_times(self, steps) -> np.ndarray:
        times = np.asarray(steps, dtype=np.float64) * self.dt
        if len(times) and steps[-1] == self.n_steps:
            times[-1] = (self.n_steps - 1) * self.dt + self.last_dt
        return times


@dataclass(frozen=True)
class InputEntry:
    """Constant additive rate on one element while ``t_start <= t < t_stop``.

    ``element`` is 1-based.
    """

    element: int
    t_start: float
    amplitude: float
    t_stop: float = math.inf

    def __post_init__(self):
        if int(self.element) != self.element or self.element < 1:
            raise SpecError(f"input element must be a 1-based index, got {self.element!r}")
        if not self.t_start < self.t_stop:
            raise SpecError(f"input window empty: t_start={self.t_start} >= t_stop={self.t_stop}")

    def active(self, t: float) -> bool:
        return self.t_start <= t < self.t_stop


@dataclass(frozen=True)
class InputSchedule:
    entries: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def check(self, n: int):
        for e in self.entries:
            if e.element > n:
                raise SpecError(f"input element {e.element} out of range 1..{n}")

    def forcing(self, n: int, t: float) -> np.ndarray:
        self.check(n)
        u = np.zeros(n)
        for e in self.entries:
            if e.active(t):
                u[e.element - 1] += e.amplitude
        return u

    def switch_times(self) -> list[float]:
        """Sorted times at which the active set can change."""
        times = {e.t_start for e in self.entries} | {e.t_stop for e in self.entries}
        return sorted(t for t in times if math.isfinite(t))

    def shifted(self, delta: float) -> "InputSchedule":
        return InputSchedule(tuple(InputEntry(e.element, e.t_start + delta, e.amplitude,
                                              e.t_stop + delta) for e in self.entries))

    def _arrays(self):
        idx = np.array([e.element - 1 for e in self.entries], dtype=np.int64)
        start = np.array([e.t_start for e in self.entries], dtype=np.float64)
        stop = np.array([e.t_stop for e in self.entries], dtype=np.float64)
        amp = np.array([e.amplitude for e in self.entries], dtype=np.float64)
        return idx, start, stop, amp


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    spec: SystemSpec
    schedule: InputSchedule = field(default_factory=InputSchedule)
    failure: Optional[NumericalError] = None

    def __len__(self):
        return len(self.times)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def diverged(self) -> bool:
        return self.failure is not None

    def to_csv(self, fh, extra: Optional[dict] = None):
        """Write ``t,E1,...,En`` (plus optional extra columns) at full precision."""
        header = ["t"] + [f"E{i + 1}" for i in range(self.states.shape[1])]
        cols = [self.times[:, None], self.states]
        if extra:
            header += list(extra)
            cols += [np.asarray(v, dtype=np.float64)[:, None] for v in extra.values()]
        data = np.hstack(cols)
        fh.write(",".join(header) + "\n")
        for row in data:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v: float) -> str:
    return format(v, ".17g")


def read_trajectory_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a trajectory CSV back into ``(times, states)``."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    ecols = [i for i, h in enumerate(header) if h.startswith("E") and h[1:].isdigit()]
    return data[:, 0], data[:, ecols]


def augmented_field(spec: SystemSpec, state, schedule: InputSchedule, t: float) -> np.ndarray:
    return vector_field(spec, state) + schedule.forcing(spec.n, t)


def step_rk4(spec: SystemSpec, state, schedule: InputSchedule, t: float, dt: float) -> np.ndarray:
    """One classical RK4 step of the augmented field."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    x = np.asarray(state, dtype=np.float64)
    with np.errstate(over="ignore", invalid="ignore"):
        a = augmented_field(spec, x, schedule, t)
        b = augmented_field(spec, x + 0.5 * dt * a, schedule, t + 0.5 * dt)
        c = augmented_field(spec, x + 0.5 * dt * b, schedule, t + 0.5 * dt)
        d = augmented_field(spec, x + dt * c, schedule, t + dt)
        new = x + dt / 6.0 * (a + 2.0 * b + 2.0 * c + d)
    if not np.all(np.isfinite(new)):
        raise IntegrationBlowup(f"non-finite state after step at t={t + dt:g}", time=t + dt)
    return new


def simulate(spec: SystemSpec, initial, config: IntegratorConfig = IntegratorConfig(),
             schedule: InputSchedule = InputSchedule(), *, on_blowup: str = "raise",
             guard: float = OVERFLOW_GUARD, check_positive: bool = True) -> Trajectory:
    """Integrate from ``t = 0`` to ``config.t_end``.

    Samples are recorded every ``record_stride`` steps plus the final step.
    On blowup either raise (default) or, with ``on_blowup="truncate"``, return
    the trajectory up to the last good sample with ``failure`` set.
    Positive initial data that produce a non-positive recorded sample emit a
    :class:`PositivityWarning`.
    """
    x0 = np.asarray(initial, dtype=np.float64)
    if x0.shape != (spec.n,):
        raise SpecError(f"initial state must have shape ({spec.n},), got {x0.shape}")
    if not np.all(np.isfinite(x0)):
        raise SpecError("initial state has non-finite entries")
    if on_blowup not in ("raise", "truncate"):
        raise ValueError(f"on_blowup must be 'raise' or 'truncate', got {on_blowup!r}")
    schedule.check(spec.n)
    idx, start, stop, amp = schedule._arrays()
    states, steps, status, fail_step = kernels.integrate(
        np.ascontiguousarray(spec.k1), np.ascontiguousarray(spec.k2),
        np.ascontiguousarray(spec.k3), spec.gen_index.astype(np.int64),
        spec.sup_index.astype(np.int64), x0.copy(), float(config.dt), float(config.last_dt),
        int(config.n_steps),
        int(config.record_stride), idx, start, stop, amp, float(guard))
    times = config.sample_times(steps)
    traj = Trajectory(times, np.asarray(states), spec, schedule)
    if status:
        t_fail = float(config.sample_times([fail_step])[0])
        if status == 1:
            err = DivergenceError(f"state exceeded overflow guard {guard:g} at t={t_fail:g}",
                                  time=t_fail)
        else:
            err = IntegrationBlowup(f"non-finite state at t={t_fail:g}", time=t_fail)
        if on_blowup == "raise":
            raise err
        traj.failure = err
    if check_positive and np.all(x0 > 0) and np.any(traj.states <= 0):
        first = int(np.argmax(np.any(traj.states <= 0, axis=1)))
        warnings.warn(f"non-positive component recorded at t={traj.times[first]:g} "
                      "from positive initial data", PositivityWarning, stacklevel=2)
    return traj
