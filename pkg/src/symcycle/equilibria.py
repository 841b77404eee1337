"""Fixed points: closed forms, averaged approximation, bounding systems,
damped Newton, the ``x + eps*f(x)`` iteration and homotopy continuation."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .model import SpecError, SystemSpec, jacobian, vector_field

METHODS = ("analytic-1d", "analytic-2d", "averaged-approx", "newton",
           "brouwer-iteration", "homotopy")
SANDWICH_SLACK = 1e-9
POSITIVE_FLOOR = 1e-12
SEED_FLOOR = 1e-6
MAX_LOG_STEP = 2.0


class EquilibriumError(ArithmeticError):
    pass


class SingularJacobian(EquilibriumError):
    """Newton hit a singular Jacobian; fall back to :func:`brouwer_iterate`."""

    def __init__(self, message, x=None):
        super().__init__(message)
        self.x = x


class NonConvergence(EquilibriumError):
    def __init__(self, message, x=None, residual=None):
        super().__init__(message)
        self.x = x
        self.residual = residual


@dataclass
class EquilibriumReport:
    b: np.ndarray
    method: str
    residual: float
    b_min: np.ndarray
    b_max: np.ndarray
    sandwich_ok: bool
    converged: bool = True
    iterations: int = 0

    def to_dict(self) -> dict:
        return {"b": self.b.tolist(), "method": self.method, "residual": self.residual,
                "b_min": self.b_min.tolist(), "b_max": self.b_max.tolist(),
                "sandwich_ok": self.sandwich_ok}


@dataclass
class HomotopyPoint:
    s1: np.ndarray
    s2: np.ndarray
    s3: np.ndarray
    b: np.ndarray
    spec: Optional[SystemSpec] = field(default=None, repr=False)


@dataclass
class HomotopyPath:
    """Continuation result; ``failed_at`` is the index of the first unsolved point."""

    points: list
    failed_at: Optional[int] = None

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, i):
        return self.points[i]

    @property
    def b(self) -> np.ndarray:
        return np.array([p.b for p in self.points])

    def max_displacement(self) -> float:
        b = self.b
        if len(b) < 2:
            return 0.0
        return float(np.abs(np.diff(b, axis=0)).max())


def fixed_point_1d(k1: float, k2: float, k3: float) -> float:
    if k3 == 0:
        raise SpecError("k3 must be nonzero")
    return (k1 - k2) / k3


def fixed_point_2d(k11, k12, k21, k22, k31, k32) -> tuple[float, float]:
    """Positive fixed point of the two-element cyclic system.

    Both loops of element 1 read element 2 and vice versa.
    """
    num = k11 * k12 - k21 * k22
    den1 = k12 * k31 + k21 * k32
    den2 = k11 * k32 + k22 * k31
    if den1 == 0 or den2 == 0:
        raise SpecError("zero denominator in two-element fixed point")
    return num / den1, num / den2


def averaged_fixed_point(spec: SystemSpec, mode: str = "averaged") -> np.ndarray:
    """Constant-vector approximation from mean parameters (exact when uniform).

    ``mode="componentwise"`` returns ``(k1[i] - k2[i]) / k3[i]`` per element
    instead, clipped below at ``1e-6``.
    """
    if mode == "averaged":
        return np.full(spec.n, (spec.k1.mean() - spec.k2.mean()) / spec.k3.mean())
    if mode == "componentwise":
        return np.maximum((spec.k1 - spec.k2) / spec.k3, SEED_FLOOR)
    raise ValueError(f"unknown seed mode {mode!r}")


def bounding_specs(spec: SystemSpec) -> tuple[SystemSpec, SystemSpec]:
    """Return ``(spec_max, spec_min)``, the uniform extremal systems."""
    spec_max = spec.replace(k1=np.full(spec.n, spec.k1.max()), k2=np.full(spec.n, spec.k2.min()),
                            k3=np.full(spec.n, spec.k3.min()))
    spec_min = spec.replace(k1=np.full(spec.n, spec.k1.min()), k2=np.full(spec.n, spec.k2.max()),
                            k3=np.full(spec.n, spec.k3.max()))
    return spec_max, spec_min


def bounds(spec: SystemSpec) -> tuple[np.ndarray, np.ndarray]:
    """``(b_min, b_max)`` as constant vectors from the bounding systems."""
    spec_max, spec_min = bounding_specs(spec)
    return averaged_fixed_point(spec_min), averaged_fixed_point(spec_max)


def _residual(spec, x, forcing):
    return float(np.abs(vector_field(spec, x) + forcing).max())


def _report(spec, x, method, forcing, converged=True, iterations=0):
    b_min, b_max = bounds(spec)
    ok = bool(np.all(x >= b_min - SANDWICH_SLACK) and np.all(x <= b_max + SANDWICH_SLACK))
    return EquilibriumReport(np.asarray(x, dtype=np.float64), method, _residual(spec, x, forcing),
                             b_min, b_max, ok, converged, iterations)


def _forcing(spec, forcing):
    if forcing is None:
        return np.zeros(spec.n)
    u = np.asarray(forcing, dtype=np.float64)
    if u.shape != (spec.n,):
        raise SpecError(f"forcing must have shape ({spec.n},)")
    return u


def newton_fixed_point(spec: SystemSpec, seed=None, *, forcing=None, tol: float = 1e-12,
                       max_iter: int = 100, max_halvings: int = 30) -> EquilibriumReport:
    """Damped Newton for the positive root of ``vector_field(x) + forcing = 0``.

    Iterates on ``y = log(x)`` with the scaled residual ``g = (f + forcing) / x``,
    whose Jacobian ``diag(1/x) J diag(x) - diag(g)`` is built from the analytic
    field Jacobian ``J``. The origin, also a root of ``f``, is unreachable in
    these coordinates, so every iterate stays strictly positive. Steps are
    capped at ``MAX_LOG_STEP`` per component and halved (up to
    ``max_halvings`` times) while the scaled residual would grow. Convergence
    is judged on the max-norm of the unscaled field.
    """
    u = _forcing(spec, forcing)
    x = averaged_fixed_point(spec) if seed is None else np.array(seed, dtype=np.float64)
    if x.shape != (spec.n,) or not np.all(x > 0):
        raise SpecError("Newton seed must be a strictly positive state of length n")

    def scaled(x):
        f = vector_field(spec, x) + u
        return f, f / x

    f, g = scaled(x)
    res = float(np.abs(f).max())
    it = 0
    while res > tol:
        if it >= max_iter:
            raise NonConvergence(f"Newton did not converge in {max_iter} iterations "
                                 f"(residual {res:.3g})", x, res)
        jac = jacobian(spec, x) * (x / x[:, None]) - np.diag(g)
        try:
            step = np.linalg.solve(jac, -g)
        except np.linalg.LinAlgError:
            raise SingularJacobian("singular Jacobian in Newton iteration", x) from None
        if not np.all(np.isfinite(step)) or np.linalg.cond(jac) > 1e14:
            raise SingularJacobian("ill-conditioned Jacobian in Newton iteration", x)
        big = float(np.abs(step).max())
        lam = min(1.0, MAX_LOG_STEP / big) if big > 0 else 1.0
        gnorm = float(np.abs(g).max())
        for _ in range(max_halvings + 1):
            trial = x * np.exp(lam * step)
            f_trial, g_trial = scaled(trial)
            if float(np.abs(g_trial).max()) <= gnorm:
                break
            lam *= 0.5
        if np.array_equal(trial, x):
            raise NonConvergence("Newton stalled", x, res)
        x, f, g = trial, f_trial, g_trial
        res = float(np.abs(f).max())
        it += 1
    return _report(spec, x, "newton", u, True, it)


def brouwer_iterate(spec: SystemSpec, x0=None, eps: float = 0.01, *, forcing=None,
                    tol: float = 1e-12, max_iter: int = 10**6) -> EquilibriumReport:
    """Iterate ``x <- x + eps * f(x)`` until the step max-norm is ``<= tol``.

    Non-convergence is reported through ``converged=False`` rather than raised;
    generator-mode systems typically orbit instead of settling.
    """
    u = _forcing(spec, forcing)
    x = averaged_fixed_point(spec) if x0 is None else np.array(x0, dtype=np.float64)
    if x.shape != (spec.n,) or not np.all(x > 0):
        raise SpecError("initial point must be a strictly positive state of length n")
    if not eps > 0:
        raise ValueError("eps must be positive")
    x, it, ok, _ = kernels.fixed_point_map(
        np.ascontiguousarray(spec.k1), np.ascontiguousarray(spec.k2),
        np.ascontiguousarray(spec.k3), spec.gen_index.astype(np.int64),
        spec.sup_index.astype(np.int64), u, x, float(eps), float(tol), int(max_iter))
    with np.errstate(over="ignore", invalid="ignore"):  # a runaway map leaves inf/nan behind
        return _report(spec, np.asarray(x), "brouwer-iteration", u, bool(ok), int(it))


def solve_fixed_point(spec: SystemSpec, seed=None, *, forcing=None,
                      seed_mode: str = "averaged") -> EquilibriumReport:
    """Best available positive fixed point.

    Closed forms for ``n = 1``, ``n = 2`` and uniform systems, Newton
    otherwise. If Newton fails, continuation from the bounding systems and
    then the ``x + eps*f(x)`` iteration are tried.
    """
    u = _forcing(spec, forcing)
    if not np.any(u):
        if spec.n == 1:
            b = np.array([fixed_point_1d(spec.k1[0], spec.k2[0], spec.k3[0])])
            return _report(spec, b, "analytic-1d", u)
        if spec.n == 2 and spec.gen_offset % 2 == 1 and spec.sup_offset % 2 == 1:
            b = np.array(fixed_point_2d(spec.k1[0], spec.k1[1], spec.k2[0], spec.k2[1],
                                        spec.k3[0], spec.k3[1]))
            return _report(spec, b, "analytic-2d", u)
        if spec.is_uniform:
            return _report(spec, averaged_fixed_point(spec), "averaged-approx", u)
    if seed is None:
        seed = averaged_fixed_point(spec, seed_mode)
    try:
        return newton_fixed_point(spec, seed, forcing=u)
    except EquilibriumError as exc:
        if not np.any(u):
            path = homotopy_path(spec, steps=65, mode="through")
            if path.failed_at is None:
                mid = path[len(path) // 2].b
                try:
                    rep = newton_fixed_point(spec, mid)
                except EquilibriumError:
                    pass
                else:
                    rep.method = "homotopy"
                    return rep
        start = getattr(exc, "x", None)
        if start is None or not np.all(start > 0):
            start = seed
        rep = brouwer_iterate(spec, start, forcing=u)
        # the origin is a root too but not a positive-domain answer
        if not rep.converged or np.any(rep.b <= POSITIVE_FLOOR):
            raise NonConvergence(f"no fixed point found: {exc}", rep.b, rep.residual) from exc
        return rep


def _interp(spec, s1, s2, s3):
    k1 = (1 - s1) * spec.k1.max() + s1 * spec.k1.min()
    k2 = (1 - s2) * spec.k2.min() + s2 * spec.k2.max()
    k3 = (1 - s3) * spec.k3.min() + s3 * spec.k3.max()
    n = spec.n
    return spec.replace(k1=np.broadcast_to(k1, (n,)).copy(), k2=np.broadcast_to(k2, (n,)).copy(),
                        k3=np.broadcast_to(k3, (n,)).copy())


def actual_coordinates(spec: SystemSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Interpolation coordinates at which the homotopy family equals ``spec``."""
    def coord(lo_end, hi_end, k):
        span = hi_end - lo_end
        return np.where(span == 0, 0.0, (k - lo_end) / np.where(span == 0, 1.0, span))
    return (coord(spec.k1.max(), spec.k1.min(), spec.k1),
            coord(spec.k2.min(), spec.k2.max(), spec.k2),
            coord(spec.k3.min(), spec.k3.max(), spec.k3))


def _schedule(spec, steps, mode):
    n = spec.n
    ones = np.ones(n)
    taus = np.linspace(0.0, 1.0, steps)
    if mode == "joint":
        return [(t * ones, t * ones, t * ones) for t in taus]
    if mode == "sequential":
        out = []
        for t in np.linspace(0.0, 3.0, steps):
            out.append((min(t, 1.0) * ones, float(np.clip(t - 1, 0, 1)) * ones,
                        float(np.clip(t - 2, 0, 1)) * ones))
        return out
    if mode == "through":
        # 0 -> coordinates of the actual system -> 1
        c = actual_coordinates(spec)
        out = []
        for t in taus:
            if t <= 0.5:
                out.append(tuple(2 * t * ci for ci in c))
            else:
                out.append(tuple(ci + (2 * t - 1) * (1 - ci) for ci in c))
        return out
    raise ValueError(f"unknown homotopy mode {mode!r}")


def homotopy_path(spec: SystemSpec, steps: int = 64, mode: str = "joint") -> HomotopyPath:
    """Continue the fixed point from the max-bounding to the min-bounding system.

    Each point is Newton-solved from the previous solution. ``mode`` selects
    how the coordinates move: ``joint`` (all together), ``sequential`` (k1,
    then k2, then k3) or ``through`` (piecewise linear via the coordinates of
    ``spec`` itself, so the path visits the actual system at its midpoint).
    """
    if steps < 2:
        raise ValueError("homotopy needs at least 2 steps")
    points = []
    seed = None
    for s1, s2, s3 in _schedule(spec, steps, mode):
        sub = _interp(spec, s1, s2, s3)
        try:
            rep = newton_fixed_point(sub, seed)
        except EquilibriumError:
            return HomotopyPath(points, failed_at=len(points))
        points.append(HomotopyPoint(np.asarray(s1, float), np.asarray(s2, float),
                                    np.asarray(s3, float), rep.b, sub))
        seed = rep.b
    return HomotopyPath(points)


def equilibrium_eigenvalues(spec: SystemSpec, b) -> np.ndarray:
    """Jacobian eigenvalues at ``b`` (diagnostic aid only)."""
    return np.linalg.eigvals(jacobian(spec, b))
