"""System definition and vector field of the cyclic symmetric ODE family.

Element ``i`` (0-based here, wrapped modulo ``n``) evolves as::

    dE_i/dt = k1[i] * E[i + gen_offset] - k2[i] * E[i] - k3[i] * E[i] * E[i + sup_offset]

The first term is the generative loop, the second self-decay, the third the
suppressive loop. For ``n = 5`` with offsets ``(-1, -2)`` and the ordering
``(J, S, M, H, T)`` this is the classical five-element system.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

ELEMENT_NAMES_5 = ("J", "S", "M", "H", "T")


class SpecError(ValueError):
    """Rejected system definition or input of the wrong shape."""


class ParameterWarning(UserWarning):
    pass


def _as_vector(values, n, name):
    arr = np.array(values, dtype=np.float64).reshape(-1)
    if arr.size == 1 and n > 1:
        arr = np.full(n, arr[0])
    if arr.shape != (n,):
        raise SpecError(f"{name} must have {n} entries, got {arr.size}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SystemSpec:
    """Element count, loop offsets and the three rate vectors.

    Scalars passed for ``k1``/``k2``/``k3`` are broadcast to uniform vectors.
    Construction only checks shapes; use :func:`validate` for the parameter
    conditions.
    """

    n: int
    k1: np.ndarray
    k2: np.ndarray
    k3: np.ndarray
    gen_offset: int = -1
    sup_offset: int = -2

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise SpecError(f"element count must be an integer >= 1, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        for name in ("k1", "k2", "k3"):
            object.__setattr__(self, name, _as_vector(getattr(self, name), self.n, name))
        object.__setattr__(self, "gen_offset", int(self.gen_offset))
        object.__setattr__(self, "sup_offset", int(self.sup_offset))

    @classmethod
    def uniform(cls, n, k1, k2, k3, gen_offset=-1, sup_offset=-2):
        return cls(n, np.full(n, float(k1)), np.full(n, float(k2)), np.full(n, float(k3)),
                   gen_offset, sup_offset)

    @property
    def gen_index(self) -> np.ndarray:
        """``gen_index[i]`` is the element feeding element ``i`` generatively."""
        return (np.arange(self.n) + self.gen_offset) % self.n

    @property
    def sup_index(self) -> np.ndarray:
        """``sup_index[i]`` is the element suppressing element ``i``."""
        return (np.arange(self.n) + self.sup_offset) % self.n

    @property
    def is_uniform(self) -> bool:
        return all(np.all(k == k[0]) for k in (self.k1, self.k2, self.k3))

    def replace(self, **changes) -> "SystemSpec":
        fields_ = dict(n=self.n, k1=self.k1, k2=self.k2, k3=self.k3,
                       gen_offset=self.gen_offset, sup_offset=self.sup_offset)
        fields_.update(changes)
        return SystemSpec(**fields_)

    def __eq__(self, other):
        if not isinstance(other, SystemSpec):
            return NotImplemented
        return (self.n == other.n and self.gen_offset == other.gen_offset
                and self.sup_offset == other.sup_offset
                and all(np.array_equal(getattr(self, k), getattr(other, k))
                        for k in ("k1", "k2", "k3")))

    __hash__ = None

    def to_dict(self) -> dict:
        return {"n": self.n, "gen_offset": self.gen_offset, "sup_offset": self.sup_offset,
                "k1": self.k1.tolist(), "k2": self.k2.tolist(), "k3": self.k3.tolist()}


@dataclass(frozen=True)
class FieldDecomposition:
    """Split of the field at ``b + d`` into equilibrium, linear and quadratic parts."""

    f_of_b: np.ndarray
    l_of_d: np.ndarray
    q_of_d: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.f_of_b + self.l_of_d + self.q_of_d


@dataclass
class ValidationReport:
    errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def __bool__(self):
        return self.ok

    def raise_for_errors(self):
        if self.errors:
            raise SpecError("; ".join(self.errors))


def validate(spec: SystemSpec) -> ValidationReport:
    """Check the parameter conditions; an empty ``errors`` list means usable.

    The positive-fixed-point condition is checked on the means of ``k1`` and
    ``k2``. Elementwise violations under a passing mean are warnings only.
    For ``n = 1`` both offsets reduce to 0 (logistic form). For ``n = 2`` the
    two loops necessarily share a neighbour, so only nonzero offsets are
    required there.
    """
    report = ValidationReport()
    for name in ("k1", "k2", "k3"):
        vec = getattr(spec, name)
        if not np.all(np.isfinite(vec)):
            report.errors.append(f"{name} has non-finite entries")
        elif np.any(vec <= 0):
            bad = [i + 1 for i in np.flatnonzero(vec <= 0)]
            report.errors.append(f"positivity of parameters violated: {name} not > 0 at elements {bad}")
    if spec.k1.mean() <= spec.k2.mean():
        report.errors.append(
            f"positive-fixed-point condition violated: mean(k1)={spec.k1.mean():.6g} "
            f"<= mean(k2)={spec.k2.mean():.6g}")
    elif np.any(spec.k1 <= spec.k2):
        bad = [i + 1 for i in np.flatnonzero(spec.k1 <= spec.k2)]
        report.warnings.append(f"k1 <= k2 at elements {bad} (mean condition still holds)")
    n = spec.n
    g, s = spec.gen_offset % n, spec.sup_offset % n
    if n >= 2:
        if g == 0:
            report.errors.append(f"gen_offset {spec.gen_offset} is 0 modulo n={n}")
        if s == 0:
            report.errors.append(f"sup_offset {spec.sup_offset} is 0 modulo n={n}")
    if n >= 3 and g == s and g != 0:
        report.errors.append(
            f"gen_offset {spec.gen_offset} and sup_offset {spec.sup_offset} coincide modulo n={n}")
    return report


def checked(spec: SystemSpec) -> SystemSpec:
    """Return ``spec`` after validation, raising on errors and warning on soft issues."""
    report = validate(spec)
    report.raise_for_errors()
    for msg in report.warnings:
        warnings.warn(msg, ParameterWarning, stacklevel=2)
    return spec


def _state(spec, state, name="state"):
    x = np.asarray(state, dtype=np.float64)
    if x.shape != (spec.n,):
        raise SpecError(f"{name} must have shape ({spec.n},), got {x.shape}")
    return x


def vector_field(spec: SystemSpec, state) -> np.ndarray:
    x = _state(spec, state)
    return spec.k1 * x[spec.gen_index] - spec.k2 * x - spec.k3 * x * x[spec.sup_index]


def jacobian(spec: SystemSpec, state) -> np.ndarray:
    """Analytic Jacobian of :func:`vector_field` (constant inputs do not contribute)."""
    x = _state(spec, state)
    n = spec.n
    rows = np.arange(n)
    g, s = spec.gen_index, spec.sup_index
    jac = np.zeros((n, n))
    np.add.at(jac, (rows, g), spec.k1)
    np.add.at(jac, (rows, rows), -spec.k2 - spec.k3 * x[s])
    np.add.at(jac, (rows, s), -spec.k3 * x)
    return jac


def decompose_field(spec: SystemSpec, b, state) -> FieldDecomposition:
    """Split the field at ``state`` around the reference point ``b``.

    With ``d = state - b``: ``f_of_b`` is the field at ``b``, ``l_of_d`` collects
    the terms linear in ``d`` and ``q_of_d = -k3 * d[i] * d[i + sup_offset]``.
    """
    b = _state(spec, b, "b")
    d = _state(spec, state) - b
    g, s = spec.gen_index, spec.sup_index
    f_of_b = vector_field(spec, b)
    l_of_d = spec.k1 * d[g] - spec.k2 * d - spec.k3 * d * b[s] - spec.k3 * b * d[s]
    q_of_d = -spec.k3 * d * d[s]
    return FieldDecomposition(f_of_b, l_of_d, q_of_d)


def element_labels(n: int) -> list[str]:
    if n == 5:
        return list(ELEMENT_NAMES_5)
    return [f"E{i + 1}" for i in range(n)]
