"""Spin spaces, base measures, cavity fields and population pools.

Fields are always stored as log-densities relative to the base measure:
at finite ``beta`` a field ``X`` satisfies ``sum_t exp(beta X(t)) nu(t) = 1``;
at infinite ``beta`` it satisfies ``max_t X(t) = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import ArgumentError, InvalidFieldError

NORM_TOL = 1e-10


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SpinSpace:
    """Ordered finite set of spin values in ``[-R, R]``.

    ``kind`` is ``"discrete"`` or ``"grid"``; a grid discretizes an interval
    with uniform spacing. ``periodic`` grids represent the circle ``[0, 1)``.
    """

    points: np.ndarray
    kind: str = "discrete"
    interval: tuple[float, float] | None = None
    periodic: bool = False

    def __post_init__(self):
        pts = _frozen(self.points)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 1 or pts.size < 1:
            raise ArgumentError("spin space needs a nonempty 1-d point list")
        if np.any(np.diff(pts) <= 0):
            raise ArgumentError("spin points must be strictly increasing")
        if self.kind not in ("discrete", "grid"):
            raise ArgumentError(f"unknown spin space kind {self.kind!r}")
        if self.kind == "grid":
            if pts.size < 2:
                raise ArgumentError("grid spin space needs >= 2 points")
            gaps = np.diff(pts)
            if not np.allclose(gaps, gaps[0], rtol=1e-9, atol=0):
                raise ArgumentError("grid spacing must be uniform")

    @property
    def size(self) -> int:
        return int(self.points.size)

    @property
    def radius(self) -> float:
        return float(np.max(np.abs(self.points)))

    @property
    def is_ising(self) -> bool:
        return self.kind == "discrete" and self.size == 2 and np.array_equal(
            self.points, [-1.0, 1.0]
        )

    def index_of(self, value: float) -> int:
        hits = np.flatnonzero(np.isclose(self.points, value, rtol=0, atol=1e-12))
        if hits.size != 1:
            raise ArgumentError(f"{value!r} is not a point of the spin space")
        return int(hits[0])

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "points": [float(x) for x in self.points],
            "interval": list(self.interval) if self.interval else None,
            "periodic": self.periodic,
        }

    def same_as(self, other: "SpinSpace") -> bool:
        return (
            self.kind == other.kind
            and self.periodic == other.periodic
            and self.points.shape == other.points.shape
            and np.array_equal(self.points, other.points)
        )


def ising_space() -> SpinSpace:
    return SpinSpace(np.array([-1.0, 1.0]))


def potts_space(q: int) -> SpinSpace:
    if q < 2:
        raise ArgumentError("Potts model needs q >= 2")
    return SpinSpace(np.arange(1, q + 1, dtype=float))


def interval_grid(n: int = 64, a: float = 0.0, b: float = 1.0) -> SpinSpace:
    """Uniform grid on ``[a, b]`` including both endpoints."""
    return SpinSpace(np.linspace(a, b, n), kind="grid", interval=(a, b))


def circle_grid(n: int = 64) -> SpinSpace:
    """Uniform periodic grid ``k/n`` on the circle parameterized by ``[0, 1)``."""
    return SpinSpace(np.arange(n) / n, kind="grid", interval=(0.0, 1.0), periodic=True)


def quadrature_weights(space: SpinSpace) -> np.ndarray:
    """Trapezoid weights on the grid (periodic trapezoid on the circle)."""
    n = space.size
    if space.kind != "grid":
        return np.ones(n)
    a, b = space.interval
    if space.periodic:
        return np.full(n, (b - a) / n)
    h = (b - a) / (n - 1)
    w = np.full(n, h)
    w[0] = w[-1] = h / 2
    return w


@dataclass(frozen=True, eq=False)
class Measure:
    """Probability weights on the points of a spin space."""

    space: SpinSpace
    weights: np.ndarray

    def __post_init__(self):
        w = _frozen(self.weights)
        object.__setattr__(self, "weights", w)
        if w.shape != (self.space.size,):
            raise ArgumentError("measure weights must match the spin points")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ArgumentError("measure weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ArgumentError(f"measure weights sum to {w.sum()!r}, not 1")

    @property
    def log_weights(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.weights)

    @classmethod
    def uniform(cls, space: SpinSpace) -> "Measure":
        return cls.from_density(space, np.ones(space.size))

    @classmethod
    def from_density(cls, space: SpinSpace, density) -> "Measure":
        """Quadrature weight times density, renormalized."""
        w = quadrature_weights(space) * np.asarray(density, dtype=float)
        return cls(space, w / w.sum())

    @classmethod
    def fugacity(cls, space: SpinSpace, eta: float) -> "Measure":
        """Weights proportional to ``eta**t`` with trapezoid quadrature."""
        if eta <= 0:
            raise ArgumentError("fugacity must be positive")
        return cls.from_density(space, np.power(float(eta), space.points))


@dataclass(frozen=True, eq=False)
class CavityField:
    values: np.ndarray
    beta: float

    def __post_init__(self):
        v = _frozen(self.values)
        object.__setattr__(self, "values", v)
        if not np.all(np.isfinite(v)):
            raise InvalidFieldError("cavity field has non-finite values")

    @property
    def is_zero_temp(self) -> bool:
        return math.isinf(self.beta)

    def marginal(self, nu: Measure) -> np.ndarray:
        """Spin distribution ``exp(beta X) nu`` (finite beta only)."""
        if self.is_zero_temp:
            raise ArgumentError("zero-temperature fields carry no marginal")
        return np.exp(self.beta * self.values) * nu.weights

    def check(self, nu: Measure | None = None) -> None:
        if self.is_zero_temp:
            if self.values.max() != 0.0:
                raise InvalidFieldError("zero-temperature field must have max 0")
        elif nu is not None:
            total = float(np.sum(np.exp(self.beta * self.values) * nu.weights))
            if abs(total - 1.0) > NORM_TOL:
                raise InvalidFieldError(f"field normalization is {total!r}")


def _finite(raw) -> np.ndarray:
    raw = np.asarray(raw, dtype=float)
    if not np.all(np.isfinite(raw)):
        raise InvalidFieldError("field values must be finite")
    return raw


def normalize_rows_finite(raw: np.ndarray, beta: float, log_nu: np.ndarray) -> np.ndarray:
    """Row-wise ``g - log(sum exp(beta g) nu) / beta`` for a field matrix."""
    lz = logsumexp(beta * raw + log_nu, axis=-1, keepdims=True)
    return raw - lz / beta


def normalize_rows_zero_temp(raw: np.ndarray) -> np.ndarray:
    return raw - raw.max(axis=-1, keepdims=True)


def normalize_finite_beta(raw, beta: float, nu: Measure) -> CavityField:
    raw = _finite(raw)
    if not beta > 0 or math.isinf(beta):
        raise ArgumentError("finite normalization needs 0 < beta < inf")
    return CavityField(normalize_rows_finite(raw, beta, nu.log_weights), beta)


def normalize_zero_temp(raw) -> CavityField:
    raw = _finite(raw)
    return CavityField(normalize_rows_zero_temp(raw), math.inf)


def w1_scalar(a, b) -> float:
    """Wasserstein-1 distance between two equal-size empirical samples."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size != b.size or a.size == 0:
        raise ArgumentError("w1_scalar needs two nonempty samples of equal size")
    return float(np.mean(np.abs(a - b)))


def w1_quantile(a, b) -> float:
    """Exact W1 between empirical samples of any sizes, ``int |F_a - F_b| dx``."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ArgumentError("w1_quantile needs two nonempty samples")
    if a.size == b.size:
        return float(np.mean(np.abs(a - b)))
    xs = np.concatenate([a, b])
    xs.sort()
    Fa = np.searchsorted(a, xs[:-1], side="right") / a.size
    Fb = np.searchsorted(b, xs[:-1], side="right") / b.size
    return float(np.sum(np.abs(Fa - Fb) * np.diff(xs)))


@dataclass(frozen=True, eq=False)
class Population:
    """A pool of M cavity fields (one per row) approximating a field law."""

    space: SpinSpace
    beta: float
    values: np.ndarray
    seed: int = 0
    iteration: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = _frozen(self.values)
        object.__setattr__(self, "values", v)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] != self.space.size:
            raise ArgumentError("population values must be an (M, |Sigma|) matrix")
        if not np.all(np.isfinite(v)):
            raise InvalidFieldError("population contains non-finite fields")

    @property
    def size(self) -> int:
        return int(self.values.shape[0])

    @property
    def is_zero_temp(self) -> bool:
        return math.isinf(self.beta)

    def member(self, j: int) -> CavityField:
        return CavityField(self.values[j], self.beta)

    def fields(self) -> list[CavityField]:
        return [self.member(j) for j in range(self.size)]

    def check(self, nu: Measure | None = None, tol: float = NORM_TOL) -> None:
        if self.is_zero_temp:
            if np.any(self.values.max(axis=1) != 0.0):
                raise InvalidFieldError("zero-temperature member with max != 0")
        elif nu is not None:
            totals = np.exp(self.beta * self.values) @ nu.weights
            if np.max(np.abs(totals - 1.0)) > tol:
                raise InvalidFieldError("population member violates normalization")

    @classmethod
    def from_fields(cls, fields, seed: int = 0, iteration: int = 0, space=None):
        fields = list(fields)
        if not fields:
            raise ArgumentError("population needs at least one field")
        betas = {f.beta for f in fields}
        if len(betas) != 1:
            raise ArgumentError("population members must share a temperature")
        if space is None:
            raise ArgumentError("population needs its spin space")
        return cls(space, betas.pop(), np.stack([f.values for f in fields]), seed, iteration)


def default_probe_indices(space: SpinSpace) -> np.ndarray:
    n = space.size
    if n <= 8:
        return np.arange(n)
    return np.unique(np.round(np.linspace(0, n - 1, 8)).astype(int))


def population_distance(p1: Population, p2: Population, probe_points=None) -> float:
    """Max over probe points of the W1 distance between field-value samples.

    ``probe_points`` are indices into the spin grid; defaults to every point
    for at most 8 points, else 8 evenly spaced ones.
    """
    if not p1.space.same_as(p2.space):
        raise ArgumentError("populations live on different spin spaces")
    if p1.beta != p2.beta:
        raise ArgumentError("populations have different temperatures")
    if probe_points is None:
        probe_points = default_probe_indices(p1.space)
    probe = np.asarray(probe_points, dtype=int)
    a = np.sort(p1.values[:, probe], axis=0)
    b = np.sort(p2.values[:, probe], axis=0)
    if a.shape != b.shape:
        return max(
            w1_quantile(p1.values[:, i], p2.values[:, i]) for i in probe
        )
    return float(np.max(np.mean(np.abs(a - b), axis=0)))
