"""Catalog of diluted models: disorder laws, constraint families, model specs.

A constraint family knows how to draw its disorder parameters, how to
evaluate a realization pointwise, and how to tabulate realizations on a
spin grid. Tabulated constraints are stored with the cavity coordinate on
the last axis, matching ``theta(sigma_1, ..., sigma_{p-1}, t)``.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .errors import ArgumentError, ConfigError, UnsupportedError
from .spin import (
    Measure,
    SpinSpace,
    circle_grid,
    interval_grid,
    ising_space,
    potts_space,
)

MAX_BANK = 256


# --------------------------------------------------------------------------
# scalar disorder laws


@dataclass(frozen=True)
class ScalarLaw:
    """Law of a scalar coupling: constant, rademacher, finite or gaussian.

    Gaussian laws are truncated to ``[-bound, bound]`` so sup-norms stay
    bounded.
    """

    kind: str
    values: tuple = ()
    probs: tuple = ()
    mu: float = 0.0
    sigma: float = 1.0
    bound: float = 3.0

    def __post_init__(self):
        if self.kind not in ("constant", "rademacher", "finite", "gaussian"):
            raise ConfigError(f"unknown disorder law {self.kind!r}")
        if self.kind != "gaussian":
            if not self.values or len(self.values) != len(self.probs):
                raise ConfigError("finite law needs matching values and probs")
            if abs(sum(self.probs) - 1.0) > 1e-12 or min(self.probs) < 0:
                raise ConfigError("finite law probabilities must sum to 1")

    @classmethod
    def constant(cls, v: float) -> "ScalarLaw":
        return cls("constant", (float(v),), (1.0,))

    @classmethod
    def rademacher(cls, scale: float = 1.0) -> "ScalarLaw":
        return cls("rademacher", (-float(scale), float(scale)), (0.5, 0.5))

    @classmethod
    def finite(cls, values, probs=None) -> "ScalarLaw":
        values = tuple(float(v) for v in values)
        if probs is None:
            probs = (1.0 / len(values),) * len(values)
        return cls("finite", values, tuple(float(p) for p in probs))

    @classmethod
    def gaussian(cls, mu=0.0, sigma=1.0, bound=3.0) -> "ScalarLaw":
        return cls("gaussian", mu=float(mu), sigma=float(sigma), bound=float(bound))

    @classmethod
    def from_config(cls, doc) -> "ScalarLaw":
        if isinstance(doc, (int, float)):
            return cls.constant(doc)
        if not isinstance(doc, dict) or "law" not in doc:
            raise ConfigError("disorder law must be a number or {'law': ...}")
        doc = dict(doc)
        kind = doc.pop("law")
        try:
            if kind == "constant":
                return cls.constant(doc.pop("value"))
            if kind == "rademacher":
                return cls.rademacher(doc.pop("scale", 1.0))
            if kind == "finite":
                return cls.finite(doc.pop("values"), doc.pop("probs", None))
            if kind == "gaussian":
                return cls.gaussian(doc.pop("mu", 0.0), doc.pop("sigma", 1.0),
                                    doc.pop("bound", 3.0))
        except KeyError as exc:
            raise ConfigError(f"disorder law {kind!r} missing key {exc}") from None
        finally:
            if doc:
                raise ConfigError(f"unknown disorder law key(s) {sorted(doc)}")
        raise ConfigError(f"unknown disorder law {kind!r}")

    def describe(self) -> dict:
        if self.kind == "gaussian":
            return {"law": "gaussian", "mu": self.mu, "sigma": self.sigma, "bound": self.bound}
        return {"law": self.kind, "values": list(self.values), "probs": list(self.probs)}

    @property
    def is_finite(self) -> bool:
        return self.kind != "gaussian"

    @property
    def is_symmetric(self) -> bool:
        if self.kind == "gaussian":
            return self.mu == 0.0
        atoms = dict(zip(self.values, self.probs))
        return all(abs(atoms.get(-v, 0.0) - p) < 1e-15 for v, p in atoms.items())

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == "gaussian":
            lo = (-self.bound - self.mu) / self.sigma
            hi = (self.bound - self.mu) / self.sigma
            return stats.truncnorm.rvs(lo, hi, loc=self.mu, scale=self.sigma,
                                       size=size, random_state=rng)
        idx = rng.choice(len(self.values), size=size, p=self.probs)
        return np.asarray(self.values)[idx]

    def expect(self, fn, n_mc: int = 200_000, seed: int = 0) -> float:
        """Exact for finite laws; Monte Carlo otherwise."""
        if self.is_finite:
            return float(sum(p * fn(v) for v, p in zip(self.values, self.probs)))
        x = self.sample(np.random.default_rng(seed), n_mc)
        return float(np.mean(fn(x)))


# --------------------------------------------------------------------------
# constraint families


def _grid_args(space: SpinSpace, p: int) -> list[np.ndarray]:
    return np.meshgrid(*([space.points] * p), indexing="ij")


class ThetaFamily:
    """Base class of constraint families.

    Subclasses set ``name``, ``p`` and implement ``draw_params`` (an
    ``(n, k)`` parameter matrix) and ``evaluate`` (pointwise values, with
    spin coordinates broadcast against the parameter vector).
    """

    name = "base"
    symmetric: bool | None = None
    indicator = False
    has_franz_leone = False
    lipschitz: float | None = None

    def __init__(self, p: int):
        if p < 2:
            raise ConfigError("constraint arity p must be >= 2")
        self.p = int(p)
        self._banks: dict = {}

    # -- disorder ---------------------------------------------------------
    def n_params(self) -> int:
        return 0

    def draw_params(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.zeros((n, 0))

    def support(self):
        """``(params (U, k), probs (U,))`` for finite disorder laws, else None."""
        return np.zeros((1, 0)), np.ones(1)

    # -- evaluation -------------------------------------------------------
    def evaluate(self, params: np.ndarray, sigma: list[np.ndarray]) -> np.ndarray:
        raise NotImplementedError

    def check_space(self, space: SpinSpace) -> None:
        pass

    def tables(self, params: np.ndarray, space: SpinSpace) -> np.ndarray:
        """Tabulate realizations: shape ``(n,) + (|Sigma|,) * p``."""
        self.check_space(space)
        params = np.atleast_2d(np.asarray(params, dtype=float))
        grids = _grid_args(space, self.p)
        n = params.shape[0]
        shape = (n,) + (space.size,) * self.p
        out = np.empty(shape)
        chunk = max(1, 2_000_000 // max(1, space.size ** self.p))
        for lo in range(0, n, chunk):
            par = params[lo:lo + chunk]
            expand = par.reshape((par.shape[0],) + (1,) * self.p + (par.shape[1],))
            out[lo:lo + chunk] = self.evaluate(
                expand, [g[None, ...] for g in grids]
            )
        return out

    def _bank_key(self, space: SpinSpace):
        return (space.points.tobytes(), space.kind, space.periodic)

    def sample_batch(self, rng: np.random.Generator, n: int, space: SpinSpace):
        """Draw ``n`` realizations as ``(bank, index)`` with ``bank[index]``
        the tables; finite laws share one precomputed bank."""
        sup = self.support()
        if sup is not None and len(sup[1]) <= MAX_BANK:
            key = self._bank_key(space)
            bank = self._banks.get(key)
            if bank is None:
                bank = self.tables(sup[0], space)
                bank.setflags(write=False)
                self._banks[key] = bank
            if len(sup[1]) == 1:
                rng.random(n)
                return bank, np.zeros(n, dtype=np.int64)
            cdf = np.cumsum(sup[1])
            cdf[-1] = 1.0
            idx = np.searchsorted(cdf, rng.random(n), side="right")
            return bank, np.minimum(idx, len(cdf) - 1)
        params = self.draw_params(rng, n)
        return self.tables(params, space), np.arange(n)

    def sample_params_for_bank(self, idx: np.ndarray) -> np.ndarray:
        sup = self.support()
        return sup[0][idx]

    def describe(self) -> dict:
        return {"family": self.name, "p": self.p}

    def franz_leone(self, beta: float, params: np.ndarray):
        """Batched ``(a, b, xi, zeta)`` with f_i(x) = xi_i + zeta_i x."""
        raise UnsupportedError(f"{self.name} has no Franz-Leone decomposition")


def _clause_support(p: int, law) -> tuple[np.ndarray, np.ndarray]:
    """Clause vectors in lexicographic order over ``{-1, 1}^p`` with probabilities.

    ``law`` is None / "uniform", or a list of ``2**p`` probabilities in that order.
    """
    vecs = np.array(list(itertools.product([-1.0, 1.0], repeat=p)))
    if law is None or law == "uniform":
        return vecs, np.full(len(vecs), 1.0 / len(vecs))
    probs = np.asarray(law, dtype=float)
    if probs.shape != (len(vecs),) or np.any(probs < 0) or abs(probs.sum() - 1) > 1e-12:
        raise ConfigError(f"clause law needs {len(vecs)} probabilities summing to 1")
    return vecs, probs


class _IsingFamily(ThetaFamily):
    def check_space(self, space):
        if not space.is_ising:
            raise UnsupportedError(f"{self.name} needs Ising spins {{-1, 1}}")


class PSpin(_IsingFamily):
    """``theta = J x_1 ... x_p``; symmetric when p is even."""

    name = "pspin"
    has_franz_leone = True

    def __init__(self, p: int, J: ScalarLaw = ScalarLaw.constant(1.0)):
        super().__init__(p)
        self.J = J
        self.symmetric = p % 2 == 0

    def n_params(self):
        return 1

    def draw_params(self, rng, n):
        return self.J.sample(rng, n).reshape(n, 1)

    def support(self):
        if not self.J.is_finite:
            return None
        return np.array(self.J.values).reshape(-1, 1), np.array(self.J.probs)

    def evaluate(self, params, sigma):
        return params[..., 0] * np.prod(np.stack(np.broadcast_arrays(*sigma)), axis=0)

    def tables(self, params, space):
        self.check_space(space)
        params = np.atleast_2d(np.asarray(params, dtype=float))
        base = np.prod(np.stack(_grid_args(space, self.p)), axis=0)
        return params[:, 0].reshape((-1,) + (1,) * self.p) * base[None]

    def franz_leone(self, beta, params):
        J = np.asarray(params, dtype=float)[:, 0]
        n = J.size
        return (np.cosh(beta * J), np.tanh(beta * J),
                np.zeros((n, self.p)), np.ones((n, self.p)))

    def describe(self):
        return {"family": self.name, "p": self.p, "J": self.J.describe()}


class KSat(_IsingFamily):
    """``theta(x) = -1`` iff ``x`` equals the clause vector ``J``."""

    name = "ksat"
    indicator = True
    has_franz_leone = True
    symmetric = False

    def __init__(self, p: int, clause_law=None):
        super().__init__(p)
        self.clause_law = clause_law
        self._support = _clause_support(p, clause_law)

    def n_params(self):
        return self.p

    def support(self):
        return self._support

    def draw_params(self, rng, n):
        vecs, probs = self._support
        return vecs[rng.choice(len(vecs), size=n, p=probs)]

    def evaluate(self, params, sigma):
        hit = np.ones(np.broadcast(params[..., 0], *sigma).shape, dtype=bool)
        for i, s in enumerate(sigma):
            hit &= s == params[..., i]
        return np.where(hit, -1.0, 0.0)

    def tables(self, params, space):
        self.check_space(space)
        params = np.atleast_2d(np.asarray(params, dtype=float))
        n = params.shape[0]
        out = np.zeros((n,) + (2,) * self.p)
        idx = ((params + 1) // 2).astype(int)
        out[(np.arange(n),) + tuple(idx.T)] = -1.0
        return out

    def franz_leone(self, beta, params):
        J = np.asarray(params, dtype=float)
        n = J.shape[0]
        b = (math.exp(-beta) - 1.0) * 2.0 ** (-self.p)
        return np.ones(n), np.full(n, b), np.ones((n, self.p)), J

    def describe(self):
        law = "uniform" if self.clause_law is None else list(map(float, self.clause_law))
        return {"family": self.name, "p": self.p, "clause_law": law}


class NaeKSat(KSat):
    """``theta(x) = -1`` iff ``x = J`` or ``x = -J``."""

    name = "nae_ksat"
    symmetric = True
    has_franz_leone = False

    def evaluate(self, params, sigma):
        return np.minimum(super().evaluate(params, sigma),
                          super().evaluate(-params, sigma))

    def tables(self, params, space):
        params = np.atleast_2d(np.asarray(params, dtype=float))
        return np.minimum(KSat.tables(self, params, space),
                          KSat.tables(self, -params, space))

    def franz_leone(self, beta, params):
        return ThetaFamily.franz_leone(self, beta, params)


class Perceptron(_IsingFamily):
    """``theta = 1_A - 1`` with A a random half-space or slab.

    ``symmetric=True`` uses ``|<g, x>| <= kappa`` (``variant="le"``) or
    ``|<g, x>| >= kappa`` (``variant="ge"``); otherwise ``<g, x> <= kappa``.
    """

    indicator = True

    def __init__(self, p: int, g: ScalarLaw, kappa: float,
                 symmetric: bool = True, variant: str = "le"):
        super().__init__(p)
        if variant not in ("le", "ge"):
            raise ConfigError("perceptron variant must be 'le' or 'ge'")
        self.g, self.kappa, self.variant = g, float(kappa), variant
        self.symmetric = bool(symmetric)
        self.name = "perceptron_sym" if symmetric else "perceptron_asym"

    def n_params(self):
        return self.p

    def draw_params(self, rng, n):
        return self.g.sample(rng, (n, self.p)).reshape(n, self.p)

    def support(self):
        if not self.g.is_finite or len(self.g.values) ** self.p > MAX_BANK:
            return None
        vals = np.array(list(itertools.product(self.g.values, repeat=self.p)))
        probs = np.array([math.prod(pr) for pr in
                          itertools.product(self.g.probs, repeat=self.p)])
        return vals, probs

    def evaluate(self, params, sigma):
        dot = sum(params[..., i] * s for i, s in enumerate(sigma))
        if self.symmetric:
            inside = np.abs(dot) <= self.kappa if self.variant == "le" \
                else np.abs(dot) >= self.kappa
        else:
            inside = dot <= self.kappa
        return inside.astype(float) - 1.0

    def describe(self):
        return {"family": self.name, "p": self.p, "g": self.g.describe(),
                "kappa": self.kappa, "variant": self.variant}


class Potts(ThetaFamily):
    """``theta = J 1{all coordinates equal}`` on spins ``{1, ..., q}``."""

    name = "potts"
    symmetric = None

    def __init__(self, q: int, J: ScalarLaw = ScalarLaw.constant(1.0), p: int = 2):
        super().__init__(p)
        self.q, self.J = int(q), J

    def check_space(self, space):
        if space.kind != "discrete" or not np.array_equal(
                space.points, np.arange(1, self.q + 1)):
            raise UnsupportedError("Potts family needs spins {1, ..., q}")

    def n_params(self):
        return 1

    def draw_params(self, rng, n):
        return self.J.sample(rng, n).reshape(n, 1)

    def support(self):
        if not self.J.is_finite:
            return None
        return np.array(self.J.values).reshape(-1, 1), np.array(self.J.probs)

    def evaluate(self, params, sigma):
        eq = np.ones(np.broadcast(*sigma).shape, dtype=bool)
        for s in sigma[1:]:
            eq = eq & (s == sigma[0])
        return params[..., 0] * eq

    def describe(self):
        return {"family": self.name, "p": self.p, "q": self.q, "J": self.J.describe()}


class XY(ThetaFamily):
    """``theta = J cos(2 pi (rho - t))`` for angles on the circle ``[0, 1)``."""

    name = "xy"
    symmetric = None

    def __init__(self, J: ScalarLaw = ScalarLaw.constant(1.0)):
        super().__init__(2)
        self.J = J

    def check_space(self, space):
        if space.interval != (0.0, 1.0):
            raise UnsupportedError("XY family needs angles on [0, 1]")

    def n_params(self):
        return 1

    def draw_params(self, rng, n):
        return self.J.sample(rng, n).reshape(n, 1)

    def support(self):
        if not self.J.is_finite:
            return None
        return np.array(self.J.values).reshape(-1, 1), np.array(self.J.probs)

    def evaluate(self, params, sigma):
        return params[..., 0] * np.cos(2 * np.pi * (sigma[0] - sigma[1]))

    def lipschitz_of(self, J: float) -> float:
        # gradient is 2 pi J sin(.) (1, -1), of norm up to 2 sqrt(2) pi |J|
        return 2.0 * math.sqrt(2.0) * math.pi * abs(J)

    def describe(self):
        return {"family": self.name, "p": 2, "J": self.J.describe()}


class HardcoreSoft(ThetaFamily):
    """Soft hardcore penalty ``-(s1 + s2 - 1) 1{s1 + s2 >= 1}`` on ``[0, 1]``."""

    name = "hardcore_soft"
    symmetric = None
    lipschitz = math.sqrt(2.0)

    def __init__(self):
        super().__init__(2)

    def check_space(self, space):
        if space.kind != "grid" or space.periodic or space.interval != (0.0, 1.0):
            raise UnsupportedError("hardcore_soft needs a grid on [0, 1]")

    def evaluate(self, params, sigma):
        s = sigma[0] + sigma[1] - 1.0
        return -np.where(s >= 0, s, 0.0)


class CustomTable(ThetaFamily):
    """Deterministic constraint given as a dense table on ``Sigma^p``."""

    name = "custom_table"

    def __init__(self, table: np.ndarray, source: str | None = None):
        table = np.asarray(table, dtype=float)
        super().__init__(table.ndim)
        if len(set(table.shape)) != 1 or not np.all(np.isfinite(table)):
            raise ConfigError("custom table must be a finite hypercube array")
        self.table = table
        self.source = source
        self.indicator = bool(np.all(np.isin(table, (-1.0, 0.0))))

    def evaluate(self, params, sigma):
        raise UnsupportedError("custom tables are evaluated by index")

    def tables(self, params, space):
        if space.size != self.table.shape[0]:
            raise ArgumentError("custom table does not match the spin space")
        n = np.atleast_2d(params).shape[0]
        return np.broadcast_to(self.table, (n,) + self.table.shape).copy()

    def describe(self):
        return {"family": self.name, "p": self.p,
                "table": self.table.ravel().tolist(), "source": self.source}


def load_custom_table(path: str, space: SpinSpace) -> CustomTable:
    """CSV with ``p`` spin-index columns (0-based) and one ``value`` column.

    Every tuple of ``Sigma^p`` must appear exactly once.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if rows and not _is_number(rows[0][0]):
        rows = rows[1:]
    if not rows:
        raise ConfigError(f"{path}: empty custom table")
    p = len(rows[0]) - 1
    if p < 2:
        raise ConfigError(f"{path}: need at least 2 index columns")
    q = space.size
    table = np.full((q,) * p, np.nan)
    for line, row in enumerate(rows, 1):
        if len(row) != p + 1:
            raise ConfigError(f"{path}: row {line} has {len(row)} columns")
        idx = tuple(int(x) for x in row[:p])
        if any(not 0 <= i < q for i in idx):
            raise ConfigError(f"{path}: row {line} index out of range")
        if not np.isnan(table[idx]):
            raise ConfigError(f"{path}: duplicate tuple {idx}")
        table[idx] = float(row[p])
    if np.isnan(table).any():
        raise ConfigError(f"{path}: table does not cover Sigma^{p}")
    return CustomTable(table, source=str(path))


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


# --------------------------------------------------------------------------
# realizations


@dataclass(frozen=True, eq=False)
class ThetaRealization:
    family: ThetaFamily
    params: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __call__(self, *sigma) -> float:
        return theta_eval(self, sigma)

    def table(self, space: SpinSpace) -> np.ndarray:
        return self.family.tables(self.params.reshape(1, -1), space)[0]

    def sup_norm(self, space: SpinSpace) -> float:
        return float(np.max(np.abs(self.table(space))))

    def to_json(self) -> list:
        return [float(x) for x in self.params]


def theta_eval(t: ThetaRealization, sigma) -> float:
    sigma = tuple(sigma)
    if len(sigma) != t.family.p:
        raise ArgumentError(f"theta expects {t.family.p} spins, got {len(sigma)}")
    if isinstance(t.family, CustomTable):
        raise UnsupportedError("custom tables are evaluated through table()")
    val = t.family.evaluate(t.params.reshape(1, -1),
                            [np.asarray([float(s)]) for s in sigma])
    return float(np.asarray(val).ravel()[0])


# --------------------------------------------------------------------------
# model specification


@dataclass(frozen=True, eq=False)
class ModelSpec:
    family: ThetaFamily
    alpha: float
    beta: float
    measure: Measure
    psi: np.ndarray
    name: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        psi = np.array(self.psi, dtype=float)
        psi.setflags(write=False)
        object.__setattr__(self, "psi", psi)
        if self.alpha < 0:
            raise ConfigError("alpha must be nonnegative")
        if not self.beta > 0:
            raise ConfigError("beta must be positive (use inf for zero temperature)")
        if psi.shape != (self.space.size,):
            raise ConfigError("external field must be tabulated on the spin space")
        self.family.check_space(self.space)

    @property
    def space(self) -> SpinSpace:
        return self.measure.space

    @property
    def p(self) -> int:
        return self.family.p

    @property
    def is_zero_temp(self) -> bool:
        return math.isinf(self.beta)

    @property
    def is_symmetric(self) -> bool:
        return bool(self.family.symmetric)

    @property
    def has_franz_leone(self) -> bool:
        return self.family.has_franz_leone

    @property
    def offspring_mean(self) -> float:
        return self.alpha * self.p * (self.p - 1)

    @property
    def subcritical(self) -> bool:
        return self.offspring_mean <= 1.0

    def with_beta(self, beta: float) -> "ModelSpec":
        return replace(self, beta=float(beta))

    def with_alpha(self, alpha: float) -> "ModelSpec":
        return replace(self, alpha=float(alpha))

    def sample_tables(self, rng, n):
        return self.family.sample_batch(rng, n, self.space)

    def theta_sup_norms(self, n: int = 20_000, seed: int = 0):
        """Sup-norms of ``n`` drawn realizations (exact atoms for finite laws)."""
        sup = self.family.support()
        if sup is not None and len(sup[1]) <= MAX_BANK:
            bank = self.family.tables(sup[0], self.space)
            norms = np.abs(bank).reshape(len(bank), -1).max(axis=1)
            return norms, np.asarray(sup[1])
        bank, idx = self.sample_tables(np.random.default_rng(seed), n)
        norms = np.abs(bank[idx]).reshape(n, -1).max(axis=1)
        return norms, np.full(n, 1.0 / n)

    def high_temp_quantity(self, n: int = 20_000, seed: int = 0) -> float:
        """``6 beta e^{4 beta |psi|} E[|theta| e^{4 beta |theta|}]``."""
        if self.is_zero_temp:
            return math.inf
        norms, w = self.theta_sup_norms(n, seed)
        b = self.beta
        e = float(np.sum(w * norms * np.exp(4 * b * norms)))
        return 6 * b * math.exp(4 * b * float(np.max(np.abs(self.psi)))) * e

    def contraction_bound(self, n: int = 20_000, seed: int = 0) -> float:
        """Lipschitz constant ``4 beta E[|theta| e^{2 beta |theta|}] alpha p (p-1)``."""
        norms, w = self.theta_sup_norms(n, seed)
        b = self.beta
        return 4 * b * float(np.sum(w * norms * np.exp(2 * b * norms))) * self.offspring_mean

    def regime_flags(self, n: int = 20_000, seed: int = 0) -> dict:
        ht = self.high_temp_quantity(n, seed) * self.offspring_mean <= 1.0
        return {
            "subcritical": self.subcritical,
            "high_temperature": bool(ht),
            "replica_symmetric_regime": bool(self.subcritical or ht),
        }

    def describe(self) -> dict:
        return {
            "name": self.name,
            "theta": self.family.describe(),
            "alpha": self.alpha,
            "beta": "inf" if self.is_zero_temp else self.beta,
            "space": self.space.describe(),
            "nu": [float(x) for x in self.measure.weights],
            "psi": [float(x) for x in self.psi],
            "extra": self.extra,
        }

    def digest(self, include_beta: bool = True) -> str:
        d = self.describe()
        if not include_beta:
            d.pop("beta")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def sample_theta(model: ModelSpec, rng: np.random.Generator) -> ThetaRealization:
    params = model.family.draw_params(rng, 1)
    return ThetaRealization(model.family, params[0])


def check_symmetry(model: ModelSpec, n_samples: int = 200, seed: int = 0) -> bool:
    """Empirical check of ``theta(sigma) == theta(-sigma)`` over disorder draws."""
    if not model.space.is_ising:
        raise UnsupportedError("symmetry check needs Ising spins")
    sup = model.family.support()
    if sup is not None and len(sup[1]) <= MAX_BANK:
        tabs = model.family.tables(sup[0][sup[1] > 0], model.space)
    else:
        bank, idx = model.sample_tables(np.random.default_rng(seed), n_samples)
        tabs = bank[idx]
    flipped = tabs[(slice(None),) + (slice(None, None, -1),) * model.p]
    return bool(np.array_equal(tabs, flipped))


@dataclass(frozen=True)
class FranzLeone:
    """``exp(beta theta(x)) = a (1 + b prod_i f_i(x_i))``, ``f_i = xi_i + zeta_i x``."""

    a: float
    b: float
    xi: np.ndarray
    zeta: np.ndarray


def franz_leone_params(model: ModelSpec, beta: float | None = None,
                       theta: ThetaRealization | None = None) -> FranzLeone | None:
    if not model.has_franz_leone:
        return None
    beta = model.beta if beta is None else beta
    if theta is None:
        sup = model.family.support()
        if sup is None or len(sup[1]) != 1:
            theta = ThetaRealization(model.family, model.family.draw_params(
                np.random.default_rng(0), 1)[0])
        else:
            theta = ThetaRealization(model.family, sup[0][0])
    a, b, xi, zeta = model.family.franz_leone(beta, theta.params.reshape(1, -1))
    return FranzLeone(float(a[0]), float(b[0]), xi[0], zeta[0])


# --------------------------------------------------------------------------
# builders


def _ising_measure():
    return Measure.uniform(ising_space())


def pspin_model(p=2, alpha=0.5, beta=1.0, J=ScalarLaw.constant(1.0), h=0.0, name="pspin"):
    nu = _ising_measure()
    return ModelSpec(PSpin(p, J), alpha, beta, nu, h * nu.space.points, name)


def ksat_model(p=2, alpha=0.25, beta=1.0, h=0.0, clause_law=None, name="ksat"):
    nu = _ising_measure()
    return ModelSpec(KSat(p, clause_law), alpha, beta, nu, h * nu.space.points, name)


def nae_ksat_model(p=3, alpha=1 / 6, beta=1.0, clause_law=None, name="nae_ksat"):
    nu = _ising_measure()
    return ModelSpec(NaeKSat(p, clause_law), alpha, beta, nu, np.zeros(2), name)


def perceptron_model(p=2, alpha=0.25, beta=1.0, g=ScalarLaw.rademacher(), kappa=0.0,
                     symmetric=True, variant="le", h=0.0, name="perceptron"):
    nu = _ising_measure()
    fam = Perceptron(p, g, kappa, symmetric, variant)
    return ModelSpec(fam, alpha, beta, nu, h * nu.space.points, name)


def potts_model(q=3, alpha=0.5, beta=1.0, J=ScalarLaw.constant(1.0), h=0.0, name="potts"):
    space = potts_space(q)
    nu = Measure.uniform(space)
    psi = h * (space.points == 1).astype(float)
    return ModelSpec(Potts(q, J), alpha, beta, nu, psi, name)


def xy_model(alpha=0.5, beta=1.0, J=ScalarLaw.constant(1.0), h=0.0, grid=64, name="xy"):
    space = circle_grid(grid)
    nu = Measure.uniform(space)
    psi = h * np.cos(2 * np.pi * space.points)
    return ModelSpec(XY(J), alpha, beta, nu, psi, name)


def hardcore_soft_model(alpha=0.4, beta=8.0, eta=1.0, grid=64, name="hardcore_soft"):
    space = interval_grid(grid)
    nu = Measure.fugacity(space, eta)
    return ModelSpec(HardcoreSoft(), alpha, beta, nu, np.zeros(grid), name,
                     extra={"eta": float(eta)})


def custom_table_model(table: CustomTable, space: SpinSpace, alpha, beta,
                       psi=None, nu: Measure | None = None, name="custom"):
    nu = Measure.uniform(space) if nu is None else nu
    psi = np.zeros(space.size) if psi is None else psi
    return ModelSpec(table, alpha, beta, nu, psi, name)


FAMILIES = ("pspin", "ksat", "nae_ksat", "perceptron_sym", "perceptron_asym",
            "potts", "xy", "hardcore_soft", "custom_table")
