"""Free-energy functionals at a pool, closed forms and counting formulas."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ._random import poisson, substream
from .errors import ArgumentError, NoClosedFormError, UnsupportedError
from .models import (
    MAX_BANK,
    NaeKSat,
    Potts,
    PSpin,
    KSat,
    XY,
    ModelSpec,
)
from .rde import _fl_clauses, _ising_field_strength, _map_blocks, clause_messages
from .spin import Population

SAMPLE_BLOCK = 4096


@dataclass(frozen=True)
class FunctionalEstimate:
    value: float
    std_error: float
    n_samples: int

    @classmethod
    def from_samples(cls, y) -> "FunctionalEstimate":
        y = np.asarray(y, dtype=float)
        n = y.size
        se = float(np.std(y, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return cls(float(np.mean(y)), se, int(n))

    def __float__(self):
        return self.value


# --------------------------------------------------------------------------
# functional estimates at a pool


def _term1(model: ModelSpec, pool: np.ndarray, rng, n: int) -> np.ndarray:
    p, q = model.p, model.space.size
    r = poisson(rng, model.alpha * p, n)
    n_cl = int(r.sum())
    bank, idx = model.sample_tables(rng, n_cl)
    nb = pool[rng.integers(0, pool.shape[0], size=(n_cl, p - 1))]
    msgs = clause_messages(model, bank, idx, nb)
    tot = np.zeros((n, q))
    np.add.at(tot, np.repeat(np.arange(n), r), msgs)
    if model.is_zero_temp:
        mask = np.where(model.measure.weights > 0, 0.0, -np.inf)
        return np.max(tot + model.psi + mask, axis=1)
    return logsumexp(tot + model.beta * model.psi + model.measure.log_weights, axis=1)


def _term2(model: ModelSpec, pool: np.ndarray, rng, n: int) -> np.ndarray:
    p = model.p
    bank, idx = model.sample_tables(rng, n)
    nb = pool[rng.integers(0, pool.shape[0], size=(n, p))]
    msgs = clause_messages(model, bank, idx, nb[:, :-1])
    if model.is_zero_temp:
        mask = np.where(model.measure.weights > 0, 0.0, -np.inf)
        return np.max(msgs + nb[:, -1] + mask, axis=1)
    return logsumexp(msgs + model.beta * nb[:, -1] + model.measure.log_weights, axis=1)


def _functional_samples(pop: Population, model: ModelSpec, n_samples: int,
                        seed: int, workers: int) -> np.ndarray:
    if pop.size == 0:
        raise ArgumentError("empty pool")
    if pop.beta != model.beta or not pop.space.same_as(model.space):
        raise ArgumentError("population does not belong to this model")
    pool = pop.values
    c = model.alpha * (model.p - 1)

    def block(b, lo, hi):
        rng = substream(seed, "functional", b)
        n = hi - lo
        return _term1(model, pool, rng, n) - c * _term2(model, pool, rng, n)

    blocks = [(b, lo, min(lo + SAMPLE_BLOCK, n_samples))
              for b, lo in enumerate(range(0, n_samples, SAMPLE_BLOCK))]
    return np.concatenate(_map_blocks(block, blocks, workers))


def eval_P_finite(pop: Population, model: ModelSpec, n_samples: int = 100_000,
                  seed: int = 0, workers: int = 1) -> FunctionalEstimate:
    """Monte Carlo estimate of the finite-temperature functional.

    Each sample pairs an independent draw of the site term with an
    independent draw of the clause term, so samples are i.i.d.
    """
    if model.is_zero_temp:
        raise ArgumentError("eval_P_finite needs finite beta")
    return FunctionalEstimate.from_samples(_functional_samples(pop, model, n_samples, seed, workers))


def eval_P_infty(pop: Population, model: ModelSpec, n_samples: int = 100_000,
                 seed: int = 0, workers: int = 1) -> FunctionalEstimate:
    """Monte Carlo estimate of the zero-temperature (two-sup) functional."""
    if not model.is_zero_temp:
        raise ArgumentError("eval_P_infty needs beta = inf")
    return FunctionalEstimate.from_samples(_functional_samples(pop, model, n_samples, seed, workers))


def eval_P_magnetization(pool, model: ModelSpec, n_samples: int = 100_000,
                         seed: int = 0) -> FunctionalEstimate:
    """Functional in magnetization coordinates for Ising Franz-Leone models
    with uniform base measure."""
    if not (model.has_franz_leone and model.space.is_ising) or model.is_zero_temp:
        raise UnsupportedError("magnetization functional needs a finite-beta Ising Franz-Leone model")
    if not np.allclose(model.measure.weights, 0.5, rtol=0, atol=1e-15):
        raise UnsupportedError("magnetization functional needs uniform nu")
    pool = np.asarray(pool, dtype=float)
    if pool.size == 0:
        raise ArgumentError("empty pool")
    rng = substream(seed, "mag-functional")
    p, beta = model.p, model.beta
    h = _ising_field_strength(model)
    const = 0.5 * float(model.psi[0] + model.psi[1])
    n = n_samples

    # site term: log sum_eps e^{eps beta h} prod_k (1 + b_k f_kp(eps) P_k)
    r = poisson(rng, model.alpha * p, n)
    n_cl = int(r.sum())
    a, b, xi, zeta = _fl_clauses(model, rng, n_cl)
    m = pool[rng.integers(0, pool.size, size=(n_cl, p - 1))]
    P = np.prod(xi[:, :-1] + zeta[:, :-1] * m, axis=1)
    owner = np.repeat(np.arange(n), r)
    site = np.zeros(n)
    logs = []
    for eps in (-1.0, 1.0):
        acc = np.zeros(n)
        np.add.at(acc, owner, np.log1p(b * (xi[:, -1] + zeta[:, -1] * eps) * P))
        logs.append(acc + eps * beta * h)
    site = np.logaddexp(logs[0], logs[1])
    log_a_site = np.zeros(n)
    np.add.at(log_a_site, owner, np.log(a))

    # clause term: log a + log(1 + b prod_{i<=p} f_i(m_i)), weighted by alpha (p-1)
    a2, b2, xi2, zeta2 = _fl_clauses(model, rng, n)
    m2 = pool[rng.integers(0, pool.size, size=(n, p))]
    clause = np.log(a2) + np.log1p(b2 * np.prod(xi2 + zeta2 * m2, axis=1))

    # E log a enters with weight alpha p - alpha (p-1); sampled through both terms
    y = -math.log(2.0) + beta * const + log_a_site + site - model.alpha * (p - 1) * clause
    return FunctionalEstimate.from_samples(y)


# --------------------------------------------------------------------------
# closed forms


def bessel_i0(x: float) -> float:
    """Modified Bessel ``I_0`` by its ascending series (desk range ``|x| <= 30``)."""
    x = float(x)
    if abs(x) > 30:
        raise ArgumentError("bessel_i0 series is limited to |x| <= 30")
    y = 0.25 * x * x
    term, total, k = 1.0, 1.0, 0
    while True:
        k += 1
        term *= y / (k * k)
        total += term
        if term < 1e-17 * total:
            return total


def _expect_scalar(law, fn) -> float:
    if not law.is_finite:
        return law.expect(fn)
    return float(sum(p * fn(v) for v, p in zip(law.values, law.probs)))


def _zero_field(model: ModelSpec) -> bool:
    return bool(np.all(model.psi == 0.0))


def _uniform_nu(model: ModelSpec) -> bool:
    w = model.measure.weights
    return bool(np.allclose(w, w[0], rtol=0, atol=1e-15))


def _table_expectation(model: ModelSpec, fn, n_mc: int = 200_000, seed: int = 0) -> float:
    """``E fn(table)`` over the disorder, exact for finite laws."""
    sup = model.family.support()
    if sup is not None and len(sup[1]) <= MAX_BANK:
        bank = model.family.tables(sup[0], model.space)
        return float(sum(w * fn(t) for t, w in zip(bank, sup[1])))
    bank, idx = model.sample_tables(np.random.default_rng(seed), n_mc)
    return float(np.mean([fn(bank[i]) for i in idx]))


def symmetric_free_energy(model: ModelSpec) -> float:
    """Value at the zero fixed point: ``alpha E log sum e^{beta theta} - alpha p log 2``."""
    beta, p = model.beta, model.p
    return model.alpha * _table_expectation(
        model, lambda t: float(logsumexp(beta * t.ravel()))) - model.alpha * p * math.log(2)


def symmetric_gse(model: ModelSpec) -> float:
    return model.alpha * _table_expectation(model, lambda t: float(t.max()))


def closed_form(model: ModelSpec, quantity: str = "F") -> float:
    """Exact value of ``F`` (finite beta) or ``gse`` from the model's catalog formula.

    Raises NoClosedFormError when no formula covers the model.
    """
    if quantity not in ("F", "gse"):
        raise ArgumentError("quantity must be 'F' or 'gse'")
    fam, a = model.family, model.alpha
    beta = model.beta
    if quantity == "F" and model.is_zero_temp:
        raise ArgumentError("free energy needs finite beta; ask for 'gse'")
    if not _uniform_nu(model) or (not _zero_field(model)):
        if not (isinstance(fam, KSat) and quantity == "gse" and _zero_field(model)):
            raise NoClosedFormError(f"no closed form for {model.name} with a field or tilted nu")

    if isinstance(fam, Potts):
        q, p = fam.q, fam.p
        if quantity == "gse":
            return a * _expect_scalar(fam.J, lambda j: np.maximum(j, 0.0))
        return a * _expect_scalar(
            fam.J, lambda j: np.log(q * np.exp(beta * j) + q ** p - q)) - a * p * math.log(q)
    if isinstance(fam, XY):
        if quantity == "gse":
            return a * _expect_scalar(fam.J, np.abs)
        return a * _expect_scalar(fam.J, lambda j: np.log(np.vectorize(bessel_i0)(beta * j)))
    if isinstance(fam, NaeKSat):
        if quantity == "gse":
            return 0.0
        return a * math.log1p(2.0 ** (1 - fam.p) * math.expm1(-beta))
    if isinstance(fam, PSpin):
        if quantity == "gse":
            return a * _expect_scalar(fam.J, np.abs)
        return a * _expect_scalar(fam.J, lambda j: np.log(np.cosh(beta * j)))
    if isinstance(fam, KSat):
        if quantity == "gse" and _zero_field(model):
            return 0.0
        raise NoClosedFormError("K-SAT has a closed form only for the zero-field ground state")
    if model.space.is_ising and fam.symmetric:
        return symmetric_gse(model) if quantity == "gse" else symmetric_free_energy(model)
    raise NoClosedFormError(f"no closed form for family {fam.name}")


def csp_satisfied_fraction(model: ModelSpec) -> float:
    """Mean fraction ``E rho`` of satisfying inputs of an indicator family."""
    if not model.family.indicator:
        raise UnsupportedError("satisfied fraction needs an indicator family")
    return _table_expectation(model, lambda t: float(np.mean(t == 0.0)))


def csp_free_energy(model: ModelSpec, beta: float | None = None) -> float:
    """``alpha E log(e^{-beta} + (1 - e^{-beta}) rho)`` for symmetric CSPs."""
    beta = model.beta if beta is None else beta
    return model.alpha * _table_expectation(
        model, lambda t: math.log(math.exp(-beta) - math.expm1(-beta) * float(np.mean(t == 0))))


def csp_free_energy_prime(model: ModelSpec, beta: float | None = None) -> float:
    """``-alpha E (1 - rho) / (1 + (e^beta - 1) rho)``."""
    beta = model.beta if beta is None else beta

    def fn(t):
        rho = float(np.mean(t == 0))
        return (1 - rho) / (1 + math.expm1(beta) * rho)
    return -model.alpha * _table_expectation(model, fn)


# --------------------------------------------------------------------------
# counting via Legendre transform


def legendre_log_count(F_value: float, F_prime: float, beta: float) -> float:
    return math.log(2.0) + F_value - beta * F_prime


def legendre_fraction(F_prime: float, alpha: float) -> float:
    """Unsatisfied-free fraction ``t = 1 + F'(beta) / alpha``."""
    return 1.0 + F_prime / alpha


def csp_log_count(alpha: float, rho: float, t: float) -> float:
    """Closed-form count exponent for symmetric CSPs with satisfied fraction ``rho``."""
    if not (0 < t < 1 and 0 < rho < 1):
        raise ArgumentError("need 0 < t < 1 and 0 < rho < 1")
    return (math.log(2.0) + alpha * (1 - t) * math.log((1 - rho) / (1 - t))
            + alpha * t * math.log(rho / t))


def estimate_F_prime(model: ModelSpec, beta: float, delta: float, evaluator) -> float:
    """Central difference of ``evaluator(model at beta)``."""
    if not delta > 0:
        raise ArgumentError("delta must be positive")
    if beta - delta <= 0:
        raise ArgumentError("beta - delta must stay positive")
    hi = float(evaluator(model.with_beta(beta + delta)))
    lo = float(evaluator(model.with_beta(beta - delta)))
    return (hi - lo) / (2 * delta)


def kink_flag(model: ModelSpec, beta: float, delta: float, evaluator, rtol: float = 1e-3) -> bool:
    """True when forward and backward difference quotients disagree."""
    mid = float(evaluator(model.with_beta(beta)))
    fwd = (float(evaluator(model.with_beta(beta + delta))) - mid) / delta
    bwd = (mid - float(evaluator(model.with_beta(beta - delta)))) / delta
    return abs(fwd - bwd) > rtol * max(1.0, abs(fwd))


# --------------------------------------------------------------------------
# atomic mass


def atomic_mass_root(alpha: float, p: int) -> float:
    """Largest root in ``(0, 1]`` of ``c = exp(alpha p (c^{p-1} - 1))``.

    Returns exactly 1 when ``alpha p (p-1) <= 1`` (no root inside ``(0, 1)``).
    """
    if alpha < 0 or p < 2:
        raise ArgumentError("need alpha >= 0 and p >= 2")
    lam = alpha * p * (p - 1)
    if lam <= 1.0:
        return 1.0
    # x = -log c solves g(x) = alpha p (1 - e^{-x (p-1)}) - x = 0, x > 0
    def g(x):
        return alpha * p * -math.expm1(-x * (p - 1)) - x
    # g is concave with g(0) = 0, g'(0) = lam - 1 > 0 and g(alpha p) < 0
    hi = alpha * p
    lo = hi * 1e-6
    while g(lo) <= 0:
        lo *= 0.5
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    return math.exp(-0.5 * (lo + hi))


def has_atomic_root(alpha: float, p: int) -> bool:
    return atomic_mass_root(alpha, p) < 1.0


def beta_for_fraction(model: ModelSpec, t: float, lo: float = -60.0, hi: float = 60.0) -> float:
    """Temperature with ``1 + F'(beta) / alpha = t`` for symmetric CSP closed forms.

    ``F'`` is nondecreasing, so bisection applies; negative ``beta`` covers
    fractions below the typical satisfied fraction.
    """
    if not (model.family.indicator and model.family.symmetric and model.space.is_ising):
        raise UnsupportedError("fraction inversion needs a symmetric CSP with a closed form")
    if not 0 < t < 1:
        raise ArgumentError("fraction t must lie in (0, 1)")
    if model.alpha <= 0:
        raise ArgumentError("fraction inversion needs alpha > 0")

    def frac(b):
        return legendre_fraction(csp_free_energy_prime(model, b), model.alpha)
    if not frac(lo) < t < frac(hi):
        raise ArgumentError(f"fraction {t} is not reachable for this model")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if frac(mid) < t:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-13:
            break
    return 0.5 * (lo + hi)


def legendre_count_closed_form(model: ModelSpec, t: float) -> float:
    """``log 2 + F - beta F'`` at the temperature matching fraction ``t``."""
    b = beta_for_fraction(model, t)
    return legendre_log_count(csp_free_energy(model, b), csp_free_energy_prime(model, b), b)
