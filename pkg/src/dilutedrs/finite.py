"""Finite-N oracles on random hypergraphs: exhaustive enumeration and MCMC."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from ._random import poisson, substream
from .errors import ArgumentError, ResourceError, UnsupportedError
from .models import ModelSpec
from .rde import _map_blocks

STATE_CAP = 2 ** 24
ENUM_CHUNK = 2 ** 16
WINDOW_SLACK = 1e-12  # fractions k/M sitting on a window edge count as inside


@dataclass(frozen=True, eq=False)
class HypergraphInstance:
    """``N`` sites, ``K`` clauses on distinct site tuples, with drawn disorder."""

    model: ModelSpec
    N: int
    sites: np.ndarray
    params: np.ndarray
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        sites = np.asarray(self.sites, dtype=np.int64).reshape(-1, self.model.p)
        object.__setattr__(self, "sites", sites)
        params = np.asarray(self.params, dtype=float).reshape(
            sites.shape[0], self.model.family.n_params())
        object.__setattr__(self, "params", params)
        if sites.size and (sites.min() < 0 or sites.max() >= self.N):
            raise ArgumentError("clause site index out of range")
        srt = np.sort(sites, axis=1)
        if sites.size and np.any(srt[:, 1:] == srt[:, :-1]):
            raise ArgumentError("clause tuples must have distinct sites")

    @property
    def K(self) -> int:
        return int(self.sites.shape[0])

    @property
    def psi(self) -> np.ndarray:
        return self.model.psi

    def tables(self) -> np.ndarray:
        q, p = self.model.space.size, self.model.p
        if self.K == 0:
            return np.zeros((0,) + (q,) * p)
        return self.model.family.tables(self.params, self.model.space)

    def to_json(self) -> dict:
        return {
            "N": self.N,
            "p": self.model.p,
            "clauses": self.sites.tolist(),
            "disorder": self.params.tolist(),
            "psi": [float(x) for x in self.psi],
            "seed": self.seed,
            "model_digest": self.model.digest(include_beta=False),
        }

    @classmethod
    def from_json(cls, doc: dict, model: ModelSpec) -> "HypergraphInstance":
        if doc.get("p") != model.p or not np.allclose(doc.get("psi", []), model.psi):
            raise ArgumentError("instance file does not match the model")
        return cls(model, int(doc["N"]), np.array(doc["clauses"], dtype=np.int64),
                   np.array(doc["disorder"], dtype=float), int(doc.get("seed", 0)))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path, model: ModelSpec) -> "HypergraphInstance":
        with open(path) as fh:
            return cls.from_json(json.load(fh), model)


@dataclass(frozen=True)
class FiniteResult:
    value: float
    method: str
    error_bar: float = 0.0
    equilibrated: bool = True


def _distinct_tuples(rng, N: int, p: int, K: int) -> np.ndarray:
    out = rng.integers(0, N, size=(K, p))
    while K:
        srt = np.sort(out, axis=1)
        bad = np.flatnonzero(np.any(srt[:, 1:] == srt[:, :-1], axis=1))
        if bad.size == 0:
            break
        out[bad] = rng.integers(0, N, size=(bad.size, p))
    return out


def sample_hypergraph(model: ModelSpec, N: int, rng: np.random.Generator,
                      seed: int = 0) -> HypergraphInstance:
    """Poisson(alpha N) clauses on uniform distinct p-tuples (rejection on collision)."""
    if N < model.p:
        raise ArgumentError(f"need N >= p = {model.p}")
    K = int(poisson(rng, model.alpha * N, 1)[0])
    sites = _distinct_tuples(rng, N, model.p, K)
    params = model.family.draw_params(rng, K)
    return HypergraphInstance(model, N, sites, params, seed, {"clause_count": K})


def sample_instances(model: ModelSpec, N: int, n: int, seed: int = 0):
    return [sample_hypergraph(model, N, substream(seed, "instance", N, k), seed)
            for k in range(n)]


# --------------------------------------------------------------------------
# exhaustive enumeration


def _check_cap(inst: HypergraphInstance) -> int:
    space = inst.model.space
    if space.kind != "discrete":
        raise UnsupportedError("exhaustive enumeration needs a discrete spin space")
    n_states = space.size ** inst.N
    if n_states > STATE_CAP:
        raise ResourceError(
            f"{n_states} states exceed the exhaustive cap {STATE_CAP}; use mcmc_log_partition")
    return n_states


def _chunk_states(inst: HypergraphInstance, lo: int, hi: int):
    """Spin indices ``(n, N)`` plus energy and log-weight of states ``lo..hi``."""
    q = inst.model.space.size
    s = np.arange(lo, hi, dtype=np.int64)
    powers = q ** np.arange(inst.N, dtype=np.int64)
    spins = (s[:, None] // powers[None, :]) % q
    H = inst.model.psi[spins].sum(axis=1)
    tabs = inst.tables()
    p = inst.model.p
    strides = q ** np.arange(p - 1, -1, -1, dtype=np.int64)
    for k in range(inst.K):
        flat = spins[:, inst.sites[k]] @ strides
        H = H + tabs[k].ravel()[flat]
    logw = inst.model.measure.log_weights[spins].sum(axis=1)
    return spins, H, logw


def _chunks(n_states: int):
    return [(b, lo, min(lo + ENUM_CHUNK, n_states))
            for b, lo in enumerate(range(0, n_states, ENUM_CHUNK))]


def _tree_reduce(vals, op):
    vals = list(vals)
    while len(vals) > 1:
        nxt = [op(vals[i], vals[i + 1]) for i in range(0, len(vals) - 1, 2)]
        if len(vals) % 2:
            nxt.append(vals[-1])
        vals = nxt
    return vals[0]


def exact_log_partition(inst: HypergraphInstance, beta: float, workers: int = 1) -> FiniteResult:
    """``(1/N) log sum_sigma exp(beta H(sigma)) prod nu(sigma_i)`` by enumeration."""
    n_states = _check_cap(inst)

    def part(b, lo, hi):
        _, H, logw = _chunk_states(inst, lo, hi)
        return float(logsumexp(beta * H + logw))

    parts = _map_blocks(part, _chunks(n_states), workers)
    return FiniteResult(_tree_reduce(parts, np.logaddexp) / inst.N, "exhaustive")


def exact_gse(inst: HypergraphInstance, workers: int = 1) -> FiniteResult:
    n_states = _check_cap(inst)
    mask = np.isfinite(inst.model.measure.log_weights)

    def part(b, lo, hi):
        spins, H, _ = _chunk_states(inst, lo, hi)
        ok = mask[spins].all(axis=1)
        return float(H[ok].max()) if ok.any() else -math.inf

    parts = _map_blocks(part, _chunks(n_states), workers)
    return FiniteResult(_tree_reduce(parts, max) / inst.N, "exhaustive")


def exact_log_partition_curve(inst: HypergraphInstance, betas, workers: int = 1) -> np.ndarray:
    """``F_N`` at many temperatures from one enumeration."""
    betas = np.asarray(betas, dtype=float)
    n_states = _check_cap(inst)

    def part(b, lo, hi):
        _, H, logw = _chunk_states(inst, lo, hi)
        return logsumexp(betas[:, None] * H[None, :] + logw[None, :], axis=1)

    parts = _map_blocks(part, _chunks(n_states), workers)
    return _tree_reduce(parts, np.logaddexp) / inst.N


def gibbs_marginals(inst: HypergraphInstance, beta: float, workers: int = 1) -> np.ndarray:
    """All site marginals ``(N, |Sigma|)``; MCMC occupation when over the cap."""
    q = inst.model.space.size
    try:
        n_states = _check_cap(inst)
    except ResourceError:
        return _mcmc_marginals(inst, beta)
    logZ = exact_log_partition(inst, beta, workers).value * inst.N

    def part(b, lo, hi):
        spins, H, logw = _chunk_states(inst, lo, hi)
        w = np.exp(beta * H + logw - logZ)
        out = np.zeros((inst.N, q))
        for i in range(inst.N):
            out[i] = np.bincount(spins[:, i], weights=w, minlength=q)
        return out

    parts = _map_blocks(part, _chunks(n_states), workers)
    marg = _tree_reduce(parts, np.add)
    return marg / marg.sum(axis=1, keepdims=True)


def gibbs_marginal(inst: HypergraphInstance, beta: float, site: int) -> np.ndarray:
    if not 0 <= site < inst.N:
        raise ArgumentError("site out of range")
    return gibbs_marginals(inst, beta)[site]


def count_approx_solutions(inst: HypergraphInstance, t: float, epsilon: float,
                           workers: int = 1) -> int:
    """Number of configurations whose satisfied fraction lies in ``[t-eps, t+eps]``."""
    if not inst.model.family.indicator:
        raise UnsupportedError("counting needs an indicator (CSP) family")
    n_states = _check_cap(inst)
    M = inst.K
    if M == 0:
        return n_states if abs(1.0 - t) <= epsilon + WINDOW_SLACK else 0

    if np.any(inst.model.psi != 0):
        raise UnsupportedError("counting needs a zero external field")

    def part(b, lo, hi):
        _, H, _ = _chunk_states(inst, lo, hi)
        # H counts violated clauses with a minus sign
        frac = (M + np.rint(H).astype(np.int64)) / M
        return int(np.count_nonzero(np.abs(frac - t) <= epsilon + WINDOW_SLACK))

    return int(sum(_map_blocks(part, _chunks(n_states), workers)))


# --------------------------------------------------------------------------
# Metropolis with thermodynamic integration


class _LocalEnergy:
    """Per-site clause incidence for fast single-site energy differences."""

    def __init__(self, inst: HypergraphInstance):
        self.inst = inst
        q, p = inst.model.space.size, inst.model.p
        self.flat = inst.tables().reshape(inst.K, -1)
        self.strides = q ** np.arange(p - 1, -1, -1, dtype=np.int64)
        self.incident = [[] for _ in range(inst.N)]
        for k, tup in enumerate(inst.sites):
            for pos, i in enumerate(tup):
                self.incident[i].append((k, pos))

    def total(self, spins: np.ndarray) -> np.ndarray:
        H = self.inst.model.psi[spins].sum(axis=1)
        for k in range(self.inst.K):
            H = H + self.flat[k][spins[:, self.inst.sites[k]] @ self.strides]
        return H

    def delta(self, spins: np.ndarray, i: int, new: np.ndarray) -> np.ndarray:
        psi = self.inst.model.psi
        d = psi[new] - psi[spins[:, i]]
        for k, pos in self.incident[i]:
            base = spins[:, self.inst.sites[k]] @ self.strides
            shift = (new - spins[:, i]) * self.strides[pos]
            d = d + self.flat[k][base + shift] - self.flat[k][base]
        return d


def _metropolis(inst, spins, H, beta, sweeps, rng, local, record=True):
    N = inst.N
    nu = inst.model.measure.weights
    cdf = np.cumsum(nu)
    cdf[-1] = 1.0
    C = spins.shape[0]
    trace = np.empty((sweeps, C)) if record else None
    for s in range(sweeps):
        for i in range(N):
            new = np.minimum(np.searchsorted(cdf, rng.random(C), side="right"), len(nu) - 1)
            d = local.delta(spins, i, new)
            with np.errstate(over="ignore"):
                acc = rng.random(C) < np.exp(np.minimum(beta * d, 0.0))
            spins[acc, i] = new[acc]
            H = H + np.where(acc, d, 0.0)
        if record:
            trace[s] = H
    return spins, H, trace


def mcmc_log_partition(inst: HypergraphInstance, beta: float, beta_grid=None,
                       sweeps: int = 400, chains: int = 32, seed: int = 0,
                       burn_fraction: float = 0.25) -> FiniteResult:
    """Thermodynamic integration ``F_N = (1/N) int_0^beta <H>_b db``.

    Chains are warm-started along the grid; the error bar is the
    chain-to-chain standard error. ``equilibrated`` is False when the
    integrals from the two halves of the measurement window disagree by
    more than three standard errors.
    """
    grid = np.linspace(0.0, beta, 21) if beta_grid is None else np.asarray(beta_grid, float)
    if grid[0] != 0.0 or not math.isclose(grid[-1], beta) or np.any(np.diff(grid) <= 0):
        raise ArgumentError("beta_grid must increase from 0 to beta")
    if inst.K == 0 and np.all(inst.model.psi == 0):
        return FiniteResult(0.0, "mcmc", 0.0, True)
    rng = substream(seed, "mcmc", inst.seed)
    local = _LocalEnergy(inst)
    nu = inst.model.measure.weights
    cdf = np.cumsum(nu)
    cdf[-1] = 1.0
    spins = np.minimum(np.searchsorted(cdf, rng.random((chains, inst.N)), side="right"),
                       len(nu) - 1)
    H = local.total(spins)
    burn = max(1, int(round(burn_fraction * sweeps)))
    meas = max(2, sweeps - burn)
    means = np.empty((len(grid), chains))
    halves = np.empty((2, len(grid), chains))
    for g, b in enumerate(grid):
        spins, H, _ = _metropolis(inst, spins, H, b, burn, rng, local, record=False)
        spins, H, tr = _metropolis(inst, spins, H, b, meas, rng, local)
        means[g] = tr.mean(axis=0)
        halves[0, g] = tr[: meas // 2].mean(axis=0)
        halves[1, g] = tr[meas // 2:].mean(axis=0)
    per_chain = np.trapezoid(means, grid, axis=0) / inst.N
    value = float(per_chain.mean())
    err = float(per_chain.std(ddof=1) / math.sqrt(chains)) if chains > 1 else 0.0
    h = np.trapezoid(halves, grid, axis=1) / inst.N
    diff = h[0] - h[1]
    sd = float(diff.std(ddof=1) / math.sqrt(chains)) if chains > 1 else 0.0
    ok = abs(float(diff.mean())) <= 3 * sd + 1e-12
    return FiniteResult(value, "mcmc", err, bool(ok))


def _mcmc_marginals(inst: HypergraphInstance, beta: float, sweeps: int = 2000,
                    chains: int = 32, seed: int = 0) -> np.ndarray:
    rng = substream(seed, "mcmc-marg", inst.seed)
    local = _LocalEnergy(inst)
    q = inst.model.space.size
    nu = inst.model.measure.weights
    cdf = np.cumsum(nu)
    cdf[-1] = 1.0
    spins = np.minimum(np.searchsorted(cdf, rng.random((chains, inst.N)), side="right"), q - 1)
    H = local.total(spins)
    spins, H, _ = _metropolis(inst, spins, H, beta, sweeps // 4, rng, local, record=False)
    occ = np.zeros((inst.N, q))
    for _ in range(sweeps - sweeps // 4):
        spins, H, _ = _metropolis(inst, spins, H, beta, 1, rng, local, record=False)
        for i in range(inst.N):
            occ[i] += np.bincount(spins[:, i], minlength=q)
    return occ / occ.sum(axis=1, keepdims=True)
