"""Continuous hardcore model on [0, 1]: density fixed point and volume oracles.

Densities live on the uniform grid ``t_i = i / (n - 1)``. The grid is
symmetric under ``t -> 1 - t``, so ``F(1 - t_i)`` is ``F`` at node
``n - 1 - i`` and no interpolation is needed inside the operator.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson, cumulative_trapezoid

from ._random import poisson, substream
from .errors import ArgumentError, DigestMismatchError, UnsupportedError
from .functionals import FunctionalEstimate
from .rde import _map_blocks
from .spin import interval_grid, quadrature_weights, w1_scalar

HC_BLOCK = 4096
HC_CHECKPOINT_VERSION = 1


def hc_grid(n: int = 64) -> np.ndarray:
    return interval_grid(n).points


def upsilon0(eta: float) -> float:
    """``int_0^1 eta^x dx`` in closed form."""
    if eta <= 0:
        raise ArgumentError("fugacity must be positive")
    return 1.0 if eta == 1.0 else (eta - 1.0) / math.log(eta)


def _trap_weights(n: int) -> np.ndarray:
    return quadrature_weights(interval_grid(n))


def _cdf_rows(dens: np.ndarray) -> np.ndarray:
    n = dens.shape[-1]
    cdf = cumulative_trapezoid(dens, dx=1.0 / (n - 1), axis=-1, initial=0.0)
    return cdf / cdf[..., -1:]


@dataclass(frozen=True, eq=False)
class DensityField:
    """A density on the grid, normalized by the trapezoid rule, with its CDF."""

    density: np.ndarray
    cdf: np.ndarray = None

    def __post_init__(self):
        d = np.array(self.density, dtype=float)
        if d.ndim != 1 or d.size < 2 or np.any(d < 0) or not np.all(np.isfinite(d)):
            raise ArgumentError("density must be a finite nonnegative grid vector")
        mass = float(_trap_weights(d.size) @ d)
        if not mass > 0:
            raise ArgumentError("density has zero mass")
        d = d / mass
        d.setflags(write=False)
        c = _cdf_rows(d)
        c.setflags(write=False)
        object.__setattr__(self, "density", d)
        object.__setattr__(self, "cdf", c)

    @property
    def grid(self) -> np.ndarray:
        return hc_grid(self.density.size)

    def cdf_at(self, x: float) -> float:
        return float(np.interp(x, self.grid, self.cdf))

    @classmethod
    def fugacity(cls, eta: float, n: int = 64) -> "DensityField":
        return cls(np.power(float(eta), hc_grid(n)))


def _apply_rows(eta: float, grid: np.ndarray, cdfs: np.ndarray, owner: np.ndarray,
                n_out: int) -> np.ndarray:
    """Unnormalized log densities ``t log eta + sum_k log F_k(1 - t)`` per output."""
    logF = np.full(cdfs.shape, -np.inf)
    np.log(cdfs, out=logF, where=cdfs > 0)
    acc = np.zeros((n_out, grid.size))
    if owner.size:
        np.add.at(acc, owner, logF[:, ::-1])
    return acc + grid * math.log(eta)


def _normalize_log_rows(logd: np.ndarray) -> np.ndarray:
    shift = logd.max(axis=1, keepdims=True)
    with np.errstate(under="ignore"):
        d = np.exp(logd - shift)
    w = _trap_weights(d.shape[1])
    return d / (d @ w)[:, None]


def hc_apply(eta: float, inputs, n: int | None = None) -> DensityField:
    """New density proportional to ``eta^t prod_k F_k(1 - t)``."""
    if eta <= 0:
        raise ArgumentError("fugacity must be positive")
    inputs = list(inputs)
    if inputs:
        sizes = {f.density.size for f in inputs}
        if len(sizes) != 1 or (n is not None and sizes != {n}):
            raise ArgumentError("input densities must share one grid")
        n = sizes.pop()
    n = 64 if n is None else n
    grid = hc_grid(n)
    cdfs = np.array([f.cdf for f in inputs]).reshape(len(inputs), n)
    logd = _apply_rows(eta, grid, cdfs, np.zeros(len(inputs), int), 1)
    return DensityField(_normalize_log_rows(logd)[0])


def density_bound(eta: float, k: int) -> float:
    """Sup-norm bound ``c2 / (c1 c0^k)`` on an output with ``k`` inputs."""
    c0 = 1.0 / (1.0 + math.sqrt(eta))
    c1 = min(math.sqrt(eta), 1.0) / 2.0
    c2 = max(eta, 1.0)
    return c2 / (c1 * c0 ** k)


def half_bound(eta: float) -> float:
    return 1.0 / (1.0 + math.sqrt(eta))


@dataclass(frozen=True, eq=False)
class HcPool:
    """Pool of densities ``(M, n)`` with their CDFs."""

    densities: np.ndarray
    cdfs: np.ndarray
    eta: float
    seed: int = 0
    iteration: int = 0

    @property
    def size(self) -> int:
        return int(self.densities.shape[0])

    @property
    def n(self) -> int:
        return int(self.densities.shape[1])

    def half_values(self) -> np.ndarray:
        """The scalar observable ``F(1/2)`` of every member."""
        g = hc_grid(self.n)
        if self.n % 2:
            return self.cdfs[:, self.n // 2].copy()
        j = self.n // 2
        wgt = (0.5 - g[j - 1]) / (g[j] - g[j - 1])
        return (1 - wgt) * self.cdfs[:, j - 1] + wgt * self.cdfs[:, j]

    def member(self, j: int) -> DensityField:
        return DensityField(self.densities[j])

    @classmethod
    def from_densities(cls, dens, eta, seed=0, iteration=0) -> "HcPool":
        dens = np.asarray(dens, dtype=float)
        dens = dens / (dens @ _trap_weights(dens.shape[1]))[:, None]
        return cls(dens, _cdf_rows(dens), float(eta), seed, iteration)


def hc_step(pool: HcPool, alpha: float, workers: int = 1) -> HcPool:
    """One synchronous generation with ``Poisson(2 alpha)`` inputs per member."""
    grid = hc_grid(pool.n)
    old = pool.cdfs

    def block(b, lo, hi):
        rng = substream(pool.seed, "hc", pool.iteration, b)
        size = hi - lo
        r = poisson(rng, 2.0 * alpha, size)
        nb = rng.integers(0, pool.size, size=int(r.sum()))
        logd = _apply_rows(pool.eta, grid, old[nb], np.repeat(np.arange(size), r), size)
        return _normalize_log_rows(logd)

    blocks = [(b, lo, min(lo + HC_BLOCK, pool.size))
              for b, lo in enumerate(range(0, pool.size, HC_BLOCK))]
    dens = np.concatenate(_map_blocks(block, blocks, workers))
    return HcPool(dens, _cdf_rows(dens), pool.eta, pool.seed, pool.iteration + 1)


@dataclass
class HcResult:
    pool: HcPool
    distance_trace: list = field(default_factory=list)
    converged: bool = False
    iterations_used: int = 0
    in_regime: bool = True


def hc_initial(eta: float, M: int, n: int = 64, seed: int = 0) -> HcPool:
    d = np.broadcast_to(DensityField.fugacity(eta, n).density, (M, n))
    return HcPool.from_densities(d, eta, seed)


def hc_solve(eta: float, alpha: float, M: int = 100_000, tol: float = 1e-3,
             window: int = 10, max_iter: int = 500, grid: int = 64, seed: int = 0,
             workers: int = 1, initial: HcPool | None = None) -> HcResult:
    """Population dynamics for the density fixed point; convergence is judged
    on the ``F(1/2)`` observable. Runs for any alpha and flags
    ``in_regime = alpha <= 1/2``."""
    if eta <= 0 or alpha < 0:
        raise ArgumentError("need eta > 0 and alpha >= 0")
    if M < 100:
        raise ArgumentError("pool size M must be >= 100")
    pool = hc_initial(eta, M, grid, seed) if initial is None else initial
    trace, run = [], 0
    for it in range(1, max_iter + 1):
        new = hc_step(pool, alpha, workers)
        if np.array_equal(new.densities, pool.densities):
            trace.append(0.0)
            return HcResult(new, trace, True, it, alpha <= 0.5)
        d = w1_scalar(pool.half_values(), new.half_values())
        trace.append(d)
        pool = new
        if alpha == 0:
            # no edges: every member is the fugacity density after one step
            return HcResult(pool, trace, True, it, True)
        run = run + 1 if d < tol else 0
        if run >= window:
            return HcResult(pool, trace, True, it, alpha <= 0.5)
    return HcResult(pool, trace, False, max_iter, alpha <= 0.5)


def hc_eval_P(pool: HcPool, eta: float, alpha: float, n_samples: int = 100_000,
              seed: int = 0) -> FunctionalEstimate:
    """``-log u0 + E log int eta^t prod F_k(1-t) dt - alpha E log int F_1(1-t) f_2(t) dt``.

    ``u0`` uses the same grid quadrature as the integrals, so ``alpha = 0``
    returns exactly 0.
    """
    if pool.size == 0:
        raise ArgumentError("empty pool")
    n = pool.n
    grid = hc_grid(n)
    w = _trap_weights(n)
    lu0 = math.log(float(w @ np.power(eta, grid)))
    rng = substream(seed, "hc-functional")
    out = []
    for lo in range(0, n_samples, HC_BLOCK):
        size = min(HC_BLOCK, n_samples - lo)
        r = poisson(rng, 2.0 * alpha, size)
        nb = rng.integers(0, pool.size, size=int(r.sum()))
        logd = _apply_rows(eta, grid, pool.cdfs[nb], np.repeat(np.arange(size), r), size)
        shift = logd.max(axis=1)
        with np.errstate(under="ignore"):
            site = np.log(np.exp(logd - shift[:, None]) @ w) + shift
        pair = rng.integers(0, pool.size, size=(size, 2))
        edge = np.log(np.einsum("ij,ij->i", pool.cdfs[pair[:, 0], ::-1] * w,
                                pool.densities[pair[:, 1]]))
        out.append(site - lu0 - alpha * edge)
    return FunctionalEstimate.from_samples(np.concatenate(out))


def field_to_density(values: np.ndarray, beta: float, eta: float) -> np.ndarray:
    """Lebesgue densities of finite-beta marginals ``e^{beta X} nu`` on the grid."""
    v = np.atleast_2d(values)
    n = v.shape[1]
    grid = hc_grid(n)
    w = _trap_weights(n)
    base = np.power(eta, grid)
    base = base / (w @ base)
    return np.exp(beta * v) * base


def pool_from_fields(values: np.ndarray, beta: float, eta: float) -> HcPool:
    return HcPool.from_densities(field_to_density(values, beta, eta), eta)


# --------------------------------------------------------------------------
# volume oracles on p = 2 instances


def _edges(inst) -> np.ndarray:
    if inst.model.p != 2:
        raise UnsupportedError("hardcore volumes need p = 2 instances")
    if inst.K == 0:
        return np.zeros((0, 2), dtype=np.int64)
    return np.unique(np.sort(inst.sites, axis=1), axis=0)


def hc_volume_mc(inst, eta: float, n_shots: int = 1_000_000, seed: int = 0,
                 chunk: int = 100_000) -> FunctionalEstimate:
    """``(1/N) log nu^N(P_G)`` by direct sampling from ``nu ~ eta^t``.

    With zero hits the value is the 95% upper bound ``log(3 / n_shots) / N``
    and ``std_error`` is infinite.
    """
    edges = _edges(inst)
    N = inst.N
    if edges.shape[0] == 0:
        return FunctionalEstimate(0.0, 0.0, n_shots)
    rng = substream(seed, "hc-volume", inst.seed)
    hits = 0
    for lo in range(0, n_shots, chunk):
        size = min(chunk, n_shots - lo)
        u = rng.random((size, N))
        x = u if eta == 1.0 else np.log1p(u * (eta - 1.0)) / math.log(eta)
        ok = np.all(x[:, edges[:, 0]] + x[:, edges[:, 1]] <= 1.0, axis=1)
        hits += int(ok.sum())
    if hits == 0:
        return FunctionalEstimate(math.log(3.0 / n_shots) / N, math.inf, n_shots)
    f = hits / n_shots
    se = math.sqrt((1 - f) / (n_shots * f)) / N
    return FunctionalEstimate(math.log(f) / N, se, n_shots)


def _forest_order(N: int, edges: np.ndarray):
    parent = list(range(N))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    adj = [[] for _ in range(N)]
    for u, v in edges:
        ru, rv = find(int(u)), find(int(v))
        if ru == rv:
            raise UnsupportedError("hc_tree_dp needs a forest; the graph has a cycle")
        parent[ru] = rv
        adj[u].append(int(v))
        adj[v].append(int(u))
    seen = [False] * N
    roots, order, par = [], [], [-1] * N
    for s in range(N):
        if seen[s]:
            continue
        roots.append(s)
        seen[s] = True
        stack = [s]
        while stack:
            a = stack.pop()
            order.append(a)
            for b in adj[a]:
                if not seen[b]:
                    seen[b] = True
                    par[b] = a
                    stack.append(b)
    return roots, order, par


def hc_tree_dp(inst, eta: float, grid: int = 256) -> float:
    """Exact (up to quadrature) ``(1/N) log nu^N(P_G)`` on forests.

    Messages ``m_c(s) = int_0^{1-s} f(x) prod m(x) dx`` are passed from the
    leaves up; cumulative integrals use Simpson's rule.
    """
    edges = _edges(inst)
    N = inst.N
    roots, order, par = _forest_order(N, edges)
    x = hc_grid(grid)
    dens = np.power(eta, x) / upsilon0(eta)
    prod = np.ones((N, grid))
    total = 0.0
    for a in reversed(order):
        g = dens * prod[a]
        if par[a] < 0:
            total += math.log(float(cumulative_simpson(g, x=x, initial=0.0)[-1]))
        else:
            G = cumulative_simpson(g, x=x, initial=0.0)
            prod[par[a]] *= G[::-1]
    return total / N


# --------------------------------------------------------------------------
# checkpoints (density payload)


def save_hc_checkpoint(path, pool: HcPool, digest: str) -> None:
    doc = {
        "format_version": HC_CHECKPOINT_VERSION,
        "payload": "density",
        "model_digest": digest,
        "spin_grid": hc_grid(pool.n).tolist(),
        "beta": "inf",
        "M": pool.size,
        "iteration": pool.iteration,
        "seed": pool.seed,
        "eta": pool.eta,
        "densities": pool.densities.tolist(),
    }
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(doc, fh)
    os.replace(tmp, path)


def load_hc_checkpoint(path, digest: str) -> HcPool:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("payload") != "density" or doc.get("format_version") != HC_CHECKPOINT_VERSION:
        raise ArgumentError(f"{path}: not a density checkpoint")
    if doc.get("model_digest") != digest:
        raise DigestMismatchError(f"{path}: checkpoint belongs to a different model")
    pool = HcPool.from_densities(np.array(doc["densities"]), doc["eta"], int(doc["seed"]),
                                 int(doc["iteration"]))
    return pool


def hc_digest(eta: float, alpha: float, grid: int) -> str:
    blob = json.dumps({"model": "hardcore", "eta": eta, "alpha": alpha, "grid": grid},
                      sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
