"""Cavity operators, population dynamics and Galton-Watson sampling.

All contractions run in log space (max-plus at zero temperature). A clause
message for cavity spin ``t`` is

    msg(t) = log sum_{sigma in Sigma^{p-1}} exp(beta theta(sigma, t)
             + sum_i [beta X_i(sigma_i) + log nu(sigma_i)])

and a new field is the normalization of ``beta psi + sum_k msg_k``.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from ._random import poisson, substream
from .errors import ArgumentError, DigestMismatchError, ResourceError, UnsupportedError
from .models import ModelSpec, ThetaRealization
from .spin import (
    CavityField,
    Population,
    normalize_rows_finite,
    normalize_rows_zero_temp,
    population_distance,
    w1_scalar,
)

BLOCK = 2048
FIXED_POINT_ATOL = 1e-13
CHUNK_ELEMS = 2_000_000
CHECKPOINT_VERSION = 1


# --------------------------------------------------------------------------
# clause contraction kernel


def _log_weights(model: ModelSpec) -> np.ndarray:
    """Per-point additive weight: log nu at finite beta, a support mask at infinity."""
    lw = model.measure.log_weights
    if model.is_zero_temp:
        return np.where(np.isfinite(lw), 0.0, -np.inf)
    return lw


def _scaled_neighbors(model: ModelSpec, nbr: np.ndarray) -> np.ndarray:
    if model.is_zero_temp:
        return nbr + _log_weights(model)
    return model.beta * nbr + _log_weights(model)


def _matmul_messages(W: np.ndarray, T: np.ndarray) -> np.ndarray:
    """``log sum_s exp(W[n, s] + T[s, t])`` via a shifted exp-matmul, exact fallback."""
    mx = W.max(axis=1, keepdims=True)
    c = T.max(axis=0, keepdims=True)
    with np.errstate(under="ignore", divide="ignore"):
        S = np.exp(W - mx) @ np.exp(T - c)
        out = mx + np.log(S) + c
    bad = ~(S > 1e-280).all(axis=1)
    if bad.any():
        out[bad] = logsumexp(W[bad, :, None] + T[None], axis=1)
    return out


def clause_messages(model: ModelSpec, bank: np.ndarray, idx: np.ndarray,
                    nbr: np.ndarray) -> np.ndarray:
    """Messages of ``n`` clauses to their cavity spin.

    ``bank[idx[k]]`` is the table of clause ``k`` (cavity index last) and
    ``nbr[k]`` its ``p-1`` neighbor fields, shape ``(n, p-1, q)``.
    """
    n = idx.size
    q = model.space.size
    p = model.p
    out = np.empty((n, q))
    if n == 0:
        return out
    W = _scaled_neighbors(model, nbr)
    zero_t = model.is_zero_temp
    scale = 1.0 if zero_t else model.beta

    if p == 2 and not zero_t:
        uniq = np.unique(idx)
        if uniq.size * 4 <= n:
            for u in uniq:
                rows = np.flatnonzero(idx == u)
                out[rows] = _matmul_messages(W[rows, 0], scale * bank[u])
            return out

    chunk = max(1, CHUNK_ELEMS // q ** p)
    for lo in range(0, n, chunk):
        sl = slice(lo, lo + chunk)
        A = scale * bank[idx[sl]]
        for i in range(p - 1):
            w = W[sl, i].reshape((-1, q) + (1,) * (p - 1 - i))
            A = A + w
            A = A.max(axis=1) if zero_t else logsumexp(A, axis=1)
        out[sl] = A
    return out


def _combine(model: ModelSpec, msgs: np.ndarray, owner: np.ndarray, n_nodes: int):
    q = model.space.size
    tot = np.zeros((n_nodes, q))
    if msgs.shape[0]:
        np.add.at(tot, owner, msgs)
    if model.is_zero_temp:
        return normalize_rows_zero_temp(tot + model.psi)
    tot = tot / model.beta + model.psi
    return normalize_rows_finite(tot, model.beta, model.measure.log_weights)


def base_field(model: ModelSpec) -> np.ndarray:
    """Output of the operator with no clauses (r = 0)."""
    return _combine(model, np.zeros((0, model.space.size)), np.zeros(0, int), 1)[0]


# --------------------------------------------------------------------------
# single-shot operator application


@dataclass(frozen=True, eq=False)
class OperatorInput:
    """``r`` clause realizations and ``(p-1) r`` neighbor fields."""

    thetas: list
    neighbors: list

    @property
    def r(self) -> int:
        return len(self.thetas)


def _operator_arrays(model: ModelSpec, inp: OperatorInput):
    r, p, q = inp.r, model.p, model.space.size
    if len(inp.neighbors) != (p - 1) * r:
        raise ArgumentError(
            f"operator input needs (p-1)*r = {(p - 1) * r} neighbors, got {len(inp.neighbors)}"
        )
    rows = []
    for f in inp.neighbors:
        v = f.values if isinstance(f, CavityField) else np.asarray(f, dtype=float)
        if isinstance(f, CavityField) and f.beta != model.beta:
            raise ArgumentError("neighbor temperature differs from the model")
        if v.shape != (q,):
            raise ArgumentError("neighbor field does not match the spin space")
        rows.append(v)
    tabs = []
    for t in inp.thetas:
        tab = t.table(model.space) if isinstance(t, ThetaRealization) else np.asarray(t, float)
        if tab.shape != (q,) * p:
            raise ArgumentError("clause table does not match Sigma^p")
        tabs.append(tab)
    bank = np.array(tabs).reshape((r,) + (q,) * p)
    nbr = np.array(rows).reshape(r, p - 1, q)
    return bank, nbr


def _apply(model: ModelSpec, inp: OperatorInput) -> CavityField:
    bank, nbr = _operator_arrays(model, inp)
    idx = np.arange(inp.r)
    msgs = clause_messages(model, bank, idx, nbr)
    out = _combine(model, msgs, np.zeros(inp.r, int), 1)[0]
    return CavityField(out, model.beta)


def apply_T_finite(model: ModelSpec, inp: OperatorInput) -> CavityField:
    if model.is_zero_temp:
        raise ArgumentError("apply_T_finite needs a finite temperature")
    return _apply(model, inp)


def apply_T_infty(model: ModelSpec, inp: OperatorInput) -> CavityField:
    if not model.is_zero_temp:
        raise ArgumentError("apply_T_infty needs beta = inf")
    return _apply(model, inp)


# --------------------------------------------------------------------------
# population dynamics


def _block_update(model: ModelSpec, old: np.ndarray, seed: int, iteration: int,
                  block: int, lo: int, hi: int, damping: float) -> np.ndarray:
    rng = substream(seed, "pop", iteration, block)
    size = hi - lo
    p = model.p
    r = poisson(rng, model.alpha * p, size)
    n_cl = int(r.sum())
    bank, idx = model.sample_tables(rng, n_cl)
    nb = rng.integers(0, old.shape[0], size=(n_cl, p - 1))
    msgs = clause_messages(model, bank, idx, old[nb])
    owner = np.repeat(np.arange(size), r)
    new = _combine(model, msgs, owner, size)
    if damping > 0:
        keep = rng.random(size) < damping
        new[keep] = old[lo:hi][keep]
    return new


def _blocks(M: int):
    return [(b, lo, min(lo + BLOCK, M)) for b, lo in enumerate(range(0, M, BLOCK))]


def _map_blocks(fn, blocks, workers: int):
    if workers <= 1 or len(blocks) == 1:
        return [fn(*b) for b in blocks]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(lambda b: fn(*b), blocks))


def population_step(pop: Population, model: ModelSpec, *, workers: int = 1,
                    damping: float = 0.0) -> Population:
    """One synchronous generation; member ``j`` depends only on
    ``(seed, iteration, block(j))`` and the frozen old pool."""
    if pop.beta != model.beta or not pop.space.same_as(model.space):
        raise ArgumentError("population does not belong to this model")
    if not 0.0 <= damping < 1.0:
        raise ArgumentError("damping must lie in [0, 1)")
    old = pop.values
    parts = _map_blocks(
        lambda b, lo, hi: _block_update(model, old, pop.seed, pop.iteration, b, lo, hi, damping),
        _blocks(pop.size), workers,
    )
    return Population(pop.space, pop.beta, np.concatenate(parts), pop.seed,
                      pop.iteration + 1, pop.meta)


def initial_population(model: ModelSpec, M: int, initial="zero", seed: int = 0,
                       scale: float = 1.0) -> Population:
    """``initial`` is ``"zero"``, ``"random"`` or a checkpoint path."""
    q = model.space.size
    meta = {"model": model.digest()}
    if isinstance(initial, Population):
        return initial
    if initial == "zero":
        vals = np.zeros((M, q))
    elif initial == "random":
        rng = substream(seed, "init")
        raw = scale * rng.standard_normal((M, q))
        if model.is_zero_temp:
            vals = normalize_rows_zero_temp(raw)
        else:
            vals = normalize_rows_finite(raw, model.beta, model.measure.log_weights)
    elif isinstance(initial, (str, os.PathLike)):
        pop = load_checkpoint(initial, model)
        return Population(pop.space, pop.beta, pop.values, seed, pop.iteration, meta)
    else:
        raise ArgumentError(f"unknown initialization {initial!r}")
    return Population(model.space, model.beta, vals, seed, 0, meta)


@dataclass
class FixedPointResult:
    population: Population
    distance_trace: list = field(default_factory=list)
    converged: bool = False
    iterations_used: int = 0


def solve_population(model: ModelSpec, M: int = 10_000, tol: float = 1e-3,
                     window: int = 10, max_iter: int = 2000, initial="zero",
                     seed: int = 0, workers: int = 1, damping: float = 0.0,
                     checkpoint: str | None = None, checkpoint_every: int = 50,
                     callback=None) -> FixedPointResult:
    """Iterate population dynamics until consecutive generations stay within
    ``tol`` for ``window`` steps. A generation that reproduces its
    predecessor up to rounding (``FIXED_POINT_ATOL``) is a fixed point and
    stops at once."""
    if M < 100:
        raise ArgumentError("population size M must be >= 100")
    if not tol > 0 or window < 1:
        raise ArgumentError("tol must be positive and window >= 1")
    pop = initial_population(model, M, initial, seed)
    trace: list[float] = []
    run = 0
    for it in range(1, max_iter + 1):
        new = population_step(pop, model, workers=workers, damping=damping)
        if np.max(np.abs(new.values - pop.values)) <= FIXED_POINT_ATOL:
            trace.append(population_distance(pop, new))
            return FixedPointResult(new, trace, True, it)
        d = population_distance(pop, new)
        if model.alpha == 0:
            # no clauses: the output ignores its input, one generation is exact
            trace.append(d)
            return FixedPointResult(new, trace, True, it)
        trace.append(d)
        pop = new
        run = run + 1 if d < tol else 0
        if callback is not None:
            callback(it, d, pop)
        if checkpoint and it % checkpoint_every == 0:
            save_checkpoint(checkpoint, pop, model)
        if run >= window:
            return FixedPointResult(pop, trace, True, it)
    return FixedPointResult(pop, trace, False, max_iter)


# --------------------------------------------------------------------------
# Galton-Watson trees


@dataclass(frozen=True)
class GwTreeStats:
    height: int
    node_count: int


def gw_forest(model: ModelSpec, rng: np.random.Generator, n_roots: int,
              node_cap: int = 10_000_000):
    """Root fields of ``n_roots`` independent recursion trees with offspring
    ``(p-1) Poisson(alpha p)``. Returns (fields, heights, node_counts)."""
    p = model.p
    levels = []
    roots = np.arange(n_roots)
    count, total = n_roots, n_roots
    while count:
        r = poisson(rng, model.alpha * p, count)
        n_cl = int(r.sum())
        bank, idx = model.sample_tables(rng, n_cl)
        levels.append((r, bank, idx, roots))
        count = n_cl * (p - 1)
        total += count
        if total > node_cap:
            raise ResourceError(f"Galton-Watson forest exceeded {node_cap} nodes")
        roots = np.repeat(np.repeat(roots, r), p - 1)
    heights = np.zeros(n_roots, dtype=int)
    counts = np.zeros(n_roots, dtype=int)
    child = None
    for depth in range(len(levels) - 1, -1, -1):
        r, bank, idx, owner_root = levels[depth]
        heights[owner_root] = np.maximum(heights[owner_root], depth)
        counts += np.bincount(owner_root, minlength=n_roots)
        n_nodes = r.size
        if r.sum() == 0:
            msgs = np.zeros((0, model.space.size))
        else:
            nbr = child.reshape(-1, p - 1, model.space.size)
            msgs = clause_messages(model, bank, idx, nbr)
        child = _combine(model, msgs, np.repeat(np.arange(n_nodes), r), n_nodes)
    return child, heights, counts


def gw_tree_sample(model: ModelSpec, rng: np.random.Generator,
                   node_cap: int = 1_000_000):
    """Exact draw from the fixed point in the subcritical regime."""
    if not model.subcritical:
        raise UnsupportedError("tree recursion needs alpha p (p-1) <= 1")
    f, h, c = gw_forest(model, rng, 1, node_cap)
    return CavityField(f[0], model.beta), GwTreeStats(int(h[0]), int(c[0]))


def gw_samples(model: ModelSpec, n: int, seed: int = 0, workers: int = 1,
               chunk: int = 4096) -> np.ndarray:
    """``n`` exact fixed-point draws in substream chunks."""
    if not model.subcritical:
        raise UnsupportedError("tree recursion needs alpha p (p-1) <= 1")
    blocks = [(b, lo, min(lo + chunk, n)) for b, lo in enumerate(range(0, n, chunk))]
    parts = _map_blocks(
        lambda b, lo, hi: gw_forest(model, substream(seed, "gw", b), hi - lo)[0],
        blocks, workers,
    )
    return np.concatenate(parts)


# --------------------------------------------------------------------------
# magnetization recursion for Franz-Leone models


def _ising_field_strength(model: ModelSpec) -> float:
    """``h`` with ``psi(t) = h t + const`` on Ising spins."""
    return 0.5 * float(model.psi[1] - model.psi[0])


def _require_fl(model: ModelSpec):
    if not (model.has_franz_leone and model.space.is_ising):
        raise UnsupportedError("magnetization recursion needs an Ising Franz-Leone model")
    if model.is_zero_temp:
        raise UnsupportedError("magnetization recursion needs finite beta")


def _fl_clauses(model: ModelSpec, rng, n_cl: int):
    fam = model.family
    sup = fam.support()
    if sup is not None:
        cdf = np.cumsum(sup[1])
        cdf[-1] = 1.0
        k = np.minimum(np.searchsorted(cdf, rng.random(n_cl), side="right"), len(cdf) - 1)
        params = sup[0][k]
    else:
        params = fam.draw_params(rng, n_cl)
    return fam.franz_leone(model.beta, params)


def magnetization_step(pool, model: ModelSpec, rng: np.random.Generator) -> np.ndarray:
    _require_fl(model)
    pool = np.asarray(pool, dtype=float)
    M, p = pool.size, model.p
    r = poisson(rng, model.alpha * p, M)
    n_cl = int(r.sum())
    a, b, xi, zeta = _fl_clauses(model, rng, n_cl)
    m = pool[rng.integers(0, M, size=(n_cl, p - 1))]
    P = np.prod(xi[:, :-1] + zeta[:, :-1] * m, axis=1)
    u = np.arctanh(b * zeta[:, -1] * P / (1.0 + b * xi[:, -1] * P))
    tot = np.zeros(M)
    np.add.at(tot, np.repeat(np.arange(M), r), u)
    return np.tanh(tot + model.beta * _ising_field_strength(model))


def solve_magnetization(model: ModelSpec, M: int = 100_000, tol: float = 1e-3,
                        window: int = 10, max_iter: int = 2000, seed: int = 0,
                        burn_in: int = 0):
    """Magnetization population dynamics from the zero pool.

    Returns ``(pool, trace, converged)``."""
    _require_fl(model)
    pool = np.zeros(M)
    trace, run = [], 0
    for it in range(1, max_iter + 1):
        new = magnetization_step(pool, model, substream(seed, "mag", it))
        d = w1_scalar(pool, new)
        trace.append(d)
        pool = new
        run = run + 1 if d < tol else 0
        if run >= window and it >= burn_in:
            return pool, trace, True
    return pool, trace, False


def field_magnetization(values: np.ndarray, beta: float) -> np.ndarray:
    """``m = (e^{beta X(1)} - e^{beta X(-1)}) / 2`` for uniform Ising nu."""
    v = np.atleast_2d(values)
    return 0.5 * (np.exp(beta * v[:, 1]) - np.exp(beta * v[:, 0]))


# --------------------------------------------------------------------------
# contraction diagnostic


def contraction_diagnostic(model: ModelSpec, M: int = 2000, trials: int = 5,
                           seed: int = 0, delta: float = 0.1):
    """Median of ``d(T l1, T l2) / d(l1, l2)`` under coupled draws, with the
    Lipschitz bound ``4 beta E[|theta| e^{2 beta |theta|}] alpha p (p-1)``."""
    if model.is_zero_temp:
        raise ArgumentError("contraction diagnostic needs finite beta")
    ratios = []
    lw = model.measure.log_weights
    for k in range(trials):
        rng = substream(seed, "contract", k)
        raw = rng.standard_normal((M, model.space.size))
        l1 = Population(model.space, model.beta,
                        normalize_rows_finite(raw, model.beta, lw), seed + k, 0)
        noise = delta * rng.standard_normal(raw.shape)
        l2 = Population(model.space, model.beta,
                        normalize_rows_finite(l1.values + noise, model.beta, lw), seed + k, 0)
        d0 = population_distance(l1, l2)
        if d0 == 0:
            raise ArgumentError("contraction diagnostic needs distinct pools")
        d1 = population_distance(population_step(l1, model), population_step(l2, model))
        ratios.append(d1 / d0)
    return float(np.median(ratios)), float(model.contraction_bound())


# --------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, pop: Population, model: ModelSpec) -> None:
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "model_digest": model.digest(),
        "spin_grid": [float(x) for x in model.space.points],
        "beta": "inf" if pop.is_zero_temp else pop.beta,
        "M": pop.size,
        "iteration": pop.iteration,
        "seed": pop.seed,
        "fields": pop.values.tolist(),
    }
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(doc, fh)
    os.replace(tmp, path)


def load_checkpoint(path, model: ModelSpec) -> Population:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format_version") != CHECKPOINT_VERSION:
        raise ArgumentError(f"{path}: unsupported checkpoint version")
    if doc.get("model_digest") != model.digest():
        raise DigestMismatchError(f"{path}: checkpoint belongs to a different model")
    beta = math.inf if doc["beta"] == "inf" else float(doc["beta"])
    vals = np.asarray(doc["fields"], dtype=float)
    return Population(model.space, beta, vals, int(doc["seed"]), int(doc["iteration"]),
                      {"model": doc["model_digest"]})
