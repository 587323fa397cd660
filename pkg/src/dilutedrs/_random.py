"""Counter-based random substreams and capped Poisson sampling."""

from __future__ import annotations

import hashlib
from functools import lru_cache

import numpy as np

from .errors import ResourceError

_TAGS: dict[str, int] = {}


def _tag(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFFFFFFFFFF
    digest = hashlib.sha256(str(key).encode()).digest()
    return int.from_bytes(digest[:8], "little")


def substream(seed: int, *keys) -> np.random.Generator:
    """Generator keyed by ``(seed, *keys)``; independent of call order."""
    words = [_tag(seed)] + [_tag(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(words))


def poisson_cap(mean: float) -> int:
    return int(np.ceil(mean + 12.0 * np.sqrt(mean) + 20.0))


@lru_cache(maxsize=64)
def _poisson_cdf(mean: float) -> np.ndarray:
    cap = poisson_cap(mean)
    k = np.arange(cap + 1)
    logpmf = -mean + k * np.log(mean) - np.cumsum(np.log(np.maximum(k, 1)))
    cdf = np.cumsum(np.exp(logpmf))
    cdf.setflags(write=False)
    return cdf


def poisson(rng: np.random.Generator, mean: float, size: int) -> np.ndarray:
    """Poisson draws by inversion of the pmf table truncated at the cap.

    A uniform landing beyond the tabulated mass raises ``ResourceError``;
    at desk-scale means this has probability below 1e-15.
    """
    if mean < 0:
        raise ValueError("Poisson mean must be nonnegative")
    if mean == 0:
        rng.random(size)  # keep stream consumption independent of the mean
        return np.zeros(size, dtype=np.int64)
    cdf = _poisson_cdf(float(mean))
    u = rng.random(size)
    out = np.searchsorted(cdf, u, side="right")
    if np.any(out >= len(cdf)):
        raise ResourceError(
            f"Poisson({mean}) draw exceeded cap {len(cdf) - 1}"
        )
    return out.astype(np.int64)
