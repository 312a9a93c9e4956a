"""Reproducible random streams for the samplers.

Algorithm (frozen; changing any of it changes every sampled number):

* Draws are produced in chunks of ``CHUNK_ROWS`` rows.  Chunk ``k`` of a run
  with seed ``s`` uses a Philox-4x64 counter-based generator keyed by
  ``SeedSequence(entropy=s mod 2**64, spawn_key=(k,))``.  Chunks are therefore
  independent substreams and can be computed in any order or in parallel.
* Uniforms come from ``Generator.random`` (53-bit) shifted by 2**-54 so they
  lie strictly inside (0, 1).
* Standard normals use inversion, ``scipy.special.ndtri(u)``.
* Poisson(mu) counts use inversion by sequential search of the pmf.

Only within-build determinism is promised.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np
from scipy.special import ndtri

CHUNK_ROWS = 1 << 16
_HALF_ULP = 2.0**-54
_MASK64 = (1 << 64) - 1

T = TypeVar("T")


def chunk_generator(seed: int, chunk: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) & _MASK64, spawn_key=(int(chunk),))
    return np.random.Generator(np.random.Philox(ss))


def open_uniforms(gen: np.random.Generator, shape) -> np.ndarray:
    return gen.random(shape) + _HALF_ULP


def normals(gen: np.random.Generator, shape) -> np.ndarray:
    return ndtri(open_uniforms(gen, shape))


def poisson_counts(gen: np.random.Generator, rows: int, mu: Sequence[float]) -> np.ndarray:
    """Counts N[r, i] ~ Poisson(mu[i]) by inversion."""
    mu = np.asarray(mu, dtype=float)
    u = open_uniforms(gen, (rows, mu.size))
    counts = np.zeros(u.shape, dtype=np.int64)
    pmf = np.broadcast_to(np.exp(-mu), u.shape).copy()
    cdf = pmf.copy()
    active = u > cdf
    x = 0
    while active.any():
        x += 1
        pmf *= mu / x
        cdf += pmf
        counts[active] = x
        active &= u > cdf
        # cdf can saturate a few ulps below 1; nothing beyond this is reachable
        if not pmf[active].any():
            break
    return counts


def chunk_bounds(count: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + CHUNK_ROWS, count)) for lo in range(0, count, CHUNK_ROWS)]


def map_chunks(fn: Callable[[int, int], T], count: int, threads: int = 1) -> list[T]:
    """Apply ``fn(chunk_index, rows)`` to every chunk, results in chunk order."""
    jobs = [(k, hi - lo) for k, (lo, hi) in enumerate(chunk_bounds(count))]
    if threads <= 1 or len(jobs) <= 1:
        return [fn(k, rows) for k, rows in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))
