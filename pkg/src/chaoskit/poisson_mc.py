"""Multiple Poisson-Ito integrals on atoms via Charlier polynomials.

With independent counts N_i ~ Poisson(mu_i), I_k(e_i^{(x)k}) equals
C_k(N_i; mu_i) / mu_i^{k/2}, where e_i = 1_i / sqrt(mu_i).  Kernels are then
evaluated by the same multiset regrouping as the Gaussian sampler.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from . import streams
from .gaussian_mc import SampleBatch, eval_plan, multiset_plan
from .space_kernel import KernelPair, MeasureSpace, SymmetricKernel


def charlier(k: int, x, lam: float):
    """Charlier polynomial C_k(x; lam), normalized so E[C_k(N)^2] = k! lam^k."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if not lam > 0:
        raise ValueError("lam must be > 0")
    x = np.asarray(x, dtype=float)
    prev, cur = np.ones_like(x), x - lam
    if k == 0:
        return prev if prev.ndim else float(prev)
    for j in range(1, k):
        prev, cur = cur, (x - j - lam) * cur - j * lam * prev
    return cur if cur.ndim else float(cur)


def charlier_table(kmax: int, counts: np.ndarray, mu) -> np.ndarray:
    """Orthonormalized values C_k(N_i; mu_i) / mu_i^{k/2}, shape (kmax+1, rows, n)."""
    mu = np.asarray(mu, dtype=float)
    x = np.asarray(counts, dtype=float)
    raw = np.empty((kmax + 1,) + x.shape)
    raw[0] = 1.0
    if kmax >= 1:
        raw[1] = x - mu
    for j in range(1, kmax):
        raw[j + 1] = (x - j - mu) * raw[j] - j * mu * raw[j - 1]
    scale = np.sqrt(mu)
    for j in range(1, kmax + 1):
        raw[j] /= scale**j
    return raw


@dataclass(frozen=True)
class PoissonDraw:
    counts: np.ndarray

    @property
    def rows(self) -> int:
        return self.counts.shape[0]


def draw_poisson(space: MeasureSpace, count: int, seed: int, chunk: int = 0) -> PoissonDraw:
    gen = streams.chunk_generator(seed, chunk)
    return PoissonDraw(streams.poisson_counts(gen, count, space.weights))


def eval_poisson_integral(f: SymmetricKernel, draw: Union[PoissonDraw, np.ndarray]):
    counts = draw.counts if isinstance(draw, PoissonDraw) else np.asarray(draw)
    single = counts.ndim == 1
    counts = np.atleast_2d(counts)
    if counts.shape[1] != f.space.n:
        raise ValueError(f"draw has {counts.shape[1]} atoms, kernel space has {f.space.n}")
    table = charlier_table(max(f.order, 1), counts, f.space.weights)
    out = eval_plan(multiset_plan(f), table)
    return float(out[0]) if single else out


def sample_poisson_pair(pair: KernelPair, count: int, seed: int, threads: int = 1) -> SampleBatch:
    """Draw (X, Y, Z) for X = I_p^eta(f), Y = I_q^eta(g)."""
    if count < 1:
        raise ValueError("count must be >= 1")
    f, g = pair.f, pair.g
    kmax = max(f.order, g.order, 1)
    mu = pair.space.weights
    plan_f, plan_g = multiset_plan(f), multiset_plan(g)

    def chunk(k: int, rows: int):
        counts = streams.poisson_counts(streams.chunk_generator(seed, k), rows, mu)
        table = charlier_table(kmax, counts, mu)
        return eval_plan(plan_f, table), eval_plan(plan_g, table)

    parts = streams.map_chunks(chunk, count, threads)
    x = np.concatenate([a for a, _ in parts])
    y = np.concatenate([b for _, b in parts])
    return SampleBatch(seed, count, x, y, x + y, "poisson")


def sample_poisson_kernel(f: SymmetricKernel, count: int, seed: int, threads: int = 1) -> np.ndarray:
    plan = multiset_plan(f)
    kmax = max(f.order, 1)
    mu = f.space.weights

    def chunk(k: int, rows: int):
        counts = streams.poisson_counts(streams.chunk_generator(seed, k), rows, mu)
        return eval_plan(plan, charlier_table(kmax, counts, mu))

    return np.concatenate(streams.map_chunks(chunk, count, threads))
