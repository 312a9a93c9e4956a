"""Monte Carlo sampling of multiple Wiener-Ito integrals on atoms.

On a finite space the isonormal process is W(e_i) = xi_i with xi iid N(0,1).
A symmetric kernel is regrouped by index multisets: if lambda has atom counts
(k_1..k_d) and common coefficient c, its contribution to I_m(f) is
c * m!/prod(k_j!) * prod_j He_{k_j}(xi_{a_j}).
"""
from __future__ import annotations

import csv
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .space_kernel import KernelPair, MeasureSpace, SymmetricKernel
from . import streams

# caps the (rows x multisets) temporaries built during evaluation
_BLOCK_ELEMS = 1 << 22


def hermite(k: int, x):
    """Probabilists' Hermite polynomial He_k evaluated at x (scalar or array)."""
    if k < 0:
        raise ValueError("k must be >= 0")
    x = np.asarray(x, dtype=float)
    prev, cur = np.ones_like(x), x.copy()
    if k == 0:
        return prev if prev.ndim else float(prev)
    for j in range(1, k):
        prev, cur = cur, x * cur - j * prev
    return cur if cur.ndim else float(cur)


def hermite_table(kmax: int, x: np.ndarray) -> np.ndarray:
    """Stack He_0..He_kmax at x; shape (kmax+1, *x.shape)."""
    out = np.empty((kmax + 1,) + x.shape)
    out[0] = 1.0
    if kmax >= 1:
        out[1] = x
    for j in range(1, kmax):
        out[j + 1] = x * out[j] - j * out[j - 1]
    return out


@dataclass(frozen=True)
class MultisetGroup:
    powers: tuple[int, ...]   # k_1 >= k_2 >= ... for this group
    atoms: np.ndarray         # (L, d) distinct atoms, column j carries power k_j
    weights: np.ndarray       # (L,) c_lambda * m! / prod k_j!


@dataclass(frozen=True)
class MultisetPlan:
    order: int
    constant: float
    groups: tuple[MultisetGroup, ...]


def _plan(f: SymmetricKernel) -> MultisetPlan:
    m = f.order
    if m == 0:
        return MultisetPlan(0, float(f.coeffs), ())
    c = f.coeffs
    idx = np.argwhere(c != 0.0)
    if idx.size:
        idx = idx[np.all(np.diff(idx, axis=1) >= 0, axis=1)]
    buckets = defaultdict(lambda: ([], []))
    mfact = math.factorial(m)
    for row in idx:
        counts = Counter(row.tolist())
        items = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        powers = tuple(k for _, k in items)
        w = float(c[tuple(row)]) * mfact / math.prod(math.factorial(k) for k in powers)
        atoms, weights = buckets[powers]
        atoms.append([a for a, _ in items])
        weights.append(w)
    groups = tuple(
        MultisetGroup(powers, np.asarray(a, dtype=np.intp), np.asarray(w))
        for powers, (a, w) in sorted(buckets.items())
    )
    return MultisetPlan(m, 0.0, groups)


_plan_cache: dict[int, tuple[SymmetricKernel, MultisetPlan]] = {}


def multiset_plan(f: SymmetricKernel) -> MultisetPlan:
    """Multiset decomposition of ``f``, cached per kernel object."""
    hit = _plan_cache.get(id(f))
    if hit is not None and hit[0] is f:
        return hit[1]
    plan = _plan(f)
    if len(_plan_cache) > 256:
        _plan_cache.clear()
    _plan_cache[id(f)] = (f, plan)
    return plan


def eval_plan(plan: MultisetPlan, table: np.ndarray) -> np.ndarray:
    """Evaluate a plan given per-atom univariate values.

    ``table[k, r, i]`` is the degree-k orthonormal polynomial of atom i in row r.
    """
    rows = table.shape[1]
    out = np.full(rows, plan.constant)
    for grp in plan.groups:
        L = len(grp.weights)
        block = max(1, _BLOCK_ELEMS // max(rows, 1))
        for lo in range(0, L, block):
            hi = min(L, lo + block)
            prod = table[grp.powers[0]][:, grp.atoms[lo:hi, 0]]
            for j in range(1, len(grp.powers)):
                prod = prod * table[grp.powers[j]][:, grp.atoms[lo:hi, j]]
            out += prod @ grp.weights[lo:hi]
    return out


@dataclass(frozen=True)
class GaussianDraw:
    """Rows of iid standard normals, one column per atom."""

    xi: np.ndarray

    @property
    def rows(self) -> int:
        return self.xi.shape[0]


def draw_gaussian(space: MeasureSpace, count: int, seed: int, chunk: int = 0) -> GaussianDraw:
    gen = streams.chunk_generator(seed, chunk)
    return GaussianDraw(streams.normals(gen, (count, space.n)))


def eval_integral(f: SymmetricKernel, draw: Union[GaussianDraw, np.ndarray]):
    """I_m(f) at each row of ``draw``; a single 1-D draw gives a scalar."""
    xi = draw.xi if isinstance(draw, GaussianDraw) else np.asarray(draw, dtype=float)
    single = xi.ndim == 1
    xi = np.atleast_2d(xi)
    if xi.shape[1] != f.space.n:
        raise ValueError(f"draw has {xi.shape[1]} atoms, kernel space has {f.space.n}")
    out = eval_plan(multiset_plan(f), hermite_table(max(f.order, 1), xi))
    return float(out[0]) if single else out


@dataclass(frozen=True)
class SampleBatch:
    seed: int
    count: int
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    sampler_kind: str

    def column(self, name: str) -> np.ndarray:
        return {"x": self.x, "y": self.y, "z": self.z}[name]

    def to_csv(self, path: Union[str, Path]) -> None:
        write_batch_csv(self, path)


def write_batch_csv(batch: SampleBatch, path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "z"])
        for row in zip(batch.x, batch.y, batch.z):
            w.writerow([repr(float(v)) for v in row])


def read_batch_csv(path: Union[str, Path], seed: int = 0, sampler_kind: str = "gaussian") -> SampleBatch:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return SampleBatch(seed, len(data), data[:, 0], data[:, 1], data[:, 2], sampler_kind)


def sample_pair(pair: KernelPair, count: int, seed: int, threads: int = 1) -> SampleBatch:
    """Draw (X, Y, Z = X + Y) for X = I_p(f), Y = I_q(g)."""
    if count < 1:
        raise ValueError("count must be >= 1")
    f, g = pair.f, pair.g
    kmax = max(f.order, g.order, 1)
    plan_f, plan_g = multiset_plan(f), multiset_plan(g)

    def chunk(k: int, rows: int):
        xi = streams.normals(streams.chunk_generator(seed, k), (rows, pair.space.n))
        table = hermite_table(kmax, xi)
        return eval_plan(plan_f, table), eval_plan(plan_g, table)

    parts = streams.map_chunks(chunk, count, threads)
    x = np.concatenate([a for a, _ in parts])
    y = np.concatenate([b for _, b in parts])
    return SampleBatch(seed, count, x, y, x + y, "gaussian")


def sample_kernel(f: SymmetricKernel, count: int, seed: int, threads: int = 1) -> np.ndarray:
    """Draws of a single I_m(f), sharing the chunked stream layout."""
    plan = multiset_plan(f)
    kmax = max(f.order, 1)

    def chunk(k: int, rows: int):
        xi = streams.normals(streams.chunk_generator(seed, k), (rows, f.space.n))
        return eval_plan(plan, hermite_table(kmax, xi))

    return np.concatenate(streams.map_chunks(chunk, count, threads))
