"""Finite atomic measure spaces and symmetric kernels on them.

A kernel of order m is stored as a dense ``n**m`` array of coefficients in the
orthonormal basis ``e_i = 1_{atom i} / sqrt(mu_i)``.  With that convention the
L2(mu^m) inner product and every contraction are plain weight-free sums; the
``sqrt(mu)`` change of coordinates happens once, in :func:`kernel_from_values`.

Atoms are numbered from 0 in the Python API.  Error messages report 1-based
atom numbers.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence, Union

import numpy as np

from .errors import (
    AsymmetricInput,
    EmptySpace,
    InvalidContractionOrder,
    NonPositiveWeight,
    OrderMismatch,
    SpaceMismatch,
)

MAX_ORDER = 8
SYMMETRY_RTOL = 1e-9


@dataclass(frozen=True)
class MeasureSpace:
    weights: tuple[float, ...]

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def total_mass(self) -> float:
        return math.fsum(self.weights)

    @property
    def sqrt_weights(self) -> np.ndarray:
        return np.sqrt(np.asarray(self.weights, dtype=float))


def make_space(weights: Sequence[float]) -> MeasureSpace:
    ws = [float(w) for w in weights]
    if not ws:
        raise EmptySpace("a measure space needs at least one atom")
    for i, w in enumerate(ws):
        if not (w > 0.0 and math.isfinite(w)):
            raise NonPositiveWeight(i + 1, w)
    return MeasureSpace(tuple(ws))


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SymmetricKernel:
    """Order-``order`` symmetric tensor in orthonormal coordinates.

    Construct through :func:`kernel_from_values`, :func:`symmetrize` or
    :func:`kernel_from_coeffs`; the dataclass constructor does not re-check
    symmetry.
    """

    order: int
    space: MeasureSpace
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        shape = (self.space.n,) * self.order
        if self.coeffs.shape != shape:
            raise ValueError(f"coeffs shape {self.coeffs.shape} != {shape}")
        if self.coeffs.flags.writeable:
            object.__setattr__(self, "coeffs", _frozen(self.coeffs))

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.coeffs * self.coeffs)))

    def __add__(self, other: "SymmetricKernel") -> "SymmetricKernel":
        _check_compatible(self, other)
        return SymmetricKernel(self.order, self.space, self.coeffs + other.coeffs)

    def __sub__(self, other: "SymmetricKernel") -> "SymmetricKernel":
        return self + (-1.0) * other

    def __mul__(self, c: float) -> "SymmetricKernel":
        return SymmetricKernel(self.order, self.space, float(c) * self.coeffs)

    __rmul__ = __mul__

    def __neg__(self) -> "SymmetricKernel":
        return (-1.0) * self

    def pointwise_values(self) -> np.ndarray:
        """Kernel values f(i1..im); the inverse of the ingestion scaling."""
        return self.coeffs / _weight_tensor(self.space.sqrt_weights, self.order)


@dataclass(frozen=True)
class KernelPair:
    """The pair (f, g) behind X = I_p(f), Y = I_q(g)."""

    f: SymmetricKernel
    g: SymmetricKernel

    def __post_init__(self):
        if self.f.space != self.g.space:
            raise SpaceMismatch("pair kernels live on different spaces")
        if self.f.order == self.g.order:
            raise OrderMismatch(f"pair needs distinct orders, both are {self.p}")

    @property
    def p(self) -> int:
        return self.f.order

    @property
    def q(self) -> int:
        return self.g.order

    @property
    def space(self) -> MeasureSpace:
        return self.f.space

    @property
    def odd_even(self) -> bool:
        """True when p is odd and q is even (the parity mode)."""
        return self.p % 2 == 1 and self.q % 2 == 0

    @property
    def opposite_parity(self) -> bool:
        return (self.p + self.q) % 2 == 1


def _weight_tensor(sqrt_w: np.ndarray, order: int) -> np.ndarray:
    out = np.ones(())
    for _ in range(order):
        out = np.multiply.outer(out, sqrt_w)
    return out


def _check_compatible(f: SymmetricKernel, g: SymmetricKernel) -> None:
    if f.space != g.space:
        raise SpaceMismatch("kernels live on different measure spaces")
    if f.order != g.order:
        raise OrderMismatch(f"orders differ: {f.order} vs {g.order}")


def _check_order(order: int) -> None:
    if order < 0 or order > MAX_ORDER:
        raise ValueError(f"kernel order must be in [0, {MAX_ORDER}], got {order}")


def symmetry_defect(arr: np.ndarray) -> float:
    """Largest change of any entry under an adjacent transposition of axes."""
    worst = 0.0
    for j in range(arr.ndim - 1):
        worst = max(worst, float(np.max(np.abs(arr - np.swapaxes(arr, j, j + 1)), initial=0.0)))
    return worst


def sym_array(arr: np.ndarray) -> np.ndarray:
    """Average of ``arr`` over all permutations of its axes.

    Uses the coset decomposition S_m = U_j (j m) S_{m-1}: symmetrize the first
    m-1 axes, then average over the m transpositions that move the last axis.
    Cost is O(m^2) array passes instead of m!.
    """
    arr = np.asarray(arr, dtype=float)
    m = arr.ndim
    if m <= 1:
        return arr.copy()
    out = arr
    for k in range(2, m + 1):
        acc = out.copy()
        for j in range(k - 1):
            acc += np.swapaxes(out, j, k - 1)
        out = acc / k
    return out


def kernel_from_coeffs(space: MeasureSpace, coeffs, check: bool = True) -> SymmetricKernel:
    """Wrap an array already expressed in orthonormal coordinates."""
    arr = np.asarray(coeffs, dtype=float)
    _check_order(arr.ndim)
    if check:
        _check_symmetric(arr)
    return SymmetricKernel(arr.ndim, space, arr)


def _check_symmetric(arr: np.ndarray) -> None:
    scale = 1.0 + float(np.max(np.abs(arr), initial=0.0))
    defect = symmetry_defect(arr)
    if defect > SYMMETRY_RTOL * scale:
        raise AsymmetricInput(
            f"max deviation under index permutation {defect:.3e} exceeds "
            f"{SYMMETRY_RTOL:g}*(1+max|entry|); symmetrize first"
        )


def kernel_from_values(
    space: MeasureSpace,
    order: int,
    values: Union[Callable[..., float], np.ndarray, Sequence, float],
) -> SymmetricKernel:
    """Ingest pointwise kernel values f(i1, ..., im).

    ``values`` is a callable taking ``order`` 0-based atom indices, an array of
    shape ``(n,)*order``, or a flat row-major sequence of length ``n**order``.
    """
    _check_order(order)
    n = space.n
    if callable(values):
        arr = np.empty((n,) * order)
        for idx in itertools.product(range(n), repeat=order):
            arr[idx] = values(*idx)
    else:
        arr = np.asarray(values, dtype=float)
        if arr.shape != (n,) * order:
            if arr.size != n**order:
                raise ValueError(f"expected {n**order} values for order {order} on {n} atoms, got {arr.size}")
            arr = arr.reshape((n,) * order)
    _check_symmetric(arr)
    return SymmetricKernel(order, space, arr * _weight_tensor(space.sqrt_weights, order))


def zero_kernel(space: MeasureSpace, order: int) -> SymmetricKernel:
    return SymmetricKernel(order, space, np.zeros((space.n,) * order))


def basis_kernel(space: MeasureSpace, *atoms: int) -> SymmetricKernel:
    """Symmetrization of e_{a1} (x) ... (x) e_{am}."""
    arr = np.zeros((space.n,) * len(atoms))
    arr[tuple(atoms)] = 1.0
    return SymmetricKernel(len(atoms), space, sym_array(arr))


def inner(f: SymmetricKernel, g: SymmetricKernel) -> float:
    _check_compatible(f, g)
    return float(np.vdot(f.coeffs, g.coeffs))


def symmetrize(raw, space: MeasureSpace) -> SymmetricKernel:
    arr = np.asarray(raw, dtype=float)
    _check_order(arr.ndim)
    if arr.shape != (space.n,) * arr.ndim:
        raise ValueError(f"tensor shape {arr.shape} does not match a space of {space.n} atoms")
    return SymmetricKernel(arr.ndim, space, sym_array(arr))


def contract(f: SymmetricKernel, g: SymmetricKernel, r: int) -> np.ndarray:
    """r-th contraction f (x)_r g as a dense array of order p+q-2r.

    Output axes are the p-r free axes of f followed by the q-r free axes of g.
    """
    if f.space != g.space:
        raise SpaceMismatch("kernels live on different measure spaces")
    p, q = f.order, g.order
    if not 0 <= r <= min(p, q):
        raise InvalidContractionOrder(f"r={r} outside [0, min({p}, {q})]")
    if r == 0:
        return np.multiply.outer(f.coeffs, g.coeffs)
    axes_f = list(range(p - r, p))
    axes_g = list(range(q - r, q))
    return np.tensordot(f.coeffs, g.coeffs, axes=(axes_f, axes_g))


def sym_contract(f: SymmetricKernel, g: SymmetricKernel, r: int) -> SymmetricKernel:
    raw = contract(f, g, r)
    return SymmetricKernel(raw.ndim, f.space, sym_array(raw))


def random_kernel(space: MeasureSpace, order: int, rng: np.random.Generator, scale: float = 1.0) -> SymmetricKernel:
    """Symmetrized Gaussian tensor, for randomized identity checks."""
    raw = rng.standard_normal((space.n,) * order) * scale
    return SymmetricKernel(order, space, sym_array(raw))


# -- JSON ingestion -----------------------------------------------------------

def kernel_from_json(obj: dict) -> SymmetricKernel:
    """Parse ``{"weights": [...], "order": m, "values": [...]}``.

    ``values`` is flat, row-major, pointwise coordinates, first index slowest.
    """
    space = make_space(obj["weights"])
    return kernel_from_values(space, int(obj["order"]), obj["values"])


def load_kernel(path: Union[str, Path]) -> SymmetricKernel:
    with open(path) as fh:
        return kernel_from_json(json.load(fh))


def kernel_to_json(f: SymmetricKernel) -> dict:
    return {
        "weights": list(f.space.weights),
        "order": f.order,
        "values": [float(v) for v in f.pointwise_values().reshape(-1)],
    }
