"""Exact chaos-expansion arithmetic on a finite atomic space.

A :class:`ChaosExpansion` is a finite sum ``c0 + sum_m I_m(f_m)``.  Products are
expanded with the multiplication formula for multiple Wiener-Ito integrals,
expectations with the isometry, so every moment below is exact up to
floating-point roundoff.

Two independent routes are kept on purpose: fourth cumulants and Cov(X^2, Y^2)
are computed by squaring expansions, while :func:`cov_squares_formula` and
:func:`cross_second_moment` evaluate closed forms from contraction norms.  The
identity checks compare the two.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Mapping

import numpy as np

from .errors import DegreeCap, NotCentered, NotNormalized, SpaceMismatch
from .space_kernel import (
    KernelPair,
    MeasureSpace,
    SymmetricKernel,
    contract,
    sym_array,
    sym_contract,
)

PRUNE_RTOL = 1e-14
MIXED_DEGREE_CAP = 4
CENTER_TOL = 1e-12
NORMALIZE_TOL = 1e-9
DENSE_LIMIT = 1 << 25


def product_coefficient(p: int, q: int, r: int) -> int:
    """r! C(p, r) C(q, r), exact."""
    return math.factorial(r) * math.comb(p, r) * math.comb(q, r)


@dataclass(frozen=True, eq=False)
class ChaosExpansion:
    space: MeasureSpace
    terms: Mapping[int, SymmetricKernel] = field(default_factory=dict)

    def __post_init__(self):
        for m, k in self.terms.items():
            if k.order != m:
                raise ValueError(f"term stored under order {m} has order {k.order}")
            if k.space != self.space:
                raise SpaceMismatch("expansion term on a foreign space")
        norms = {m: k.norm() for m, k in self.terms.items()}
        cut = PRUNE_RTOL * (1.0 + max(norms.values(), default=0.0))
        kept = {m: self.terms[m] for m in sorted(self.terms) if norms[m] > cut}
        object.__setattr__(self, "terms", kept)

    @classmethod
    def of(cls, *kernels: SymmetricKernel) -> "ChaosExpansion":
        """Expansion sum_i I_{m_i}(f_i); kernels of equal order are added."""
        if not kernels:
            raise ValueError("need at least one kernel")
        space = kernels[0].space
        acc: dict[int, np.ndarray] = {}
        for k in kernels:
            if k.space != space:
                raise SpaceMismatch("kernels live on different spaces")
            acc[k.order] = acc.get(k.order, 0.0) + k.coeffs
        return cls._from_arrays(space, acc)

    @classmethod
    def constant(cls, space: MeasureSpace, c: float) -> "ChaosExpansion":
        return cls(space, {0: SymmetricKernel(0, space, np.asarray(float(c)))})

    @classmethod
    def _from_arrays(cls, space: MeasureSpace, arrays: Mapping[int, np.ndarray]) -> "ChaosExpansion":
        return cls(space, {m: SymmetricKernel(m, space, np.asarray(a, dtype=float)) for m, a in arrays.items()})

    @property
    def mean(self) -> float:
        k = self.terms.get(0)
        return 0.0 if k is None else float(k.coeffs)

    @property
    def orders(self) -> list[int]:
        return sorted(self.terms)

    def centered(self) -> "ChaosExpansion":
        return ChaosExpansion(self.space, {m: k for m, k in self.terms.items() if m > 0})

    def second_moment(self) -> float:
        return expect_product(self, self)

    def variance(self) -> float:
        return sum(math.factorial(m) * float(np.vdot(k.coeffs, k.coeffs)) for m, k in self.terms.items() if m > 0)

    def __add__(self, other: "ChaosExpansion") -> "ChaosExpansion":
        _same_space(self, other)
        acc = {m: k.coeffs for m, k in self.terms.items()}
        for m, k in other.terms.items():
            acc[m] = acc[m] + k.coeffs if m in acc else k.coeffs
        return ChaosExpansion._from_arrays(self.space, acc)

    def __mul__(self, c: float) -> "ChaosExpansion":
        return ChaosExpansion(self.space, {m: k * c for m, k in self.terms.items()})

    __rmul__ = __mul__


def _same_space(F: ChaosExpansion, G: ChaosExpansion) -> None:
    if F.space != G.space:
        raise SpaceMismatch("expansions live on different measure spaces")


def multiply(F: ChaosExpansion, G: ChaosExpansion) -> ChaosExpansion:
    """Chaos expansion of the product F*G.

    I_p(f) I_q(g) = sum_r r! C(p,r) C(q,r) I_{p+q-2r}(f ~(x)_r g), extended
    bilinearly over the terms of both factors.
    """
    _same_space(F, G)
    top = max(F.orders, default=0) + max(G.orders, default=0)
    if F.space.n**top > DENSE_LIMIT:
        raise ValueError(
            f"product needs a dense order-{top} tensor on {F.space.n} atoms "
            f"({F.space.n**top} entries > {DENSE_LIMIT}); split into independent blocks"
        )
    raw: dict[int, np.ndarray] = {}
    for p, f in F.terms.items():
        for q, g in G.terms.items():
            for r in range(min(p, q) + 1):
                term = product_coefficient(p, q, r) * contract(f, g, r)
                order = p + q - 2 * r
                raw[order] = raw[order] + term if order in raw else term
    # symmetrize once per output order rather than per contraction
    return ChaosExpansion._from_arrays(F.space, {m: sym_array(a) for m, a in raw.items()})


def expect_product(F: ChaosExpansion, G: ChaosExpansion) -> float:
    """E[F G] = c0(F) c0(G) + sum_m m! <f_m, g_m>."""
    _same_space(F, G)
    total = 0.0
    for m, f in F.terms.items():
        g = G.terms.get(m)
        if g is not None:
            total += math.factorial(m) * float(np.vdot(f.coeffs, g.coeffs))
    return total


def _require_centered(F: ChaosExpansion) -> None:
    scale = 1.0 + math.sqrt(max(F.variance(), 0.0))
    if abs(F.mean) > CENTER_TOL * scale:
        raise NotCentered(f"E[F] = {F.mean:.3e}; center the variable first")


def fourth_moment(F: ChaosExpansion) -> float:
    F2 = multiply(F, F)
    return expect_product(F2, F2)


def kappa4(F: ChaosExpansion) -> float:
    """E[F^4] - 3 E[F^2]^2 for a centered expansion."""
    _require_centered(F)
    return fourth_moment(F) - 3.0 * expect_product(F, F) ** 2


def power(F: ChaosExpansion, k: int) -> ChaosExpansion:
    out = ChaosExpansion.constant(F.space, 1.0)
    for _ in range(k):
        out = multiply(out, F)
    return out


def mixed_moment(X: ChaosExpansion, Y: ChaosExpansion, a: int, b: int, cap: int = MIXED_DEGREE_CAP) -> float:
    """Exact E[X^a Y^b]."""
    if a < 0 or b < 0:
        raise ValueError("exponents must be nonnegative")
    if a + b > cap:
        raise DegreeCap(f"degree {a + b} exceeds cap {cap}")
    _same_space(X, Y)
    # split the factors into two halves and pair them with the isometry
    factors = [X] * a + [Y] * b
    half = len(factors) // 2
    left = ChaosExpansion.constant(X.space, 1.0)
    for F in factors[:half]:
        left = multiply(left, F)
    right = ChaosExpansion.constant(X.space, 1.0)
    for F in factors[half:]:
        right = multiply(right, F)
    return expect_product(left, right)


def cov_squares_expand(X: ChaosExpansion, Y: ChaosExpansion) -> float:
    """Cov(X^2, Y^2) by squaring both expansions."""
    X2 = multiply(X, X)
    Y2 = multiply(Y, Y)
    return expect_product(X2, Y2) - X2.mean * Y2.mean


def cov_squares_formula(f: SymmetricKernel, g: SymmetricKernel) -> tuple[float, list[float]]:
    """Closed form of Cov(I_p(f)^2, I_q(g)^2) and its nonnegative W_s summands.

    Cov = sum_s W_s + p! q! sum_s C(p,s) C(q,s) ||f (x)_s g||^2 with
    W_s = [s! C(p,s) C(q,s)]^2 (p+q-2s)! ||f ~(x)_s g||^2, s = 1..min(p,q).
    """
    p, q = f.order, g.order
    w_terms: list[float] = []
    tail = 0.0
    for s in range(1, min(p, q) + 1):
        raw = contract(f, g, s)
        sym = sym_array(raw)
        w = product_coefficient(p, q, s) ** 2 * math.factorial(p + q - 2 * s) * float(np.vdot(sym, sym))
        w_terms.append(w)
        tail += math.comb(p, s) * math.comb(q, s) * float(np.vdot(raw, raw))
    tail *= math.factorial(p) * math.factorial(q)
    return math.fsum(w_terms) + tail, w_terms


def derivative_coefficient(p: int, q: int, s: int) -> int:
    """p q (s-1)! C(p-1, s-1) C(q-1, s-1)."""
    return p * q * math.factorial(s - 1) * math.comb(p - 1, s - 1) * math.comb(q - 1, s - 1)


def cross_derivative(f: SymmetricKernel, g: SymmetricKernel) -> ChaosExpansion:
    """Chaos expansion of <DX, DY> for X = I_p(f), Y = I_q(g)."""
    p, q = f.order, g.order
    if p < 1 or q < 1:
        raise ValueError("derivatives need orders >= 1")
    arrays: dict[int, np.ndarray] = {}
    for s in range(1, min(p, q) + 1):
        order = p + q - 2 * s
        term = derivative_coefficient(p, q, s) * sym_contract(f, g, s).coeffs
        arrays[order] = arrays[order] + term if order in arrays else term
    return ChaosExpansion._from_arrays(f.space, arrays)


def cross_second_moment(f: SymmetricKernel, g: SymmetricKernel) -> float:
    """E<DX, DY>^2 from contraction norms, without building <DX, DY>."""
    p, q = f.order, g.order
    total = []
    for s in range(1, min(p, q) + 1):
        norm2 = sym_contract(f, g, s).norm() ** 2
        total.append(derivative_coefficient(p, q, s) ** 2 * math.factorial(p + q - 2 * s) * norm2)
    return math.fsum(total)


def stein_expansion(f: SymmetricKernel, g: SymmetricKernel) -> ChaosExpansion:
    """<DZ, -DL^{-1}Z> for Z = I_p(f) + I_q(g), using -DL^{-1} I_m = D I_m / m."""
    p, q = f.order, g.order
    dxx = cross_derivative(f, f)
    dyy = cross_derivative(g, g)
    dxy = cross_derivative(f, g)
    return dxx * (1.0 / p) + dyy * (1.0 / q) + dxy * (1.0 / p + 1.0 / q)


def var_stein(f: SymmetricKernel, g: SymmetricKernel) -> float:
    return stein_expansion(f, g).variance()


def single_chaos_stein(f: SymmetricKernel) -> float:
    """E[(sigma^2 - ||DF||^2 / m)^2] for F = I_m(f)."""
    m = f.order
    G = cross_derivative(f, f) * (1.0 / m)
    sigma2 = math.factorial(m) * f.norm() ** 2
    return (G.mean - sigma2) ** 2 + G.variance()


@dataclass
class CumulantReport:
    sigma_p2: float
    sigma_q2: float
    kappa4_x: float
    kappa4_y: float
    kappa4_z: float
    cov_sq: float
    mixed31: float
    mixed13: float
    w_terms: list[float]
    cross_second_moment: float
    var_stein: float
    tv_bound_kappa: float
    tv_bound_stein: float

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def scale(self) -> float:
        return max(1.0, self.sigma_p2 + self.sigma_q2) ** 2

    def decomposition_residual(self) -> float:
        """|k4(Z) - k4(X) - k4(Y) - 6 Cov - 4 E[X^3Y] - 4 E[XY^3]|."""
        return abs(
            self.kappa4_z
            - self.kappa4_x
            - self.kappa4_y
            - 6.0 * self.cov_sq
            - 4.0 * self.mixed31
            - 4.0 * self.mixed13
        )


def atom_blocks(*kernels: SymmetricKernel) -> list[list[int]]:
    """Connected components of atoms coupled by some nonzero kernel entry.

    Integrals restricted to different components are independent.
    """
    n = kernels[0].space.n
    parent = list(range(n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for k in kernels:
        if k.order < 2:
            continue
        idx = np.argwhere(k.coeffs != 0.0)
        for row in idx[np.all(np.diff(idx, axis=1) >= 0, axis=1)]:
            root = find(int(row[0]))
            for a in row[1:]:
                ra = find(int(a))
                if ra != root:
                    parent[ra] = root
    blocks: dict[int, list[int]] = {}
    for a in range(n):
        blocks.setdefault(find(a), []).append(a)
    return list(blocks.values())


def restrict(f: SymmetricKernel, atoms: list[int]) -> SymmetricKernel:
    """Kernel restricted to a subset of atoms, on the corresponding sub-space."""
    sub = MeasureSpace(tuple(f.space.weights[a] for a in atoms))
    if f.order == 0:
        return SymmetricKernel(0, sub, f.coeffs)
    return SymmetricKernel(f.order, sub, f.coeffs[np.ix_(*([atoms] * f.order))])


def report(pair: KernelPair, normalized: bool = True, split_blocks: bool = True) -> CumulantReport:
    """All two-chaos quantities for (X, Y) = (I_p(f), I_q(g)).

    With ``split_blocks`` the pair is first split into independent atom
    blocks; every reported quantity is additive over such blocks, which
    keeps large diagonal families within dense-tensor reach.
    """
    f, g = pair.f, pair.g
    sigma_p2 = math.factorial(pair.p) * f.norm() ** 2
    sigma_q2 = math.factorial(pair.q) * g.norm() ** 2
    if normalized and abs(sigma_p2 + sigma_q2 - 1.0) > NORMALIZE_TOL:
        raise NotNormalized(f"E[Z^2] = {sigma_p2 + sigma_q2!r}, expected 1")
    blocks = atom_blocks(f, g) if split_blocks else [list(range(f.space.n))]
    if len(blocks) == 1:
        return _report_dense(f, g)
    parts = []
    for atoms in blocks:
        fb, gb = restrict(f, atoms), restrict(g, atoms)
        if fb.norm() == 0.0 and gb.norm() == 0.0:
            continue
        parts.append(_report_dense(fb, gb))
    total = {}
    for name in ("sigma_p2", "sigma_q2", "kappa4_x", "kappa4_y", "kappa4_z", "cov_sq",
                 "mixed31", "mixed13", "cross_second_moment", "var_stein"):
        total[name] = math.fsum(getattr(r, name) for r in parts)
    total["w_terms"] = [math.fsum(ws) for ws in zip(*(r.w_terms for r in parts))]
    return CumulantReport(
        **total,
        tv_bound_kappa=math.sqrt(6.0 * max(total["kappa4_z"], 0.0)),
        tv_bound_stein=2.0 * math.sqrt(max(total["var_stein"], 0.0)),
    )


def _report_dense(f: SymmetricKernel, g: SymmetricKernel) -> CumulantReport:
    p, q = f.order, g.order
    sigma_p2 = math.factorial(p) * f.norm() ** 2
    sigma_q2 = math.factorial(q) * g.norm() ** 2
    X = ChaosExpansion.of(f)
    Y = ChaosExpansion.of(g)
    Z = X + Y
    k4z = kappa4(Z)
    _, w_terms = cov_squares_formula(f, g)
    vs = var_stein(f, g)
    return CumulantReport(
        sigma_p2=sigma_p2,
        sigma_q2=sigma_q2,
        kappa4_x=kappa4(X),
        kappa4_y=kappa4(Y),
        kappa4_z=k4z,
        cov_sq=cov_squares_expand(X, Y),
        mixed31=mixed_moment(X, Y, 3, 1),
        mixed13=mixed_moment(X, Y, 1, 3),
        w_terms=w_terms,
        cross_second_moment=cross_second_moment(f, g),
        var_stein=vs,
        tv_bound_kappa=math.sqrt(6.0 * max(k4z, 0.0)),
        tv_bound_stein=2.0 * math.sqrt(max(vs, 0.0)),
    )
