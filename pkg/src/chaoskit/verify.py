"""Randomized identity suite behind ``chaoskit verify``.

Each check draws random kernels with a seeded generator, evaluates one
identity or inequality, and keeps the worst residual.  Residuals are relative
for identities and signed slack (violation amount, clipped at 0) for
inequalities.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from . import chaos
from .chaos import ChaosExpansion, cross_derivative, multiply
from .space_kernel import (
    KernelPair,
    MeasureSpace,
    SymmetricKernel,
    contract,
    make_space,
    random_kernel,
)

DEFAULT_TRIALS = 200


@dataclass
class IdentityResult:
    name: str
    description: str
    trials: int
    max_residual: float
    tolerance: float
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def _space(rng: np.random.Generator, nmax: int) -> MeasureSpace:
    n = int(rng.integers(1, nmax + 1))
    return make_space(rng.uniform(0.5, 2.0, n))


def _orders(rng: np.random.Generator, pmax: int, odd_even: Optional[bool] = None) -> tuple[int, int]:
    while True:
        p, q = (int(v) for v in rng.integers(1, pmax + 1, 2))
        if p == q:
            continue
        if odd_even is True and not (p % 2 == 1 and q % 2 == 0):
            continue
        if odd_even is False and (p + q) % 2 == 1:
            continue
        return p, q


def random_pair(rng: np.random.Generator, pmax: int = 4, nmax: int = 6,
                odd_even: Optional[bool] = None, normalized: bool = False) -> KernelPair:
    space = _space(rng, nmax)
    p, q = _orders(rng, pmax, odd_even)
    f = random_kernel(space, p, rng)
    g = random_kernel(space, q, rng)
    if normalized:
        a2 = float(rng.uniform(0.05, 0.95))
        f = f * math.sqrt(a2 / (math.factorial(p) * f.norm() ** 2))
        g = g * math.sqrt((1 - a2) / (math.factorial(q) * g.norm() ** 2))
    return KernelPair(f, g)


def _pointwise_contraction(f: SymmetricKernel, g: SymmetricKernel, r: int) -> np.ndarray:
    """Direct weighted sum over shared atoms in pointwise coordinates."""
    fv, gv = f.pointwise_values(), g.pointwise_values()
    mu = np.asarray(f.space.weights)
    p, q = f.order, g.order
    n = f.space.n
    out = np.zeros((n,) * (p + q - 2 * r))
    for xs in itertools.product(range(n), repeat=p - r):
        for ys in itertools.product(range(n), repeat=q - r):
            acc = 0.0
            for zs in itertools.product(range(n), repeat=r):
                acc += fv[xs + zs] * gv[ys + zs] * float(np.prod(mu[list(zs)]))
            out[xs + ys] = acc
    return out


def dxdy_by_coordinates(f: SymmetricKernel, g: SymmetricKernel) -> ChaosExpansion:
    """<DX, DY> = p q sum_t I_{p-1}(f(., t)) I_{q-1}(g(., t)).

    Built from the derivative rule and the product formula coordinate by
    coordinate; independent of the closed-form coefficients.
    """
    p, q = f.order, g.order
    total = None
    for t in range(f.space.n):
        ft = SymmetricKernel(p - 1, f.space, f.coeffs[..., t])
        gt = SymmetricKernel(q - 1, g.space, g.coeffs[..., t])
        term = multiply(ChaosExpansion.of(ft), ChaosExpansion.of(gt)) * (p * q)
        total = term if total is None else total + term
    return total


def _buggy_cross_second_moment(f: SymmetricKernel, g: SymmetricKernel) -> float:
    # negative control: s! in place of (s-1)!
    p, q = f.order, g.order
    out = 0.0
    for s in range(1, min(p, q) + 1):
        c = p * q * math.factorial(s) * math.comb(p - 1, s - 1) * math.comb(q - 1, s - 1)
        out += c**2 * math.factorial(p + q - 2 * s) * chaos.sym_contract(f, g, s).norm() ** 2
    return out


class Suite:
    def __init__(self, seed: int = 42, trials: int = DEFAULT_TRIALS, inject_bug: bool = False):
        self.seed = seed
        self.trials = trials
        self.cross_second_moment: Callable = _buggy_cross_second_moment if inject_bug else chaos.cross_second_moment

    def rng(self, name: str) -> np.random.Generator:
        key = [ord(c) for c in name]
        return np.random.default_rng(np.random.SeedSequence(entropy=self.seed & ((1 << 64) - 1), spawn_key=key))

    # each check returns (worst residual, trials run)

    def contraction_coordinates(self):
        rng, worst = self.rng("contraction_coordinates"), 0.0
        trials = max(1, self.trials // 2)
        for _ in range(trials):
            space = _space(rng, 4)
            p, q = (int(v) for v in rng.integers(1, 4, 2))
            r = int(rng.integers(0, min(p, q) + 1))
            f, g = random_kernel(space, p, rng), random_kernel(space, q, rng)
            ortho = contract(f, g, r)
            scale = np.ones(())
            for _ in range(p + q - 2 * r):
                scale = np.multiply.outer(scale, space.sqrt_weights)
            direct = _pointwise_contraction(f, g, r) * scale
            diff = float(np.max(np.abs(ortho - direct), initial=0.0))
            worst = max(worst, diff / max(1.0, float(np.max(np.abs(direct), initial=0.0))))
        return worst, trials

    def product_closure(self):
        rng, worst = self.rng("product_closure"), 0.0
        for _ in range(self.trials):
            space = _space(rng, 4)
            F = ChaosExpansion.of(*(random_kernel(space, int(m), rng) for m in rng.integers(0, 4, 2)))
            G = ChaosExpansion.of(*(random_kernel(space, int(m), rng) for m in rng.integers(0, 4, 2)))
            worst = max(worst, rel_err(multiply(F, G).mean, chaos.expect_product(F, G)))
        return worst, self.trials

    def single_chaos_stein(self):
        rng, worst = self.rng("single_chaos_stein"), 0.0
        for _ in range(self.trials):
            space = _space(rng, 4)
            f = random_kernel(space, int(rng.integers(1, 5)), rng)
            F = ChaosExpansion.of(f)
            lhs, rhs = chaos.single_chaos_stein(f), chaos.kappa4(F) / 3.0
            worst = max(worst, (lhs - rhs) / max(1.0, F.variance() ** 2))
        return max(worst, 0.0), self.trials

    def derivative_expansion(self):
        rng, worst = self.rng("derivative_expansion"), 0.0
        for _ in range(self.trials):
            pair = random_pair(rng, 4, 4)
            a = cross_derivative(pair.f, pair.g)
            b = dxdy_by_coordinates(pair.f, pair.g)
            diff = a + b * (-1.0)
            worst = max(worst, math.sqrt(max(diff.second_moment(), 0.0)) / max(1.0, math.sqrt(b.second_moment())))
        return worst, self.trials

    def cross_moment_closed_form(self):
        rng, worst = self.rng("cross_moment_closed_form"), 0.0
        for _ in range(self.trials):
            pair = random_pair(rng, 4, 5)
            worst = max(worst, rel_err(cross_derivative(pair.f, pair.g).second_moment(),
                                       self.cross_second_moment(pair.f, pair.g)))
        return worst, self.trials

    def cov_squares(self):
        rng, worst = self.rng("cov_squares"), 0.0
        for _ in range(self.trials):
            pair = random_pair(rng, 4, 4)
            X, Y = ChaosExpansion.of(pair.f), ChaosExpansion.of(pair.g)
            worst = max(worst, rel_err(chaos.cov_squares_expand(X, Y), chaos.cov_squares_formula(pair.f, pair.g)[0]))
        return worst, self.trials

    def exact_identity_s2(self):
        rng, worst = self.rng("exact_identity_s2"), 0.0
        for _ in range(self.trials):
            pair = random_pair(rng, 4, 6)
            _, w = chaos.cov_squares_formula(pair.f, pair.g)
            rhs = math.fsum((s + 1) ** 2 * ws for s, ws in enumerate(w))
            worst = max(worst, rel_err(self.cross_second_moment(pair.f, pair.g), rhs))
        return worst, self.trials

    def universal_comparison(self):
        rng, worst = self.rng("universal_comparison"), 0.0
        for _ in range(self.trials):
            pair = random_pair(rng, 4, 6)
            cov, w = chaos.cov_squares_formula(pair.f, pair.g)
            m = min(pair.p, pair.q)
            lhs = self.cross_second_moment(pair.f, pair.g)
            worst = max(worst, (lhs - m * m * math.fsum(w)) / max(1.0, lhs),
                        (m * m * math.fsum(w) - m * m * cov) / max(1.0, lhs), -min(w) / max(1.0, lhs))
        return max(worst, 0.0), self.trials

    def parity_vanishing(self):
        rng, worst = self.rng("parity_vanishing"), 0.0
        trials = max(1, self.trials // 2)
        for _ in range(trials):
            pair = random_pair(rng, 4, 3, odd_even=True, normalized=True)
            X, Y = ChaosExpansion.of(pair.f), ChaosExpansion.of(pair.g)
            worst = max(worst, abs(chaos.mixed_moment(X, Y, 3, 1)), abs(chaos.mixed_moment(X, Y, 1, 3)))
        return worst, trials

    def cumulant_decomposition(self):
        rng, worst = self.rng("cumulant_decomposition"), 0.0
        trials = max(1, self.trials // 2)
        for i in range(trials):
            pair = random_pair(rng, 4, 3, odd_even=(i % 2 == 0), normalized=True)
            rep = chaos.report(pair)
            worst = max(worst, rep.decomposition_residual() / rep.scale)
            if pair.odd_even:
                parity_form = rep.kappa4_x + rep.kappa4_y + 6 * rep.cov_sq
                worst = max(worst, abs(rep.kappa4_z - parity_form) / rep.scale)
        return worst, trials

    def stein_chain(self):
        rng, worst = self.rng("stein_chain"), 0.0
        trials = max(1, self.trials // 2)
        for _ in range(trials):
            pair = random_pair(rng, 4, 3, odd_even=True, normalized=True)
            rep = chaos.report(pair)
            worst = max(worst, rep.var_stein - 1.5 * rep.kappa4_z, rep.tv_bound_stein - rep.tv_bound_kappa)
        return max(worst, 0.0), trials

    def stein_split(self):
        """Var <= 3(E A_p^2 + E A_q^2 + E T^2), E T^2 <= 4 Cov, A-bounds by kappa4 / 3."""
        rng, worst = self.rng("stein_split"), 0.0
        trials = max(1, self.trials // 2)
        for _ in range(trials):
            pair = random_pair(rng, 4, 3, odd_even=True, normalized=True)
            f, g, p, q = pair.f, pair.g, pair.p, pair.q
            rep = chaos.report(pair)
            ea = chaos.single_chaos_stein(f)
            eb = chaos.single_chaos_stein(g)
            et = (1 / p + 1 / q) ** 2 * rep.cross_second_moment
            worst = max(worst,
                        rep.var_stein - 3 * (ea + eb + et),
                        et - 4 * rep.cov_sq,
                        ea - rep.kappa4_x / 3, eb - rep.kappa4_y / 3)
        return max(worst, 0.0), trials

    def positivity(self):
        rng, worst = self.rng("positivity"), 0.0
        trials = max(1, self.trials // 2)
        for _ in range(trials):
            pair = random_pair(rng, 4, 3, odd_even=True, normalized=True)
            rep = chaos.report(pair)
            worst = max(worst, -rep.kappa4_x, -rep.kappa4_y, -rep.cov_sq, -min(rep.w_terms),
                        rep.cov_sq - rep.kappa4_z / 6, rep.kappa4_x + rep.kappa4_y - rep.kappa4_z)
        return max(worst, 0.0), trials


# name, description, tolerance
CHECKS = [
    ("contraction_coordinates", "orthonormal contraction == weighted pointwise contraction", 1e-12),
    ("product_closure", "E[F*G] from product expansion == isometry pairing", 1e-10),
    ("single_chaos_stein", "E(sigma^2 - |DF|^2/m)^2 <= kappa4(F)/3", 1e-10),
    ("derivative_expansion", "<DX,DY> closed form == coordinatewise derivative products", 1e-10),
    ("cross_moment_closed_form", "E<DX,DY>^2 via expansion == contraction-norm closed form", 1e-10),
    ("cov_squares", "Cov(X^2,Y^2) by squaring == W_s closed form", 1e-10),
    ("exact_identity_s2", "E<DX,DY>^2 == sum_s s^2 W_s", 1e-10),
    ("universal_comparison", "E<DX,DY>^2 <= m^2 sum W_s <= m^2 Cov(X^2,Y^2)", 1e-12),
    ("parity_vanishing", "E[X^3 Y] = E[X Y^3] = 0 for p odd, q even", 1e-10),
    ("cumulant_decomposition", "kappa4(Z) = k4(X)+k4(Y)+6Cov+4E[X^3Y]+4E[XY^3]", 1e-9),
    ("stein_split", "Var <= 3(E A_p^2+E A_q^2+E T^2), E T^2 <= 4 Cov", 1e-9),
    ("positivity", "k4(X), k4(Y), Cov, W_s >= 0; Cov <= k4(Z)/6", 1e-10),
    ("stein_chain", "Var <DZ,-DL^-1 Z> <= 1.5 k4(Z); 2 sqrt(Var) <= sqrt(6 k4(Z))", 1e-9),
]


def run_suite(seed: int = 42, trials: int = DEFAULT_TRIALS, inject_bug: bool = False,
              only: Optional[list[str]] = None) -> list[IdentityResult]:
    suite = Suite(seed, trials, inject_bug)
    out = []
    for name, desc, tol in CHECKS:
        if only and name not in only:
            continue
        worst, n = getattr(suite, name)()
        out.append(IdentityResult(name, desc, n, float(worst), tol, bool(worst <= tol)))
    return out
