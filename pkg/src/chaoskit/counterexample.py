"""Single-atom Poisson counterexample to the unconditional two-chaos theorem.

With N ~ Poisson(1), U = N - 1 lies in the first Poisson chaos and
V = (N-1)^2 - N in the second.  S_alpha = (U + alpha V) / sqrt(1 + 2 alpha^2)
has unit variance; at a real root alpha* of the quartic obtained from
E[S_alpha^4] = 3 it has Gaussian second and fourth moments but a clearly
nonzero third moment.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from functools import lru_cache

from .errors import DegreeCap, NoRealRoot

SERIES_TERMS = 60
DEGREE_CAP = 8
QUARTIC = (200.0, 224.0, 96.0, 24.0, 1.0)
REFERENCE_ROOT = -0.050832
ROOT_TIE_TOL = 1e-9

# E[U^a V^b] as printed in the source table
PRINTED_TABLE = {
    (2, 0): 1, (3, 0): 1, (4, 0): 4,
    (0, 2): 2, (1, 1): 0,
    (2, 1): 6, (3, 1): 6, (1, 2): 12,
    (2, 2): 18, (1, 3): 56, (0, 3): 12,
    (0, 4): 212,
}


def _check_degree(a: int, b: int) -> None:
    if a < 0 or b < 0:
        raise ValueError("exponents must be nonnegative")
    if a + b > DEGREE_CAP:
        raise DegreeCap(f"a + b = {a + b} exceeds {DEGREE_CAP}")


def uv_moment(a: int, b: int, terms: int = SERIES_TERMS) -> float:
    """E[U^a V^b] by the truncated Poisson(1) series over x = 0..terms."""
    _check_degree(a, b)
    pmf = math.exp(-1.0)
    acc = []
    for x in range(terms + 1):
        acc.append((x - 1) ** a * ((x - 1) ** 2 - x) ** b * pmf)
        pmf /= x + 1
    return math.fsum(acc)


def series_tail_bound(a: int, b: int, terms: int = SERIES_TERMS) -> float:
    """Upper bound on the series tail dropped by :func:`uv_moment`.

    For x > terms the summand is at most x^d e^-1 / x! with d = a + 2b, and
    consecutive bounds shrink by a factor below 1/2, so the tail is at most
    twice its first term.
    """
    d = a + 2 * b
    k = terms + 1
    if (1 + 1 / k) ** d / (k + 1) >= 0.5:
        raise ValueError("truncation too short for a geometric tail bound")
    log_first = d * math.log(k) - 1.0 - math.lgamma(k + 1)
    return 2.0 * math.exp(log_first)


@lru_cache(maxsize=None)
def bell_number(k: int) -> int:
    """k-th Bell number, E[N^k] for N ~ Poisson(1); Bell triangle."""
    row = [1]
    for _ in range(k):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[0]


def _poly_mul(p: list[int], q: list[int]) -> list[int]:
    out = [0] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        for j, b in enumerate(q):
            out[i + j] += a * b
    return out


def uv_moment_exact(a: int, b: int) -> int:
    """E[U^a V^b] in exact integers: expand (x-1)^a (x^2-3x+1)^b, map x^k -> B_k."""
    _check_degree(a, b)
    poly = [1]
    for _ in range(a):
        poly = _poly_mul(poly, [-1, 1])
    for _ in range(b):
        poly = _poly_mul(poly, [1, -3, 1])
    return sum(c * bell_number(k) for k, c in enumerate(poly))


def c_alpha(alpha: float) -> float:
    return 1.0 / math.sqrt(1.0 + 2.0 * alpha * alpha)


def s_moment4(alpha: float) -> float:
    """E[S_alpha^4] closed form."""
    a = alpha
    num = 4 + 24 * a + 108 * a**2 + 224 * a**3 + 212 * a**4
    return num / (1 + 2 * a**2) ** 2


def s_moment3(alpha: float) -> float:
    a = alpha
    return c_alpha(a) ** 3 * (1 + 6 * a + 12 * a**2 + 12 * a**3)


def s_moment(k: int, alpha: float, moment=uv_moment) -> float:
    """E[S_alpha^k] by binomial expansion over E[U^(k-j) V^j]."""
    terms = [math.comb(k, j) * alpha**j * moment(k - j, j) for j in range(k + 1)]
    return c_alpha(alpha) ** k * math.fsum(terms)


# -- quartic ------------------------------------------------------------------

def _horner(coeffs, x: float) -> float:
    acc = 0.0
    for c in coeffs:
        acc = acc * x + c
    return acc


def _derivative(coeffs) -> list[float]:
    d = len(coeffs) - 1
    return [c * (d - i) for i, c in enumerate(coeffs[:-1])]


def _cauchy_bound(coeffs) -> float:
    lead = coeffs[0]
    return 1.0 + max(abs(c / lead) for c in coeffs[1:])


def _bisect(coeffs, lo: float, hi: float, xtol: float = 1e-10) -> float:
    flo = _horner(coeffs, lo)
    if flo == 0.0:
        return lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = _horner(coeffs, mid)
        if fm == 0.0:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo <= xtol * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)


def _polish(coeffs, x: float, lo: float, hi: float) -> float:
    """Newton steps kept inside the bracket, stopping when the residual stalls."""
    d = _derivative(coeffs)
    best, best_res = x, abs(_horner(coeffs, x))
    for _ in range(20):
        dp = _horner(d, x)
        if dp == 0.0:
            break
        nxt = x - _horner(coeffs, x) / dp
        if not lo <= nxt <= hi:
            break
        x = nxt
        res = abs(_horner(coeffs, x))
        if res < best_res:
            best, best_res = x, res
        else:
            break
    return best


def real_roots(coeffs) -> list[float]:
    """All real roots of a polynomial (degree-descending coefficients).

    Critical points of p are found recursively from p'; between consecutive
    critical points p is monotone, so each sign change brackets one root.
    Roots of even multiplicity (touching zero without crossing) are detected
    at critical points whose value rounds to zero.
    """
    coeffs = [float(c) for c in coeffs]
    while coeffs and coeffs[0] == 0.0:
        coeffs.pop(0)
    if len(coeffs) < 2:
        return []
    if len(coeffs) == 2:
        return [-coeffs[1] / coeffs[0]]
    R = _cauchy_bound(coeffs)
    crit = [c for c in real_roots(_derivative(coeffs)) if -R < c < R]
    knots = [-R] + sorted(crit) + [R]
    roots = []
    scale = max(abs(c) for c in coeffs)
    for lo, hi in zip(knots, knots[1:]):
        flo, fhi = _horner(coeffs, lo), _horner(coeffs, hi)
        if flo == 0.0:
            roots.append(lo)
        elif flo * fhi < 0:
            r = _bisect(coeffs, lo, hi)
            roots.append(_polish(coeffs, r, lo, hi))
    last = _horner(coeffs, knots[-1])
    if last == 0.0:
        roots.append(knots[-1])
    for c in crit:
        if abs(_horner(coeffs, c)) <= 1e-14 * scale and all(abs(c - r) > 1e-8 for r in roots):
            roots.append(c)
    return sorted(roots)


@dataclass
class QuarticSolution:
    coefficients: list[float]
    real_roots: list[float]
    chosen_root: float
    residual: float


def solve_quartic(coeffs=QUARTIC, reference: float = REFERENCE_ROOT) -> QuarticSolution:
    """Real roots of a quartic; ``chosen_root`` is the one nearest ``reference``.

    For the counterexample use :func:`choose_alpha_star`, which applies the
    fourth-moment selection rule before the tie-break.
    """
    coeffs = [float(c) for c in coeffs]
    if len(coeffs) != 5:
        raise ValueError("a quartic needs exactly 5 coefficients")
    if coeffs[0] == 0.0:
        raise ValueError("leading coefficient must be nonzero")
    roots = real_roots(coeffs)
    if not roots:
        raise NoRealRoot(f"no real root for coefficients {coeffs}")
    chosen = min(roots, key=lambda r: abs(r - reference))
    return QuarticSolution(coeffs, roots, chosen, abs(_horner(coeffs, chosen)))


def choose_alpha_star(sol: QuarticSolution, reference: float = REFERENCE_ROOT) -> float:
    """Root minimizing |E[S^4] - 3|; near-ties go to the root closest to ``reference``."""
    errs = {r: abs(s_moment4(r) - 3.0) for r in sol.real_roots}
    best = min(errs.values())
    tied = [r for r, e in errs.items() if e <= best + ROOT_TIE_TOL]
    return min(tied, key=lambda r: abs(r - reference))


@dataclass
class CounterexampleReport:
    moment_table: dict[tuple[int, int], float]
    alpha_star: float
    m2: float
    m3: float
    m4: float
    c_alpha: float
    quartic: QuarticSolution
    root_moments: list[dict] = field(default_factory=list)
    tail_bound: float = 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["moment_table"] = {f"{a},{b}": v for (a, b), v in self.moment_table.items()}
        return d

    def table_mismatches(self, tol: float = 1e-10) -> list[tuple[int, int]]:
        """Entries whose computed value differs from the printed table."""
        return [ab for ab, v in self.moment_table.items() if abs(v - PRINTED_TABLE[ab]) > tol]

    @property
    def is_gaussian_compatible(self) -> bool:
        """False certifies non-Gaussianity: unit variance, E[S^4] = 3, E[S^3] != 0."""
        return not (abs(self.m2 - 1) <= 1e-10 and abs(self.m4 - 3) <= 1e-10 and abs(self.m3) > 0.5)


def run_counterexample() -> CounterexampleReport:
    table = {ab: uv_moment(*ab) for ab in PRINTED_TABLE}
    tail = max(series_tail_bound(*ab) for ab in PRINTED_TABLE)
    sol = solve_quartic(QUARTIC)
    alpha = choose_alpha_star(sol)
    sol = replace(sol, chosen_root=alpha, residual=abs(_horner(QUARTIC, alpha)))
    per_root = [
        {"alpha": r, "residual": abs(_horner(QUARTIC, r)), "m3": s_moment3(r), "m4": s_moment4(r)}
        for r in sol.real_roots
    ]
    return CounterexampleReport(
        moment_table=table,
        alpha_star=alpha,
        m2=s_moment(2, alpha),
        m3=s_moment3(alpha),
        m4=s_moment4(alpha),
        c_alpha=c_alpha(alpha),
        quartic=sol,
        root_moments=per_root,
        tail_bound=tail,
    )


def exact_fraction_moment(k: int, alpha: Fraction) -> Fraction:
    """c(alpha)^-k E[S_alpha^k] in exact rationals (no normalization)."""
    return sum(Fraction(math.comb(k, j)) * alpha**j * uv_moment_exact(k - j, j) for j in range(k + 1))


def monte_carlo_table(count: int, seed: int = 42, threads: int = 1) -> dict[tuple[int, int], tuple[float, float]]:
    """Sample means and standard errors of U^a V^b from ``count`` Poisson(1) draws.

    U and V are drawn as the first- and second-order Poisson integrals of the
    single unit-mass atom, so this exercises the sampler independently of the
    series.
    """
    import numpy as np

    from .poisson_mc import sample_poisson_pair
    from .space_kernel import KernelPair, basis_kernel, make_space

    space = make_space([1.0])
    batch = sample_poisson_pair(KernelPair(basis_kernel(space, 0), basis_kernel(space, 0, 0)), count, seed, threads)
    out = {}
    for a, b in PRINTED_TABLE:
        vals = batch.x**a * batch.y**b
        out[(a, b)] = (float(vals.mean()), float(vals.std() / np.sqrt(vals.size)))
    return out
