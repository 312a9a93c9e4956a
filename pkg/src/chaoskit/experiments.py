"""Built-in kernel families and the convergence harness.

Families (all on n atoms of unit weight, normalized so E[Z^2] = 1 with a share
``mix**2`` of the variance in the order-p chaos):

``diag_hermite``
    f = sum_i e_i^{(x)p}, g = sum_i e_i^{(x)q}.  Z_n is a normalized sum of n
    iid copies of a He_p/He_q combination, so kappa4(Z_n) = kappa4(Z_1)/n.
``offdiag_chain``
    f = sum_i sym(e_i (x) e_{i+1} (x) ... (x) e_{i+p-1}) over windows of p
    consecutive atoms, g likewise with q.  Windows overlap, so contractions
    of every order are nonzero.
``poisson_diag``
    the diagonal family sampled on the Poisson space (Charlier chaoses).
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import chaos, gaussian_mc, poisson_mc, stats
from .errors import TooFewAtoms
from .space_kernel import KernelPair, SymmetricKernel, make_space, sym_array

FAMILIES = ("diag_hermite", "offdiag_chain", "poisson_diag")
DEFAULT_MIX = 1.0 / math.sqrt(2.0)
DEFAULT_SIZES = (4, 16, 64, 256)
DEFAULT_SAMPLES = 1_000_000
POISSON_SERIES_TERMS = 120

CSV_FIELDS = ["n", "kappa4", "tv_bound", "d_kolmogorov", "kappa4_hat", "runtime_ms", "ks_slack", "pass"]
POISSON_FIELDS = ["mixed31", "mixed31_hat", "mixed31_se", "mixed13", "mixed13_hat", "mixed13_se"]


@dataclass(frozen=True)
class FamilySpec:
    kind: str = "diag_hermite"
    p: int = 1
    q: int = 2
    mix: float = DEFAULT_MIX
    sizes: tuple[int, ...] = DEFAULT_SIZES

    def __post_init__(self):
        if self.kind not in FAMILIES:
            raise ValueError(f"unknown family {self.kind!r}; choose from {FAMILIES}")
        if self.p == self.q:
            raise ValueError("p and q must differ")
        if min(self.p, self.q) < 1:
            raise ValueError("chaos orders must be >= 1")
        if not 0.0 <= self.mix <= 1.0:
            raise ValueError("mix must lie in [0, 1]")
        if any(b <= a for a, b in zip(self.sizes, self.sizes[1:])):
            raise ValueError("sizes must be strictly increasing")
        object.__setattr__(self, "sizes", tuple(int(n) for n in self.sizes))

    @property
    def gaussian(self) -> bool:
        return self.kind != "poisson_diag"


def _normalized(raw: np.ndarray, order: int, share: float, space) -> SymmetricKernel:
    norm2 = float(np.vdot(raw, raw))
    if share == 0.0 or norm2 == 0.0:
        return SymmetricKernel(order, space, np.zeros_like(raw))
    scale = math.sqrt(share / (math.factorial(order) * norm2))
    return SymmetricKernel(order, space, raw * scale)


def _diagonal(n: int, order: int) -> np.ndarray:
    raw = np.zeros((n,) * order)
    i = np.arange(n)
    raw[(i,) * order] = 1.0
    return raw


def _chain(n: int, order: int) -> np.ndarray:
    raw = np.zeros((n,) * order)
    for i in range(n - order + 1):
        raw[tuple(range(i, i + order))] = 1.0
    return sym_array(raw)


def family_kernels(spec: FamilySpec, n: int) -> KernelPair:
    min_atoms = max(spec.p, spec.q) if spec.kind == "offdiag_chain" else 1
    if n < min_atoms:
        raise TooFewAtoms(f"{spec.kind} with p={spec.p}, q={spec.q} needs n >= {min_atoms}, got {n}")
    space = make_space([1.0] * n)
    build = _chain if spec.kind == "offdiag_chain" else _diagonal
    f = _normalized(build(n, spec.p), spec.p, spec.mix**2, space)
    g = _normalized(build(n, spec.q), spec.q, 1.0 - spec.mix**2, space)
    return KernelPair(f, g)


@dataclass
class PoissonDiagExact:
    kappa4_z: float
    mixed31: float
    mixed13: float


def poisson_diag_exact(spec: FamilySpec, n: int, terms: int = POISSON_SERIES_TERMS) -> PoissonDiagExact:
    """Exact kappa4(Z_n), E[X^3 Y], E[X Y^3] for the Poisson diagonal family.

    Atoms are iid, so cumulants add and cross-atom mixed terms vanish; each
    single-atom moment is a truncated Poisson(1) series.
    """
    x = np.arange(terms + 1, dtype=float)
    logpmf = -1.0 - np.array([math.lgamma(k + 1) for k in range(terms + 1)])
    pmf = np.exp(logpmf)
    a = spec.mix
    b = math.sqrt(1.0 - a * a)
    u = poisson_mc.charlier(spec.p, x, 1.0) / math.sqrt(math.factorial(spec.p))
    v = poisson_mc.charlier(spec.q, x, 1.0) / math.sqrt(math.factorial(spec.q))
    w = a * u + b * v

    def E(vals) -> float:
        return math.fsum(vals * pmf)

    k4_atom = E(w**4) - 3.0 * E(w**2) ** 2
    return PoissonDiagExact(
        kappa4_z=k4_atom / n,
        mixed31=a**3 * b * E(u**3 * v) / n,
        mixed13=a * b**3 * E(u * v**3) / n,
    )


@dataclass
class ConvergenceRow:
    n: int
    kappa4_z: float
    tv_bound: Optional[float]
    d_kolmogorov: float
    kappa4_hat: float
    runtime_ms: Optional[float]
    ks_slack: float
    passed: Optional[bool]
    extra: dict = field(default_factory=dict)

    def as_record(self) -> dict:
        rec = {
            "n": self.n,
            "kappa4": self.kappa4_z,
            "tv_bound": self.tv_bound,
            "d_kolmogorov": self.d_kolmogorov,
            "kappa4_hat": self.kappa4_hat,
            "runtime_ms": self.runtime_ms,
            "ks_slack": self.ks_slack,
            "pass": self.passed,
        }
        rec.update(self.extra)
        return rec


def row_seed(seed: int, n: int) -> int:
    ss = np.random.SeedSequence(entropy=int(seed) & ((1 << 64) - 1), spawn_key=(int(n),))
    return int(ss.generate_state(1, np.uint64)[0])


def run_row(spec: FamilySpec, n: int, samples: int, seed: int, threads: int = 1, timing: bool = False) -> ConvergenceRow:
    t0 = time.perf_counter()
    pair = family_kernels(spec, n)
    rs = row_seed(seed, n)
    if spec.gaussian:
        rep = chaos.report(pair)
        batch = gaussian_mc.sample_pair(pair, samples, rs, threads)
        summ = stats.summarize(batch, "z")
        chk = stats.check_bound(summ, rep)
        row = ConvergenceRow(n, rep.kappa4_z, chk.tv_bound, chk.d_kolmogorov, summ.kappa4_hat,
                             None, chk.ks_slack, chk.passed)
    else:
        exact = poisson_diag_exact(spec, n)
        batch = poisson_mc.sample_poisson_pair(pair, samples, rs, threads)
        summ = stats.summarize(batch, "z")
        m31, se31 = stats.mean_with_se(batch.x**3 * batch.y)
        m13, se13 = stats.mean_with_se(batch.x * batch.y**3)
        # no total-variation bound exists on the Poisson space; d_K is descriptive
        row = ConvergenceRow(n, exact.kappa4_z, None, summ.d_kolmogorov, summ.kappa4_hat,
                             None, stats.ks_slack(samples), None,
                             extra={"mixed31": exact.mixed31, "mixed31_hat": m31, "mixed31_se": se31,
                                    "mixed13": exact.mixed13, "mixed13_hat": m13, "mixed13_se": se13})
    if timing:
        row.runtime_ms = (time.perf_counter() - t0) * 1e3
    return row


def run_convergence(spec: FamilySpec, samples: int = DEFAULT_SAMPLES, seed: int = 42,
                    threads: int = 1, timing: bool = False) -> list[ConvergenceRow]:
    return [run_row(spec, n, samples, seed, threads, timing) for n in spec.sizes]


def all_pass(rows: Sequence[ConvergenceRow]) -> bool:
    return all(r.passed is not False for r in rows)


def loglog_slope(ns: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of log(values) against log(ns)."""
    slope, _ = np.polyfit(np.log(np.asarray(ns, float)), np.log(np.asarray(values, float)), 1)
    return float(slope)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def rows_to_csv(rows: Sequence[ConvergenceRow]) -> str:
    fields = list(CSV_FIELDS)
    if any(r.extra for r in rows):
        fields += POISSON_FIELDS
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for r in rows:
        rec = r.as_record()
        w.writerow([_fmt(rec.get(k)) for k in fields])
    return buf.getvalue()


def rows_to_json(rows: Sequence[ConvergenceRow]) -> str:
    return json.dumps([r.as_record() for r in rows], indent=2) + "\n"
