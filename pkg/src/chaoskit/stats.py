"""Sample summaries and distance-to-normal diagnostics.

The Kolmogorov distance d_K is a lower bound for total variation, so an
empirical d_K above sqrt(6 kappa4) (plus sampling slack) would falsify the
analytic bound.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtr

from .chaos import CumulantReport
from .errors import EmptyBatch, MismatchWarning
from .gaussian_mc import SampleBatch

KS_CRITICAL = 1.63


def normal_cdf(x):
    """Standard normal CDF (scalar or array); accurate to ~1e-16 absolute."""
    out = ndtr(x)
    return float(out) if np.ndim(out) == 0 else out


def ks_slack(count: int) -> float:
    return KS_CRITICAL / math.sqrt(count)


def kolmogorov_distance(sample: np.ndarray) -> float:
    """sup_x |F_N(x) - Phi(x)| from the sorted sample."""
    z = np.sort(np.asarray(sample, dtype=float))
    N = z.size
    cdf = ndtr(z)
    i = np.arange(1, N + 1)
    return float(max(np.max(i / N - cdf), np.max(cdf - (i - 1) / N)))


@dataclass
class EmpiricalSummary:
    count: int
    mean: float
    m2: float
    m3: float
    m4: float
    kappa4_hat: float
    se_m2: float
    se_m4: float
    d_kolmogorov: float
    se_kappa4: float = float("nan")

    def to_dict(self) -> dict:
        return asdict(self)


def summarize(batch_or_sample, column: str = "z") -> EmpiricalSummary:
    """Central moments, plug-in standard errors and d_K of one column.

    Standard errors are delta-method plug-ins: se(m2) from Var((x-m)^2),
    se(m4) from Var((x-m)^4), se(kappa4) from the influence function of
    m4 - 3 m2^2.
    """
    if isinstance(batch_or_sample, SampleBatch):
        x = batch_or_sample.column(column)
    else:
        x = np.asarray(batch_or_sample, dtype=float)
    N = x.size
    if N < 2:
        raise EmptyBatch(f"need at least 2 draws, got {N}")
    mean = float(np.mean(x))
    mean += float(np.mean(x - mean))  # second pass removes summation drift
    d = x - mean
    d2 = d * d
    m2 = float(np.mean(d2))
    m3 = float(np.mean(d2 * d))
    m4 = float(np.mean(d2 * d2))
    se_m2 = float(np.std(d2) / math.sqrt(N))
    se_m4 = float(np.std(d2 * d2) / math.sqrt(N))
    # influence of k4 = m4 - 3 m2^2 (mean-centering term included via m3)
    infl = d2 * d2 - 4 * m3 * d - 6 * m2 * d2
    se_k4 = float(np.std(infl) / math.sqrt(N))
    return EmpiricalSummary(
        count=N,
        mean=mean,
        m2=m2,
        m3=m3,
        m4=m4,
        kappa4_hat=m4 - 3 * m2 * m2,
        se_m2=se_m2,
        se_m4=se_m4,
        d_kolmogorov=kolmogorov_distance(x),
        se_kappa4=se_k4,
    )


def mean_with_se(values: np.ndarray) -> tuple[float, float]:
    values = np.asarray(values, dtype=float)
    return float(values.mean()), float(values.std() / math.sqrt(values.size))


@dataclass
class BoundCheck:
    kappa4: float
    tv_bound: float
    d_kolmogorov: float
    ks_slack: float
    passed: bool
    margin: float

    def to_dict(self) -> dict:
        return asdict(self)


def check_bound(summary: EmpiricalSummary, report: CumulantReport, variance_tol: Optional[float] = None) -> BoundCheck:
    """d_K <= sqrt(6 kappa4) + 1.63/sqrt(N).

    If the sample variance is more than ``variance_tol`` (default 10 standard
    errors) from the report's E[Z^2], a :class:`MismatchWarning` is issued.
    """
    slack = ks_slack(summary.count)
    target = report.sigma_p2 + report.sigma_q2
    tol = variance_tol if variance_tol is not None else 10.0 * max(summary.se_m2, 1e-12)
    if abs(summary.m2 - target) > tol:
        warnings.warn(
            f"sample variance {summary.m2:.6g} inconsistent with report E[Z^2] = {target:.6g}",
            MismatchWarning,
            stacklevel=2,
        )
    bound = report.tv_bound_kappa
    margin = bound + slack - summary.d_kolmogorov
    return BoundCheck(report.kappa4_z, bound, summary.d_kolmogorov, slack, margin >= 0.0, margin)
