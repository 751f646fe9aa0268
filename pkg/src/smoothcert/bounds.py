"""Lower confidence bounds for binomial proportions, plus the normal-distribution
special functions everything downstream leans on.

Two bound families are provided.  ``cp_lower_bound`` is the exact one-sided
Clopper-Pearson bound used by certification (never anti-conservative).
``clt_lower_bound`` is the normal-approximation bound used by the closed-form
radius predictions; it is cheap, differentiable in spirit, and slightly
optimistic at small ``n``.

All probabilities are plain floats in [0, 1].  Functions raise ``ValueError``
on out-of-domain input rather than returning NaN.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "TWO_SIDED_QUANTILE",
    "ONE_SIDED_QUANTILE",
    "SHORE_EXPONENT",
    "ConfidenceSpec",
    "ProbEstimate",
    "normal_cdf",
    "normal_pdf",
    "normal_quantile",
    "shore_quantile",
    "cp_lower_bound",
    "clt_lower_bound",
]

TWO_SIDED_QUANTILE = "two_sided_quantile"
ONE_SIDED_QUANTILE = "one_sided_quantile"

# Exponent and scale of Shore's closed-form quantile approximation.
SHORE_EXPONENT = 0.135
_SHORE_SCALE_DENOM = 0.1975

_SQRT2 = math.sqrt(2.0)
_SQRT_2PI = math.sqrt(2.0 * math.pi)

# Bisection controls for the exact binomial bound.
_CP_TOL = 1e-10
_CP_MAX_ITER = 200
_TAIL_CHUNK = 512


def normal_cdf(x: float) -> float:
    """Standard normal CDF, accurate to well below 1e-12 everywhere.

    Built on ``erfc`` so the tails do not cancel: ``Phi(x) = erfc(-x/sqrt 2)/2``.
    """
    if not math.isfinite(x):
        raise ValueError(f"normal_cdf requires a finite argument, got {x!r}")
    return 0.5 * math.erfc(-x / _SQRT2)


def normal_pdf(x: float) -> float:
    """Standard normal density."""
    return math.exp(-0.5 * x * x) / _SQRT_2PI


# Rational initial guess for the normal quantile (|error| < 4.5e-4),
# polished by Newton steps on the upper tail below.
_AS_C0, _AS_C1, _AS_C2 = 2.515517, 0.802853, 0.010328
_AS_D1, _AS_D2, _AS_D3 = 1.432788, 0.189269, 0.001308


def normal_quantile(p: float) -> float:
    """Inverse of ``normal_cdf``.

    Rejects p in {0, 1} (the quantile is infinite there).  The roundtrip
    ``normal_cdf(normal_quantile(p))`` agrees with ``p`` to 1e-10 or better
    across the open interval.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"normal_quantile requires 0 < p < 1, got {p!r}")
    if p == 0.5:
        return 0.0
    tail = p if p < 0.5 else 1.0 - p
    t = math.sqrt(-2.0 * math.log(tail))
    x = t - ((_AS_C2 * t + _AS_C1) * t + _AS_C0) / (
        ((_AS_D3 * t + _AS_D2) * t + _AS_D1) * t + 1.0
    )
    # Newton on Q(x) = P[Z > x] = tail; Q and the density shrink together in
    # the far tail so the correction stays well scaled.
    for _ in range(4):
        dens = normal_pdf(x)
        if dens <= 0.0:
            break
        x += (0.5 * math.erfc(x / _SQRT2) - tail) / dens
    return x if p > 0.5 else -x


def shore_quantile(p: float) -> float:
    """Shore's closed-form approximation to the normal quantile on [0.5, 1).

    ``(p^0.135 - (1-p)^0.135) / 0.1975``.  Worst-case absolute error is about
    0.0045 on [0.5, 0.95] and about 0.043 out at 0.9995.  Below one half the
    approximation is not meaningful for radius work, so p < 0.5 is rejected.
    """
    if not 0.5 <= p < 1.0:
        raise ValueError(f"shore_quantile requires 0.5 <= p < 1, got {p!r}")
    return (p**SHORE_EXPONENT - (1.0 - p) ** SHORE_EXPONENT) / _SHORE_SCALE_DENOM


@dataclass(frozen=True)
class ConfidenceSpec:
    """Failure probability alpha plus the convention mapping it to a z value.

    ``two_sided_quantile`` (the default) uses z = Phi^-1(1 - alpha/2); the
    one-sided convention uses z = Phi^-1(1 - alpha).  The convention only
    affects the CLT bound and the closed-form predictions; the exact
    Clopper-Pearson bound consumes alpha directly.
    """

    alpha: float
    z_convention: str = TWO_SIDED_QUANTILE

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if self.z_convention not in (TWO_SIDED_QUANTILE, ONE_SIDED_QUANTILE):
            raise ValueError(f"unknown z_convention {self.z_convention!r}")
        # one-sided z would be <= 0 for alpha >= 0.5, which no caller wants
        if self.z_convention == ONE_SIDED_QUANTILE and self.alpha >= 0.5:
            raise ValueError("one_sided_quantile requires alpha < 0.5")

    @property
    def z(self) -> float:
        """The positive z value implied by alpha under the chosen convention."""
        return _z_value(self.alpha, self.z_convention)


@lru_cache(maxsize=4096)
def _z_value(alpha: float, convention: str) -> float:
    if convention == TWO_SIDED_QUANTILE:
        return normal_quantile(1.0 - 0.5 * alpha)
    return normal_quantile(1.0 - alpha)


@dataclass(frozen=True)
class ProbEstimate:
    """Vote count for one class out of ``n`` total draws."""

    successes: int
    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n!r}")
        if not 0 <= self.successes <= self.n:
            raise ValueError(
                f"successes must lie in [0, n], got {self.successes!r} of {self.n!r}"
            )

    @property
    def p_hat(self) -> float:
        return self.successes / self.n


def _log_binomial_tail(successes: int, n: int, log_p: float, log_q: float) -> float:
    """log P[X >= successes] for X ~ Binomial(n, L), log_p = log L, log_q = log(1-L).

    Summed in log space so n in the hundreds of thousands stays exact to
    roughly machine precision.  Terms are generated chunk-wise with the pmf
    ratio recurrence; summation stops once the remaining mass is provably
    negligible (past the mode with a decaying ratio).
    """
    j0 = successes
    log_head = (
        math.lgamma(n + 1)
        - math.lgamma(j0 + 1)
        - math.lgamma(n - j0 + 1)
        + j0 * log_p
        + (n - j0) * log_q
    )
    log_ratio = log_p - log_q
    mode = (n + 1) * math.exp(log_p)
    total = -math.inf
    while j0 <= n:
        hi = min(n, j0 + _TAIL_CHUNK - 1)
        j = np.arange(j0, hi + 1, dtype=np.float64)
        if hi > j0:
            steps = np.log(n - j[:-1]) - np.log(j[:-1] + 1.0) + log_ratio
            log_pmf = log_head + np.concatenate(([0.0], np.cumsum(steps)))
        else:
            log_pmf = np.array([log_head])
        peak = float(log_pmf.max())
        total = float(np.logaddexp(total, peak + math.log(float(np.exp(log_pmf - peak).sum()))))
        if hi >= n:
            break
        log_head = float(log_pmf[-1]) + math.log(n - hi) - math.log(hi + 1.0) + log_ratio
        ratio_next = (n - hi - 1) / (hi + 2) * math.exp(log_ratio)
        if hi + 1 > mode and ratio_next < 0.9 and log_head < total - 45.0:
            break
        j0 = hi + 1
    return total


@lru_cache(maxsize=1 << 16)
def _cp_lower_cached(successes: int, n: int, alpha: float) -> float:
    log_alpha = math.log(alpha)
    lo, hi = 0.0, 1.0
    for _ in range(_CP_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if _log_binomial_tail(successes, n, math.log(mid), math.log1p(-mid)) >= log_alpha:
            hi = mid
        else:
            lo = mid
        if hi - lo <= _CP_TOL:
            break
    return 0.5 * (lo + hi)


def cp_lower_bound(est: ProbEstimate, conf: ConfidenceSpec) -> float:
    """One-sided exact (Clopper-Pearson) lower confidence bound.

    Returns the largest L with P[X >= successes | n, L] <= alpha, located by
    bisection on the log-space binomial tail sum (interval tolerance 1e-10,
    at most 200 halvings).  Zero successes give bound 0 exactly.  The true
    parameter falls below the bound with probability at most alpha, for every
    n and every true p.
    """
    if est.successes == 0:
        return 0.0
    return _cp_lower_cached(est.successes, est.n, conf.alpha)


def clt_lower_bound(est: ProbEstimate, conf: ConfidenceSpec) -> float:
    """Normal-approximation lower bound: p_hat - z * sqrt(p_hat (1-p_hat) / n).

    Clamped into [0, 1].  With p_hat in {0, 1} the width term vanishes and the
    bound degenerates to p_hat itself, which is exactly the regime where the
    exact bound disagrees; that mismatch is measured, not hidden.  Emits a
    ``RuntimeWarning`` when n < 30, where the approximation has no support.
    """
    if est.n < 30:
        warnings.warn(
            f"clt_lower_bound is unreliable for n < 30 (got n={est.n})",
            RuntimeWarning,
            stacklevel=2,
        )
    ph = est.p_hat
    raw = ph - conf.z * math.sqrt(ph * (1.0 - ph) / est.n)
    return min(1.0, max(0.0, raw))
