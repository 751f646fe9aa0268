"""Population-level predictions: what certification yields over a whole
dataset once per-point top-class probabilities follow a distribution.

The distribution of p_A is modeled either as a three-piece uniform density
(mass kappa1 on [0, 0.5), kappa2 on [0.5, beta), kappa3 on [beta, 1), with
kappa3 pinned by normalization) or as an empirical histogram fitted from
observed vote shares.  On top of it sit the quantities the sample-size
story is about:

* ``average_radius``: expected certified radius at finite n,
* ``ratio_theoretical``: predicted ratio of that average to its infinite-
  sample limit, via the 0.135 * mean-of-h expansion coefficient,
* ``certified_accuracy``: mass certified at radius at least R0, ideal or
  finite-n,
* ``accuracy_drop_bound``: the distribution-free z/sqrt(n) cap on how much
  accuracy finite sampling can cost.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import ConfidenceSpec, normal_cdf
from .quadrature import adaptive_simpson
from .radius import P_CAP, SmoothingConfig, expected_radius, shrinkage_term
from .rng import CounterStream

__all__ = [
    "PADistribution",
    "AccuracyQuery",
    "fit_empirical_pa",
    "load_empirical_csv",
    "save_empirical_csv",
    "average_radius",
    "h_function",
    "theta_numeric",
    "ratio_theoretical",
    "certified_accuracy",
    "accuracy_drop_bound",
]

PIECEWISE = "piecewise"
EMPIRICAL = "empirical"

# expansion coefficient domain: below this tail width the numeric theta
# integral is dominated by roundoff and is refused
_MIN_TAIL_WIDTH = 1e-4

_THETA_TABLE_WIDE = 2.0  # beta = 0.5, uniform on [0.5, 1)
_THETA_TABLE_CONCENTRATED = 1.64  # beta in [0.8, 1)


@dataclass(frozen=True)
class PADistribution:
    """Distribution of the top-class probability p_A over a dataset.

    Construct through ``piecewise``, ``empirical``, ``uniform``, or
    ``point_mass``; the raw constructor checks whichever field set matches
    ``kind``.  Sampling is deterministic given a stream key, like every
    other random draw in the toolkit.
    """

    kind: str
    kappa1: float | None = None
    kappa2: float | None = None
    beta: float | None = None
    kappa3: float | None = field(default=None, compare=False)
    bin_edges: tuple[float, ...] | None = None
    masses: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.kind == PIECEWISE:
            if self.kappa1 is None or self.kappa2 is None or self.beta is None:
                raise ValueError("piecewise distributions need kappa1, kappa2, beta")
            if self.kappa1 < 0.0 or self.kappa2 < 0.0:
                raise ValueError("densities cannot be negative")
            if not 0.5 <= self.beta < 1.0:
                raise ValueError(f"beta must lie in [0.5, 1), got {self.beta!r}")
            remainder = 1.0 - 0.5 * self.kappa1 - (self.beta - 0.5) * self.kappa2
            k3 = remainder / (1.0 - self.beta)
            if k3 < -1e-12:
                raise ValueError(
                    f"kappa1/kappa2 leave negative mass {remainder!r} for the [beta, 1) piece"
                )
            object.__setattr__(self, "kappa3", max(0.0, k3))
        elif self.kind == EMPIRICAL:
            if self.bin_edges is None or self.masses is None:
                raise ValueError("empirical distributions need bin_edges and masses")
            edges = self.bin_edges
            masses = self.masses
            if len(edges) != len(masses) + 1:
                raise ValueError("bin_edges must be one longer than masses")
            if len(masses) == 0:
                raise ValueError("empirical distributions need at least one bin")
            if any(e1 > e2 for e1, e2 in zip(edges, edges[1:])):
                raise ValueError("bin_edges must be non-decreasing")
            if edges[0] < 0.0 or edges[-1] > 1.0:
                raise ValueError("bins must stay inside [0, 1]")
            if any(m < 0.0 for m in masses):
                raise ValueError("masses cannot be negative")
            if abs(sum(masses) - 1.0) > 1e-9:
                raise ValueError(f"masses sum to {sum(masses)!r}, expected 1 within 1e-9")
        else:
            raise ValueError(f"unknown distribution kind {self.kind!r}")

    @classmethod
    def piecewise(cls, kappa1: float, kappa2: float, beta: float) -> "PADistribution":
        return cls(kind=PIECEWISE, kappa1=kappa1, kappa2=kappa2, beta=beta)

    @classmethod
    def uniform(cls, lo: float = 0.5) -> "PADistribution":
        """Uniform on [lo, 1) for lo >= 0.5 (all mass in the top piece)."""
        return cls.piecewise(0.0, 0.0, lo)

    @classmethod
    def empirical(
        cls, bin_edges: tuple[float, ...] | list[float], masses: tuple[float, ...] | list[float]
    ) -> "PADistribution":
        return cls(kind=EMPIRICAL, bin_edges=tuple(bin_edges), masses=tuple(masses))

    @classmethod
    def point_mass(cls, p: float) -> "PADistribution":
        return cls.empirical((p, p), (1.0,))

    def mass_above(self, p0: float) -> float:
        """Probability mass at or above ``p0``."""
        p0 = min(max(p0, 0.0), 1.0)
        if self.kind == PIECEWISE:
            total = self.kappa3 * max(0.0, 1.0 - max(p0, self.beta))
            total += self.kappa2 * max(0.0, self.beta - max(p0, 0.5))
            total += self.kappa1 * max(0.0, 0.5 - p0)
            return min(1.0, total)
        total = 0.0
        for left, right, mass in zip(self.bin_edges, self.bin_edges[1:], self.masses):
            if p0 <= left:
                total += mass
            elif p0 < right:
                total += mass * (right - p0) / (right - left)
        return min(1.0, total)

    def sample(self, count: int, key: int) -> np.ndarray:
        """Draw ``count`` values of p_A, reproducible from ``key``."""
        if count < 0:
            raise ValueError(f"count must be >= 0, got {count!r}")
        stream = CounterStream(key, domain=0)
        top = np.nextafter(1.0, 0.0)
        if self.kind == PIECEWISE:
            u = stream.uniforms(count)
            m1 = 0.5 * self.kappa1
            m2 = (self.beta - 0.5) * self.kappa2
            p = np.empty(count, dtype=np.float64)
            in1 = u < m1
            in2 = (~in1) & (u < m1 + m2)
            in3 = ~(in1 | in2)
            if in1.any():
                p[in1] = u[in1] / self.kappa1
            if in2.any():
                p[in2] = 0.5 + (u[in2] - m1) / self.kappa2
            if in3.any():
                if self.kappa3 > 0.0:
                    p[in3] = self.beta + (u[in3] - m1 - m2) / self.kappa3
                else:
                    # only reachable by rounding in m1 + m2; park at the top
                    # of whichever lower piece carries the mass
                    p[in3] = np.nextafter(self.beta, 0.0) if self.kappa2 > 0.0 else 0.5
            return np.clip(p, 0.0, top)
        u_bin = stream.uniforms(count)
        u_pos = stream.uniforms(count)
        cum = np.cumsum(np.asarray(self.masses, dtype=np.float64))
        cum[-1] = 1.0
        idx = np.minimum(np.searchsorted(cum, u_bin, side="right"), len(self.masses) - 1)
        left = np.asarray(self.bin_edges[:-1], dtype=np.float64)[idx]
        right = np.asarray(self.bin_edges[1:], dtype=np.float64)[idx]
        return np.clip(left + u_pos * (right - left), 0.0, top)


def fit_empirical_pa(estimates: "np.ndarray | list[float]", num_bins: int = 50) -> PADistribution:
    """Histogram a sample of vote shares into an empirical p_A distribution."""
    values = np.asarray(estimates, dtype=np.float64)
    if values.size == 0:
        raise ValueError("cannot fit a distribution to zero estimates")
    if np.any(values < 0.0) or np.any(values > 1.0):
        raise ValueError("vote shares must lie in [0, 1]")
    if num_bins < 1:
        raise ValueError(f"num_bins must be >= 1, got {num_bins!r}")
    counts, edges = np.histogram(values, bins=num_bins, range=(0.0, 1.0))
    masses = counts / values.size
    # plain floats so reprs and comparisons stay numpy-version independent
    return PADistribution.empirical(
        tuple(float(e) for e in edges), tuple(float(m) for m in masses)
    )


def load_empirical_csv(path: str) -> PADistribution:
    """Read a histogram file with header ``bin_left,bin_right,mass``.

    Bins must be sorted and contiguous (each left edge equals the previous
    right edge); masses must sum to 1 within 1e-9.
    """
    rows: list[tuple[float, float, float]] = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["bin_left", "bin_right", "mass"]:
            raise ValueError(
                f"{path!r}: first row must be the header 'bin_left,bin_right,mass', got {header!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise ValueError(f"{path!r}:{lineno}: expected 3 columns, got {len(row)}")
            try:
                left, right, mass = (float(cell) for cell in row)
            except ValueError:
                raise ValueError(f"{path!r}:{lineno}: non-numeric cell in {row!r}") from None
            rows.append((left, right, mass))
    if not rows:
        raise ValueError(f"{path!r}: no histogram rows found")
    edges = [rows[0][0]]
    masses = []
    for lineno_offset, (left, right, mass) in enumerate(rows):
        if abs(left - edges[-1]) > 1e-12:
            raise ValueError(
                f"{path!r}: bins are not contiguous at row {lineno_offset + 2} "
                f"(left edge {left!r}, previous right edge {edges[-1]!r})"
            )
        edges.append(right)
        masses.append(mass)
    return PADistribution.empirical(tuple(edges), tuple(masses))


def save_empirical_csv(dist: PADistribution, path: str) -> None:
    """Write an empirical distribution in the ``bin_left,bin_right,mass`` format."""
    if dist.kind != EMPIRICAL:
        raise ValueError("only empirical distributions have a histogram file form")
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["bin_left", "bin_right", "mass"])
        for left, right, mass in zip(dist.bin_edges, dist.bin_edges[1:], dist.masses):
            writer.writerow([repr(float(left)), repr(float(right)), repr(float(mass))])


def _clamp_boundary(conf: ConfidenceSpec, n: int) -> float:
    """Largest p_A whose shrunk probability still sits at exactly one half.

    Below this point the finite-n radius is zero.  Root of p - t(p) = 0.5;
    the left side is strictly increasing, so bisection is safe.
    """
    top = P_CAP

    def g(p: float) -> float:
        return p - shrinkage_term(p, conf, n) - 0.5

    if g(top) <= 0.0:
        return top
    lo, hi = 0.5, min(top, 0.5 + 1.0000001 * shrinkage_term(0.5, conf, n))
    if g(hi) <= 0.0:
        hi = top
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) >= 0.0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-14:
            break
    return 0.5 * (lo + hi)


def average_radius(dist: PADistribution, cfg: SmoothingConfig) -> float:
    """Expected certified radius over the population at cfg.n samples.

    Piecewise densities are integrated with adaptive Simpson (absolute
    tolerance 1e-8) from the zero-radius clamp point up to the 1 - 1e-9
    probability cap; empirical histograms use the bin midpoint.
    """
    if dist.kind == EMPIRICAL:
        total = 0.0
        for left, right, mass in zip(dist.bin_edges, dist.bin_edges[1:], dist.masses):
            if mass == 0.0:
                continue
            mid = 0.5 * (left + right)
            if mid < 0.5:
                continue
            total += mass * expected_radius(min(mid, P_CAP), cfg).expected_radius
        return total

    start = _clamp_boundary(cfg.conf, cfg.n)
    segments = (
        (max(0.5, start), dist.beta, dist.kappa2),
        (max(dist.beta, start), P_CAP, dist.kappa3),
    )

    def integrand(p: float) -> float:
        return expected_radius(p, cfg).expected_radius

    total = 0.0
    for lo, hi, density in segments:
        if density == 0.0 or hi <= lo:
            continue
        total += density * adaptive_simpson(integrand, lo, hi, tol=5e-9)
    return total


def h_function(p: float) -> float:
    """Sensitivity ratio h(p) entering the expansion coefficient.

    h(p) = (p^-0.365 q^0.5 + p^0.5 q^-0.365) / (p^0.135 - q^0.135), q = 1-p.
    Defined on (0.5, 1); it blows up like 1/(p - 0.5) at the left edge and
    like q^-0.365 at the right.
    """
    if not 0.5 < p < 1.0:
        raise ValueError(f"h_function requires 0.5 < p < 1, got {p!r}")
    q = 1.0 - p
    num = p**-0.365 * math.sqrt(q) + math.sqrt(p) * q**-0.365
    den = p**0.135 - q**0.135
    return num / den


def theta_numeric(beta: float) -> float:
    """Expansion coefficient 0.135 * mean of h over (beta, 1), by quadrature.

    The q^-0.365 edge singularity is removed by substituting u = q^0.635,
    after which the integrand extends continuously to u = 0 (limit 1/0.635)
    and adaptive Simpson converges to well under 1e-6.  Tail widths below
    1e-4 are refused; at that point the integral is all endpoint.
    """
    if not 0.5 < beta < 1.0:
        raise ValueError(f"theta_numeric requires 0.5 < beta < 1, got {beta!r}")
    if 1.0 - beta < _MIN_TAIL_WIDTH:
        raise ValueError(f"tail width 1 - beta must be at least {_MIN_TAIL_WIDTH}")
    inv = 1.0 / 0.635

    def integrand(u: float) -> float:
        if u <= 0.0:
            return inv
        q = u**inv
        p = 1.0 - q
        num = p**-0.365 * math.sqrt(q) + math.sqrt(p) * q**-0.365
        den = p**0.135 - q**0.135
        return (num / den) * inv * u ** (inv - 1.0)

    upper = (1.0 - beta) ** 0.635
    integral = adaptive_simpson(integrand, 0.0, upper, tol=1e-10)
    return 0.135 * integral / (1.0 - beta)


def ratio_theoretical(conf: ConfidenceSpec, n: int, beta: float) -> float:
    """Predicted ratio of the finite-n average radius to its n -> inf limit.

    1 - Theta * z_alpha / sqrt(n), with Theta = 2 for the full-width tail
    (beta = 0.5), 1.64 for concentrated tails (beta >= 0.8), and the numeric
    coefficient in between.  Can go negative for tiny n; that is the
    prediction saying certification is hopeless there, not a bug.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n!r}")
    if not 0.5 <= beta < 1.0:
        raise ValueError(f"beta must lie in [0.5, 1), got {beta!r}")
    if beta == 0.5:
        theta = _THETA_TABLE_WIDE
    elif beta >= 0.8:
        theta = _THETA_TABLE_CONCENTRATED
    else:
        theta = theta_numeric(beta)
    return 1.0 - theta * conf.z / math.sqrt(n)


@dataclass(frozen=True)
class AccuracyQuery:
    """Certified-accuracy query at radius threshold R0 under noise scale sigma.

    ``p0`` is derived: the top-class probability a point needs in the
    infinite-sample limit to certify radius R0, i.e. Phi(R0 / sigma).
    """

    radius_threshold: float
    sigma: float
    p0: float = field(init=False)

    def __post_init__(self) -> None:
        if self.radius_threshold < 0.0:
            raise ValueError(f"radius_threshold must be >= 0, got {self.radius_threshold!r}")
        if self.sigma <= 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma!r}")
        object.__setattr__(self, "p0", normal_cdf(self.radius_threshold / self.sigma))


def certified_accuracy(
    dist: PADistribution,
    query: AccuracyQuery,
    cfg: SmoothingConfig,
    ideal: bool = False,
) -> float:
    """Fraction of the population certified at radius >= R0.

    Ideal: mass with p_A at or above p0 = Phi(R0 / sigma).  Finite-n: the
    bar moves up to the p solving p - z sqrt(p (1-p) / n) = p0 (bisection,
    tolerance 1e-10), because sampling noise eats t of the probability
    before the quantile is taken.
    """
    if ideal:
        return dist.mass_above(query.p0)
    z = cfg.conf.z
    n = cfg.n

    def g(p: float) -> float:
        return p - z * math.sqrt(p * (1.0 - p) / n) - query.p0

    if g(P_CAP) < 0.0:
        return 0.0
    lo, hi = 0.5, P_CAP
    if g(lo) >= 0.0:
        # only when p0 = 0.5 and t(0.5) = 0, impossible for finite n; guard anyway
        return dist.mass_above(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) >= 0.0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-10:
            break
    return dist.mass_above(0.5 * (lo + hi))


def accuracy_drop_bound(conf: ConfidenceSpec, n: int) -> float:
    """Distribution-free cap on ideal minus finite-n certified accuracy.

    The threshold shift is at most z / (2 sqrt(n)) and density on [0.5, 1)
    integrates to at most 1, which compounds to z / sqrt(n); never above 1.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n!r}")
    return min(1.0, conf.z / math.sqrt(n))
