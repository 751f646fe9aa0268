"""Dataset-level model: p_A distributions, average radii, accuracy curves.

Frozen constants were computed once with scipy.integrate.quad (tolerance
1e-11) composed from scipy.stats.norm.ppf, independent of the adaptive
Simpson and quantile code under test.
"""

import math

import numpy as np
import pytest

from smoothcert.bounds import ConfidenceSpec, normal_quantile
from smoothcert.population import (
    AccuracyQuery,
    PADistribution,
    accuracy_drop_bound,
    average_radius,
    certified_accuracy,
    fit_empirical_pa,
    h_function,
    load_empirical_csv,
    ratio_theoretical,
    save_empirical_csv,
    theta_numeric,
)
from smoothcert.radius import SmoothingConfig, expected_radius

scipy_integrate = pytest.importorskip("scipy.integrate")

CONF = ConfidenceSpec(0.001)


def cfg(sigma: float, n: int) -> SmoothingConfig:
    return SmoothingConfig(sigma=sigma, conf=CONF, n=n)


# ------------------------------------------------------------ distributions


def test_piecewise_kappa3_derived() -> None:
    d = PADistribution.piecewise(kappa1=0.4, kappa2=1.0, beta=0.8)
    # 1 - 0.5*0.4 - 0.3*1.0 = 0.5 over width 0.2
    assert d.kappa3 == pytest.approx(2.5, abs=1e-12)


def test_piecewise_rejects_overfull_lower_pieces() -> None:
    with pytest.raises(ValueError):
        PADistribution.piecewise(kappa1=2.5, kappa2=0.0, beta=0.8)
    with pytest.raises(ValueError):
        PADistribution.piecewise(kappa1=-0.1, kappa2=1.0, beta=0.8)
    with pytest.raises(ValueError):
        PADistribution.piecewise(kappa1=0.0, kappa2=0.0, beta=0.4)


def test_uniform_factory() -> None:
    d = PADistribution.uniform()
    assert d.beta == 0.5
    assert d.kappa3 == pytest.approx(2.0)
    tight = PADistribution.uniform(0.8)
    assert tight.kappa3 == pytest.approx(5.0)


def test_mass_above_piecewise() -> None:
    d = PADistribution.piecewise(kappa1=0.4, kappa2=1.0, beta=0.8)
    assert d.mass_above(0.0) == pytest.approx(1.0)
    assert d.mass_above(0.5) == pytest.approx(0.8)
    assert d.mass_above(0.8) == pytest.approx(0.5)
    assert d.mass_above(0.9) == pytest.approx(0.25)
    assert d.mass_above(1.0) == 0.0


def test_mass_above_empirical() -> None:
    d = PADistribution.empirical((0.5, 0.7, 0.9), (0.25, 0.75))
    assert d.mass_above(0.5) == pytest.approx(1.0)
    assert d.mass_above(0.6) == pytest.approx(0.125 + 0.75)
    # threshold at a bin's left edge counts the whole bin
    assert d.mass_above(0.7) == pytest.approx(0.75)
    assert d.mass_above(0.95) == 0.0


def test_point_mass_and_zero_width_bins() -> None:
    d = PADistribution.point_mass(0.9)
    assert d.mass_above(0.85) == pytest.approx(1.0)
    assert d.mass_above(0.9) == pytest.approx(1.0)
    assert d.mass_above(0.91) == 0.0
    assert np.all(d.sample(100, key=1) == 0.9)


def test_empirical_validation() -> None:
    with pytest.raises(ValueError):
        PADistribution.empirical((0.5, 0.4), (1.0,))
    with pytest.raises(ValueError):
        PADistribution.empirical((0.5, 0.9), (0.5,))
    with pytest.raises(ValueError):
        PADistribution.empirical((0.5, 0.9), (-0.2, 1.2))
    with pytest.raises(ValueError):
        PADistribution.empirical((0.5, 0.9, 1.2), (0.5, 0.5))
    with pytest.raises(ValueError):
        PADistribution(kind="mystery")


def test_sampling_is_deterministic_and_in_range() -> None:
    d = PADistribution.uniform(0.5)
    a = d.sample(1000, key=77)
    b = d.sample(1000, key=77)
    assert np.array_equal(a, b)
    assert a.min() >= 0.5
    assert a.max() < 1.0
    assert abs(a.mean() - 0.75) < 0.02


def test_sampling_matches_mass_above() -> None:
    d = PADistribution.piecewise(kappa1=0.4, kappa2=1.0, beta=0.8)
    vals = d.sample(20000, key=3)
    for p0 in (0.3, 0.5, 0.7, 0.85, 0.95):
        frac = float((vals >= p0).mean())
        assert frac == pytest.approx(d.mass_above(p0), abs=0.02), p0


def test_empirical_sampling_moments() -> None:
    d = PADistribution.empirical((0.5, 0.7, 0.9), (0.25, 0.75))
    vals = d.sample(20000, key=5)
    want_mean = 0.25 * 0.6 + 0.75 * 0.8
    assert abs(vals.mean() - want_mean) < 0.005


def test_fit_empirical_round_trip(tmp_path) -> None:
    rng = np.random.default_rng(0)
    estimates = rng.uniform(0.6, 0.95, size=5000)
    d = fit_empirical_pa(estimates, num_bins=40)
    assert d.kind == "empirical"
    assert sum(d.masses) == pytest.approx(1.0, abs=1e-12)
    assert d.mass_above(0.775) == pytest.approx(0.5, abs=0.03)

    path = str(tmp_path / "dist.csv")
    save_empirical_csv(d, path)
    back = load_empirical_csv(path)
    assert back.bin_edges == pytest.approx(d.bin_edges)
    assert back.masses == pytest.approx(d.masses)


def test_fit_empirical_rejects_bad_input() -> None:
    with pytest.raises(ValueError):
        fit_empirical_pa([])
    with pytest.raises(ValueError):
        fit_empirical_pa([0.5, 1.4])


# ----------------------------------------------------------- average radius


def test_average_radius_frozen_uniform_half() -> None:
    d = PADistribution.uniform(0.5)
    # frozen from scipy quad over p of 0.5*ppf(p - z sqrt(p(1-p)/1000)) on
    # the certifiable region, 2 * dp
    got = average_radius(d, cfg(0.5, 1000))
    assert got == pytest.approx(0.32670614722456487, abs=1e-8)
    # frozen same oracle, n = 100 and n = 10000 at sigma = 1
    assert average_radius(d, cfg(1.0, 100)) == pytest.approx(0.4356357139660365, abs=1e-8)
    assert average_radius(d, cfg(1.0, 10000)) == pytest.approx(0.7477543826244851, abs=1e-8)
    # effectively infinite n approaches the sigma * E[Phi^-1(p)] limit
    assert average_radius(d, cfg(1.0, 10**9)) == pytest.approx(0.7977165751385942, abs=1e-7)


def test_average_radius_frozen_uniform_point_eight() -> None:
    d = PADistribution.uniform(0.8)
    assert average_radius(d, cfg(1.0, 1000)) == pytest.approx(1.2204490961956012, abs=1e-8)
    assert average_radius(d, cfg(1.0, 100000)) == pytest.approx(1.3788415511616967, abs=1e-8)


def test_average_radius_scales_with_sigma() -> None:
    d = PADistribution.uniform(0.5)
    one = average_radius(d, cfg(1.0, 1000))
    assert average_radius(d, cfg(0.25, 1000)) == pytest.approx(0.25 * one, rel=1e-9)


def test_average_radius_empirical_uses_midpoints() -> None:
    d = PADistribution.empirical((0.88, 0.92), (1.0,))
    got = average_radius(d, cfg(0.5, 1000))
    want = expected_radius(0.9, cfg(0.5, 1000)).expected_radius
    assert got == pytest.approx(want, abs=1e-12)


def test_average_radius_monotone_in_n() -> None:
    d = PADistribution.uniform(0.5)
    values = [average_radius(d, cfg(0.5, n)) for n in (100, 1000, 10000, 100000)]
    assert values == sorted(values)


def test_average_radius_point_mass_below_half_is_zero() -> None:
    d = PADistribution.point_mass(0.3)
    assert average_radius(d, cfg(0.5, 1000)) == 0.0


# ------------------------------------------------- theta and radius ratios


def test_h_function_frozen() -> None:
    # frozen from mpmath evaluation of the integrand factor at p = 0.9
    assert h_function(0.9) == pytest.approx(9.986463328347178, rel=1e-10)
    with pytest.raises(ValueError):
        h_function(0.5)
    with pytest.raises(ValueError):
        h_function(1.0)


def test_theta_numeric_frozen_anchor() -> None:
    # frozen from this module's converged value, cross-checked below
    assert theta_numeric(0.8) == pytest.approx(1.4592116336355987, abs=1e-9)


def test_theta_numeric_against_scipy_quad() -> None:
    # independent route: integrate h directly in p with quad, which handles
    # the integrable (1-p)^-0.365 endpoint singularity
    for beta in (0.6, 0.7, 0.8, 0.9, 0.95):
        integral, err = scipy_integrate.quad(h_function, beta, 1.0, limit=200)
        want = 0.135 * integral / (1.0 - beta)
        assert err < 1e-8
        assert theta_numeric(beta) == pytest.approx(want, abs=1e-7), beta


def test_theta_numeric_domain() -> None:
    with pytest.raises(ValueError):
        theta_numeric(0.4)
    with pytest.raises(ValueError):
        theta_numeric(1.0)


def test_ratio_theoretical_table_and_numeric() -> None:
    z = CONF.z
    # beta = 0.5 is the tabulated Theta = 2 case, exact identity
    assert ratio_theoretical(CONF, 1000, 0.5) == pytest.approx(1.0 - 2.0 * z / math.sqrt(1000), abs=1e-12)
    # beta >= 0.8 uses the tabulated Theta = 1.64
    assert ratio_theoretical(CONF, 1000, 0.8) == pytest.approx(0.8293488295597858, abs=1e-9)
    assert ratio_theoretical(CONF, 1000, 0.9) == pytest.approx(1.0 - 1.64 * z / math.sqrt(1000), abs=1e-12)
    # in between falls back to the numeric theta
    mid = ratio_theoretical(CONF, 1000, 0.7)
    assert mid == pytest.approx(1.0 - theta_numeric(0.7) * z / math.sqrt(1000), abs=1e-9)


def test_ratio_theoretical_can_go_negative() -> None:
    # tiny n: the first-order prediction leaves [0, 1]; callers must see it
    assert ratio_theoretical(CONF, 10, 0.5) < 0.0


# -------------------------------------------------------- certified accuracy


def test_accuracy_query_p0() -> None:
    q = AccuracyQuery(radius_threshold=0.5 * normal_quantile(0.75), sigma=0.5)
    assert q.p0 == pytest.approx(0.75, abs=1e-12)
    assert AccuracyQuery(radius_threshold=0.0, sigma=0.5).p0 == pytest.approx(0.5)
    with pytest.raises(ValueError):
        AccuracyQuery(radius_threshold=-0.1, sigma=0.5)
    with pytest.raises(ValueError):
        AccuracyQuery(radius_threshold=0.1, sigma=0.0)


def test_certified_accuracy_ideal_is_mass_above() -> None:
    d = PADistribution.uniform(0.5)
    q = AccuracyQuery(radius_threshold=0.5 * normal_quantile(0.75), sigma=0.5)
    assert certified_accuracy(d, q, cfg(0.5, 1000), ideal=True) == pytest.approx(0.5, abs=1e-12)


def test_certified_accuracy_finite_n_frozen() -> None:
    # frozen from scipy brentq on p - z sqrt(p(1-p)/1000) = 0.75, then the
    # uniform tail mass above the root 0.7922174647959158
    d = PADistribution.uniform(0.5)
    q = AccuracyQuery(radius_threshold=0.5 * normal_quantile(0.75), sigma=0.5)
    got = certified_accuracy(d, q, cfg(0.5, 1000))
    assert got == pytest.approx(0.41556507040816837, abs=1e-8)


def test_certified_accuracy_finite_below_ideal() -> None:
    d = PADistribution.piecewise(kappa1=0.4, kappa2=1.0, beta=0.8)
    for r0 in (0.0, 0.1, 0.3, 0.6):
        q = AccuracyQuery(radius_threshold=r0, sigma=0.5)
        finite = certified_accuracy(d, q, cfg(0.5, 500))
        ideal = certified_accuracy(d, q, cfg(0.5, 500), ideal=True)
        assert finite <= ideal + 1e-12


def test_certified_accuracy_unreachable_threshold() -> None:
    # threshold beyond any attainable bound: accuracy is exactly zero
    d = PADistribution.uniform(0.5)
    q = AccuracyQuery(radius_threshold=5.0, sigma=0.5)
    assert certified_accuracy(d, q, cfg(0.5, 1000)) == 0.0


def test_accuracy_drop_bound_frozen() -> None:
    # z / sqrt(n) with the two-sided z at alpha = 0.001
    assert accuracy_drop_bound(CONF, 1000) == pytest.approx(0.10405559173183793, abs=1e-9)
    # capped at one for absurdly small n
    assert accuracy_drop_bound(CONF, 2) == 1.0


def test_uniform_accuracy_drop_under_cap() -> None:
    # the distribution-free cap must hold analytically for the uniform case
    d = PADistribution.uniform(0.5)
    c = cfg(0.5, 1000)
    for r0 in (0.0, 0.2, 0.4, 0.6):
        q = AccuracyQuery(radius_threshold=r0, sigma=0.5)
        drop = certified_accuracy(d, q, c, ideal=True) - certified_accuracy(d, q, c)
        assert -1e-12 <= drop <= accuracy_drop_bound(CONF, 1000) + 1e-12
