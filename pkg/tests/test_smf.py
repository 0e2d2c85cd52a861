import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, optimize, stats

from fsoqkd import smf
from fsoqkd.distribution import ks_distance, make_grid


def test_beta_optimum_unobstructed():
    beta, eta0 = smf.optimize_beta(0.0)
    assert beta == pytest.approx(1.12, abs=0.01)
    assert eta0 == pytest.approx(0.815, abs=0.005)


@pytest.mark.parametrize("alpha", [0.0, 0.1, 0.3, 0.5])
def test_beta_optimum_against_golden_section(alpha):
    ref = optimize.minimize_scalar(lambda b: -smf.ideal_coupling(alpha, b), bracket=(0.5, 1.2, 3.0),
                                   method="golden", tol=1e-10)
    beta, eta0 = smf.optimize_beta(alpha)
    assert beta == pytest.approx(ref.x, abs=1e-4)
    assert eta0 == pytest.approx(-ref.fun, rel=1e-9)


def test_obscuration_lowers_coupling():
    vals = [smf.optimize_beta(a)[1] for a in (0.0, 0.2, 0.4)]
    assert vals[0] > vals[1] > vals[2]
    with pytest.raises(ValueError):
        smf.ideal_coupling(1.0, 1.0)


def test_tilt_variance_constant():
    # both tilt modes together: 20/23 (D/r0)^(5/3)
    v = 2 * smf.radial_order_variance(1, 1.0)
    assert v == pytest.approx(0.87, abs=5e-3)


def test_total_variance_sums_to_unit_constant():
    spec = smf.zernike_spectrum(1.0, 400)
    total = spec.variance.sum() + spec.tail_variance
    assert total == pytest.approx(1.0, abs=1e-5)


def test_osa_indexing():
    spec = smf.zernike_spectrum(5.0, 2)
    assert list(zip(spec.n, spec.m, spec.j)) == [(1, -1, 1), (1, 1, 2), (2, -2, 3), (2, 0, 4), (2, 2, 5)]


def test_spectrum_validation():
    spec = smf.zernike_spectrum(5.0, 2)
    with pytest.raises(ValueError):
        smf.ZernikeSpectrum(spec.n, spec.m, spec.j + 1, spec.variance, spec.gamma2)
    with pytest.raises(ValueError):
        smf.zernike_spectrum(0.0, 3)


def test_required_order():
    assert smf.required_correction_order(11.31) == (4, 12)
    n1, _ = smf.required_correction_order(5.0)
    n2, _ = smf.required_correction_order(20.0)
    assert n2 > n1


def test_ideal_loop_zeroes_corrected_orders():
    spec = smf.apply_loop(smf.zernike_spectrum(10.0, 12), smf.AoLoop(3))
    assert np.all(spec.gamma2[spec.n <= 3] == 0) and np.all(spec.gamma2[spec.n > 3] == 1)


def test_more_correction_raises_mean_efficiency():
    vals = [smf.mean_ao_efficiency(smf.corrected_spectrum(11.0, smf.AoLoop(n))) for n in (0, 1, 2, 4, 8)]
    assert all(a < b for a, b in zip(vals, vals[1:]))


def _gamma2(wind=3.0, t_s=1e-3, ki=0.5, n=1):
    return smf.mode_attenuation(smf.AoLoop(n, t_s=t_s, ki=ki), n, wind, 0.4)


def test_finite_bandwidth_attenuation_trends():
    g_slow, g_fast = _gamma2(wind=1.0), _gamma2(wind=10.0)
    assert 0 < g_slow < g_fast < 1
    assert _gamma2(t_s=1e-4) < _gamma2(t_s=1e-2)
    assert _gamma2(n=1) < _gamma2(n=4)


def test_vanishing_gain_leaves_mode_uncorrected():
    # the x^(-2/3) tilt spectrum makes the deficit shrink only like ki^(1/3)
    gains = [1e-4, 1e-6, 1e-8, 1e-10]
    deficit = [1.0 - _gamma2(ki=k) for k in gains]
    assert all(a > b > 0 for a, b in zip(deficit, deficit[1:]))
    assert deficit[-1] < 2e-3
    slopes = np.diff(np.log(deficit)) / np.diff(np.log(gains))
    assert slopes[-1] == pytest.approx(1 / 3, abs=0.02)


def test_weak_gain_attenuation_matches_log_space_quad():
    loop = smf.AoLoop(1, t_s=1e-3, ki=1e-6)
    nu_c = 0.3 * 2 * 3.0 / 0.4

    def integrand(t, power):
        x = math.exp(t)
        return smf._rejection2(np.array([x * nu_c]), loop)[0] * x ** (1.0 + power)

    kink = math.log(1e-6 / (2 * math.pi * 1e-3) / nu_c)
    lo = integrate.quad(integrand, -60, 0, args=(-2 / 3,), limit=2000, points=[kink])[0]
    hi = integrate.quad(integrand, 0, 40, args=(-17 / 3,), limit=2000)[0]
    assert smf.mode_attenuation(loop, 1, 3.0, 0.4) == pytest.approx((lo + hi) / (3 + 3 / 14), rel=1e-7)


def test_printed_two_product_form_is_not_unity_at_zero_correction():
    spec = smf.apply_loop(smf.zernike_spectrum(3.0, 20), smf.AoLoop(0))
    assert smf.mean_ao_efficiency_printed_form(spec, 0) > smf.mean_ao_efficiency(spec)


@pytest.mark.parametrize("v,k", [(0.05, 8), (0.02, 12), (0.2, 14)])
def test_gil_pelaez_single_group_is_scaled_chi2(v, k):
    # k modes sharing one variance
    base = smf.zernike_spectrum(1.0, 4)
    ns, ms = base.n[:k], base.m[:k]
    spec = smf.ZernikeSpectrum(ns, ms, (ns * (ns + 2) + ms) // 2, np.full(k, v), np.ones(k))
    law = smf.z_law(spec)
    x = np.linspace(0, 10 * v * k, 50)
    assert np.max(np.abs(law.cdf(x) - stats.chi2(k, scale=v).cdf(x))) < 1e-5
    assert law.raw_mass == pytest.approx(1.0, abs=1e-6)


def test_single_dominant_mode_is_rejected_cleanly():
    spec = smf.ZernikeSpectrum(np.array([1]), np.array([1]), np.array([2]), np.array([0.1]), np.ones(1))
    with pytest.raises(smf.NumericError):
        smf.z_law(spec)


def test_gil_pelaez_against_monte_carlo():
    spec = smf.corrected_spectrum(17.1, smf.AoLoop(2))
    grid = make_grid(-8, 0.05)
    d = smf.smf_distribution(spec, 0.8145, grid)
    mc = smf.zernike_mc_oracle(spec, 0.8145, 200_000, seed=11, grid=grid)
    assert ks_distance(d, mc) < 0.01
    assert d.mean() == pytest.approx(d.meta["closed_form_mean"], rel=0.01)


def test_fully_corrected_spectrum_is_degenerate():
    spec = smf.apply_loop(smf.zernike_spectrum(3.0, 4), smf.AoLoop(4))
    law = smf.z_law(spec)
    assert law.degenerate
    d = smf.smf_distribution(spec, 0.5, make_grid(-3, 0.1))
    assert d.eta.tolist() == [0.5]


@settings(max_examples=15, deadline=None)
@given(st.floats(0.5, 30.0), st.integers(1, 4))
def test_z_law_is_a_distribution(d_over_r0, n_max):
    spec = smf.corrected_spectrum(d_over_r0, smf.AoLoop(n_max))
    law = smf.z_law(spec)
    c = law.cdf(np.linspace(0, law.z[-1], 200))
    assert np.all(np.diff(c) >= -1e-12)
    assert abs(law.raw_mass - 1) < 1e-3
    # mean of z = sum of effective variances
    mids = 0.5 * (law.z[:-1] + law.z[1:])
    assert np.sum(mids * law.pdf_mid) * law.info["dz"] == pytest.approx(law.mean, rel=1e-3)


def test_scintillation_coupling():
    assert smf.scintillation_coupling(0.0) == 1.0
    assert smf.scintillation_coupling(1.0) == pytest.approx(2 ** -0.25)
    with pytest.raises(ValueError):
        smf.scintillation_coupling(-0.1)
