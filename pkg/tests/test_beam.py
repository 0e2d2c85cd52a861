import math

import pytest
from hypothesis import given, settings, strategies as st

from fsoqkd import beam


def geom(z_km=10, w0_mm=60, d_mm=200):
    return beam.LinkGeometry(1550e-9, z_km * 1e3, w0_mm * 1e-3, d_mm * 1e-3)


@pytest.mark.parametrize("z_km,sigma", [(1, 0.4), (2, 0.8), (5, 2.0), (10, 3.7), (15, 5.3), (30, 10.1)])
def test_rytov_std_reference_values(z_km, sigma):
    t = beam.derive_turbulence(geom(z_km), 1e-14)
    assert t.rytov_std == pytest.approx(sigma, abs=0.05)


def test_d_over_r0_at_20km():
    g = geom(20, 60, 400)
    t = beam.derive_turbulence(g, 1e-14)
    assert g.d_rx_m / t.r0_m == pytest.approx(17.0, abs=0.3)


def test_r0_is_scaled_coherence_radius():
    t = beam.derive_turbulence(geom(), 1e-14)
    assert t.r0_m == pytest.approx(2.1 * t.rho0_m)


def test_waists_at_long_range_approach_asymptote():
    for w0_mm in (10, 50, 200):
        g = geom(50, w0_mm)
        t = beam.derive_turbulence(g, 1e-14)
        w_asym = beam.asymptotic_waist(g.lambda_m, 1e-14, g.z_m)
        assert beam.longterm_waist(g, t) == pytest.approx(w_asym, rel=0.10)


def test_wander_exceeding_waist_is_domain_error():
    g = beam.LinkGeometry(1550e-9, 30e3, 0.5, 0.2)
    t = beam.derive_turbulence(g, 1e-12)
    t = beam.TurbulenceState(t.cn2, t.rho0_m, t.r0_m, t.rytov_var, 1e6, t.scint_index_point,
                             t.scint_index_aperture)
    with pytest.raises(beam.ModelDomainError):
        beam.shortterm_waist(g, t)


def test_invalid_geometry():
    with pytest.raises(ValueError):
        beam.LinkGeometry(1550e-9, 1e3, 0.0, 0.1)
    with pytest.raises(ValueError):
        beam.LinkGeometry(1550e-9, -1.0, 0.02, 0.1)
    with pytest.raises(ValueError):
        beam.derive_turbulence(geom(), 0.0)


def test_zero_distance_is_turbulence_free():
    g = beam.LinkGeometry(1550e-9, 0.0, 0.02, 0.1)
    t = beam.derive_turbulence(g, 1e-14)
    assert t.rytov_var == 0 and t.wander_var_m2 == 0 and math.isinf(t.rho0_m)
    assert beam.longterm_waist(g, t) == pytest.approx(0.02)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.5, 40), st.floats(1e-16, 1e-12))
def test_turbulence_orderings(z_km, cn2):
    g = geom(z_km)
    t = beam.derive_turbulence(g, cn2)
    # aperture averaging only reduces scintillation
    assert 0 <= t.scint_index_aperture <= t.scint_index_point
    # turbulence only widens the beam
    assert beam.longterm_waist(g, t) >= beam.diffraction_waist(g)
    t2 = beam.derive_turbulence(g, cn2 * 2)
    assert t2.rytov_var > t.rytov_var and t2.r0_m < t.r0_m


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-3, 2), st.floats(1e-3, 2))
def test_collection_efficiency_bounds(d, w):
    eta = beam.mean_collection_efficiency(d, w)
    assert 0 < eta <= 1
    assert beam.mean_collection_efficiency(2 * d, w) >= eta
