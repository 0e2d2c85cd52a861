import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from fsoqkd import security as sec
from fsoqkd.detection import HardwareScenario, click_statistics
from fsoqkd.distribution import EfficiencyDistribution

IDEAL = HardwareScenario(1e9, 1.0, 0.0, 0.0, 1e-300, 0.0, 0.0, 0.0)


def test_reference_values():
    assert sec.binary_entropy(0.11) == pytest.approx(0.4999, abs=1e-4)
    assert sec.hoeffding_delta(1e6, 1e-10) == pytest.approx(3393, abs=1)
    assert 6 * math.log2(19 / 1e-9) == pytest.approx(204.9, abs=0.1)


def test_binary_entropy_properties():
    assert sec.binary_entropy(0.0) == 0.0 and sec.binary_entropy(0.5) == 1.0
    assert sec.binary_entropy(0.2) == pytest.approx(sec.binary_entropy(0.8))
    with pytest.raises(ValueError):
        sec.binary_entropy(1.2)


def test_protocol_validation():
    with pytest.raises(ValueError):
        sec.ProtocolParams(0.9, 0.7, 0.1, 0.2, 1e-9)
    with pytest.raises(ValueError):
        sec.ProtocolParams(1.0, 0.7, 0.5, 0.1, 1e-9)
    with pytest.raises(ValueError):
        sec.ProtocolParams(0.9, 0.7, 0.5, 0.1, 1e-9, f_ec=0.9)


def test_poisson_tau():
    assert sec.poisson_tau(0, (0.5, 0.1), (0.7, 0.3)) == pytest.approx(0.7 * math.exp(-0.5) + 0.3 * math.exp(-0.1))
    assert sum(sec.poisson_tau(n, (0.5, 0.1), (0.7, 0.3)) for n in range(30)) == pytest.approx(1.0)


def _stats(eta, mu, nu, dark=0.0, coding=0.0):
    hw = IDEAL.replace(dark_rate_hz=dark, coding_error=coding)
    proto = sec.ProtocolParams(0.5, 0.6, mu, nu, 1e-9)
    s = click_statistics(EfficiencyDistribution.point_mass(eta), hw, proto, duration_s=1.0)
    return s, proto, hw


def _truth(eta, mu, nu, p_basis, proto, dark):
    """Exact vacuum and single-photon detections from photon-number yields."""
    n_pulses = 1e9 * p_basis
    p_n = dark * proto.t_gat_s
    p = (proto.p_mu, proto.p_nu)
    s0 = n_pulses * sec.poisson_tau(0, (mu, nu), p) * p_n
    y1 = 1 - (1 - p_n) * (1 - eta)
    s1 = n_pulses * sec.poisson_tau(1, (mu, nu), p) * y1
    return s0, s1


def _no_delta(n):
    return 0.0


def test_single_photon_bound_tight_as_decoy_vanishes():
    eta, mu = 0.05, 0.5
    for nu, tol in ((1e-2, 2e-2), (1e-4, 2e-4)):
        s, proto, _ = _stats(eta, mu, nu)
        p = (proto.p_mu, proto.p_nu)
        _, s0_up = sec.vacuum_bounds(s.n_z, s.m_z, mu, nu, p, _no_delta)
        s1 = sec.single_photon_bound(s.n_z, mu, nu, p, _no_delta, s0_up)
        _, truth = _truth(eta, mu, nu, 0.25, proto, 0.0)
        assert s1 <= truth * (1 + 1e-12)
        assert s1 == pytest.approx(truth, rel=tol)


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-5, 0.5), st.floats(0.1, 1.0), st.floats(0.01, 0.9), st.floats(0, 1e5), st.floats(0, 0.05))
def test_bounds_are_valid_without_fluctuations(eta, mu, ratio, dark, coding):
    nu = ratio * mu
    s, proto, _ = _stats(eta, mu, nu, dark, coding)
    p = (proto.p_mu, proto.p_nu)
    s0_true, s1_true = _truth(eta, mu, nu, 0.25, proto, dark)
    s0_lo, s0_up = sec.vacuum_bounds(s.n_z, s.m_z, mu, nu, p, _no_delta)
    s1 = sec.single_photon_bound(s.n_z, mu, nu, p, _no_delta, s0_up)
    scale = max(s.n_z_total, 1.0) * 1e-9
    assert s0_lo <= s0_true + scale
    assert s0_up >= s0_true - scale
    assert s1 <= s1_true + scale


def test_phase_error_bound_noiseless():
    eta, mu, nu = 0.05, 0.5, 0.1
    s, proto, _ = _stats(eta, mu, nu, coding=0.02)
    p = (proto.p_mu, proto.p_nu)
    v1 = sec.phase_error_upper(s.m_x, mu, nu, p, _no_delta)
    truth = 1e9 * 0.25 * sec.poisson_tau(1, (mu, nu), p) * eta * 0.02
    assert v1 >= truth * (1 - 1e-9)


def test_serfling_gamma_properties():
    assert sec.serfling_gamma(1e-10, 0.0, 1e6, 1e5) == 0.0
    g1 = sec.serfling_gamma(1e-10, 0.02, 1e6, 1e5)
    g2 = sec.serfling_gamma(1e-10, 0.02, 1e7, 1e6)
    assert 0 < g2 < g1


def test_infinite_key_dominates_finite():
    s, proto, _ = _stats(0.01, 0.5, 0.1, dark=1e3, coding=0.01)
    fin = sec.secret_key_rate(s, proto)
    inf = sec.secret_key_rate(s, proto, finite=False)
    assert inf.skr_bps > fin.skr_bps > 0
    assert inf.l_c == 0 and inf.l_sec == 0
    assert fin.l_c == 50
    assert fin.l_sec == pytest.approx(204.9, abs=0.1)


def test_noiseless_key_close_to_single_photon_count():
    s, proto, _ = _stats(0.5, 0.5, 1e-3)
    r = sec.secret_key_rate(s, proto, finite=False)
    _, s1 = _truth(0.5, 0.5, 1e-3, 0.25, proto, 0.0)
    assert r.secret_bits == pytest.approx(s1, rel=5e-3)


def test_no_detections_gives_zero():
    s, proto, _ = _stats(0.0 + 1e-300, 0.5, 0.1)
    r = sec.secret_key_rate(s, proto)
    assert r.skr_bps == 0 and not r.feasible


def test_too_much_noise_gives_zero():
    s, proto, _ = _stats(1e-6, 0.5, 0.1, dark=1e7)
    r = sec.secret_key_rate(s, proto)
    assert r.skr_bps == 0 and r.secret_bits < 0


def test_result_row_has_every_field():
    s, proto, _ = _stats(0.01, 0.5, 0.1, dark=1e3, coding=0.01)
    assert len(sec.secret_key_rate(s, proto).row()) == len(sec.SKR_FIELDS)
