import numpy as np
import pytest

from fsoqkd import channel as ch
from fsoqkd.smf import AoLoop


def test_case_ids_validated():
    with pytest.raises(ValueError):
        ch.case_study(9)


@pytest.mark.parametrize("case_id", [1, 2, 5])
def test_composition_normalized_and_consistent(dists, case_id):
    d = dists[case_id]
    assert abs(d.total - 1) < 1e-9
    assert abs(d.meta["smf_density_mass"] - 1) < 1e-3
    assert abs(d.meta["aperture_raw_mass"] - 1) < 0.01
    assert np.all(d.eta <= 1.0)


def test_composed_mean_equals_mixture_of_conditionals():
    m = ch.case_study(2)
    c = ch.channel_components(m)
    d = ch.channel_distribution(m, c)
    ceiling = c.eta_a * m.eta0 * c.eta_s
    from fsoqkd.smf import smf_conditional_weights
    cond = smf_conditional_weights(c.z_law, np.minimum(ceiling * c.aperture.eta, 1.0), m.grid)
    raw = c.aperture.weights @ cond
    assert d.mean() == pytest.approx(float(raw @ m.grid.edges) / raw.sum(), rel=1e-12)


def test_distribution_mean_close_to_closed_form(dists):
    for case_id in (1, 2):
        m = ch.case_study(case_id)
        assert dists[case_id].mean() == pytest.approx(ch.closed_form_mean(m), rel=0.03)


def test_more_correction_helps():
    m = ch.case_study(4)
    better = m.with_loop(AoLoop(4))
    assert ch.closed_form_mean(better) > ch.closed_form_mean(m)


def test_absorption_scales_support():
    from fsoqkd.atmosphere import SpectralTable
    clear = SpectralTable(np.array([400.0, 2000.0]), np.zeros(2))
    m = ch.case_study(2)
    m0 = ch.case_study(2, table=clear)
    assert 0 < m.absorption < 1 and m0.absorption == 1
    assert ch.closed_form_mean(m) == pytest.approx(m.absorption * ch.closed_form_mean(m0), rel=1e-12)
    d, d0 = ch.channel_distribution(m), ch.channel_distribution(m0)
    assert d.mean() == pytest.approx(m.absorption * d0.mean(), rel=0.02)


def test_diameter_optimum_interior_and_improves():
    m = ch.case_study(4)
    r = ch.optimize_receiver_diameter(m, (0.02, 1.0))
    assert not r.at_boundary
    for d in (0.5 * r.d_opt_m, 2 * r.d_opt_m):
        assert ch.closed_form_mean(m.with_aperture(d)) < 10 ** (r.mean_db / 10)


def test_diameter_grows_with_correction_order():
    m = ch.case_study(2)
    d1 = ch.optimize_receiver_diameter(m, (0.02, 1.0), n_max=1).d_opt_m
    d4 = ch.optimize_receiver_diameter(m, (0.02, 1.0), n_max=4).d_opt_m
    assert d4 > d1


def test_diameter_range_validation():
    with pytest.raises(ValueError):
        ch.optimize_receiver_diameter(ch.case_study(1), (0.5, 0.1))
