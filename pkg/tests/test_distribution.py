import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fsoqkd.distribution import EfficiencyDistribution, ks_distance, make_grid, parse_grid_spec, to_db


def test_grid_edge_count():
    assert make_grid(-6, 0.05).size == 121
    assert make_grid(-3, 0.02).size == 151


def test_grid_non_dividing_step_ends_at_one():
    g = make_grid(-1, 0.3)
    assert g.edges[-1] == 1.0
    assert np.all(np.diff(g.edges) > 0)


@pytest.mark.parametrize("bad", ["10^[-3:0.1:1]"])
def test_grid_must_end_at_one(bad):
    with pytest.raises(ValueError):
        parse_grid_spec(bad)


def test_grid_validation():
    with pytest.raises(ValueError):
        make_grid(0, 0.1)
    with pytest.raises(ValueError):
        make_grid(-3, -0.1)


def test_spec_round_trip():
    g = parse_grid_spec("10^[-8:0.1:0]")
    assert parse_grid_spec(g.spec).edges.tolist() == g.edges.tolist()
    assert parse_grid_spec("-8:0.1").size == g.size


def test_cells_tile_the_unit_interval():
    lower, upper = make_grid(-4, 0.1).cell_bounds()
    assert np.all(lower[1:] == upper[:-1])
    assert upper[-1] == 1.0


def test_csv_round_trip(tmp_path):
    g = make_grid(-2, 0.5)
    d = EfficiencyDistribution.on_grid(g, [1, 2, 3, 4, 5])
    p = tmp_path / "d.csv"
    d.to_csv(p, {"case": 1})
    back = EfficiencyDistribution.from_csv(p)
    assert np.allclose(back.eta, d.eta, rtol=1e-9) and np.allclose(back.weights, d.weights, rtol=1e-9)
    assert p.read_text().startswith(f"# mean_dB={d.mean_db():.6f}")


def test_on_grid_keeps_raw_mass():
    d = EfficiencyDistribution.on_grid(make_grid(-1, 0.5), [0.2, 0.3, 0.4])
    assert d.raw_mass == pytest.approx(0.9)
    assert d.total == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        EfficiencyDistribution.on_grid(make_grid(-1, 0.5), [0, 0, 0])


def test_to_db():
    assert to_db(0.1) == pytest.approx(-10)
    assert to_db(0) == -np.inf


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=21, max_size=21).filter(lambda w: sum(w) > 1e-3))
def test_normalization_and_ks_properties(w):
    g = make_grid(-2, 0.1)
    d = EfficiencyDistribution.on_grid(g, w)
    assert abs(d.total - 1) < 1e-9
    assert ks_distance(d, d) == 0
    pm = EfficiencyDistribution.point_mass(1.0)
    assert 0 <= ks_distance(d, pm) <= 1 + 1e-12
    s = d.scaled(0.5)
    assert s.mean() == pytest.approx(0.5 * d.mean())
