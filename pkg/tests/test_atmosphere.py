import math

import numpy as np
import pytest

from fsoqkd import atmosphere as atm


def _write(tmp_path, text):
    p = tmp_path / "t.csv"
    p.write_text(text)
    return p


def test_bundled_tables_cover_range():
    for kind in ("absorption", "radiance"):
        t = atm.bundled_table(kind)
        assert t.domain == (400.0, 2000.0)
        assert t.kind == kind


def test_loader_accepts_header_and_comments(tmp_path):
    p = _write(tmp_path, "# comment\nwavelength_nm,value\n1500,0.1\n1600,0.3\n")
    t = atm.load_spectral_table(p)
    assert t.value(1550) == pytest.approx(0.2)


@pytest.mark.parametrize("body", ["1500,0.1\n1400,0.2\n", "1500,0.1\n1600,-1\n", "1500,0.1\n1600,x\n", "1500\n"])
def test_loader_rejects_bad_tables(tmp_path, body):
    with pytest.raises(atm.SpectralTableError):
        atm.load_spectral_table(_write(tmp_path, body))


def test_malformed_row_reports_line(tmp_path):
    with pytest.raises(atm.SpectralTableError, match=":3:"):
        atm.load_spectral_table(_write(tmp_path, "1500,0.1\n1600,0.2\n1700;0.3\n"))


def test_out_of_domain_wavelength():
    with pytest.raises(atm.WavelengthDomainError):
        atm.bundled_table("absorption").value(2500)


def test_transmittance_is_power_law_in_distance():
    t = atm.bundled_table("absorption")
    t1 = atm.absorption_transmittance(t, 1550, 1.0)
    assert atm.absorption_transmittance(t, 1550, 0.0) == 1.0
    assert atm.absorption_transmittance(t, 1550, 3.0) == pytest.approx(t1 ** 3)
    with pytest.raises(ValueError):
        atm.absorption_transmittance(t, 1550, -1.0)


def test_smf_background_independent_of_aperture():
    rad = atm.bundled_table("radiance")
    rates = [atm.sky_background_rate(rad, 1550, 1.0, atm.smf_fov(1550, d), d) for d in (0.05, 0.2, 0.4)]
    assert np.ptp(rates) == 0.0
    # (beta^2/4) I lambda^3 dlambda / (h c), I = 0.85 W m^-2 sr^-1 um^-1, 1 nm filter
    expected = 1.12 ** 2 / 4 * 0.85 / atm.HC * (1550e-9) ** 3 * 1e-3
    assert rates[0] == pytest.approx(expected, rel=1e-12)
    assert 4900 < rates[0] < 5100


def test_image_plane_background_scales_with_area():
    rad = atm.bundled_table("radiance")
    fov = atm.image_plane_fov(1e-4)
    r1 = atm.sky_background_rate(rad, 1550, 1.0, fov, 0.1)
    r2 = atm.sky_background_rate(rad, 1550, 1.0, fov, 0.2)
    assert r2 / r1 == pytest.approx(4.0)
    with pytest.raises(ValueError):
        atm.sky_background_rate(rad, 1550, 0.0, fov, 0.1)


def test_smf_fov_formula():
    fov = atm.smf_fov(1550, 0.2)
    assert fov.fov_rad == pytest.approx(1.12 / math.pi * 1550e-9 / 0.2, rel=1e-12)
    assert fov.solid_angle_sr == pytest.approx(math.pi * fov.fov_rad ** 2, rel=1e-9)
    with pytest.raises(ValueError):
        atm.smf_fov(1550, 0.0)
