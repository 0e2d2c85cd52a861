"""Regenerate the synthetic spectral tables bundled with the package.

Neither table is measured or radiative-transfer output. The shapes are smooth
placeholders with water-vapour-like bands; the values at 1550 nm are pinned:

* absorption: 0.00754 (base-10 exponent per km), the single coefficient that
  best fits the eight reference link budgets;
* radiance: 0.85 W m^-2 sr^-1 um^-1, which gives ~5 kHz of sky photons into
  a single-mode fiber behind a 1 nm filter.
"""
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "fsoqkd" / "data"
WL = np.arange(400.0, 2000.0 + 1e-9, 5.0)
BANDS = [(720.0, 12.0, 0.6), (940.0, 25.0, 3.0), (1130.0, 30.0, 5.0),
         (1380.0, 45.0, 40.0), (1870.0, 50.0, 60.0)]


def bands(wl):
    return sum(a * np.exp(-0.5 * ((wl - c) / w) ** 2) for c, w, a in BANDS)


def absorption():
    base = (WL / 1550.0) ** -4 + 0.3
    shape = base * (1.0 + bands(WL))
    return shape / np.interp(1550.0, WL, shape) * 0.00754


def radiance():
    base = (WL / 1550.0) ** -3 * np.exp(-((WL - 500.0) / 3000.0) ** 2)
    shape = base / (1.0 + bands(WL))
    return shape / np.interp(1550.0, WL, shape) * 0.85


def write(name, values, header):
    with open(OUT / name, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# SYNTHETIC sample data, not measured. {header}\n")
        fh.write("# regenerate with tools/make_synthetic_tables.py\n")
        fh.write("wavelength_nm,value\n")
        for w, v in zip(WL, values):
            fh.write(f"{w:.1f},{v:.6e}\n")


if __name__ == "__main__":
    write("absorption_synthetic.csv", absorption(), "Base-10 exponent coefficient per km: T = 10^(-A z).")
    write("radiance_synthetic.csv", radiance(), "Diffuse sky radiance in W m^-2 sr^-1 um^-1.")
