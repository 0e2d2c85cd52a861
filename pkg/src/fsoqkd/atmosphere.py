"""Tabulated atmospheric data: absorption transmittance and sky background.

Absorption and diffuse-radiance spectra are not computed here; they are read
from two-column CSV files (``wavelength_nm,value``) produced by an external
radiative-transfer code. Interpolation is linear and never extrapolates.
"""
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
import math

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT, h as PLANCK

__all__ = [
    "SpectralTable",
    "SpectralTableError",
    "WavelengthDomainError",
    "FovMode",
    "ReceiverFov",
    "load_spectral_table",
    "bundled_table",
    "absorption_transmittance",
    "smf_fov",
    "image_plane_fov",
    "sky_background_rate",
]

HC = PLANCK * SPEED_OF_LIGHT  # J m


class SpectralTableError(ValueError):
    pass


class WavelengthDomainError(ValueError):
    pass


@dataclass(frozen=True)
class SpectralTable:
    """Sampled spectrum on a strictly increasing wavelength grid (nm).

    ``kind == "absorption"``: base-10 exponent coefficient per km, so that the
    transmittance over ``z`` km is ``10**(-A*z)``.
    ``kind == "radiance"``: diffuse sky radiance in W m^-2 sr^-1 um^-1.
    """

    wavelength_nm: np.ndarray
    values: np.ndarray
    kind: str = "absorption"
    source: str = ""

    def __post_init__(self):
        wl = np.asarray(self.wavelength_nm, dtype=float)
        val = np.asarray(self.values, dtype=float)
        if wl.ndim != 1 or val.shape != wl.shape:
            raise SpectralTableError("wavelength grid and values must be 1-D and of equal length")
        if wl.size < 2:
            raise SpectralTableError("a spectral table needs at least 2 points")
        if np.any(np.diff(wl) <= 0):
            raise SpectralTableError("wavelength grid must be strictly increasing")
        if np.any(val < 0) or not np.all(np.isfinite(val)):
            raise SpectralTableError("spectral values must be finite and non-negative")
        if self.kind not in ("absorption", "radiance"):
            raise SpectralTableError(f"unknown table kind {self.kind!r}")
        wl.setflags(write=False)
        val.setflags(write=False)
        object.__setattr__(self, "wavelength_nm", wl)
        object.__setattr__(self, "values", val)

    @property
    def domain(self):
        return float(self.wavelength_nm[0]), float(self.wavelength_nm[-1])

    def value(self, lambda_nm):
        lo, hi = self.domain
        lam = np.asarray(lambda_nm, dtype=float)
        if np.any(lam < lo) or np.any(lam > hi):
            raise WavelengthDomainError(
                f"wavelength {lambda_nm} nm outside table domain [{lo}, {hi}] nm"
            )
        out = np.interp(lam, self.wavelength_nm, self.values)
        return float(out) if out.ndim == 0 else out


def _parse_csv(lines, origin):
    wl, val = [], []
    seen_data = False
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        try:
            if len(parts) != 2:
                raise ValueError
            a, b = float(parts[0]), float(parts[1])
        except ValueError:
            if not seen_data and len(wl) == 0 and not _looks_numeric(parts[0]):
                seen_data = True  # header line
                continue
            raise SpectralTableError(f"{origin}:{lineno}: malformed row {raw.rstrip()!r}") from None
        seen_data = True
        wl.append(a)
        val.append(b)
    return wl, val


def _looks_numeric(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def load_spectral_table(path, kind="absorption"):
    """Read a ``wavelength_nm,value`` CSV file.

    Lines starting with ``#`` are comments and a single non-numeric header row
    is allowed. Raises :class:`SpectralTableError` naming the offending line.
    """
    with open(path, encoding="utf-8") as fh:
        wl, val = _parse_csv(fh.readlines(), str(path))
    return SpectralTable(np.array(wl), np.array(val), kind=kind, source=str(path))


def bundled_table(kind):
    """The synthetic sample table shipped with the package (400-2000 nm)."""
    name = {"absorption": "absorption_synthetic.csv", "radiance": "radiance_synthetic.csv"}[kind]
    ref = resources.files("fsoqkd") / "data" / name
    with resources.as_file(ref) as p:
        return load_spectral_table(p, kind=kind)


def absorption_transmittance(table, lambda_nm, z_km):
    """Transmittance ``10**(-A(lambda) * z)`` of a horizontal path."""
    if z_km < 0:
        raise ValueError("path length must be non-negative")
    a = table.value(lambda_nm)
    return 10.0 ** (-a * z_km)


class FovMode(str, Enum):
    IMAGE_PLANE_FREE = "image_plane_free"
    FOCAL_PLANE_SMF = "focal_plane_smf"


@dataclass(frozen=True)
class ReceiverFov:
    fov_rad: float
    solid_angle_sr: float
    mode: FovMode
    # only meaningful for FOCAL_PLANE_SMF; lets the background rate use the closed form
    beta_opt: float = field(default=float("nan"))

    def __post_init__(self):
        if not self.fov_rad > 0:
            raise ValueError("field of view must be positive")
        expected = _solid_angle(self.fov_rad)
        if abs(self.solid_angle_sr - expected) > 1e-12 * expected:
            raise ValueError("solid angle inconsistent with field of view")

    @classmethod
    def from_fov(cls, fov_rad, mode, beta_opt=float("nan")):
        return cls(fov_rad, _solid_angle(fov_rad), FovMode(mode), beta_opt)


def _solid_angle(fov):
    # 2*pi*(1 - cos(fov)) without cancellation at tiny angles
    return 4.0 * math.pi * math.sin(0.5 * fov) ** 2


def smf_fov(lambda_nm, d_rx_m, beta_opt=1.12):
    """Field of view of a single-mode fiber on the focal plane, ``(beta/pi) lambda/D``."""
    if d_rx_m <= 0 or beta_opt <= 0:
        raise ValueError("aperture diameter and beta must be positive")
    fov = beta_opt / math.pi * (lambda_nm * 1e-9) / d_rx_m
    return ReceiverFov.from_fov(fov, FovMode.FOCAL_PLANE_SMF, beta_opt)


def image_plane_fov(fov_rad):
    return ReceiverFov.from_fov(fov_rad, FovMode.IMAGE_PLANE_FREE)


def sky_background_rate(radiance, lambda_nm, delta_lambda_nm, receiver, d_rx_m):
    """Diffuse-sky photon rate (photons/s) collected by the receiver.

    For an SMF receiver the rate reduces to ``(beta^2/4) (I/hc) lambda^3 dlambda``
    and is independent of aperture and focal length.
    """
    if delta_lambda_nm <= 0:
        raise ValueError("filter bandwidth must be positive")
    intensity = radiance.value(lambda_nm)  # W m^-2 sr^-1 um^-1
    lam_m = lambda_nm * 1e-9
    dlam_um = delta_lambda_nm * 1e-3
    if receiver.mode == FovMode.FOCAL_PLANE_SMF and math.isfinite(receiver.beta_opt):
        return receiver.beta_opt ** 2 / 4.0 * intensity / HC * lam_m ** 3 * dlam_um
    area = math.pi * (d_rx_m / 2.0) ** 2
    return intensity * area * receiver.solid_angle_sr * dlam_um / (HC / lam_m)
