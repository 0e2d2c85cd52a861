"""Gaussian-beam propagation through Kolmogorov turbulence on a horizontal path.

All quantities are SI (metres, seconds). The Kolmogorov spectrum is implicit
in the closed-form constants; no spectral integration is performed.
"""
from dataclasses import dataclass
import math

__all__ = [
    "LinkGeometry",
    "TurbulenceState",
    "ModelDomainError",
    "wavenumber",
    "coherence_radius",
    "rytov_variance",
    "beam_wander_variance",
    "scintillation_index",
    "derive_turbulence",
    "diffraction_waist",
    "longterm_waist",
    "shortterm_waist",
    "asymptotic_waist",
    "mean_collection_efficiency",
    "centered_shortterm_efficiency",
]


class ModelDomainError(ValueError):
    """Parameter combination outside the validity range of the beam model."""


@dataclass(frozen=True)
class LinkGeometry:
    lambda_m: float
    z_m: float
    w0_m: float
    d_rx_m: float
    obscuration_ratio: float = 0.0

    def __post_init__(self):
        if not (self.lambda_m > 0 and self.w0_m > 0 and self.d_rx_m > 0):
            raise ValueError("wavelength, waist and aperture must be positive")
        if self.z_m < 0:
            raise ValueError("link distance must be non-negative")
        if not 0.0 <= self.obscuration_ratio < 1.0:
            raise ValueError("obscuration ratio must lie in [0, 1)")

    @property
    def k(self):
        return 2.0 * math.pi / self.lambda_m

    @property
    def rayleigh_range_m(self):
        return math.pi * self.w0_m ** 2 / self.lambda_m

    def with_aperture(self, d_rx_m):
        return LinkGeometry(self.lambda_m, self.z_m, self.w0_m, d_rx_m, self.obscuration_ratio)

    def with_distance(self, z_m):
        return LinkGeometry(self.lambda_m, z_m, self.w0_m, self.d_rx_m, self.obscuration_ratio)


@dataclass(frozen=True)
class TurbulenceState:
    cn2: float
    rho0_m: float
    r0_m: float
    rytov_var: float
    wander_var_m2: float
    scint_index_point: float
    scint_index_aperture: float
    wind_speed_mps: float = 3.0

    @property
    def rytov_std(self):
        return math.sqrt(self.rytov_var)


def wavenumber(lambda_m):
    return 2.0 * math.pi / lambda_m


def coherence_radius(cn2, k, z):
    """Spherical-wave coherence radius ``(0.55 Cn2 k^2 z)^(-3/5)``."""
    arg = 0.55 * cn2 * k * k * z
    return math.inf if arg <= 0 else arg ** -0.6


def rytov_variance(cn2, k, z):
    return 1.23 * cn2 * k ** (7.0 / 6.0) * z ** (11.0 / 6.0)


def beam_wander_variance(cn2, z, w0):
    """Beam-wander variance ``<r_c^2> = 2.42 Cn2 z^3 W0^(-1/3)`` of a collimated beam."""
    return 2.42 * cn2 * z ** 3 * w0 ** (-1.0 / 3.0)


def scintillation_index(rytov_var, d=0.0):
    """Aperture-averaged flux variance for normalized aperture size ``d = sqrt(k D^2 / 4z)``.

    ``d = 0`` gives the on-axis point scintillation index.
    """
    b2 = 0.4065 * rytov_var
    b125 = b2 ** 1.2  # beta_0^(12/5)
    d2 = d * d
    t1 = 0.49 * b2 / (1.0 + 0.18 * d2 + 0.56 * b125) ** (7.0 / 6.0)
    t2 = 0.51 * b2 * (1.0 + 0.69 * b125) ** (-5.0 / 6.0) / (1.0 + 0.90 * d2 + 0.62 * d2 * b125)
    return math.expm1(t1 + t2)


def derive_turbulence(geom, cn2, wind_speed=3.0):
    if not cn2 > 0:
        raise ValueError("Cn2 must be positive")
    k, z = geom.k, geom.z_m
    rho0 = coherence_radius(cn2, k, z)
    sr2 = rytov_variance(cn2, k, z)
    d = math.sqrt(k * geom.d_rx_m ** 2 / (4.0 * z)) if z > 0 else math.inf
    return TurbulenceState(
        cn2=cn2,
        rho0_m=rho0,
        r0_m=2.1 * rho0,
        rytov_var=sr2,
        wander_var_m2=beam_wander_variance(cn2, z, geom.w0_m),
        scint_index_point=scintillation_index(sr2, 0.0),
        scint_index_aperture=scintillation_index(sr2, d) if math.isfinite(d) else 0.0,
        wind_speed_mps=wind_speed,
    )


def diffraction_waist(geom):
    """Vacuum beam radius after ``geom.z_m``."""
    x = geom.lambda_m * geom.z_m / (math.pi * geom.w0_m ** 2)
    return geom.w0_m * math.sqrt(1.0 + x * x)


def longterm_waist(geom, turb):
    """Long-term beam radius including turbulent coherence loss."""
    x = geom.lambda_m * geom.z_m / (math.pi * geom.w0_m ** 2)
    coh = 2.0 * geom.w0_m ** 2 / turb.rho0_m ** 2 if math.isfinite(turb.rho0_m) else 0.0
    return geom.w0_m * math.sqrt(1.0 + (1.0 + coh) * x * x)


def shortterm_waist(geom, turb):
    w = longterm_waist(geom, turb)
    rc2 = turb.wander_var_m2
    if rc2 >= w * w:
        raise ModelDomainError(
            f"beam-wander variance {rc2:.4g} m^2 >= long-term W^2 {w * w:.4g} m^2"
        )
    return math.sqrt(w * w - rc2)


def asymptotic_waist(lambda_m, cn2, z):
    """Large-distance limit of the long-term waist, independent of W0."""
    k = wavenumber(lambda_m)
    return lambda_m * math.sqrt(2.0) / math.pi * (0.55 * cn2 * k * k) ** 0.6 * z ** 1.6


def mean_collection_efficiency(d_rx_m, waist_m):
    """Fraction of a centred Gaussian beam of radius ``waist_m`` inside the aperture."""
    if d_rx_m <= 0 or waist_m <= 0:
        raise ValueError("arguments must be positive")
    return -math.expm1(-d_rx_m ** 2 / (2.0 * waist_m ** 2))


def centered_shortterm_efficiency(geom, turb):
    return mean_collection_efficiency(geom.d_rx_m, shortterm_waist(geom, turb))
