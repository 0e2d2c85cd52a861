"""Total channel efficiency: absorption x aperture collection x fiber coupling.

The composed distribution follows the law of total probability: for every
aperture point ``eta_D,k`` the fiber-coupled efficiency is distributed as
``eta_A * eta0 * eta_S * eta_D,k * exp(-z)``, and the conditional cell masses
are mixed with the aperture weights. Absorption is a deterministic factor,
folded into the coupling ceiling so the result stays on the case grid.
"""
from dataclasses import dataclass, field, replace
import math

import numpy as np
from scipy import optimize

from . import atmosphere
from .aperture import aperture_distribution
from .beam import (
    LinkGeometry,
    derive_turbulence,
    longterm_waist,
    mean_collection_efficiency,
)
from .distribution import EfficiencyDistribution, parse_grid_spec, to_db
from .smf import (
    AoLoop,
    corrected_spectrum,
    mean_ao_efficiency,
    scintillation_coupling,
    smf_conditional_weights,
    z_law,
)

__all__ = [
    "ChannelModel",
    "ChannelComponents",
    "DiameterResult",
    "CASE_TABLE",
    "case_study",
    "channel_components",
    "channel_distribution",
    "mean_channel_efficiency",
    "closed_form_mean",
    "optimize_receiver_diameter",
]

ETA0_UNOBSTRUCTED = 0.8145
LAMBDA_NM = 1550.0

# id: (Cn2, W0 [m], D [m], z [m], n_max, grid, reference mean [dB])
CASE_TABLE = {
    1: (1e-13, 0.025, 0.0508, 1e3, 1, "10^[-3:0.02:0]", -7.0),
    2: (1e-14, 0.060, 0.200, 10e3, 4, "10^[-5:0.05:0]", -15.0),
    3: (1e-13, 0.025, 0.0508, 2e3, 1, "10^[-5:0.05:0]", -17.0),
    4: (1e-14, 0.060, 0.200, 10e3, 1, "10^[-8:0.1:0]", -23.0),
    5: (1e-14, 0.060, 0.050, 10e3, 1, "10^[-8:0.1:0]", -25.0),
    6: (1e-14, 0.060, 0.200, 20e3, 1, "10^[-12:0.1:0]", -38.0),
    7: (1e-14, 0.060, 0.400, 20e3, 2, "10^[-15:0.1:0]", -43.0),
    8: (1e-14, 0.025, 0.200, 30e3, 1, "10^[-15:0.1:0]", -48.0),
}


@dataclass(frozen=True)
class ChannelModel:
    geom: LinkGeometry
    cn2: float
    loop: AoLoop
    eta0: float
    atmosphere: atmosphere.SpectralTable
    grid: object
    wind_speed: float = 3.0
    label: str = ""
    turb: object = field(default=None, compare=False)

    def __post_init__(self):
        if not 0 < self.eta0 <= 1:
            raise ValueError("eta0 must lie in (0, 1]")
        if self.turb is None:
            object.__setattr__(self, "turb", derive_turbulence(self.geom, self.cn2, self.wind_speed))

    @property
    def lambda_nm(self):
        return self.geom.lambda_m * 1e9

    @property
    def absorption(self):
        return atmosphere.absorption_transmittance(self.atmosphere, self.lambda_nm, self.geom.z_m / 1e3)

    @property
    def d_over_r0(self):
        return self.geom.d_rx_m / self.turb.r0_m

    def with_aperture(self, d_rx_m):
        return replace(self, geom=self.geom.with_aperture(d_rx_m), turb=None)

    def with_distance(self, z_m):
        return replace(self, geom=self.geom.with_distance(z_m), turb=None)

    def with_loop(self, loop):
        return replace(self, loop=loop)

    def describe(self):
        g = self.geom
        return (f"lambda_nm={self.lambda_nm:g};z_km={g.z_m / 1e3:g};w0_mm={g.w0_m * 1e3:g};"
                f"d_rx_mm={g.d_rx_m * 1e3:g};cn2={self.cn2:g};eta0={self.eta0:g};"
                f"wind_mps={self.wind_speed:g};{self.loop.describe()};grid={self.grid.spec}")


def case_study(case_id, table=None):
    """Preset channel of one of the eight reference links (infinite AO bandwidth)."""
    if case_id not in CASE_TABLE:
        raise ValueError(f"unknown case {case_id!r}; valid ids are 1..8")
    cn2, w0, d, z, n_max, grid, _ = CASE_TABLE[case_id]
    geom = LinkGeometry(LAMBDA_NM * 1e-9, z, w0, d, 0.0)
    return ChannelModel(
        geom=geom,
        cn2=cn2,
        loop=AoLoop(n_max),
        eta0=ETA0_UNOBSTRUCTED,
        atmosphere=table if table is not None else atmosphere.bundled_table("absorption"),
        grid=parse_grid_spec(grid),
        label=f"case{case_id}",
    )


@dataclass
class ChannelComponents:
    aperture: EfficiencyDistribution
    spectrum: object
    z_law: object
    eta_a: float
    eta_s: float


def channel_components(model):
    turb = model.turb
    try:
        ap = aperture_distribution(model.geom, turb, model.grid)
        spec = corrected_spectrum(model.d_over_r0, model.loop, model.wind_speed, model.geom.d_rx_m)
        law = z_law(spec)
    except Exception as exc:
        raise type(exc)(f"{model.label or 'channel'}: {exc}") from exc
    return ChannelComponents(ap, spec, law, model.absorption, scintillation_coupling(turb.scint_index_point))


def channel_distribution(model, components=None):
    c = components or channel_components(model)
    ceiling = c.eta_a * model.eta0 * c.eta_s
    if c.z_law.degenerate:
        dist = c.aperture.scaled(ceiling)
        dist.meta = {"family": "composed", "aperture_raw_mass": c.aperture.raw_mass}
        return dist
    eta_max = np.minimum(ceiling * c.aperture.eta, 1.0)
    cond = smf_conditional_weights(c.z_law, eta_max, model.grid)
    raw = c.aperture.weights @ cond
    dist = EfficiencyDistribution.on_grid(model.grid, raw, family="composed")
    dist.meta.update(
        eta_a=c.eta_a,
        eta_s=c.eta_s,
        smf_density_mass=c.z_law.raw_mass,
        aperture_raw_mass=c.aperture.raw_mass,
        n_limit=c.spectrum.n_limit,
    )
    return dist


def mean_channel_efficiency(model, dist=None):
    """Mean channel efficiency in dB."""
    return (dist or channel_distribution(model)).mean_db()


def closed_form_mean(model, spectrum=None):
    """``eta_A * eta0 * <eta_S> * <eta_D> * <eta_AO>`` (linear) from the mean-value formulas."""
    turb = model.turb
    spec = spectrum or corrected_spectrum(model.d_over_r0, model.loop, model.wind_speed, model.geom.d_rx_m)
    eta_d = mean_collection_efficiency(model.geom.d_rx_m, longterm_waist(model.geom, turb))
    return (model.absorption * model.eta0 * scintillation_coupling(turb.scint_index_point)
            * eta_d * mean_ao_efficiency(spec))


@dataclass(frozen=True)
class DiameterResult:
    d_opt_m: float
    mean_db: float
    at_boundary: bool
    collection_db: float
    coupling_db: float


def _coupling_terms(model):
    turb = model.turb
    spec = corrected_spectrum(model.d_over_r0, model.loop, model.wind_speed, model.geom.d_rx_m)
    coll = mean_collection_efficiency(model.geom.d_rx_m, longterm_waist(model.geom, turb))
    coup = model.eta0 * scintillation_coupling(turb.scint_index_point) * mean_ao_efficiency(spec)
    return coll, coup


def optimize_receiver_diameter(template, d_range, n_max=None, objective="closed_form",
                               tol_m=1e-3, n_scan=25):
    """Receiver diameter maximizing the mean channel efficiency.

    ``objective="closed_form"`` uses the product of mean-value terms;
    ``"distribution"`` uses the mean of the composed distribution (slower,
    same optimum to within the grid resolution). A coarse log-spaced scan
    brackets the best region before a bounded scalar search in ``log D``.
    """
    d_lo, d_hi = map(float, d_range)
    if not 0 < d_lo < d_hi:
        raise ValueError("d_range must be positive and increasing")
    model = template if n_max is None else template.with_loop(replace(template.loop, n_max=n_max))

    def value(log_d):
        m = model.with_aperture(math.exp(log_d))
        if objective == "closed_form":
            return closed_form_mean(m)
        if objective == "distribution":
            return channel_distribution(m).mean()
        raise ValueError(f"unknown objective {objective!r}")

    grid = np.linspace(math.log(d_lo), math.log(d_hi), n_scan)
    vals = np.array([value(x) for x in grid])
    i = int(np.argmax(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, n_scan - 1)]
    res = optimize.minimize_scalar(lambda x: -value(x), bounds=(lo, hi), method="bounded",
                                   options={"xatol": tol_m / d_hi})
    best_x, best_v = (res.x, -res.fun) if -res.fun >= vals[i] else (grid[i], vals[i])
    d_opt = math.exp(best_x)
    coll, coup = _coupling_terms(model.with_aperture(d_opt))
    at_bound = d_opt - d_lo < tol_m or d_hi - d_opt < tol_m
    return DiameterResult(d_opt, to_db(best_v), at_bound, to_db(coll), to_db(coup))
