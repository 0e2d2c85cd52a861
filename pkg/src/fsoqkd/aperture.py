"""Statistics of the receiver-aperture collection efficiency.

Physical model (shared by the analytic route and the Monte-Carlo oracle):

* the short-term spot, a Gaussian of radius ``W_ST``, wanders with an
  isotropic 2-D Gaussian centroid offset whose per-axis variance is
  ``<r_c^2>/4``; convolving the short-term profile with this wander gives back
  the long-term profile of radius ``W``, because ``W^2 = W_ST^2 + <r_c^2>``;
* the collected flux is multiplied by a log-normal scintillation factor of
  unit mean and variance ``sigma_I^2(D)``; the product is clipped at 1.

The analytic distribution is a two-parameter family whose first two moments
are matched to the model's moments (evaluated by deterministic quadrature):
a log-negative Weibull for weak turbulence (``sigma_R^2 < 1``) and a
log-normal truncated at 1 otherwise. The switch at ``sigma_R^2 = 1`` is hard,
so results are discontinuous across that boundary.
"""
from dataclasses import dataclass
import math

import numpy as np
from scipy import optimize, special, stats

from .beam import longterm_waist, mean_collection_efficiency, shortterm_waist
from .distribution import EfficiencyDistribution

__all__ = [
    "ApertureInputs",
    "MomentMatchError",
    "aperture_inputs",
    "displaced_beam_efficiency",
    "aperture_distribution",
    "aperture_mc_samples",
    "aperture_mc_oracle",
    "lognormal_truncated_moments",
    "log_weibull_moments",
]

MOMENT_RTOL = 0.02
_LAGUERRE = np.polynomial.laguerre.laggauss(96)


class MomentMatchError(RuntimeError):
    def __init__(self, family, target, achieved):
        self.family, self.target, self.achieved = family, target, achieved
        super().__init__(
            f"{family}: could not match moments; target={tuple(target)} achieved={tuple(achieved)}"
        )


@dataclass(frozen=True)
class ApertureInputs:
    mean: float           # <eta_DRx> from the long-term waist
    mean_sq: float        # <eta_DRx^2> of the wander + scintillation model
    cap: float            # efficiency of a perfectly centred short-term spot
    wander_var_m2: float  # <r_c^2>
    sigma_i2: float       # aperture-averaged scintillation index
    rytov_var: float
    clipped_mean: float   # mean after clipping eta at 1

    @property
    def degenerate(self):
        return self.wander_var_m2 <= 1e-12 * self.cap and self.sigma_i2 <= 1e-12

    @property
    def regime(self):
        return "weak" if self.rytov_var < 1.0 else "strong"


def displaced_beam_efficiency(r, d_rx, w_st):
    """Fraction of a Gaussian spot (radius ``w_st``) offset by ``r`` inside the aperture.

    The 1/e^2-radius ``w`` corresponds to a per-axis standard deviation
    ``w/2``; the captured fraction is a Marcum-Q function, evaluated here as a
    non-central chi-square CDF with 2 degrees of freedom.
    """
    sig2 = (0.5 * w_st) ** 2
    a2 = (0.5 * d_rx) ** 2
    r = np.asarray(r, dtype=float)
    return stats.ncx2.cdf(a2 / sig2, 2, r * r / sig2)


def _clipped_lognormal_moments(t, s2):
    """E[min(t F, 1)] and E[min(t F, 1)^2] for log-normal F with unit mean."""
    t = np.asarray(t, dtype=float)
    if s2 <= 0:
        m = np.minimum(t, 1.0)
        return m, m * m
    s = math.sqrt(s2)
    mu = -0.5 * s2
    c = np.log(1.0 / np.maximum(t, 1e-300))
    p_over = special.ndtr(-(c - mu) / s)
    e1 = t * special.ndtr((c - mu - s2) / s) + p_over
    e2 = t * t * math.exp(s2) * special.ndtr((c - mu - 2 * s2) / s) + p_over
    return e1, e2


def aperture_inputs(geom, turb):
    w = longterm_waist(geom, turb)
    w_st = shortterm_waist(geom, turb)
    mean = mean_collection_efficiency(geom.d_rx_m, w)
    cap = mean_collection_efficiency(geom.d_rx_m, w_st)
    rc2 = turb.wander_var_m2
    s2 = math.log1p(turb.scint_index_aperture)
    # r^2 ~ Exp(mean rc2/2); Gauss-Laguerre over t = r^2 / (rc2/2)
    nodes, wts = _LAGUERRE
    r = np.sqrt(0.5 * rc2 * nodes)
    t = displaced_beam_efficiency(r, geom.d_rx_m, w_st)
    e1, e2 = _clipped_lognormal_moments(t, s2)
    return ApertureInputs(
        mean=mean,
        mean_sq=float(np.dot(wts, e2)),
        cap=cap,
        wander_var_m2=rc2,
        sigma_i2=turb.scint_index_aperture,
        rytov_var=turb.rytov_var,
        clipped_mean=float(np.dot(wts, e1)),
    )


def lognormal_truncated_moments(mu, sigma, upper=1.0):
    """First two raw moments of exp(N(mu, sigma^2)) conditioned on being <= upper."""
    a = (math.log(upper) - mu) / sigma
    z = special.ndtr(a)
    m1 = math.exp(mu + 0.5 * sigma ** 2) * special.ndtr(a - sigma) / z
    m2 = math.exp(2 * mu + 2 * sigma ** 2) * special.ndtr(a - 2 * sigma) / z
    return m1, m2


def log_weibull_moments(shape, scale, upper=1.0):
    """Moments of ``upper * exp(-X)`` with ``X ~ Weibull(shape, scale)``."""
    nodes, wts = _LAGUERRE
    x = scale * nodes ** (1.0 / shape)
    return upper * float(np.dot(wts, np.exp(-x))), upper ** 2 * float(np.dot(wts, np.exp(-2 * x)))


def _match(family, moments_fn, target, x0):
    m1, m2 = target

    def resid(p):
        a, b = moments_fn(p)
        return [math.log(a / m1), math.log(b / m2)]

    sol = optimize.least_squares(resid, x0, xtol=1e-12, ftol=1e-12, gtol=1e-12, max_nfev=2000)
    achieved = moments_fn(sol.x)
    if any(abs(a / t - 1.0) > MOMENT_RTOL for a, t in zip(achieved, target)):
        raise MomentMatchError(family, target, achieved)
    return sol.x, achieved


def _fit_strong(inp):
    target = (inp.clipped_mean, inp.mean_sq)
    s0 = math.sqrt(max(math.log(target[1] / target[0] ** 2), 1e-6))
    x0 = [math.log(target[0]) - 0.5 * s0 ** 2, math.log(s0)]
    (mu, log_sig), achieved = _match(
        "truncated log-normal",
        lambda p: lognormal_truncated_moments(p[0], math.exp(p[1])),
        target, x0,
    )
    sigma = math.exp(log_sig)
    a = (0.0 - mu) / sigma
    norm = special.ndtr(a)

    def cdf(x):
        x = np.minimum(np.asarray(x, dtype=float), 1.0)
        with np.errstate(divide="ignore"):
            return special.ndtr((np.log(x) - mu) / sigma) / norm

    return cdf, {"family": "truncated_lognormal", "mu": mu, "sigma": sigma}, achieved


def _fit_weak(inp):
    target = (inp.clipped_mean, inp.mean_sq)
    x0 = [0.0, math.log(max(-math.log(target[0]), 1e-4))]
    (log_k, log_lam), achieved = _match(
        "log-negative Weibull",
        lambda p: log_weibull_moments(math.exp(p[0]), math.exp(p[1])),
        target, x0,
    )
    k, lam = math.exp(log_k), math.exp(log_lam)

    def cdf(x):
        x = np.clip(np.asarray(x, dtype=float), 1e-300, 1.0)
        return np.exp(-(np.log(1.0 / x) / lam) ** k)

    return cdf, {"family": "log_negative_weibull", "shape": k, "scale": lam}, achieved


def aperture_distribution(geom, turb, grid):
    """Moment-matched distribution of the aperture collection efficiency on ``grid``."""
    inp = aperture_inputs(geom, turb)
    if inp.degenerate:
        return EfficiencyDistribution.point_mass(inp.mean, family="point_mass")
    fit = _fit_weak if inp.regime == "weak" else _fit_strong
    cdf, params, achieved = fit(inp)
    lower, upper = grid.cell_bounds()
    masses = np.clip(cdf(upper) - cdf(lower), 0.0, None)
    dist = EfficiencyDistribution.on_grid(grid, masses, regime=inp.regime, **params)
    dist.meta.update(target_mean=inp.mean, target_mean_sq=inp.mean_sq,
                     fitted_mean=achieved[0], fitted_mean_sq=achieved[1], cap=inp.cap)
    return dist


def aperture_mc_samples(geom, turb, n_samples, seed, batch_size=1 << 17):
    """Samples of the aperture efficiency from the wander + scintillation model.

    Each batch draws from its own ``SeedSequence`` child with a Philox
    generator, so batches are independent of evaluation order.
    """
    w_st = shortterm_waist(geom, turb)
    s2 = math.log1p(turb.scint_index_aperture)
    sig_axis = 0.5 * math.sqrt(turb.wander_var_m2)
    n_batches = -(-int(n_samples) // batch_size)
    children = np.random.SeedSequence(seed).spawn(n_batches)
    out = np.empty(int(n_samples))
    for b, child in enumerate(children):
        lo = b * batch_size
        n = min(batch_size, int(n_samples) - lo)
        rng = np.random.Generator(np.random.Philox(child))
        xy = rng.standard_normal((n, 2)) * sig_axis
        r = np.hypot(xy[:, 0], xy[:, 1])
        flux = np.exp(rng.standard_normal(n) * math.sqrt(s2) - 0.5 * s2)
        out[lo:lo + n] = np.minimum(displaced_beam_efficiency(r, geom.d_rx_m, w_st) * flux, 1.0)
    return out


def aperture_mc_oracle(geom, turb, n_samples, seed, grid):
    samples = aperture_mc_samples(geom, turb, n_samples, seed)
    dist = EfficiencyDistribution.from_samples(samples, grid, family="monte_carlo")
    dist.meta["sample_mean"] = float(samples.mean())
    return dist
