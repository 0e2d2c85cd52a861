"""Single-mode-fiber coupling under turbulence with partial adaptive optics.

The instantaneous phase-limited coupling is ``eta_max * exp(-z)`` with
``z = sum_j b_j^2`` the sum of squared Zernike coefficients, each
``b_j ~ N(0, g_j <b_j^2>)`` where ``g_j`` is the residual fraction left by the
AO loop (0 = perfectly corrected, 1 = uncorrected). The density of ``z`` is
recovered from its characteristic function by Gil-Pelaez inversion.
"""
from dataclasses import dataclass, field, replace
import math

import numpy as np
from scipy import optimize
from scipy.special import gammaln

from .distribution import EfficiencyDistribution
from .kernels import chi2_mixture_envelope, gil_pelaez_pdf

__all__ = [
    "ideal_coupling",
    "optimize_beta",
    "ZernikeSpectrum",
    "AoLoop",
    "radial_order_variance",
    "zernike_spectrum",
    "required_correction_order",
    "open_loop_gain",
    "mode_attenuation",
    "apply_loop",
    "corrected_spectrum",
    "mean_ao_efficiency",
    "mean_ao_efficiency_printed_form",
    "scintillation_coupling",
    "ZLaw",
    "z_law",
    "smf_distribution",
    "smf_conditional_weights",
    "zernike_mc_samples",
    "zernike_mc_oracle",
    "NumericError",
]

DIFFRACTION_LIMIT_RAD = 0.1 * math.pi  # RMS 0.05 wave


class NumericError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# design coupling

def ideal_coupling(alpha, beta):
    """Coupling of an unperturbed beam for obscuration ``alpha`` and design parameter ``beta``."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError("obscuration ratio must lie in [0, 1)")
    if beta <= 0:
        raise ValueError("beta must be positive")
    b2 = beta * beta
    num = math.exp(-b2) - math.exp(-b2 * alpha * alpha)
    return 2.0 * (num / (beta * math.sqrt(1.0 - alpha * alpha))) ** 2


def optimize_beta(alpha):
    """``(beta_opt, eta0_opt)`` maximizing :func:`ideal_coupling` over ``beta in (0, 5]``."""
    res = optimize.minimize_scalar(lambda b: -ideal_coupling(alpha, b), bounds=(1e-6, 5.0),
                                   method="bounded", options={"xatol": 1e-7})
    return float(res.x), float(-res.fun)


# --------------------------------------------------------------------------
# Zernike statistics

_NOLL_CONST = (
    gammaln(23.0 / 6.0) + gammaln(11.0 / 6.0) + math.log(math.sin(5.0 * math.pi / 6.0)) - math.log(math.pi)
)


def radial_order_variance(n, d_over_r0):
    """Variance (rad^2) of each Zernike coefficient of radial order ``n >= 1``."""
    n = np.asarray(n, dtype=float)
    log_v = _NOLL_CONST + np.log(n + 1.0) + gammaln(n - 5.0 / 6.0) - gammaln(n + 23.0 / 6.0)
    return np.exp(log_v) * d_over_r0 ** (5.0 / 3.0)


@dataclass(frozen=True)
class ZernikeSpectrum:
    """Per-mode coefficient statistics, piston excluded, OSA/ANSI ordering."""

    n: np.ndarray
    m: np.ndarray
    j: np.ndarray
    variance: np.ndarray
    gamma2: np.ndarray
    d_over_r0: float = float("nan")
    tail_variance: float = 0.0

    def __post_init__(self):
        if np.any(self.n < 1):
            raise ValueError("piston (n=0) is not part of the spectrum")
        if np.any(np.abs(self.m) > self.n) or np.any((self.n - np.abs(self.m)) % 2):
            raise ValueError("invalid (n, m) pair")
        if np.any(self.j != (self.n * (self.n + 2) + self.m) // 2):
            raise ValueError("mode index inconsistent with (n, m)")
        if np.any(self.variance < 0) or np.any((self.gamma2 < 0) | (self.gamma2 > 1)):
            raise ValueError("variances must be >= 0 and gamma2 in [0, 1]")

    @property
    def n_limit(self):
        return int(self.n.max())

    @property
    def effective_variance(self):
        return self.gamma2 * self.variance

    def grouped(self):
        """Distinct effective variances and their multiplicities (zeros dropped)."""
        v = self.effective_variance
        keys, inv = np.unique(np.round(v, 300), return_inverse=True)
        mult = np.bincount(inv).astype(float)
        keep = keys > 0
        return keys[keep], mult[keep]


def zernike_spectrum(d_over_r0, n_limit):
    if d_over_r0 <= 0 or n_limit < 1:
        raise ValueError("need d_over_r0 > 0 and n_limit >= 1")
    ns, ms = [], []
    for n in range(1, n_limit + 1):
        for m in range(-n, n + 1, 2):
            ns.append(n)
            ms.append(m)
    n = np.array(ns)
    m = np.array(ms)
    var = radial_order_variance(n, d_over_r0)
    tail = _tail_variance(n_limit, d_over_r0)
    return ZernikeSpectrum(n, m, (n * (n + 2) + m) // 2, var, np.ones(n.size), float(d_over_r0), tail)


def _tail_variance(n_limit, d_over_r0, n_stop=4000):
    nn = np.arange(n_limit + 1, n_stop)
    return float(np.sum((nn + 1) * radial_order_variance(nn, d_over_r0)))


def required_correction_order(d_over_r0, lambda_m=None):
    """Highest radial order whose coefficients exceed the diffraction-limited threshold.

    A mode is below threshold when its RMS wavefront error ``sqrt(<b^2>) lambda/2pi``
    is at most ``0.05 lambda``; this is wavelength-independent, so ``lambda_m``
    is accepted only for interface symmetry. Returns ``(n_req, j_req)`` with
    ``j_req`` the largest OSA/ANSI index of order ``n_req``.
    """
    if d_over_r0 <= 0:
        raise ValueError("d_over_r0 must be positive")
    n = 0
    # variances decrease monotonically with n
    while math.sqrt(float(radial_order_variance(n + 1, d_over_r0))) > DIFFRACTION_LIMIT_RAD:
        n += 1
    return n, n * (n + 2) // 2


# --------------------------------------------------------------------------
# AO control loop

@dataclass(frozen=True)
class AoLoop:
    """Pure-integrator AO loop; ``t_s=None`` means infinite control bandwidth."""

    n_max: int
    t_s: float = None
    ki: float = 0.5
    tau_s: float = None

    def __post_init__(self):
        if self.n_max < 0:
            raise ValueError("n_max must be >= 0")
        if self.t_s is not None:
            if not self.t_s > 0:
                raise ValueError("sensor integration time must be positive")
            if not self.ki > 0:
                raise ValueError("integrator gain must be positive")

    @property
    def ideal(self):
        return self.t_s is None

    @property
    def latency(self):
        if self.tau_s is not None:
            return self.tau_s
        return 2.0 * self.t_s if self.t_s is not None else 0.0

    def describe(self):
        if self.ideal:
            return f"n_max={self.n_max};bandwidth=infinite"
        return f"n_max={self.n_max};T={self.t_s:g};tau={self.latency:g};Ki={self.ki:g}"


def open_loop_gain(nu, loop):
    """``G = Ki exp(-s tau) (1 - exp(-s T)) / (s T)^2`` at ``s = 2 pi i nu``."""
    w = 2.0 * math.pi * np.asarray(nu, dtype=float)
    th = w * loop.t_s
    # 1 - exp(-i th) written without cancellation at small th
    one_minus = 2.0 * np.sin(0.5 * th) ** 2 + 1j * np.sin(th)
    return loop.ki * np.exp(-1j * w * loop.latency) * one_minus / (1j * th) ** 2


def _rejection2(nu, loop):
    nu = np.asarray(nu, dtype=float)
    out = np.zeros_like(nu)
    pos = nu > 0  # the integrator rejects DC completely
    out[pos] = np.abs(1.0 / (1.0 + open_loop_gain(nu[pos], loop))) ** 2
    return out


def _panel_integral(f, edges, order=16):
    x, w = np.polynomial.legendre.leggauss(order)
    half = 0.5 * np.diff(edges)
    nodes = (0.5 * (edges[1:] + edges[:-1]))[:, None] + half[:, None] * x[None, :]
    return float(np.sum(f(nodes.ravel()) * (half[:, None] * w[None, :]).ravel()))


def _panel_edges(a, b, width, geometric_from=None):
    edges = np.linspace(a, b, max(int(math.ceil((b - a) / width)), 1) + 1)
    if geometric_from is not None:
        # resolves the low-frequency rejection step of weak loops
        edges = np.union1d(edges, np.geomspace(geometric_from, b, 160))
    return edges


def mode_attenuation(loop, n, wind_speed, d_rx, tol=1e-9):
    """Residual variance fraction ``gamma_n^2`` of radial order ``n`` under ``loop``.

    Ratio of the rejected to the open-loop temporal spectrum of the mode,
    integrated over frequency in units of the cut-off ``nu_c``. The tilt
    singularity ``x^(-2/3)`` is removed by ``x = y^3``; the upper range stops
    where the ``x^(-17/3)`` tail falls below ``tol``.
    """
    if n < 1:
        raise ValueError("radial order must be >= 1")
    if loop.ideal:
        return 0.0
    nu_c = 0.3 * (n + 1) * wind_speed / d_rx
    x_top = (3.0 / 14.0 / tol) ** (3.0 / 14.0)
    # |eps|^2 ripples with period ~1/(T + tau) in frequency
    period = 1.0 / (nu_c * (loop.t_s + loop.latency))
    width = max(min(period / 4.0, 0.25), x_top / 20000.0)

    def rej(x):
        return _rejection2(x * nu_c, loop)

    if n == 1:
        def low(y):
            return 3.0 * rej(y ** 3)
    else:
        low = rej

    def high(x):
        return rej(x) * x ** (-17.0 / 3.0)

    prev = None
    for _ in range(6):
        val = (_panel_integral(low, _panel_edges(0.0, 1.0, width, 1e-12))
               + _panel_integral(high, _panel_edges(1.0, x_top, width)))
        if prev is not None and abs(val - prev) <= max(tol * abs(val), 1e-12):
            break
        prev = val
        width *= 0.5
    else:
        raise NumericError(f"gamma^2 quadrature did not converge for n={n} ({prev!r} vs {val!r})")
    den = (3.0 if n == 1 else 1.0) + 3.0 / 14.0
    return float(min(max(val / den, 0.0), 1.0))


def apply_loop(spectrum, loop, wind_speed=3.0, d_rx=None):
    """Return ``spectrum`` with ``gamma2`` set by the AO loop (1 above ``n_max``)."""
    g = np.ones(spectrum.n.size)
    corrected = spectrum.n <= loop.n_max
    if loop.ideal:
        g[corrected] = 0.0
    else:
        if d_rx is None:
            raise ValueError("finite-bandwidth loops need the aperture diameter")
        for n in np.unique(spectrum.n[corrected]):
            g[spectrum.n == n] = mode_attenuation(loop, int(n), wind_speed, d_rx)
    return replace(spectrum, gamma2=g)


def mean_ao_efficiency(spectrum):
    """``prod_j (1 + 2 g_j <b_j^2>)^(-1/2)`` over all modes of the spectrum."""
    return float(np.exp(-0.5 * np.sum(np.log1p(2.0 * spectrum.effective_variance))))


def mean_ao_efficiency_printed_form(spectrum, n_max):
    """Diagnostic: the sum-of-two-products variant (corrected + uncorrected orders).

    It does not reduce to the uncorrected product when every ``g = 1``; kept
    only so the discrepancy can be inspected.
    """
    v = spectrum.variance
    lo = spectrum.n <= n_max
    a = np.exp(-0.5 * np.sum(np.log1p(2.0 * spectrum.gamma2[lo] * v[lo])))
    b = np.exp(-0.5 * np.sum(np.log1p(2.0 * v[~lo])))
    return float(a + b)


def corrected_spectrum(d_over_r0, loop, wind_speed=3.0, d_rx=None, rtol=0.005):
    """Spectrum with loop applied and enough radial orders for ``<eta_AO>`` to converge.

    Starts at ``n_limit = max(n_max + 8, 12)`` and doubles until extending the
    spectrum changes the mean efficiency by less than ``rtol``.
    """
    n_limit = max(loop.n_max + 8, 12)
    spec = apply_loop(zernike_spectrum(d_over_r0, n_limit), loop, wind_speed, d_rx)
    while True:
        bigger = apply_loop(zernike_spectrum(d_over_r0, 2 * n_limit), loop, wind_speed, d_rx)
        if abs(mean_ao_efficiency(bigger) / mean_ao_efficiency(spec) - 1.0) < rtol or n_limit > 256:
            return spec
        n_limit *= 2
        spec = bigger


def scintillation_coupling(sigma_i2_point):
    """Mean scintillation loss of the fiber coupling, ``(1 + sigma_I^2)^(-1/4)``."""
    if sigma_i2_point < 0:
        raise ValueError("scintillation index must be non-negative")
    return (1.0 + sigma_i2_point) ** -0.25


# --------------------------------------------------------------------------
# distribution of z = sum b_j^2 by Gil-Pelaez inversion

@dataclass
class ZLaw:
    """Tabulated density/CDF of ``z`` on ``[0, z_max]`` (CDF taken as 1 beyond)."""

    z: np.ndarray          # CDF nodes, z[0] = 0
    cdf_nodes: np.ndarray  # CDF at the nodes (not renormalized)
    pdf_mid: np.ndarray    # density at cell midpoints
    mean: float
    degenerate: bool = False
    info: dict = field(default_factory=dict)

    @property
    def raw_mass(self):
        return float(self.cdf_nodes[-1])

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.degenerate:
            return (x >= 0).astype(float)
        out = np.interp(x, self.z, self.cdf_nodes, left=0.0, right=self.cdf_nodes[-1])
        return np.where(x > self.z[-1], 1.0, out)

    def pdf(self, x):
        mids = 0.5 * (self.z[:-1] + self.z[1:])
        return np.interp(x, mids, self.pdf_mid, left=0.0, right=0.0)


def _u_max(variances, mult, log_floor=math.log(1e-8), u_cap=1e7):
    def f(u):
        return chi2_mixture_envelope([u], variances, mult)[0][0] - log_floor

    hi = 1.0
    while f(hi) > 0 and hi < u_cap:
        hi *= 2.0
    if hi >= u_cap:
        return u_cap
    return optimize.brentq(f, 0.0, hi, xtol=1e-6 * hi)


MAX_NODES = 4_000_000


def _gl_nodes(u_max, width, order=16):
    n_panels = max(int(math.ceil(u_max / width)), 1)
    if n_panels * order > MAX_NODES:
        # only spectra with one or two dominant modes decay this slowly
        raise NumericError(f"characteristic function decays too slowly ({n_panels * order} nodes needed)")
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, u_max, n_panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    u = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wt = (half[:, None] * w[None, :]).ravel()
    return u, wt


def z_law(spectrum, tol=1e-6, max_refine=4):
    """Distribution of ``z`` for the effective variances of ``spectrum``."""
    v, mult = spectrum.grouped()
    if v.size == 0:
        return ZLaw(np.array([0.0]), np.array([1.0]), np.array([]), 0.0, degenerate=True)
    mean = float(np.dot(v, mult))
    std = math.sqrt(2.0 * float(np.dot(v * v, mult)))
    vmax = float(v.max())
    # exponential tail of the largest component sets the range
    z_hi = mean + 12.0 * std + 2.0 * vmax * math.log(1e14)
    dz = min(z_hi / 4000.0, std / 25.0)
    n_cells = int(math.ceil(z_hi / dz))
    z_nodes = dz * np.arange(n_cells + 1)
    z_mid = z_nodes[:-1] + 0.5 * dz

    u_max = _u_max(v, mult)
    width = min(math.pi / (z_hi + mean), 0.25 / vmax)
    pdf = None
    for _ in range(max_refine + 1):
        u, wt = _gl_nodes(u_max, width)
        log_mod, phase = chi2_mixture_envelope(u, v, mult)
        new = gil_pelaez_pdf(z_mid, u, wt, log_mod, phase)
        if pdf is not None and np.max(np.abs(new - pdf)) <= tol * np.max(np.abs(new)):
            pdf = new
            break
        pdf = new
        width *= 0.5
    else:
        raise NumericError("Gil-Pelaez quadrature did not converge")
    peak = float(np.max(pdf))
    neg = float(np.min(pdf))
    if neg < -1e-6 * max(peak, 1.0):
        raise NumericError(f"Gil-Pelaez density negative beyond tolerance (min {neg:.3g})")
    pdf = np.clip(pdf, 0.0, None)
    cdf = np.concatenate([[0.0], np.cumsum(pdf) * dz])
    info = {"u_max": u_max, "n_u": int(u.size), "dz": dz, "z_max": z_hi, "min_pdf": neg}
    return ZLaw(z_nodes, cdf, pdf, mean, info=info)


def smf_conditional_weights(law, eta_max, grid):
    """Cell masses on ``grid`` of ``eta = eta_max * exp(-z)`` for each ``eta_max``.

    ``eta_max`` may be an array; the result then has shape ``(len(eta_max), grid.size)``.
    """
    lower, upper = grid.cell_bounds()
    em = np.atleast_1d(np.asarray(eta_max, dtype=float))[:, None]
    z_lo = np.log(em / upper[None, :])
    z_hi = np.log(em / lower[None, :])
    w = law.cdf(z_hi) - law.cdf(z_lo)
    return np.clip(w, 0.0, None)


def smf_distribution(spectrum, eta_max, grid, law=None):
    if not 0 < eta_max <= 1:
        raise ValueError("eta_max must lie in (0, 1]")
    law = law or z_law(spectrum)
    if law.degenerate:
        return EfficiencyDistribution.point_mass(eta_max, family="point_mass")
    w = smf_conditional_weights(law, eta_max, grid)[0]
    dist = EfficiencyDistribution.on_grid(grid, w, family="gil_pelaez")
    dist.meta.update(eta_max=eta_max, density_mass=law.raw_mass,
                     closed_form_mean=eta_max * mean_ao_efficiency(spectrum))
    return dist


def zernike_mc_samples(spectrum, eta_max, n_samples, seed, batch_size=1 << 17):
    """``eta_max * exp(-sum b_j^2)`` with independent Gaussian coefficients.

    Coefficients sharing a variance are drawn jointly: their squared sum is
    ``v * chi2(k)``, sampled as ``2 v * Gamma(k/2)``.
    """
    v, mult = spectrum.grouped()
    n_samples = int(n_samples)
    n_batches = -(-n_samples // batch_size)
    children = np.random.SeedSequence(seed).spawn(n_batches)
    out = np.empty(n_samples)
    for b, child in enumerate(children):
        lo = b * batch_size
        n = min(batch_size, n_samples - lo)
        rng = np.random.Generator(np.random.Philox(child))
        z = np.zeros(n)
        for vi, ki in zip(v, mult):
            z += 2.0 * vi * rng.standard_gamma(0.5 * ki, n)
        out[lo:lo + n] = eta_max * np.exp(-z)
    return out


def zernike_mc_oracle(spectrum, eta_max, n_samples, seed, grid):
    samples = zernike_mc_samples(spectrum, eta_max, n_samples, seed)
    dist = EfficiencyDistribution.from_samples(samples, grid, family="monte_carlo")
    dist.meta["sample_mean"] = float(samples.mean())
    return dist
