"""Expected detections and errors of a decoy-state BB84 receiver.

Per channel point ``eta_i`` (weight ``w_i``) and intensity ``k``:

* signal transmission ``eta_tot = eta_i * L * eta_det * erf(T_gat / (2 sqrt(2) J))``
  with ``L = 10^(-loss/10)``;
* gated noise probability ``p_n = (R_dark + R_bg * L * eta_det) * T_gat``;
* click probability ``1 - (1 - p_n) exp(-k eta_tot)``; noise-only clicks
  ``p_n exp(-k eta_tot)`` carry error 1/2, signal clicks the coding error;
* afterpulses inflate clicks by ``1 + p_ap`` and are errors half the time;
* dead-time saturation scales everything at ``eta_i`` by ``R_sat / (R_0 + R_sat)``.
"""
from dataclasses import dataclass, field, replace
import math

import numpy as np
from scipy.special import erf

from .distribution import EfficiencyDistribution, to_db
from .kernels import saturated_sums

__all__ = [
    "HardwareScenario",
    "SCENARIOS",
    "SATURATION_STUDY",
    "ClickStatistics",
    "gating_signal_factor",
    "saturate",
    "click_statistics",
    "detection_rate",
    "mean_only_click_rate",
    "saturation_overestimation_db",
    "saturation_sweep",
]

E0 = 0.5


@dataclass(frozen=True)
class HardwareScenario:
    rep_rate_hz: float
    det_efficiency: float
    coding_error: float
    dark_rate_hz: float
    dead_time_s: float
    afterpulse_prob: float
    jitter_sigma_s: float
    extra_rx_loss_db: float
    lambda_nm: float = 1550.0
    background_rate_hz: float = 0.0
    name: str = ""

    def __post_init__(self):
        for p in ("det_efficiency", "coding_error", "afterpulse_prob"):
            if not 0.0 <= getattr(self, p) <= 1.0:
                raise ValueError(f"{p} must lie in [0, 1]")
        for r in ("rep_rate_hz", "dark_rate_hz", "background_rate_hz", "jitter_sigma_s", "extra_rx_loss_db"):
            if getattr(self, r) < 0:
                raise ValueError(f"{r} must be non-negative")
        if not self.dead_time_s > 0:
            raise ValueError("dead time must be positive")

    @property
    def r_sat(self):
        return 1.0 / self.dead_time_s

    @property
    def rx_transmission(self):
        return 10.0 ** (-self.extra_rx_loss_db / 10.0)

    def replace(self, **kw):
        return replace(self, **kw)


SCENARIOS = {
    "A": HardwareScenario(1e9, 0.80, 0.005, 10.0, 10e-9, 0.0, 10e-12, 3.0, 1550.0, 5e3, "A"),
    "B": HardwareScenario(100e6, 0.15, 0.015, 2e3, 20e-6, 0.10, 200e-12, 3.0, 1550.0, 5e3, "B"),
}

# 1 GHz source, 10 us dead time, 15 % efficiency; remaining entries as scenario A
SATURATION_STUDY = replace(SCENARIOS["A"], det_efficiency=0.15, dead_time_s=10e-6, name="saturation")


def gating_signal_factor(t_gat_s, jitter_sigma_s):
    """Fraction of Gaussian-jittered signal inside a window of width ``t_gat_s``."""
    if t_gat_s <= 0:
        raise ValueError("gate width must be positive")
    if jitter_sigma_s <= 0:
        return 1.0
    return float(erf(t_gat_s / (2.0 * math.sqrt(2.0) * jitter_sigma_s)))


def saturate(rate_in_hz, dead_time_s):
    """Output rate of a detector with dead time: ``R0 R_sat / (R0 + R_sat)``."""
    if np.any(np.asarray(rate_in_hz) < 0):
        raise ValueError("rate must be non-negative")
    r_sat = 1.0 / dead_time_s
    if np.isscalar(rate_in_hz) and math.isinf(rate_in_hz):
        return r_sat
    return rate_in_hz * r_sat / (rate_in_hz + r_sat)


@dataclass
class ClickStatistics:
    """Expected counts over ``duration_s``; index 0 is ``mu``, index 1 is ``nu``."""

    n_z: np.ndarray
    m_z: np.ndarray
    n_x: np.ndarray
    m_x: np.ndarray
    duration_s: float
    p_noise: float
    detection_rate_hz: float
    intensities: tuple
    probabilities: tuple
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for a in (self.n_z, self.m_z, self.n_x, self.m_x):
            if np.any(a < 0):
                raise ValueError("counts must be non-negative")
        if np.any(self.m_z > self.n_z * (1 + 1e-12)) or np.any(self.m_x > self.n_x * (1 + 1e-12)):
            raise ValueError("error counts exceed detections")

    @property
    def n_z_total(self):
        return float(self.n_z.sum())

    @property
    def qber_z(self):
        n = self.n_z.sum()
        return float(self.m_z.sum() / n) if n > 0 else 0.0

    @property
    def qber_x(self):
        n = self.n_x.sum()
        return float(self.m_x.sum() / n) if n > 0 else 0.0


def _per_pulse(eta, hw, proto):
    """Saturated per-pulse click/error probabilities averaged over ``eta``.

    Returns ``(clicks[k], errors[k], detection_rate)`` for ``k in (mu, nu)``.
    """
    eta, weights = eta
    ks = np.array([proto.mu, proto.nu])
    pk = np.array([proto.p_mu, 1.0 - proto.p_mu])
    lrx = hw.rx_transmission
    eta_tot = eta * lrx * hw.det_efficiency * gating_signal_factor(proto.t_gat_s, hw.jitter_sigma_s)
    p_n = min((hw.dark_rate_hz + hw.background_rate_hz * lrx * hw.det_efficiency) * proto.t_gat_s, 1.0)
    surv = np.exp(-np.outer(eta_tot, ks))                  # (n_eta, 2)
    p_click = 1.0 - (1.0 - p_n) * surv
    noise_only = p_n * surv
    ap = hw.afterpulse_prob
    clicks = p_click * (1.0 + ap)
    errors = E0 * noise_only + hw.coding_error * (p_click - noise_only) + E0 * ap * p_click
    p_total = clicks @ pk
    q = np.hstack([clicks, errors])
    avg = saturated_sums(weights, p_total, q, hw.r_sat, hw.rep_rate_hz)
    rate = hw.rep_rate_hz * float(avg[:2] @ pk)
    return avg[:2], avg[2:], rate, p_n


def click_statistics(dist, hw, proto, duration_s=None):
    """Expected sifted detections and errors per basis and intensity.

    With ``duration_s=None`` the acquisition time is chosen so the expected
    number of key-basis detections equals ``proto.block_n_z``.
    """
    clicks, errors, rate, p_n = _per_pulse((dist.eta, dist.weights), hw, proto)
    pk = np.array([proto.p_mu, 1.0 - proto.p_mu])
    pz2, px2 = proto.p_z ** 2, (1.0 - proto.p_z) ** 2
    per_s_z = hw.rep_rate_hz * pk * clicks * pz2
    if duration_s is None:
        total = per_s_z.sum()
        duration_s = proto.block_n_z / total if total > 0 else math.inf
    if math.isinf(duration_s):
        zeros = np.zeros(2)
        return ClickStatistics(zeros, zeros, zeros, zeros, duration_s, p_n, rate,
                               (proto.mu, proto.nu), tuple(pk))
    t = duration_s * hw.rep_rate_hz
    return ClickStatistics(
        n_z=t * pk * clicks * pz2,
        m_z=t * pk * errors * pz2,
        n_x=t * pk * clicks * px2,
        m_x=t * pk * errors * px2,
        duration_s=duration_s,
        p_noise=p_n,
        detection_rate_hz=rate,
        intensities=(proto.mu, proto.nu),
        probabilities=tuple(pk),
    )


def detection_rate(dist, hw, proto):
    """Total saturated detection rate (Hz) over all bases and intensities."""
    return _per_pulse((dist.eta, dist.weights), hw, proto)[2]


def mean_only_click_rate(mean_eta, hw, proto):
    return detection_rate(EfficiencyDistribution.point_mass(mean_eta), hw, proto)


def saturation_overestimation_db(dist, hw, proto):
    """How much a mean-only computation overstates the detection rate (dB)."""
    return to_db(mean_only_click_rate(dist.mean(), hw, proto)) - to_db(detection_rate(dist, hw, proto))


def saturation_sweep(dist, hw, proto, mean_targets):
    """Mean-only vs distribution-aware rates as the distribution is shifted in efficiency.

    The shape of ``dist`` is kept and its support rescaled so its mean equals
    each value of ``mean_targets``. Rows: ``(target_mean, mean_R0/R_sat,
    rate_mean_only, rate_distribution, overestimation_db)``.
    """
    rows = []
    m0 = dist.mean()
    for target in mean_targets:
        d = dist.scaled(target / m0)
        unsat = replace(hw, dead_time_s=1e-300)
        r0 = detection_rate(EfficiencyDistribution.point_mass(target), unsat, proto)
        r_mean = mean_only_click_rate(target, hw, proto)
        r_dist = detection_rate(d, hw, proto)
        rows.append((float(target), r0 / hw.r_sat, r_mean, r_dist, to_db(r_mean) - to_db(r_dist)))
    return rows
