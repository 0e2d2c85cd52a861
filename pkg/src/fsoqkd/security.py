"""Finite-key secret key length of one-decoy efficient BB84.

Vacuum and single-photon detections are bounded from the two intensity
levels with Hoeffding confidence intervals; the phase error of single-photon
events is estimated in the X basis and corrected for random sampling.
Every failure probability uses the uniform share ``eps_sec / 19``.
"""
from dataclasses import asdict, dataclass, field
import math


__all__ = [
    "ProtocolParams",
    "SkrResult",
    "binary_entropy",
    "hoeffding_delta",
    "poisson_tau",
    "vacuum_bounds",
    "single_photon_bound",
    "phase_error_upper",
    "serfling_gamma",
    "secret_key_rate",
    "SKR_FIELDS",
]

N_TERMS = 19


@dataclass(frozen=True)
class ProtocolParams:
    p_z: float
    p_mu: float
    mu: float
    nu: float
    t_gat_s: float
    block_n_z: float = 1e7
    eps_sec: float = 1e-9
    eps_cor: float = 1e-15
    f_ec: float = 1.16

    def __post_init__(self):
        for name in ("p_z", "p_mu", "eps_sec", "eps_cor"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if not 0.0 < self.nu < self.mu:
            raise ValueError("need 0 < nu < mu")
        if not self.t_gat_s > 0:
            raise ValueError("gate width must be positive")
        if not self.block_n_z > 0:
            raise ValueError("block length must be positive")
        if self.f_ec < 1.0:
            raise ValueError("error-correction inefficiency must be >= 1")

    @property
    def p_nu(self):
        return 1.0 - self.p_mu

    @property
    def eps1(self):
        return self.eps_sec / N_TERMS

    def with_(self, **kw):
        d = asdict(self)
        d.update(kw)
        return ProtocolParams(**d)


SKR_FIELDS = ("skr_bps", "secret_bits", "s_z0", "s_z1", "phi_z", "l_ec", "l_c", "l_sec",
              "qber_z", "qber_x", "n_z", "duration_s", "feasible")


@dataclass
class SkrResult:
    skr_bps: float
    secret_bits: float   # before clamping at 0; the optimizer's objective
    s_z0: float
    s_z1: float
    phi_z: float
    l_ec: float
    l_c: float
    l_sec: float
    qber_z: float
    qber_x: float
    n_z: float
    duration_s: float
    feasible: bool
    flags: list = field(default_factory=list)

    @property
    def raw_rate(self):
        return self.secret_bits / self.duration_s if self.duration_s > 0 else -math.inf

    def row(self):
        return [getattr(self, f) for f in SKR_FIELDS]


def binary_entropy(x):
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary entropy needs x in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def hoeffding_delta(n, eps):
    """Hoeffding radius ``sqrt(n ln(1/eps) / 2)``."""
    return math.sqrt(max(n, 0.0) * math.log(1.0 / eps) / 2.0)


def poisson_tau(n, intensities, probabilities):
    """Probability that a pulse carries ``n`` photons, averaged over intensity levels."""
    return sum(p * math.exp(-k) * k ** n / math.factorial(n) for k, p in zip(intensities, probabilities))


def _corrected(counts, total, intensities, probabilities, delta):
    """``(e^k / p_k)(c_k -+ delta)`` for each level; returns (minus, plus)."""
    d = delta(total)
    minus = [math.exp(k) / p * (c - d) for c, k, p in zip(counts, intensities, probabilities)]
    plus = [math.exp(k) / p * (c + d) for c, k, p in zip(counts, intensities, probabilities)]
    return minus, plus


def vacuum_bounds(n, m, mu, nu, p, delta):
    """Lower bound on vacuum detections and the upper bound used by the single-photon bound.

    ``n``, ``m``: detections and errors at ``(mu, nu)``; ``p``: level probabilities.
    """
    tau0 = poisson_tau(0, (mu, nu), p)
    n_minus, n_plus = _corrected(n, sum(n), (mu, nu), p, delta)
    _, m_plus = _corrected(m, sum(m), (mu, nu), p, delta)
    lower = tau0 / (mu - nu) * (mu * n_minus[1] - nu * n_plus[0])
    upper = 2.0 * (tau0 * m_plus[1] + delta(sum(n)))
    return lower, upper


def single_photon_bound(n, mu, nu, p, delta, s0_upper):
    tau0 = poisson_tau(0, (mu, nu), p)
    tau1 = poisson_tau(1, (mu, nu), p)
    n_minus, n_plus = _corrected(n, sum(n), (mu, nu), p, delta)
    r = nu * nu / (mu * mu)
    return tau1 * mu / (nu * (mu - nu)) * (n_minus[1] - r * n_plus[0] - (1.0 - r) * s0_upper / tau0)


def phase_error_upper(m_x, mu, nu, p, delta):
    """Upper bound on single-photon errors in the X basis."""
    tau1 = poisson_tau(1, (mu, nu), p)
    m_minus, m_plus = _corrected(m_x, sum(m_x), (mu, nu), p, delta)
    return tau1 * (m_plus[0] - m_minus[1]) / (mu - nu)


def serfling_gamma(a, b, c, d):
    """Random-sampling correction to the phase error rate.

    ``a``: failure probability, ``b``: observed error rate, ``c``/``d``:
    sample sizes of the key and test populations.
    """
    if c <= 0 or d <= 0 or not 0.0 < b < 1.0:
        return 0.0
    inner = (c + d) / (c * d * (1.0 - b) * b * a * a)
    if inner <= 1.0:
        return 0.0
    return math.sqrt((c + d) * (1.0 - b) * b / (c * d * math.log(2.0)) * math.log2(inner))


def secret_key_rate(stats, proto, duration_s=None, finite=True):
    """Secret key length and rate for the expected counts in ``stats``.

    ``finite=False`` drops all statistical corrections and constant costs
    (asymptotic key rate with the same per-pulse statistics).
    """
    mu, nu = proto.mu, proto.nu
    if not mu > nu:
        raise ValueError("need mu > nu")
    t = stats.duration_s if duration_s is None else duration_s
    p = (proto.p_mu, proto.p_nu)
    eps1 = proto.eps1
    flags = []
    if finite:
        def delta(n):
            return hoeffding_delta(n, eps1)
    else:
        def delta(n):
            return 0.0

    n_z, m_z = list(stats.n_z), list(stats.m_z)
    n_x, m_x = list(stats.n_x), list(stats.m_x)
    nz_tot = float(sum(n_z))
    if not (nz_tot > 0 and math.isfinite(t)):
        return SkrResult(0.0, -math.inf, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, nz_tot, t, False, ["no_detections"])

    s_z0, s_z0_up = vacuum_bounds(n_z, m_z, mu, nu, p, delta)
    s_z1 = single_photon_bound(n_z, mu, nu, p, delta, s_z0_up)
    _, s_x0_up = vacuum_bounds(n_x, m_x, mu, nu, p, delta)
    s_x1 = single_photon_bound(n_x, mu, nu, p, delta, s_x0_up)
    v_x1 = phase_error_upper(m_x, mu, nu, p, delta)
    for name, val in (("s_z0", s_z0), ("s_z1", s_z1), ("s_x1", s_x1), ("v_x1", v_x1)):
        if val < 0:
            flags.append(f"{name}_clamped")
    s_z0, s_z1, s_x1, v_x1 = (max(v, 0.0) for v in (s_z0, s_z1, s_x1, v_x1))
    if s_z0 + s_z1 > nz_tot:
        flags.append("bounds_exceed_counts")
        s_z1 = max(nz_tot - s_z0, 0.0)

    if s_x1 > 0:
        ratio = v_x1 / s_x1
        gamma = serfling_gamma(eps1, ratio, s_z1, s_x1) if finite else 0.0
        phi = ratio + gamma
    else:
        phi = 0.5
    if not 0.0 <= phi <= 0.5:
        flags.append("phi_clamped")
    phi = min(max(phi, 0.0), 0.5)

    qz = stats.qber_z
    l_ec = proto.f_ec * nz_tot * binary_entropy(min(qz, 1.0))
    l_c = float(math.ceil(math.log2(1.0 / proto.eps_cor))) if finite else 0.0
    l_sec = 6.0 * math.log2(N_TERMS / proto.eps_sec) if finite else 0.0
    bits = s_z0 + s_z1 * (1.0 - binary_entropy(phi)) - l_ec - l_c - l_sec
    feasible = bits > 0
    return SkrResult(
        skr_bps=bits / t if feasible else 0.0,
        secret_bits=bits,
        s_z0=s_z0, s_z1=s_z1, phi_z=phi,
        l_ec=l_ec, l_c=l_c, l_sec=l_sec,
        qber_z=qz, qber_x=stats.qber_x,
        n_z=nz_tot, duration_s=t, feasible=feasible, flags=flags,
    )
