"""Hot numeric kernels with a numba path and a pure-numpy path.

Both paths compute the same quantities to rounding accuracy; which one is
used is decided once at import time by :mod:`fsoqkd._accel`.
"""
import numpy as np

from ._accel import HAS_NUMBA, njit, prange

__all__ = [
    "gil_pelaez_pdf",
    "gil_pelaez_pdf_numpy",
    "chi2_mixture_envelope",
    "saturated_sums",
]


def chi2_mixture_envelope(u, variances, multiplicity):
    """Modulus and half-phase of the characteristic function of sum(v_j * chi2_1).

    Returns ``(log_modulus, phase)`` evaluated at the nodes ``u``.
    """
    u = np.asarray(u, dtype=float)[:, None]
    v = np.asarray(variances, dtype=float)[None, :]
    w = np.asarray(multiplicity, dtype=float)[None, :]
    x = 2.0 * v * u
    log_mod = -0.25 * np.sum(w * np.log1p(x * x), axis=1)
    phase = 0.5 * np.sum(w * np.arctan(x), axis=1)
    return log_mod, phase


def gil_pelaez_pdf_numpy(z, u, weights, log_mod, phase, chunk=256):
    z = np.asarray(z, dtype=float)
    amp = weights * np.exp(log_mod)
    out = np.empty_like(z)
    for lo in range(0, z.size, chunk):
        zc = z[lo:lo + chunk, None]
        out[lo:lo + chunk] = np.cos(phase[None, :] - zc * u[None, :]) @ amp
    return out / np.pi


@njit(parallel=True, fastmath=False, cache=True)
def _gil_pelaez_pdf_numba(z, u, weights, log_mod, phase):
    nz = z.shape[0]
    nu = u.shape[0]
    amp = np.empty(nu)
    for j in range(nu):
        amp[j] = weights[j] * np.exp(log_mod[j])
    out = np.empty(nz)
    for i in prange(nz):
        acc = 0.0
        zi = z[i]
        for j in range(nu):
            acc += amp[j] * np.cos(phase[j] - zi * u[j])
        out[i] = acc / np.pi
    return out


def gil_pelaez_pdf(z, u, weights, log_mod, phase, use_numba=None):
    """Density of a non-negative variable from its characteristic function.

    Evaluates ``(1/pi) * sum_k w_k |phi(u_k)| cos(arg phi(u_k) - z u_k)``, the
    quadrature form of the Gil-Pelaez inversion integral over ``u in (0, inf)``.
    """
    if use_numba is None:
        use_numba = HAS_NUMBA
    args = [np.ascontiguousarray(a, dtype=np.float64) for a in (z, u, weights, log_mod, phase)]
    if use_numba and HAS_NUMBA:
        return _gil_pelaez_pdf_numba(*args)
    return gil_pelaez_pdf_numpy(*args)


def _saturated_sums_numpy(weights, p_total, q, r_sat, rep_rate):
    r0 = rep_rate * p_total
    scale = np.ones_like(r0)
    pos = r0 > 0
    scale[pos] = r_sat / (r0[pos] + r_sat)
    return (weights * scale) @ q


@njit(cache=True)
def _saturated_sums_numba(weights, p_total, q, r_sat, rep_rate):
    n_eta, n_cat = q.shape
    out = np.zeros(n_cat)
    for i in range(n_eta):
        r0 = rep_rate * p_total[i]
        s = 1.0
        if r0 > 0.0:
            s = r_sat / (r0 + r_sat)
        ws = weights[i] * s
        for c in range(n_cat):
            out[c] += ws * q[i, c]
    return out


def saturated_sums(weights, p_total, q, r_sat, rep_rate, use_numba=None):
    """Distribution average of ``q`` after dead-time saturation.

    At channel point ``i`` the pre-saturation detector rate is
    ``R_0 = rep_rate * p_total[i]``; every column of ``q[i]`` is scaled by
    ``R_sat / (R_0 + R_sat)`` before the weighted sum over ``i``.
    """
    if use_numba is None:
        use_numba = HAS_NUMBA
    w = np.ascontiguousarray(weights, dtype=np.float64)
    pt = np.ascontiguousarray(p_total, dtype=np.float64)
    qq = np.ascontiguousarray(q, dtype=np.float64)
    if use_numba and HAS_NUMBA:
        return _saturated_sums_numba(w, pt, qq, float(r_sat), float(rep_rate))
    return _saturated_sums_numpy(w, pt, qq, float(r_sat), float(rep_rate))
