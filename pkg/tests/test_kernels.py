import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fsoqkd import kernels
from fsoqkd._accel import HAS_NUMBA

needs_numba = pytest.mark.skipif(not HAS_NUMBA, reason="numba not installed")


def _gp_inputs(seed):
    rng = np.random.default_rng(seed)
    v = rng.uniform(1e-3, 0.2, 12)
    mult = rng.integers(1, 6, 12)
    u = np.linspace(1e-3, 200, 3000)
    w = np.full(u.size, u[1] - u[0])
    lm, ph = kernels.chi2_mixture_envelope(u, v, mult)
    z = np.linspace(0, 5, 300)
    return z, u, w, lm, ph


@needs_numba
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_gil_pelaez_paths_agree(seed):
    args = _gp_inputs(seed)
    a = kernels.gil_pelaez_pdf(*args, use_numba=False)
    b = kernels.gil_pelaez_pdf(*args, use_numba=True)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12 * np.abs(a).max())


@needs_numba
@settings(max_examples=30, deadline=None)
@given(st.integers(1, 300), st.floats(1e3, 1e9), st.integers(0, 2**31))
def test_saturated_sums_paths_agree(n, r_sat, seed):
    rng = np.random.default_rng(seed)
    w = rng.dirichlet(np.ones(n))
    p = rng.uniform(0, 1e-2, n)
    q = rng.uniform(0, 1, (n, 4))
    a = kernels.saturated_sums(w, p, q, r_sat, 1e9, use_numba=False)
    b = kernels.saturated_sums(w, p, q, r_sat, 1e9, use_numba=True)
    assert np.allclose(a, b, rtol=1e-12)


def test_saturated_sums_reference_loop():
    w = np.array([0.25, 0.75])
    p = np.array([1e-4, 0.0])
    q = np.array([[1.0, 2.0], [3.0, 4.0]])
    r0 = 1e9 * 1e-4
    s = 1e5 / (r0 + 1e5)
    expected = 0.25 * s * q[0] + 0.75 * q[1]
    assert np.allclose(kernels.saturated_sums(w, p, q, 1e5, 1e9), expected)


def test_envelope_of_single_chi2():
    # |phi(u)| = (1 + 4 v^2 u^2)^(-1/4) for v * chi2_1
    u = np.array([0.0, 1.0, 10.0])
    lm, ph = kernels.chi2_mixture_envelope(u, [0.5], [1])
    assert np.allclose(np.exp(lm), (1 + u ** 2) ** -0.25)
    assert np.allclose(ph, 0.5 * np.arctan(u))


def test_numpy_fallback_flag_gives_same_channel():
    code = ("from fsoqkd.channel import case_study, channel_distribution;"
            "from fsoqkd._accel import HAS_NUMBA;"
            "print(HAS_NUMBA, repr(channel_distribution(case_study(2)).mean()))")
    out = {}
    for flag in ("0", "1"):
        env = dict(os.environ, FSOQKD_DISABLE_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        out[flag] = res.stdout.split()
    assert out["1"][0] == "False"
    assert float(out["0"][1]) == pytest.approx(float(out["1"][1]), rel=1e-12)
