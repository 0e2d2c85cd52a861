"""Time the numba and numpy paths of the hot kernels and check they agree.

    python3 benchmarks/bench_kernels.py [--repeat 5]

The first numba call (JIT compile or cache load) is excluded from timings.
"""
import argparse
import timeit

import numpy as np

from fsoqkd._accel import HAS_NUMBA
from fsoqkd.kernels import chi2_mixture_envelope, gil_pelaez_pdf, saturated_sums


def gil_pelaez_case(n_z=4000, n_u=6000, seed=1):
    rng = np.random.default_rng(seed)
    variances = np.sort(rng.uniform(1e-3, 0.3, 30))
    mult = rng.integers(1, 8, 30).astype(float)
    u = np.linspace(1e-3, 400.0, n_u)
    w = np.full(n_u, u[1] - u[0])
    log_mod, phase = chi2_mixture_envelope(u, variances, mult)
    z = np.linspace(0.0, 8.0, n_z)
    return z, u, w, log_mod, phase


def saturation_case(n_eta=20000, seed=2):
    rng = np.random.default_rng(seed)
    w = rng.dirichlet(np.ones(n_eta))
    p_total = rng.uniform(0, 1e-3, n_eta)
    q = rng.uniform(0, 1e-3, (n_eta, 4))
    return w, p_total, q, 1e5, 1e9


def bench(name, fn, args, repeat):
    rows = []
    results = {}
    for label, flag in (("numpy", False), ("numba", True)):
        if flag and not HAS_NUMBA:
            rows.append((name, label, float("nan")))
            continue
        results[label] = fn(*args, use_numba=flag)  # warm-up / compile
        t = min(timeit.repeat(lambda: fn(*args, use_numba=flag), number=1, repeat=repeat))
        rows.append((name, label, t))
    if len(results) == 2:
        a, b = results["numpy"], results["numba"]
        err = float(np.max(np.abs(a - b)) / max(np.max(np.abs(a)), 1e-300))
    else:
        err = float("nan")
    return rows, err


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    print(f"numba available: {HAS_NUMBA}")
    print(f"{'kernel':<16}{'path':<8}{'best s':>12}{'speedup':>10}")
    for name, fn, case in (("gil_pelaez_pdf", gil_pelaez_pdf, gil_pelaez_case()),
                           ("saturated_sums", saturated_sums, saturation_case())):
        rows, err = bench(name, fn, case, args.repeat)
        base = rows[0][2]
        for kname, label, t in rows:
            print(f"{kname:<16}{label:<8}{t:>12.4g}{base / t:>10.2f}")
        print(f"{name:<16}max relative difference {err:.2e}")


if __name__ == "__main__":
    main()
