"""Optional numba acceleration.

Set ``FSOQKD_DISABLE_NUMBA=1`` to force the pure-numpy code paths, e.g. for
debugging or to compare both implementations (see ``benchmarks/``).
"""
import os

_DISABLED = os.environ.get("FSOQKD_DISABLE_NUMBA", "0").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError("numba disabled by FSOQKD_DISABLE_NUMBA")
    import numba
    from numba import njit, prange

    if "NUMBA_THREADING_LAYER" not in os.environ:
        # prefer OpenMP; an outdated system TBB otherwise triggers a warning on first parallel call
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAS_NUMBA = False
    prange = range

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(f):
            return f

        return wrap


def numba_enabled():
    return HAS_NUMBA
