"""Derivative-free maximization of the secret key rate.

Protocol parameters are searched in an unconstrained-looking transformed
space: probabilities through the logit, intensities and the gate width
through the log, and the decoy as the ratio ``nu/mu`` (logit on
``[0.01, 0.95]``). Box bounds are imposed on the transformed coordinates.
"""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy import optimize as _sopt
from scipy.special import expit, logit

from .detection import click_statistics
from .security import secret_key_rate

__all__ = [
    "NMResult",
    "AnnealSchedule",
    "nelder_mead",
    "simulated_annealing",
    "ParamSpace",
    "OptimizationProblem",
    "ProtocolOptimum",
    "evaluate",
    "optimize_protocol",
    "block_length_sweep",
    "gating_hardware_for_snr",
    "optimize_gating_cell",
    "optimize_gating",
    "local_optimality_audit",
]

NU_RATIO_BOUNDS = (0.01, 0.95)


@dataclass
class NMResult:
    x: np.ndarray
    f: float
    converged: bool
    nfev: int


def _initial_simplex(x0, lo, hi, frac=0.1):
    n = x0.size
    simplex = np.tile(x0, (n + 1, 1))
    for i in range(n):
        step = frac * (hi[i] - lo[i])
        simplex[i + 1, i] = x0[i] + step if x0[i] + step <= hi[i] else x0[i] - step
    return simplex


def nelder_mead(objective, x0, bounds, tol=1e-6, max_iter=2000):
    """Minimize with the classic simplex (reflection 1, expansion 2, contraction and shrink 1/2).

    Points leaving the box are projected onto it. Stops when every vertex is
    within ``tol`` of the best one (per coordinate) or after ``max_iter``
    iterations; ``converged`` is False in the latter case.
    """
    x0 = np.asarray(x0, dtype=float)
    lo, hi = (np.asarray(b, dtype=float) for b in zip(*bounds))
    if np.any(x0 < lo) or np.any(x0 > hi):
        raise ValueError("x0 outside bounds")
    res = _sopt.minimize(
        objective, x0, method="Nelder-Mead", bounds=list(zip(lo, hi)),
        options={"xatol": tol, "fatol": np.inf, "maxiter": max_iter, "maxfev": 50 * max_iter,
                 "initial_simplex": _initial_simplex(x0, lo, hi), "adaptive": False},
    )
    x = np.clip(res.x, lo, hi)
    return NMResult(x, float(objective(x)), bool(res.status == 0), int(res.nfev))


@dataclass(frozen=True)
class AnnealSchedule:
    t0: float = 1.0
    cooling: float = 0.95
    n_temps: int = 200
    n_proposals: int = 50
    step_frac: float = 0.1


def simulated_annealing(objective, x0, bounds, schedule=AnnealSchedule(), seed=0, polish=True):
    """Minimize by annealing with geometric cooling, then a simplex polish.

    Proposals are Gaussian with per-coordinate scale ``step_frac * range *
    sqrt(T / T0)`` and clipped to the box. Acceptance is Metropolis on the
    objective change relative to ``max(|f_current|, 1e-12)``, so the
    temperature is scale-free.
    """
    rng = np.random.default_rng(seed)
    lo, hi = (np.asarray(b, dtype=float) for b in zip(*bounds))
    x = np.clip(np.asarray(x0, dtype=float), lo, hi)
    fx = objective(x)
    best_x, best_f = x.copy(), fx
    span = hi - lo
    temp = schedule.t0
    nfev = 1
    for _ in range(schedule.n_temps):
        scale = schedule.step_frac * span * math.sqrt(temp / schedule.t0)
        for _ in range(schedule.n_proposals):
            y = np.clip(x + scale * rng.standard_normal(x.size), lo, hi)
            fy = objective(y)
            nfev += 1
            delta = (fy - fx) / max(abs(fx), 1e-12)
            if delta <= 0 or rng.random() < math.exp(-delta / temp):
                x, fx = y, fy
                if fx < best_f:
                    best_x, best_f = x.copy(), fx
        temp *= schedule.cooling
    if polish:
        nm = nelder_mead(objective, best_x, list(zip(lo, hi)), tol=1e-7)
        nfev += nm.nfev
        if nm.f <= best_f:
            best_x, best_f = nm.x, nm.f
    return NMResult(best_x, float(best_f), True, nfev)


# --------------------------------------------------------------------------
# protocol parameter space

_DEFAULT_BOUNDS = {
    "p_z": (0.05, 0.9999),
    "p_mu": (0.05, 0.9999),
    "mu": (0.02, 1.5),
    "nu_ratio": NU_RATIO_BOUNDS,
    "t_gat_over_j": (0.5, 10.0),
}
_LOGIT = {"p_z", "p_mu", "nu_ratio"}


@dataclass(frozen=True)
class ParamSpace:
    free: tuple = ("p_z", "p_mu", "mu", "nu_ratio")
    bounds: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.free:
            raise ValueError("at least one free parameter is required")
        for name in self.free:
            if name not in _DEFAULT_BOUNDS:
                raise ValueError(f"unknown parameter {name!r}")

    def natural_bounds(self, name):
        lo, hi = self.bounds.get(name, _DEFAULT_BOUNDS[name])
        if name == "nu_ratio":
            lo, hi = max(lo, NU_RATIO_BOUNDS[0]), min(hi, NU_RATIO_BOUNDS[1])
        if not lo < hi:
            raise ValueError(f"empty bounds for {name}")
        return lo, hi

    @staticmethod
    def _fwd(name, v):
        return float(logit(v)) if name in _LOGIT else math.log(v)

    @staticmethod
    def _inv(name, y):
        return float(expit(y)) if name in _LOGIT else math.exp(y)

    def box(self):
        return [tuple(self._fwd(n, b) for b in self.natural_bounds(n)) for n in self.free]

    def encode(self, proto, jitter_s):
        vals = _natural(proto, jitter_s)
        out = []
        for name, (lo, hi) in zip(self.free, self.box()):
            out.append(min(max(self._fwd(name, vals[name]), lo), hi))
        return np.array(out)

    def decode(self, y, base, jitter_s):
        vals = _natural(base, jitter_s)
        for name, v in zip(self.free, y):
            vals[name] = self._inv(name, v)
        nu = vals["nu_ratio"] * vals["mu"]
        t_gat = vals["t_gat_over_j"] * jitter_s if jitter_s > 0 else base.t_gat_s
        return base.with_(p_z=vals["p_z"], p_mu=vals["p_mu"], mu=vals["mu"], nu=nu, t_gat_s=t_gat)


def _natural(proto, jitter_s):
    return {
        "p_z": proto.p_z,
        "p_mu": proto.p_mu,
        "mu": proto.mu,
        "nu_ratio": proto.nu / proto.mu,
        "t_gat_over_j": proto.t_gat_s / jitter_s if jitter_s > 0 else 1.0,
    }


def evaluate(dist, hw, proto, finite=True):
    """SKR for ``proto``; the finite key uses the block length, the asymptotic one 1 s of data."""
    if finite:
        stats = click_statistics(dist, hw, proto)
    else:
        stats = click_statistics(dist, hw, proto, duration_s=1.0)
    return secret_key_rate(stats, proto, finite=finite)


@dataclass
class OptimizationProblem:
    dist: object
    hw: object
    base: object
    space: ParamSpace = field(default_factory=ParamSpace)
    finite: bool = True

    def params(self, y):
        return self.space.decode(y, self.base, self.hw.jitter_sigma_s)

    def objective(self, y):
        """Negative key rate, unclamped so infeasible regions still have a slope."""
        r = evaluate(self.dist, self.hw, self.params(y), self.finite)
        v = r.raw_rate
        return -v if math.isfinite(v) else 1e300

    def x0(self, proto=None):
        return self.space.encode(proto or self.base, self.hw.jitter_sigma_s)


@dataclass
class ProtocolOptimum:
    proto: object
    result: object
    x: np.ndarray
    nfev: int

    @property
    def skr_bps(self):
        return self.result.skr_bps


def optimize_protocol(dist, hw, base, space=None, finite=True, seed=0, method="anneal",
                      schedule=AnnealSchedule(), starts=()):
    """Maximize the SKR over the free parameters.

    ``starts`` are extra protocol candidates (e.g. the optimum of a
    neighbouring block length); each is simplex-polished and the best of all
    candidates is returned.
    """
    prob = OptimizationProblem(dist, hw, base, space or ParamSpace(), finite)
    box = prob.space.box()
    if method == "anneal":
        best = simulated_annealing(prob.objective, prob.x0(), box, schedule, seed)
    elif method == "nelder_mead":
        best = nelder_mead(prob.objective, prob.x0(), box, tol=1e-7)
    else:
        raise ValueError(f"unknown method {method!r}")
    nfev = best.nfev
    for cand in starts:
        nm = nelder_mead(prob.objective, prob.x0(cand), box, tol=1e-7)
        nfev += nm.nfev
        if nm.f < best.f:
            best = nm
    proto = prob.params(best.x)
    return ProtocolOptimum(proto, evaluate(dist, hw, proto, finite), best.x, nfev)


def block_length_sweep(dist, hw, base, lengths, mode="per_length_opt", seed=0,
                       schedule=AnnealSchedule(), reference_length=1e7, space=None):
    """Finite-key cost ``SKR / SKR_inf`` across block lengths.

    ``mode="fixed_params"`` evaluates the parameters optimal at
    ``reference_length`` everywhere; ``"per_length_opt"`` re-optimizes each
    length, warm-started from the previous length's optimum and the
    reference parameters. Returns ``(rows, skr_inf_optimum)``; each row is a
    dict with the length, rates, ratio and parameters.
    """
    lengths = [float(n) for n in lengths]
    if any(b <= a for a, b in zip(lengths, lengths[1:])):
        raise ValueError("lengths must be strictly increasing")
    if mode not in ("fixed_params", "per_length_opt"):
        raise ValueError(f"unknown mode {mode!r}")
    space = space or ParamSpace()
    inf_opt = optimize_protocol(dist, hw, base, space, finite=False, seed=seed, schedule=schedule)
    skr_inf = inf_opt.result.skr_bps
    ref = optimize_protocol(dist, hw, base.with_(block_n_z=reference_length), space,
                            seed=seed, schedule=schedule, starts=(inf_opt.proto,))
    rows = []
    prev = None
    for i, n in enumerate(lengths):
        if mode == "fixed_params":
            proto = ref.proto.with_(block_n_z=n)
            res = evaluate(dist, hw, proto)
        else:
            b = base.with_(block_n_z=n)
            starts = [ref.proto.with_(block_n_z=n), inf_opt.proto.with_(block_n_z=n)]
            if prev is not None:
                starts.append(prev.with_(block_n_z=n))
            opt = optimize_protocol(dist, hw, b, space, seed=seed + i, schedule=schedule, starts=starts)
            proto, res = opt.proto, opt.result
            prev = proto
        rows.append({
            "block_n_z": n,
            "skr_bps": res.skr_bps,
            "skr_inf_bps": skr_inf,
            "ratio": res.skr_bps / skr_inf if skr_inf > 0 else 0.0,
            "p_z": proto.p_z,
            "p_mu": proto.p_mu,
            "mu": proto.mu,
            "nu": proto.nu,
            "t_gat_s": proto.t_gat_s,
            "feasible": res.feasible,
        })
    return rows, inf_opt


# --------------------------------------------------------------------------
# temporal gating

GATE_SNR_WIDTH = 6.0  # noise gated to +-3 J for the SNR definition


def gating_hardware_for_snr(hw, dist, proto, snr):
    """Hardware whose noise gives ``snr`` with the noise gated to ``6 J``.

    Signal: mean detected photons per pulse (all signal inside the gate).
    Noise: all noise is attributed to the dark rate (background set to 0).
    """
    j = hw.jitter_sigma_s
    if not (snr > 0 and j > 0):
        raise ValueError("snr and jitter must be positive")
    signal = (proto.p_mu * proto.mu + (1 - proto.p_mu) * proto.nu) * dist.mean() \
        * hw.rx_transmission * hw.det_efficiency
    noise_rate = signal / (snr * GATE_SNR_WIDTH * j)
    return hw.replace(dark_rate_hz=noise_rate, background_rate_hz=0.0)


def optimize_gating_cell(dist, hw, proto, bounds=(0.5, 10.0), n_scan=40):
    """Best ``T_gat/J`` for fixed other parameters: coarse scan, then a 1-D simplex polish."""
    j = hw.jitter_sigma_s

    def neg(y):
        r = evaluate(dist, hw, proto.with_(t_gat_s=float(np.exp(y[0])) * j))
        v = r.raw_rate
        return -v if math.isfinite(v) else 1e300

    lo, hi = math.log(bounds[0]), math.log(bounds[1])
    ys = np.linspace(lo, hi, n_scan)
    vals = [neg([y]) for y in ys]
    y0 = ys[int(np.argmin(vals))]
    nm = nelder_mead(neg, [y0], [(lo, hi)], tol=1e-6)
    best_y, best_f = (nm.x[0], nm.f) if nm.f <= min(vals) else (y0, min(vals))
    ratio = float(np.exp(best_y))
    return ratio, -best_f


def optimize_gating(dist, hw, proto, snr_grid, coding_error_grid):
    """Optimal ``T_gat/J`` for every (coding error, SNR) pair.

    Rows: ``(snr, coding_error, t_gat_over_j, skr_bps)``.
    """
    if len(snr_grid) == 0 or len(coding_error_grid) == 0:
        raise ValueError("grids must be nonempty")
    rows = []
    for e in coding_error_grid:
        for snr in snr_grid:
            h = gating_hardware_for_snr(hw.replace(coding_error=e), dist, proto, snr)
            ratio, skr = optimize_gating_cell(dist, h, proto)
            rows.append((float(snr), float(e), ratio, max(skr, 0.0)))
    return rows


def local_optimality_audit(objective, x, bounds, n_probes=20, radius=0.02, seed=0):
    """Largest relative improvement found by random probes around a minimizer ``x``.

    Probes are uniform in a box of half-width ``radius * range`` (clipped to
    ``bounds``). A value <= 0.005 certifies the 0.5 % local-optimality audit.
    """
    rng = np.random.default_rng(seed)
    lo, hi = (np.asarray(b, dtype=float) for b in zip(*bounds))
    x = np.asarray(x, dtype=float)
    f0 = objective(x)
    best = 0.0
    for _ in range(n_probes):
        y = np.clip(x + radius * (hi - lo) * rng.uniform(-1, 1, x.size), lo, hi)
        best = max(best, (f0 - objective(y)) / max(abs(f0), 1e-300))
    return best
