"""Discretized efficiency distributions on logarithmic transmittance grids.

A distribution is a discrete measure: support points ``eta`` with probability
``weights``. Grid-based distributions place one point at every grid edge
``10**[a : step : 0]``; the weight of a point is the probability mass of the
log-centred cell around it (cell boundaries at geometric midpoints between
neighbouring edges, the top cell closed at 1). With this convention the mean
``sum(eta * w)`` is a midpoint rule in ``log(eta)``, which stays unbiased on
coarse grids such as 0.1-decade spacing.
"""
from dataclasses import dataclass, field
import math

import numpy as np

__all__ = [
    "EfficiencyGrid",
    "EfficiencyDistribution",
    "make_grid",
    "parse_grid_spec",
    "ks_distance",
    "to_db",
]


def to_db(x):
    return 10.0 * math.log10(x) if x > 0 else -math.inf


@dataclass(frozen=True)
class EfficiencyGrid:
    log10_min: float
    log10_step: float
    edges: np.ndarray = field(repr=False)

    @property
    def size(self):
        return self.edges.size

    @property
    def spec(self):
        return f"10^[{self.log10_min:g}:{self.log10_step:g}:0]"

    def cell_bounds(self):
        """Lower and upper boundaries of the cell owned by each grid point."""
        e = self.edges
        mids = np.sqrt(e[:-1] * e[1:])
        lower = np.empty_like(e)
        upper = np.empty_like(e)
        lower[1:] = mids
        upper[:-1] = mids
        lower[0] = e[0] / math.sqrt(e[1] / e[0]) if e.size > 1 else 0.0
        upper[-1] = 1.0
        return lower, upper


def make_grid(log10_min, log10_step):
    """Logarithmic grid ``10**[log10_min : log10_step : 0]``.

    When the step does not divide ``|log10_min|`` the last edge is forced to
    exactly 1 (the final spacing is then shorter than ``log10_step``).
    """
    if not (log10_min < 0 < log10_step):
        raise ValueError("need log10_min < 0 < log10_step")
    n = int(math.floor(-log10_min / log10_step + 1e-9))
    exps = log10_min + log10_step * np.arange(n + 1)
    exps[-1] = min(exps[-1], 0.0)
    if abs(exps[-1]) > 1e-9 * log10_step:
        exps = np.append(exps, 0.0)
    else:
        exps[-1] = 0.0
    edges = 10.0 ** exps
    edges[-1] = 1.0
    edges.setflags(write=False)
    return EfficiencyGrid(float(log10_min), float(log10_step), edges)


def parse_grid_spec(spec):
    """Parse ``"10^[-8:0.02:0]"`` or ``"-8:0.02"`` into a grid."""
    s = spec.strip().replace(" ", "")
    if s.startswith("10^"):
        s = s[3:]
    s = s.strip("[]")
    parts = s.split(":")
    if len(parts) == 3 and float(parts[2]) != 0.0:
        raise ValueError("grid must end at 10^0")
    return make_grid(float(parts[0]), float(parts[1]))


@dataclass
class EfficiencyDistribution:
    eta: np.ndarray
    weights: np.ndarray
    grid: EfficiencyGrid = None
    raw_mass: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.eta = np.asarray(self.eta, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.eta.shape != self.weights.shape:
            raise ValueError("eta and weights must have the same shape")
        if np.any(self.weights < 0):
            raise ValueError("weights must be non-negative")

    @classmethod
    def point_mass(cls, eta, **meta):
        return cls(np.array([float(eta)]), np.array([1.0]), None, 1.0, dict(meta))

    @classmethod
    def on_grid(cls, grid, masses, **meta):
        """Normalize raw cell masses; the pre-normalization total is kept as ``raw_mass``."""
        masses = np.asarray(masses, dtype=float)
        total = float(masses.sum())
        if not total > 0:
            raise ValueError("distribution has no mass on the grid")
        return cls(grid.edges.copy(), masses / total, grid, total, dict(meta))

    @classmethod
    def from_samples(cls, samples, grid, **meta):
        """Histogram samples into the grid cells (samples below the grid are dropped)."""
        lower, upper = grid.cell_bounds()
        bounds = np.append(lower, upper[-1])
        s = np.asarray(samples, dtype=float)
        counts = np.histogram(np.clip(s, None, 1.0), bins=bounds)[0].astype(float)
        return cls.on_grid(grid, counts / s.size, **meta)

    @property
    def total(self):
        return float(self.weights.sum())

    def mean(self):
        return float(np.dot(self.eta, self.weights))

    def mean_db(self):
        return to_db(self.mean())

    def moment(self, k):
        return float(np.dot(self.eta ** k, self.weights))

    def cdf(self, x):
        order = np.argsort(self.eta)
        cum = np.cumsum(self.weights[order])
        idx = np.searchsorted(self.eta[order], x, side="right")
        return np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)

    def scaled(self, factor):
        return EfficiencyDistribution(self.eta * factor, self.weights.copy(), None,
                                      self.raw_mass, dict(self.meta))

    def to_csv(self, path, header=None):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_csv_text(header))

    def to_csv_text(self, header=None):
        lines = [f"# mean_dB={self.mean_db():.6f}"]
        if self.grid is not None:
            lines.append(f"# grid={self.grid.spec}")
        for key, val in (header or {}).items():
            lines.append(f"# {key}={val}")
        lines.append("eta,weight")
        for e, w in zip(self.eta, self.weights):
            lines.append(f"{e:.10e},{w:.10e}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, path):
        eta, w, meta = [], [], {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    key, _, val = line[1:].strip().partition("=")
                    meta[key.strip()] = val.strip()
                    continue
                if line.startswith("eta"):
                    continue
                a, b = line.split(",")
                eta.append(float(a))
                w.append(float(b))
        grid = parse_grid_spec(meta["grid"]) if "grid" in meta else None
        return cls(np.array(eta), np.array(w), grid, 1.0, meta)


def ks_distance(a, b):
    """Kolmogorov-Smirnov distance between two discrete distributions."""
    x = np.union1d(a.eta, b.eta)
    return float(np.max(np.abs(a.cdf(x) - b.cdf(x))))
