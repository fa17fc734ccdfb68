"""Covering-number dimension estimates from samples.

Each estimator counts greedy (eps, delta)-cover centers over a grid of
radii and reports the least-squares slope of log2(count) against
-log2(eps).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateGrid, EmptyMeasure
from .measures import as_points
from .quantize import robust_cover


@dataclass(frozen=True)
class DimensionEstimate:
    kind: str  # "upper_p", "lower" or "minkowski"
    value: float
    parameter: float | None  # p for upper_p, delta for lower
    eps_grid: np.ndarray
    counts: np.ndarray
    residual: float
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "value": self.value,
            "parameter": self.parameter,
            "eps_grid": self.eps_grid.tolist(),
            "counts": self.counts.tolist(),
            "residual": self.residual,
            "degenerate": self.degenerate,
        }


def default_grid(samples, levels: int = 6) -> np.ndarray:
    """eps_k = D / 4 * 2^-k for k < levels, D the bounding-box diagonal."""
    X = as_points(samples)
    diam = float(np.linalg.norm(X.max(axis=0) - X.min(axis=0)))
    if diam == 0:
        diam = 1.0
    return diam / 4.0 * 2.0 ** -np.arange(levels)


def _check_grid(eps_grid) -> np.ndarray:
    g = np.asarray(eps_grid, dtype=float).ravel()
    if len(g) < 4:
        raise DegenerateGrid("need at least 4 radii")
    if np.any(g <= 0) or np.any(np.diff(g) >= 0):
        raise DegenerateGrid("radii must be positive and strictly decreasing")
    return g


def loglog_slope(eps: np.ndarray, counts: np.ndarray) -> tuple[float, float]:
    """Least-squares slope of log2(count) on -log2(eps) and the RMS residual."""
    x = -np.log2(eps)
    y = np.log2(counts)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return float(coef[0]), float(np.sqrt(np.mean(resid**2)))


def _estimate(kind, samples, eps_grid, delta_of, parameter) -> DimensionEstimate:
    X = as_points(samples)
    if len(X) == 0:
        raise EmptyMeasure("no samples")
    grid = _check_grid(default_grid(X) if eps_grid is None else eps_grid)
    single = bool(np.all(X == X[0]))
    tree = cKDTree(X)
    counts = np.array([robust_cover(X, e, delta_of(e), tree=tree).n_centers for e in grid])
    if np.all(counts == counts[0]):
        if single:
            return DimensionEstimate(kind, 0.0, parameter, grid, counts, 0.0, degenerate=True)
        raise DegenerateGrid(f"all covering counts equal {counts[0]} on the grid")
    value, resid = loglog_slope(grid, counts)
    return DimensionEstimate(kind, value, parameter, grid, counts, resid)


def estimate_upper_dimension(samples, p: float = 1.0, eps_grid=None) -> DimensionEstimate:
    """Covers leaving out mass eps^p."""
    if p < 1:
        raise ValueError("p must be >= 1")
    return _estimate("upper_p", samples, eps_grid, lambda e: min(e**p, 0.999), p)


def estimate_lower_dimension(samples, delta: float, eps_grid=None) -> DimensionEstimate:
    """Covers leaving out a fixed mass delta."""
    if not 0.0 < delta < 0.5:
        raise ValueError("delta must lie in (0, 0.5)")
    return _estimate("lower", samples, eps_grid, lambda e: delta, delta)


def estimate_minkowski(samples, eps_grid=None) -> DimensionEstimate:
    """Full covers (box-counting on the sample support)."""
    return _estimate("minkowski", samples, eps_grid, lambda e: 0.0, None)
