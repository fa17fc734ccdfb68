"""Continuous piecewise-linear maps R -> R^d stored by their values at breakpoints."""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch


@dataclass(frozen=True, eq=False)
class CpwlMap:
    """Piecewise-linear interpolant of ``values`` at ``breakpoints``, constant outside.

    ``breakpoints`` has shape (N+2,), strictly increasing; ``values`` has
    shape (N+2, d).  N is the interior breakpoint count.
    """

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.breakpoints, dtype=float).ravel()
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if z.shape[0] < 2:
            raise ValueError("a CpwlMap needs at least two breakpoints")
        if v.shape[0] != z.shape[0]:
            raise DimensionMismatch(f"{z.shape[0]} breakpoints but {v.shape[0]} values")
        if not np.all(np.isfinite(z)) or not np.all(np.isfinite(v)):
            raise ValueError("breakpoints and values must be finite")
        if np.any(np.diff(z) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        z.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "breakpoints", z)
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def __call__(self, z):
        return evaluate(self, z)

    def __eq__(self, other):
        if not isinstance(other, CpwlMap):
            return NotImplemented
        return np.array_equal(self.breakpoints, other.breakpoints) and np.array_equal(
            self.values, other.values
        )

    def __hash__(self):
        return hash((self.breakpoints.tobytes(), self.values.tobytes()))

    def scaled(self, alpha: float) -> "CpwlMap":
        return CpwlMap(self.breakpoints, alpha * self.values)

    def max_abs_value(self) -> float:
        return float(np.max(np.abs(self.values)))

    def lipschitz(self) -> float:
        """Largest segment slope (Euclidean norm of the value increment over length)."""
        if len(self.breakpoints) < 2:
            return 0.0
        dv = np.linalg.norm(np.diff(self.values, axis=0), axis=1)
        return float(np.max(dv / np.diff(self.breakpoints)))

    def to_dict(self) -> dict:
        return {"breakpoints": self.breakpoints.tolist(), "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "CpwlMap":
        return cls(np.asarray(data["breakpoints"], dtype=float), np.asarray(data["values"], dtype=float))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "CpwlMap":
        return cls.from_dict(json.loads(Path(path).read_text()))


def evaluate(f: CpwlMap, z) -> np.ndarray:
    """Evaluate at a scalar (returns shape (d,)) or a 1-D batch (returns (n, d))."""
    zs = np.asarray(z, dtype=float)
    scalar = zs.ndim == 0
    zs = np.atleast_1d(zs)
    bp, vals = f.breakpoints, f.values
    # Segment index k means z in [bp[k], bp[k+1]).
    k = np.clip(np.searchsorted(bp, zs, side="right") - 1, 0, len(bp) - 2)
    left, right = bp[k], bp[k + 1]
    t = np.clip((zs - left) / (right - left), 0.0, 1.0)[:, None]
    out = (1.0 - t) * vals[k] + t * vals[k + 1]
    # Exact stored values at breakpoints and on the constant tails.
    hit = np.searchsorted(bp, zs)
    exact = (hit < len(bp)) & (bp[np.minimum(hit, len(bp) - 1)] == zs)
    out[exact] = vals[hit[exact]]
    out[zs <= bp[0]] = vals[0]
    out[zs >= bp[-1]] = vals[-1]
    return out[0] if scalar else out


def breakpoint_count(f: CpwlMap) -> int:
    """Interior breakpoint count N (the two boundary breakpoints are excluded)."""
    return len(f.breakpoints) - 2


def affine_reparam(f: CpwlMap) -> CpwlMap:
    """Map the breakpoint range onto [0, 1], keeping the values.

    ``affine_reparam(f)((z - z_0) / (z_{N+1} - z_0)) == f(z)``.
    """
    z0, z1 = f.breakpoints[0], f.breakpoints[-1]
    bp = (f.breakpoints - z0) / (z1 - z0)
    bp[0], bp[-1] = 0.0, 1.0
    return CpwlMap(bp, f.values)


def refine(f: CpwlMap, n_interior: int) -> CpwlMap:
    """Insert redundant breakpoints until there are ``n_interior`` interior ones.

    Each new breakpoint bisects the currently longest segment (ties to the
    left) and takes the interpolated value, so the function is unchanged.
    """
    extra = n_interior - breakpoint_count(f)
    if extra < 0:
        raise ValueError("cannot refine to fewer breakpoints")
    if extra == 0:
        return f
    bp = f.breakpoints
    vals = f.values
    # Max-heap keyed on segment length; each segment is split into k equal parts.
    heap = [(-(bp[i + 1] - bp[i]), i, 1) for i in range(len(bp) - 1)]
    heapq.heapify(heap)
    pieces = np.ones(len(bp) - 1, dtype=int)
    for _ in range(extra):
        _, i, k = heapq.heappop(heap)
        pieces[i] = k + 1
        heapq.heappush(heap, (-(bp[i + 1] - bp[i]) / (k + 1), i, k + 1))
    new_bp = [bp[:1]]
    new_vals = [vals[:1]]
    for i, k in enumerate(pieces):
        t = np.arange(1, k + 1) / k
        seg = bp[i] + t * (bp[i + 1] - bp[i])
        seg[-1] = bp[i + 1]
        sv = (1.0 - t)[:, None] * vals[i] + t[:, None] * vals[i + 1]
        sv[-1] = vals[i + 1]
        new_bp.append(seg)
        new_vals.append(sv)
    out_bp = np.concatenate(new_bp)
    if np.any(np.diff(out_bp) <= 0):
        raise ValueError("segments too short to refine in floating point")
    return CpwlMap(out_bp, np.concatenate(new_vals))
