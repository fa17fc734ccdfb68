"""Probability measures: discrete measures, 1-D source laws and target samplers.

All samplers take an explicit seed per draw and are otherwise immutable, so
identical ``(sampler, n, seed)`` always reproduces the same array.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import erfc

from .errors import DimensionMismatch, DomainError, EmptyMeasure, ParseError, RaggedRows

# ---------------------------------------------------------------------------
# Discrete measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weighted atoms in R^d. Build through :func:`make_discrete`."""

    atoms: np.ndarray  # (n, d)
    weights: np.ndarray  # (n,)

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    @property
    def size(self) -> int:
        return self.atoms.shape[0]

    def __len__(self):
        return self.size

    def __eq__(self, other):
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return (
            self.atoms.shape == other.atoms.shape
            and np.array_equal(self.atoms, other.atoms)
            and np.array_equal(self.weights, other.weights)
        )

    def __hash__(self):
        return hash((self.atoms.tobytes(), self.weights.tobytes()))

    def same_distribution(self, other: "DiscreteMeasure", tol: float = 1e-12) -> bool:
        """Equality as measures: ignores atom order, weights compared to ``tol``."""
        if self.dim != other.dim or self.size != other.size:
            return False
        lookup = {tuple(a): w for a, w in zip(self.atoms.tolist(), self.weights)}
        for a, w in zip(other.atoms.tolist(), other.weights):
            if tuple(a) not in lookup or abs(lookup[tuple(a)] - w) > tol:
                return False
        return True

    def to_dict(self) -> dict:
        return {"type": "discrete", "atoms": self.atoms.tolist(), "weights": self.weights.tolist()}


def make_discrete(atoms, weights=None) -> DiscreteMeasure:
    """Canonicalize atoms and nonnegative weights into a probability measure.

    Zero weights are dropped, exactly equal atoms are merged (first occurrence
    keeps its position) and weights are rescaled to sum to one.  Uniform
    weights are used when ``weights`` is None.
    """
    if isinstance(atoms, np.ndarray) and atoms.ndim in (1, 2):
        pts = atoms.astype(float).reshape(atoms.shape[0], -1) if atoms.ndim == 2 else atoms.astype(float)[:, None]
        if pts.shape[0] == 0:
            raise EmptyMeasure("no atoms given")
        if pts.shape[1] == 0:
            raise DimensionMismatch("atoms must all be vectors of the same length >= 1")
    else:
        rows = [np.atleast_1d(np.asarray(a, dtype=float)) for a in atoms]
        if not rows:
            raise EmptyMeasure("no atoms given")
        d = rows[0].shape[0]
        if d < 1 or any(r.ndim != 1 or r.shape[0] != d for r in rows):
            raise DimensionMismatch("atoms must all be vectors of the same length >= 1")
        pts = np.vstack(rows)
    if not np.all(np.isfinite(pts)):
        raise ValueError("atoms must be finite")
    if weights is None:
        w = np.full(pts.shape[0], 1.0 / pts.shape[0])
    else:
        w = np.asarray(weights, dtype=float).ravel()
    if w.shape[0] != pts.shape[0]:
        raise DimensionMismatch(f"{pts.shape[0]} atoms but {w.shape[0]} weights")
    if np.any(~np.isfinite(w)) or np.any(w < 0):
        raise ValueError("weights must be finite and nonnegative")

    live = w != 0.0
    if not np.any(live):
        raise EmptyMeasure("all weights are zero")
    pts, w = pts[live], w[live]
    # Merge equal atoms; the merged atom sits where its first copy was.
    _, first, inverse = np.unique(pts, axis=0, return_index=True, return_inverse=True)
    order = np.argsort(first)
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    out_w = np.bincount(rank[inverse.ravel()], weights=w, minlength=order.size)
    out_pts = pts[first[order]]
    total = out_w.sum()
    # Already-normalized input is left untouched so the operation is idempotent.
    if abs(total - 1.0) > 1e-12:
        out_w = out_w / total
    if np.any(out_w == 0.0):
        # Subnormal weights can underflow when rescaled.
        live = out_w > 0.0
        out_pts, out_w = out_pts[live], out_w[live]
    out_pts = np.ascontiguousarray(out_pts)
    out_pts.setflags(write=False)
    out_w.setflags(write=False)
    return DiscreteMeasure(out_pts, out_w)


def dirac(point) -> DiscreteMeasure:
    return make_discrete([point], [1.0])


def empirical_measure(samples) -> DiscreteMeasure:
    """Uniform weights on ``samples``; repeated points are merged."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    return make_discrete(samples, np.full(len(samples), 1.0 / max(len(samples), 1)))


# ---------------------------------------------------------------------------
# One-dimensional source distributions
# ---------------------------------------------------------------------------

# Rational approximation of the standard normal quantile (P. J. Acklam),
# relative error below 1.15e-9 before refinement.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _norm_cdf(x):
    return 0.5 * erfc(-np.asarray(x, dtype=float) / math.sqrt(2.0))


def _norm_ppf(u):
    u = np.asarray(u, dtype=float)
    x = np.empty_like(u)
    lo = u < _P_LOW
    hi = u > 1.0 - _P_LOW
    mid = ~(lo | hi)

    q = u[mid] - 0.5
    r = q * q
    num = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
    den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
    x[mid] = num / den

    for mask, sign, tail in ((lo, 1.0, u[lo]), (hi, -1.0, 1.0 - u[hi])):
        q = np.sqrt(-2.0 * np.log(tail))
        num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        x[mask] = sign * num / den

    # One Halley step against the erfc-based CDF brings the result to
    # working precision; the upper tail is refined on the survival function.
    for _ in range(2):
        upper = x > 0
        e = np.where(upper, (1.0 - u) - 0.5 * erfc(x / math.sqrt(2.0)), _norm_cdf(x) - u)
        t = e * math.sqrt(2.0 * math.pi) * np.exp(0.5 * x * x)
        x = x - t / (1.0 + 0.5 * x * t)
    return x


@dataclass(frozen=True)
class SourceDistribution:
    """An absolutely continuous law on R: ``uniform(a, b)`` or ``gaussian(mean, std)``."""

    family: str
    params: tuple[float, float]

    def __post_init__(self):
        if self.family == "uniform":
            a, b = self.params
            if not b > a:
                raise DomainError("uniform source needs b > a")
        elif self.family == "gaussian":
            if not self.params[1] > 0:
                raise DomainError("gaussian source needs stddev > 0")
        else:
            raise DomainError(f"unknown source family {self.family!r}")

    @classmethod
    def uniform(cls, a=0.0, b=1.0):
        return cls("uniform", (float(a), float(b)))

    @classmethod
    def gaussian(cls, mean=0.0, std=1.0):
        return cls("gaussian", (float(mean), float(std)))

    @classmethod
    def parse(cls, text: str) -> "SourceDistribution":
        """Parse ``"uniform:0,1"`` or ``"gaussian:0,1"``."""
        family, _, rest = text.partition(":")
        try:
            params = tuple(float(v) for v in rest.split(",")) if rest else ()
        except ValueError as exc:
            raise DomainError(f"bad source parameters in {text!r}") from exc
        if not params:
            params = (0.0, 1.0)
        if len(params) != 2:
            raise DomainError(f"source {text!r} needs exactly two parameters")
        return cls(family.strip(), params)

    def __str__(self):
        return f"{self.family}:{self.params[0]!r},{self.params[1]!r}"

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "uniform":
            a, b = self.params
            return np.clip((x - a) / (b - a), 0.0, 1.0)
        m, s = self.params
        return _norm_cdf((x - m) / s)

    def quantile(self, u):
        """Inverse CDF on (0, 1); scalars in, scalars out."""
        arr = np.asarray(u, dtype=float)
        if np.any(~(arr > 0.0) | ~(arr < 1.0)):
            raise DomainError("quantile level must lie strictly inside (0, 1)")
        if self.family == "uniform":
            a, b = self.params
            out = a + arr * (b - a)
        else:
            m, s = self.params
            out = m + s * _norm_ppf(arr)
        return float(out) if np.ndim(u) == 0 else out

    def sample(self, n: int, seed) -> np.ndarray:
        return self._draw(n, np.random.default_rng(seed))

    def _draw(self, n, rng):
        if self.family == "uniform":
            a, b = self.params
            return rng.uniform(a, b, size=n)
        m, s = self.params
        return rng.normal(m, s, size=n)

    def stratified_sample(self, n: int, seed) -> np.ndarray:
        """One draw in each of ``n`` equal-probability strata, in increasing order."""
        rng = np.random.default_rng(seed)
        u = (np.arange(n) + rng.uniform(size=n)) / n
        u = np.clip(u, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
        return np.atleast_1d(self.quantile(u))


def latin_hypercube(n: int, d: int, rng) -> np.ndarray:
    """n points in [0,1)^d, each coordinate hitting every slab [k/n, (k+1)/n) once."""
    u = (np.arange(n)[:, None] + rng.uniform(size=(n, d))) / n
    for j in range(d):
        u[:, j] = u[rng.permutation(n), j]
    return u


# ---------------------------------------------------------------------------
# Target samplers
# ---------------------------------------------------------------------------


class TargetSampler:
    """Seedable stand-in for a target distribution on R^d."""

    dim: int

    def sample(self, n: int, seed) -> np.ndarray:
        return self._draw(int(n), np.random.default_rng(seed))

    def stratified_sample(self, n: int, seed) -> np.ndarray:
        """Variance-reduced draw with the same marginal law per point.

        Falls back to i.i.d. sampling for laws without a stratification.
        """
        rng = np.random.default_rng(seed)
        return self._draw_stratified(int(n), rng)

    def _draw_stratified(self, n, rng) -> np.ndarray:
        return self._draw(n, rng)

    def _draw(self, n, rng) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def to_spec(self) -> dict:  # pragma: no cover - abstract
        raise NotImplementedError


@dataclass(frozen=True)
class UniformCube(TargetSampler):
    dim: int

    def _draw(self, n, rng):
        return rng.uniform(0.0, 1.0, size=(n, self.dim))

    def _draw_stratified(self, n, rng):
        return latin_hypercube(n, self.dim, rng)

    def to_spec(self):
        return {"type": "uniform_cube", "d": self.dim}


@dataclass(frozen=True)
class UniformSphere(TargetSampler):
    """Uniform law on the ``s``-sphere of given radius in the first s+1 coordinates of R^d."""

    s: int
    dim: int
    radius: float = 1.0

    def __post_init__(self):
        if self.s < 1 or self.dim < self.s + 1:
            raise DimensionMismatch("uniform_sphere needs 1 <= s and s + 1 <= d")

    def _draw(self, n, rng):
        g = rng.standard_normal(size=(n, self.s + 1))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        out = np.zeros((n, self.dim))
        out[:, : self.s + 1] = self.radius * g
        return out

    def _draw_stratified(self, n, rng):
        if self.s != 1:
            return self._draw(n, rng)
        # Jittered angles with a random rotation.
        theta = 2.0 * np.pi * ((np.arange(n) + rng.uniform(size=n)) / n + rng.uniform())
        out = np.zeros((n, self.dim))
        out[:, 0] = self.radius * np.cos(theta)
        out[:, 1] = self.radius * np.sin(theta)
        return out[rng.permutation(n)]

    def to_spec(self):
        return {"type": "uniform_sphere", "s": self.s, "d": self.dim, "radius": self.radius}


@dataclass(frozen=True)
class Gaussian(TargetSampler):
    dim: int
    scale: float = 1.0

    def _draw(self, n, rng):
        return self.scale * rng.standard_normal(size=(n, self.dim))

    def _draw_stratified(self, n, rng):
        u = np.clip(latin_hypercube(n, self.dim, rng), 1e-300, np.nextafter(1.0, 0.0))
        return self.scale * _norm_ppf(u)

    def to_spec(self):
        spec = {"type": "gaussian", "d": self.dim}
        if self.scale != 1.0:
            spec["scale"] = self.scale
        return spec


@dataclass(frozen=True)
class DiscreteTarget(TargetSampler):
    measure: DiscreteMeasure

    @property
    def dim(self):
        return self.measure.dim

    def _draw(self, n, rng):
        cum = np.cumsum(self.measure.weights)
        idx = np.searchsorted(cum, rng.uniform(size=n) * cum[-1], side="right")
        return self.measure.atoms[np.minimum(idx, self.measure.size - 1)].copy()

    def to_spec(self):
        return self.measure.to_dict()


@dataclass(frozen=True, eq=False)
class Empirical(TargetSampler):
    """Resamples (with replacement) a fixed point cloud."""

    points: np.ndarray
    path: str | None = None

    @property
    def dim(self):
        return self.points.shape[1]

    def _draw(self, n, rng):
        return self.points[rng.integers(0, len(self.points), size=n)].copy()

    def to_spec(self):
        if self.path is not None:
            return {"type": "empirical", "path": self.path}
        return {"type": "empirical", "points": self.points.tolist()}


@dataclass(frozen=True)
class Mixture(TargetSampler):
    components: tuple
    weights: tuple

    def __post_init__(self):
        if not self.components or len(self.components) != len(self.weights):
            raise DimensionMismatch("mixture needs matching components and weights")
        if len({c.dim for c in self.components}) != 1:
            raise DimensionMismatch("mixture components differ in dimension")
        if any(w < 0 for w in self.weights) or sum(self.weights) <= 0:
            raise ValueError("mixture weights must be nonnegative with positive sum")

    @property
    def dim(self):
        return self.components[0].dim

    def _draw(self, n, rng):
        cum = np.cumsum(self.weights) / sum(self.weights)
        which = np.searchsorted(cum, rng.uniform(size=n), side="right")
        which = np.minimum(which, len(self.components) - 1)
        out = np.empty((n, self.dim))
        for k, comp in enumerate(self.components):
            sel = np.flatnonzero(which == k)
            if sel.size:
                out[sel] = comp._draw(sel.size, rng)
        return out

    def to_spec(self):
        return {
            "type": "mixture",
            "components": [c.to_spec() for c in self.components],
            "weights": list(self.weights),
        }


def sampler_from_spec(spec: dict, base_dir: str | Path | None = None) -> TargetSampler:
    """Build a sampler from its JSON description."""
    kind = spec.get("type")
    if kind == "uniform_cube":
        return UniformCube(int(spec["d"]))
    if kind == "uniform_sphere":
        return UniformSphere(int(spec["s"]), int(spec["d"]), float(spec.get("radius", 1.0)))
    if kind == "gaussian":
        return Gaussian(int(spec["d"]), float(spec.get("scale", 1.0)))
    if kind == "discrete":
        return DiscreteTarget(make_discrete(spec["atoms"], spec.get("weights")))
    if kind == "empirical":
        if "points" in spec:
            pts = np.asarray(spec["points"], dtype=float)
            return Empirical(pts.reshape(len(pts), -1))
        path = Path(spec["path"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        return load_empirical(path)
    if kind == "mixture":
        comps = tuple(sampler_from_spec(c, base_dir) for c in spec["components"])
        return Mixture(comps, tuple(float(w) for w in spec["weights"]))
    raise ValueError(f"unknown target type {kind!r}")


def load_target(path: str | Path) -> TargetSampler:
    path = Path(path)
    with open(path) as fh:
        return sampler_from_spec(json.load(fh), base_dir=path.parent)


# ---------------------------------------------------------------------------
# Moments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentProfile:
    q: float
    m_q: float
    sample_count: int


def estimate_moment(sampler: TargetSampler, q: float, n: int, seed) -> MomentProfile:
    """Monte-Carlo estimate of ``(E|X|^q)^(1/q)`` from ``n`` draws."""
    if not q >= 1:
        raise DomainError("moment order q must be >= 1")
    if n < 1:
        raise DomainError("need at least one sample")
    x = sampler.sample(n, seed)
    norms = np.linalg.norm(x, axis=1)
    return MomentProfile(float(q), float(np.mean(norms**q) ** (1.0 / q)), int(n))


def moment_of_samples(samples: np.ndarray, q: float) -> float:
    norms = np.linalg.norm(np.asarray(samples, dtype=float), axis=1)
    if math.isinf(q):
        return float(norms.max())
    return float(np.mean(norms**q) ** (1.0 / q))


# ---------------------------------------------------------------------------
# CSV / JSON persistence
# ---------------------------------------------------------------------------


def load_points(path: str | Path) -> np.ndarray:
    """Read a CSV file with one point per row."""
    rows: list[list[float]] = []
    width = None
    with open(path, newline="") as fh:
        for r, raw in enumerate(csv.reader(fh), start=1):
            if not raw or all(not c.strip() for c in raw):
                continue
            vals = []
            for c, cell in enumerate(raw, start=1):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise ParseError(f"cannot parse {cell!r} as a number", r, c) from None
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise RaggedRows(f"expected {width} columns, found {len(vals)}", r)
            rows.append(vals)
    if not rows:
        raise EmptyMeasure(f"{path} contains no points")
    return np.array(rows, dtype=float)


def save_points(path: str | Path, points: np.ndarray) -> None:
    points = np.asarray(points, dtype=float)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in points.reshape(len(points), -1):
            writer.writerow([repr(float(v)) for v in row])


def load_empirical(path: str | Path) -> Empirical:
    return Empirical(load_points(path), path=str(path))


def save_measure(path: str | Path, measure: DiscreteMeasure) -> None:
    with open(path, "w") as fh:
        json.dump(measure.to_dict(), fh)


def load_measure(path: str | Path) -> DiscreteMeasure:
    with open(path) as fh:
        spec = json.load(fh)
    if spec.get("type", "discrete") != "discrete":
        raise ValueError(f"{path} does not hold a discrete measure")
    return make_discrete(spec["atoms"], spec["weights"])


def as_points(x: Sequence) -> np.ndarray:
    """Coerce a sample array to shape (n, d)."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    return arr
