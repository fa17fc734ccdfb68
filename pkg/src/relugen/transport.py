"""Transport maps from a 1-D source onto a discrete target.

Ordered atoms x_0..x_m are visited left to right along the source line: the
map is constant x_i on a plateau and ramps linearly from x_{i-1} to x_i on
an interval of source mass ``eps^p / (m |x_i - x_{i-1}|^p)``.  Moving only
the ramp mass, over distance at most |x_i - x_{i-1}|, costs at most eps^p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .compiler import NetworkBudget, ReluNetwork, budget_max_breakpoints, capacity, compile_deep, eval_network
from .cpwl import CpwlMap, breakpoint_count, evaluate
from .errors import CapacityExceeded, DimensionMismatch, InfeasibleEpsilon, QuantileResolution
from .measures import DiscreteMeasure, SourceDistribution, make_discrete
from .metrics import rep_seeds, wasserstein_1d, _solve


def order_atoms(mu: DiscreteMeasure) -> np.ndarray:
    """Greedy nearest-neighbour path from the lexicographically smallest atom.

    Ties in distance go to the lexicographically smaller atom.
    """
    X = mu.atoms
    n = len(X)
    lex = np.lexsort(X.T[::-1])  # rank order by first coordinate, then second, ...
    rank = np.empty(n, dtype=np.int64)
    rank[lex] = np.arange(n)
    order = [int(lex[0])]
    left = np.ones(n, dtype=bool)
    left[order[0]] = False
    for _ in range(n - 1):
        cand = np.flatnonzero(left)
        dist = np.linalg.norm(X[cand] - X[order[-1]], axis=1)
        best = cand[dist == dist.min()]
        nxt = int(best[np.argmin(rank[best])])
        order.append(nxt)
        left[nxt] = False
    return np.array(order, dtype=np.int64)


def ordered_steps(atoms: np.ndarray) -> np.ndarray:
    """|x_i - x_{i-1}| for i = 1..m."""
    return np.linalg.norm(np.diff(atoms, axis=0), axis=1)


def epsilon_sup(atoms: np.ndarray, weights: np.ndarray, p: float) -> tuple[float, int]:
    """Supremum of feasible eps, ``min_i (m p_i)^(1/p) |x_i - x_{i-1}|``, and its argmin i."""
    m = len(atoms) - 1
    if m == 0:
        return math.inf, 0
    bound = (m * weights[1:]) ** (1.0 / p) * ordered_steps(atoms)
    i = int(np.argmin(bound))
    return float(bound[i]), i + 1


@dataclass(frozen=True)
class TransportPlanSpec:
    """Ordered target, source law, accuracy eps and exponent p."""

    target: DiscreteMeasure
    source: SourceDistribution
    epsilon: float
    p: float
    ordering: np.ndarray

    @property
    def m(self) -> int:
        return self.target.size - 1

    def ramp_masses(self) -> np.ndarray:
        """Source mass of each ramp, r_i = eps^p / (m |x_i - x_{i-1}|^p)."""
        if self.m == 0:
            return np.zeros(0)
        steps = ordered_steps(self.target.atoms)
        return self.epsilon**self.p / (self.m * steps**self.p)

    def plateau_masses(self) -> np.ndarray:
        """Prescribed push-forward mass of each atom: p_0, then p_i - r_i."""
        out = np.array(self.target.weights, dtype=float)
        out[1:] -= self.ramp_masses()
        return out


def plan_spec(target: DiscreteMeasure, source: SourceDistribution, epsilon: float | None = None,
              p: float = 1.0) -> TransportPlanSpec:
    """Order the atoms, pick eps (half the feasibility supremum by default) and validate."""
    if p < 1:
        raise ValueError("p must be >= 1")
    order = order_atoms(target)
    ordered = DiscreteMeasure(target.atoms[order], target.weights[order])
    sup, idx = epsilon_sup(ordered.atoms, ordered.weights, p)
    if epsilon is None:
        epsilon = 0.5 * sup if math.isfinite(sup) else 1.0
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if ordered.size > 1:
        m = ordered.size - 1
        bound = (m * ordered.weights[1:]) ** (1.0 / p) * ordered_steps(ordered.atoms)
        bad = np.flatnonzero(epsilon >= bound)
        if len(bad):
            raise InfeasibleEpsilon(int(bad[0]) + 1, sup, epsilon)
    return TransportPlanSpec(ordered, source, float(epsilon), float(p), order)


def cumulative_levels(spec: TransportPlanSpec) -> np.ndarray:
    """Source CDF levels u_{1/2}, u_1, u_{3/2}, ..., u_m of the 2m breakpoints."""
    w = spec.target.weights
    starts = np.cumsum(w)[:-1]  # u_{i-1/2} = p_0 + ... + p_{i-1}
    levels = np.empty(2 * spec.m)
    levels[0::2] = starts
    levels[1::2] = starts + spec.ramp_masses()
    return levels


def synthesize_cpwl(spec: TransportPlanSpec) -> CpwlMap:
    """Plateau/ramp map with 2m breakpoints at source quantiles."""
    x = spec.target.atoms
    if spec.m == 0:
        return CpwlMap(np.array([0.0, 1.0]), np.vstack([x[0], x[0]]))
    levels = cumulative_levels(spec)
    if np.any(levels <= 0) or np.any(levels >= 1) or np.any(np.diff(levels) <= 0):
        raise QuantileResolution("ramp masses fall below floating-point resolution of the cumulative weights")
    z = spec.source.quantile(levels)
    if np.any(np.diff(z) <= 0):
        raise QuantileResolution(
            f"eps={spec.epsilon:g} makes a ramp narrower than the source quantile resolution"
        )
    values = np.repeat(x, 2, axis=0)[1:-1]  # x_0, x_1, x_1, ..., x_{m-1}, x_m
    return CpwlMap(z, values)


def plateau_mass_error(spec: TransportPlanSpec, f: CpwlMap) -> float:
    """Max deviation of the source-CDF plateau masses from the prescribed ones."""
    if spec.m == 0:
        return 0.0
    F = spec.source.cdf(f.breakpoints)
    # Plateau 0 is (-inf, z_{1/2}); plateau i is (z_i, z_{i+1/2}); plateau m is (z_m, inf).
    masses = np.concatenate([[F[0]], F[2::2] - F[1:-1:2], [1.0 - F[-1]]])
    return float(np.max(np.abs(masses - spec.plateau_masses())))


def budget_for(n_atoms: int, d: int, width: int | None = None) -> NetworkBudget:
    """Smallest-depth budget of the given width (default 7d+1) holding n_atoms."""
    W = 7 * d + 1 if width is None else int(width)
    need = max(2 * n_atoms - 4, 0)  # interior breakpoints of the plateau/ramp map
    per = budget_max_breakpoints(NetworkBudget(W, 2, d))
    return NetworkBudget(W, 2 * max(1, math.ceil(need / per)), d)


def synthesize_network(target: DiscreteMeasure, source: SourceDistribution, epsilon: float | None,
                       p: float, budget: NetworkBudget) -> tuple[ReluNetwork, TransportPlanSpec, CpwlMap]:
    """Compile the plateau/ramp map into a network within ``budget``."""
    if target.dim != budget.d:
        raise DimensionMismatch(f"target lives in R^{target.dim} but the budget has d={budget.d}")
    n_max = capacity(budget)
    if target.size > n_max:
        raise CapacityExceeded(target.size, n_max)
    spec = plan_spec(target, source, epsilon, p)
    f = synthesize_cpwl(spec)
    return compile_deep(f, budget), spec, f


# ---------------------------------------------------------------------------
# Push-forward sampling and certificates
# ---------------------------------------------------------------------------


def apply_map(phi, z: np.ndarray) -> np.ndarray:
    if isinstance(phi, CpwlMap):
        return evaluate(phi, z)
    if isinstance(phi, ReluNetwork):
        return eval_network(phi, z)
    return np.asarray(phi(z), dtype=float)


def pushforward_sample(phi, source: SourceDistribution, n: int, seed, stratified: bool = False) -> np.ndarray:
    """phi(Z_i) for Z_i drawn from the source; shape (n, d)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    z = source.stratified_sample(n, seed) if stratified else source.sample(n, seed)
    return apply_map(phi, z)


@dataclass(frozen=True)
class PushforwardSampler:
    """Sampler interface (``sample(n, seed)``) for phi#source."""

    phi: object
    source: SourceDistribution
    stratified: bool = False

    def sample(self, n: int, seed) -> np.ndarray:
        return pushforward_sample(self.phi, self.source, n, seed, self.stratified)

    def stratified_sample(self, n: int, seed) -> np.ndarray:
        return pushforward_sample(self.phi, self.source, n, seed, True)


def snap_to_atoms(points: np.ndarray, atoms: np.ndarray, tol: float) -> np.ndarray:
    """Replace points within ``tol`` of an atom by that atom exactly."""
    dist, idx = cKDTree(atoms).query(points)
    out = np.array(points, dtype=float)
    hit = dist <= tol
    out[hit] = atoms[idx[hit]]
    return out


@dataclass(frozen=True)
class TransportCertificate:
    epsilon: float
    p: float
    n_atoms: int
    breakpoints: int
    mass_check_max_abs_err: float
    ramp_mass: float
    mc_estimate: float
    mc_ci: float
    mc_samples: int

    def passed(self, mass_tol: float = 1e-10) -> bool:
        return self.mass_check_max_abs_err <= mass_tol and self.mc_estimate <= self.epsilon + 3 * self.mc_ci

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "p": self.p,
            "n_atoms": self.n_atoms,
            "breakpoints": self.breakpoints,
            "mass_check_max_abs_err": self.mass_check_max_abs_err,
            "ramp_mass": self.ramp_mass,
            "mc_estimate": self.mc_estimate,
            "mc_ci": self.mc_ci,
            "mc_samples": self.mc_samples,
        }


def piecewise_stratified_sample(f: CpwlMap, source: SourceDistribution, n: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """Source draws stratified by the pieces of ``f``, with exact stratum weights.

    The source line is cut at the breakpoints of ``f``; each piece gets
    about ``n`` times its source mass of stratified uniform-quantile draws
    (at least one), and every draw carries weight ``mass / count`` of its
    piece.  Returns ``(z, weights)``.
    """
    edges = np.concatenate([[0.0], source.cdf(f.breakpoints), [1.0]])
    mass = np.maximum(np.diff(edges), 0.0)
    keep = mass > 0
    lo, mass = edges[:-1][keep], mass[keep]
    counts = np.maximum(np.floor(n * mass).astype(np.int64), 1)
    rng = np.random.default_rng(seed)
    piece = np.repeat(np.arange(len(mass)), counts)
    offset = np.arange(len(piece)) - np.repeat(np.cumsum(counts) - counts, counts)
    u = lo[piece] + (offset + rng.random(len(piece))) / counts[piece] * mass[piece]
    u = np.clip(u, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
    return source.quantile(u), (mass / counts)[piece]


def certify(spec: TransportPlanSpec, f: CpwlMap, phi=None, n_samples: int = 100_000, reps: int = 5,
            seed: int = 0) -> TransportCertificate:
    """Exact mass identities plus a Monte-Carlo estimate of W_p(target, phi#source).

    ``phi`` defaults to ``f``; pass the compiled network to check it instead.
    Each of ``reps`` replicates evaluates ``phi`` on ``n_samples / reps``
    source draws stratified by the pieces of ``f`` (see
    :func:`piecewise_stratified_sample`), snaps outputs within round-off of
    an atom onto it, and solves the exact transport problem against the
    target.  Plain i.i.d. draws misplace about ``1/N`` of mass per atom,
    which swamps small eps; stratifying by piece removes that error.
    """
    phi = f if phi is None else phi
    mass_err = plateau_mass_error(spec, f)
    target = spec.target
    scale = 1.0 + float(np.max(np.abs(target.atoms)))
    per = max(n_samples // reps, 1)
    vals = []
    for r in range(reps):
        _, s = rep_seeds(seed, r)
        z, w = piecewise_stratified_sample(f, spec.source, per, s)
        y = snap_to_atoms(apply_map(phi, z), target.atoms, 1e-9 * scale)
        emp = make_discrete(y, w)
        if target.dim == 1:
            vals.append(wasserstein_1d(target, emp, spec.p))
        else:
            vals.append(_solve(target, emp, spec.p)[0])
    vals = np.array(vals)
    ci = float(1.96 * vals.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    return TransportCertificate(
        spec.epsilon,
        spec.p,
        target.size,
        breakpoint_count(f) + 2,
        mass_err,
        float(spec.ramp_masses().sum()),
        float(vals.mean()),
        ci,
        per * reps,
    )
