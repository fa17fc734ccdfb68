"""Wasserstein distances and f-divergences between discrete measures."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DimensionMismatch, NotSingular, SizeLimit
from .measures import DiscreteMeasure, as_points, empirical_measure

MAX_ATOMS = 5000

_ot = None


def _pot():
    # POT probes every installed array backend on import; only numpy is used.
    global _ot
    if _ot is None:
        for name in ("TENSORFLOW", "PYTORCH", "JAX", "CUPY"):
            os.environ.setdefault(f"POT_BACKEND_DISABLE_{name}", "1")
        import ot

        _ot = ot
    return _ot


# ---------------------------------------------------------------------------
# Optimal transport
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TransportPlan:
    """Optimal coupling between ``rows`` and ``cols`` with LP dual potentials."""

    rows: DiscreteMeasure
    cols: DiscreteMeasure
    plan: np.ndarray
    cost: float
    p: float
    u: np.ndarray
    v: np.ndarray
    dual_gap: float

    @property
    def value(self) -> float:
        return self.cost ** (1.0 / self.p)

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.plan))

    def marginal_error(self) -> float:
        return float(
            max(
                np.max(np.abs(self.plan.sum(axis=1) - self.rows.weights)),
                np.max(np.abs(self.plan.sum(axis=0) - self.cols.weights)),
            )
        )


def cost_matrix(x: np.ndarray, y: np.ndarray, p: float) -> np.ndarray:
    c = cdist(x, y)
    return c if p == 1 else c**p


def wasserstein_discrete(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float = 1.0) -> tuple[float, TransportPlan]:
    """Exact W_p through the transportation LP (network simplex)."""
    if mu.dim != nu.dim:
        raise DimensionMismatch(f"measures live in R^{mu.dim} and R^{nu.dim}")
    if p < 1:
        raise ValueError("p must be >= 1")
    if mu.size > MAX_ATOMS or nu.size > MAX_ATOMS:
        raise SizeLimit(
            f"{mu.size} x {nu.size} atoms exceeds the exact-solver limit of {MAX_ATOMS}; "
            "use wasserstein_mc instead"
        )
    return _solve(mu, nu, p)


def _solve(mu, nu, p):
    ot = _pot()
    a = np.array(mu.weights, dtype=float)
    b = np.array(nu.weights, dtype=float)
    b *= a.sum() / b.sum()
    M = cost_matrix(mu.atoms, nu.atoms, p)
    G, log = ot.emd(a, b, M, numItermax=10_000_000, log=True)
    if log["result_code"] != 1:
        raise RuntimeError(f"network simplex did not converge: {log['warning']}")
    cost = max(float(np.sum(G * M)), 0.0)
    u, v = log["u"], log["v"]
    dual = float(u @ a + v @ b)
    gap = abs(cost - dual) / max(cost, 1.0)
    return cost ** (1.0 / p), TransportPlan(mu, nu, G, cost, p, u, v, gap)


def wasserstein_1d(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float = 1.0) -> float:
    """Closed-form W_p on the line: integrate |F^-1 - G^-1|^p over merged quantile levels."""
    if mu.dim != 1 or nu.dim != 1:
        raise DimensionMismatch("wasserstein_1d needs measures on R")
    xa, wa = _sorted(mu)
    xb, wb = _sorted(nu)
    ca = np.cumsum(wa)
    cb = np.cumsum(wb)
    ca[-1] = cb[-1] = 1.0
    levels = np.union1d(ca, cb)
    du = np.diff(np.concatenate([[0.0], levels]))
    # Quantile on (level_{k-1}, level_k] is the first atom whose cumulative weight reaches level_k.
    ia = np.minimum(np.searchsorted(ca, levels, side="left"), len(xa) - 1)
    ib = np.minimum(np.searchsorted(cb, levels, side="left"), len(xb) - 1)
    diff = np.abs(xa[ia] - xb[ib])
    cost = float(np.sum(du * (diff if p == 1 else diff**p)))
    return cost ** (1.0 / p)


def _sorted(m: DiscreteMeasure):
    order = np.argsort(m.atoms[:, 0], kind="stable")
    w = m.weights[order]
    return m.atoms[order, 0], w / w.sum()


def wasserstein_samples(x, y, p: float = 1.0) -> float:
    """Exact W_p between two empirical point clouds (duplicates merged first)."""
    mu = empirical_measure(as_points(x))
    nu = empirical_measure(as_points(y))
    if mu.dim == 1:
        return wasserstein_1d(mu, nu, p)
    return wasserstein_discrete(mu, nu, p)[0]


def rep_seeds(seed: int, rep: int) -> tuple[int, int]:
    """Independent integer seeds for the two sides of replicate ``rep``."""
    ss = np.random.SeedSequence([int(seed), int(rep)])
    a, b = ss.generate_state(2, dtype=np.uint32)
    return int(a), int(b)


def _draw(sampler, n, seed, stratified):
    if stratified and hasattr(sampler, "stratified_sample"):
        return sampler.stratified_sample(n, seed)
    return sampler.sample(n, seed)


def wasserstein_mc(sampler_a, sampler_b, p: float = 1.0, batch: int = 1000, reps: int = 10,
                   seed: int = 0, stratified: bool = False) -> tuple[float, float]:
    """Mean and 95% half-width of exact W_p between independent equal-size batches.

    Biased upward: two empirical batches are never closer than the laws
    they come from, on average.  With ``stratified`` each side uses its
    sampler's ``stratified_sample`` when it has one, which shrinks that bias
    for laws with a natural stratification.
    """
    if batch > 2000:
        raise SizeLimit("batch must be <= 2000")
    if reps < 3:
        raise ValueError("need at least 3 replicates")
    vals = []
    for r in range(reps):
        sa, sb = rep_seeds(seed, r)
        vals.append(wasserstein_samples(_draw(sampler_a, batch, sa, stratified), _draw(sampler_b, batch, sb, stratified), p))
    vals = np.array(vals)
    return float(vals.mean()), float(1.96 * vals.std(ddof=1) / math.sqrt(reps))


@dataclass(frozen=True)
class KRCertificate:
    """Kantorovich-Rubinstein check of an optimal W_1 plan.

    ``psi_mu``/``psi_nu`` are the c-transform potential at the atoms of
    each measure; ``lipschitz_excess`` is the worst violation of
    ``|psi(a) - psi(b)| <= |a - b|`` over all atom pairs.
    """

    gap: float
    lipschitz_excess: float
    psi_mu: np.ndarray
    psi_nu: np.ndarray
    value: float


def kr_dual_check(mu: DiscreteMeasure, nu: DiscreteMeasure, plan: TransportPlan) -> KRCertificate:
    """Rebuild a 1-Lipschitz potential from the LP duals and measure the duality gap.

    ``psi(z) = min_j |z - y_j| - v_j`` is 1-Lipschitz by construction and
    ``int psi dmu - int psi dnu`` should equal W_1; the gap is relative to
    ``max(W_1, 1)``.
    """
    if plan.p != 1:
        raise ValueError("Kantorovich-Rubinstein duality needs p = 1")
    v = plan.v
    psi_mu = np.min(cdist(mu.atoms, nu.atoms) - v[None, :], axis=1)
    psi_nu = np.min(cdist(nu.atoms, nu.atoms) - v[None, :], axis=1)
    pts = np.vstack([mu.atoms, nu.atoms])
    psi = np.concatenate([psi_mu, psi_nu])
    excess = float(np.max(np.abs(psi[:, None] - psi[None, :]) - cdist(pts, pts)))
    dual = float(psi_mu @ mu.weights - psi_nu @ nu.weights)
    gap = abs(dual - plan.cost) / max(plan.cost, 1.0)
    return KRCertificate(gap, max(excess, 0.0), psi_mu, psi_nu, plan.cost)


# ---------------------------------------------------------------------------
# f-divergences
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DivergenceGenerator:
    """Convex f with f(1) = 0, plus its limits f(0) and f*(0) = lim f(t)/t."""

    name: str
    f: Callable[[np.ndarray], np.ndarray]
    f0: float
    fstar0: float
    strictly_convex: bool = True

    def __call__(self, t):
        return self.f(np.asarray(t, dtype=float))


def _kl(t):
    return t * np.log(t)


def _reverse_kl(t):
    return -np.log(t)


def _js(t):
    return 0.5 * (t * np.log(2.0 * t / (t + 1.0)) + np.log(2.0 / (t + 1.0)))


def _tv(t):
    return 0.5 * np.abs(t - 1.0)


def _chi2(t):
    return (t - 1.0) ** 2


_HALF_LN2 = 0.5 * math.log(2.0)

GENERATORS = {
    "kl": DivergenceGenerator("kl", _kl, 0.0, math.inf),
    "reverse_kl": DivergenceGenerator("reverse_kl", _reverse_kl, math.inf, 0.0),
    "js": DivergenceGenerator("js", _js, _HALF_LN2, _HALF_LN2),
    "tv": DivergenceGenerator("tv", _tv, 0.5, 0.5, strictly_convex=False),
    "chi2": DivergenceGenerator("chi2", _chi2, 1.0, math.inf),
}


def generator(name: str) -> DivergenceGenerator:
    try:
        return GENERATORS[name]
    except KeyError:
        raise ValueError(f"unknown generator {name!r}; choose from {sorted(GENERATORS)}") from None


def _shared(mu: DiscreteMeasure, nu: DiscreteMeasure):
    """Index pairs (i, j) with mu.atoms[i] == nu.atoms[j] exactly."""
    index = {tuple(a): j for j, a in enumerate(nu.atoms.tolist())}
    pairs = [(i, index[tuple(a)]) for i, a in enumerate(mu.atoms.tolist()) if tuple(a) in index]
    if not pairs:
        return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
    i, j = np.array(pairs).T
    return i, j


def _unmatched_mass(m: DiscreteMeasure, matched: np.ndarray) -> float:
    # Probability measures: nothing matched means exactly mass one escapes.
    if len(matched) == 0:
        return 1.0
    rest = np.ones(m.size, dtype=bool)
    rest[matched] = False
    return float(m.weights[rest].sum())


def f_divergence(mu: DiscreteMeasure, nu: DiscreteMeasure, g: DivergenceGenerator | str) -> float:
    """D_f(mu || nu) for discrete measures, possibly ``math.inf``.

    Atoms carried by nu alone contribute f(0) times their nu-mass; atoms of
    mu alone contribute f*(0) times their mu-mass.
    """
    if isinstance(g, str):
        g = generator(g)
    if mu.dim != nu.dim:
        raise DimensionMismatch(f"measures live in R^{mu.dim} and R^{nu.dim}")
    i, j = _shared(mu, nu)
    total = 0.0
    if len(i):
        p, q = mu.weights[i], nu.weights[j]
        total = float(np.sum(g(p / q) * q))
    for mass, limit in ((_unmatched_mass(nu, j), g.f0), (_unmatched_mass(mu, i), g.fstar0)):
        if mass > 0:
            total += math.inf if math.isinf(limit) else limit * mass
    return max(total, 0.0)


def supports_disjoint(mu: DiscreteMeasure, nu: DiscreteMeasure) -> bool:
    i, _ = _shared(mu, nu)
    return len(i) == 0


def singularity_gap(mu: DiscreteMeasure, nu: DiscreteMeasure, g: DivergenceGenerator | str) -> float:
    """f(0) + f*(0), the divergence of any two mutually singular measures."""
    if isinstance(g, str):
        g = generator(g)
    if not g.strictly_convex:
        raise ValueError(f"generator {g.name!r} is not strictly convex")
    if not supports_disjoint(mu, nu):
        raise NotSingular("the measures share atoms")
    value = g.f0 + g.fstar0
    direct = f_divergence(mu, nu, g)
    assert direct == value, (direct, value)
    return value
