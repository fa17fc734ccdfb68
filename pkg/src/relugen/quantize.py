"""Discrete approximation of sampled measures by ball covers.

Two quantizers are provided: a single robust cover with the uncovered mass
sent to the origin, and a dyadic-shell construction that spends the atom
budget shell by shell to cope with heavy tails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyMeasure, InfeasibleBudget
from .measures import DiscreteMeasure, as_points, make_discrete

_REL_WIDTH = 1e-3


@dataclass(frozen=True)
class CoveringResult:
    """Greedy cover of a sample set.

    ``assignment[i]`` is the index of the center whose ball first covered
    sample i, or -1 if it was left uncovered.  ``center_index`` gives the
    sample index of each center.
    """

    centers: np.ndarray
    radius: float
    covered_mass: float
    assignment: np.ndarray
    center_index: np.ndarray

    @property
    def n_centers(self) -> int:
        return len(self.center_index)

    def cell_masses(self) -> np.ndarray:
        n = len(self.assignment)
        return np.bincount(self.assignment[self.assignment >= 0], minlength=self.n_centers) / n


def _required(n_samples: int, delta: float) -> int:
    # Smallest count c with c / n_samples >= 1 - delta.
    c = math.ceil(n_samples * (1.0 - delta) - 1e-9)
    return min(max(c, 0), n_samples)


def _greedy(X: np.ndarray, tree: cKDTree, r: float, need: int, max_centers: int | None):
    """Greedy cover until ``need`` samples are covered.

    Returns (center_index, assignment) or None once more than
    ``max_centers`` centers would be needed.
    """
    n = len(X)
    counts = np.asarray(tree.query_ball_point(X, r, return_length=True), dtype=np.int64)
    uncovered = np.ones(n, dtype=bool)
    assignment = np.full(n, -1, dtype=np.int64)
    centers: list[int] = []
    covered = 0
    while covered < need:
        if max_centers is not None and len(centers) >= max_centers:
            return None
        c = int(np.argmax(counts))
        ball = np.asarray(tree.query_ball_point(X[c], r), dtype=np.int64)
        new = ball[uncovered[ball]]
        assignment[new] = len(centers)
        uncovered[new] = False
        covered += len(new)
        centers.append(c)
        # Only samples within 2r of the new center can lose uncovered neighbours.
        near = np.asarray(tree.query_ball_point(X[c], 2.0 * r), dtype=np.int64)
        if len(new) == 1:
            hit = np.linalg.norm(X[near] - X[new[0]], axis=1) <= r
            counts[near[hit]] -= 1
        else:
            sub = cKDTree(X[new])
            counts[near] -= np.asarray(sub.query_ball_point(X[near], r, return_length=True))
    return np.array(centers, dtype=np.int64), assignment


def _finish(X, r, centers, assignment) -> CoveringResult:
    covered = float(np.count_nonzero(assignment >= 0)) / len(X)
    pts = X[centers].copy()
    return CoveringResult(pts, float(r), covered, assignment, centers)


def robust_cover(samples, eps: float, delta: float = 0.0, *, tree: cKDTree | None = None) -> CoveringResult:
    """Greedy cover by closed eps-balls centred at samples, stopping at mass >= 1 - delta.

    Each step picks the sample whose ball contains the most uncovered
    samples, lowest index on ties.
    """
    X = as_points(samples)
    if len(X) == 0:
        raise EmptyMeasure("cannot cover an empty sample set")
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not 0.0 <= delta < 1.0:
        raise ValueError("delta must lie in [0, 1)")
    tree = tree if tree is not None else cKDTree(X)
    centers, assignment = _greedy(X, tree, eps, _required(len(X), delta), None)
    return _finish(X, eps, centers, assignment)


def greedy_cover(samples, eps: float, *, tree: cKDTree | None = None) -> CoveringResult:
    """Cover every sample (covered_mass == 1)."""
    return robust_cover(samples, eps, 0.0, tree=tree)


def _radius_bracket(X: np.ndarray, tree: cKDTree) -> tuple[float, float]:
    dist, _ = tree.query(X, k=2)
    nn = dist[:, 1]
    nn = nn[nn > 0]
    # Slightly above the bounding-box diagonal so one ball surely covers all
    # despite round-off in the tree's distances.
    hi = float(np.linalg.norm(X.max(axis=0) - X.min(axis=0))) * (1.0 + 1e-12)
    lo = float(nn.min()) / 2.0 if len(nn) else hi
    return lo, hi


def _search_radius(X, tree, budget: int, delta_of) -> CoveringResult:
    """Smallest radius (to relative width 1e-3) whose cover uses <= budget centers.

    ``delta_of(r)`` gives the allowed uncovered mass at radius r.
    """
    r_min, r_max = _radius_bracket(X, tree)

    def attempt(r):
        return _greedy(X, tree, r, _required(len(X), delta_of(r)), budget)

    # Bracket by doubling from a volume-based guess; wide radii are the
    # expensive ones, so avoid starting at the diameter.
    guess = min(max(r_max * budget ** (-1.0 / X.shape[1]), r_min), r_max)
    trial = attempt(guess)
    if trial is not None:
        hi, best = guess, trial
        lo = hi / 2.0
        while lo > r_min:
            trial = attempt(lo)
            if trial is None:
                break
            hi, best = lo, trial
            lo = hi / 2.0
        else:
            trial = attempt(r_min)
            if trial is not None:
                return _finish(X, r_min, *trial)
            lo = r_min
    else:
        lo, hi, best = guess, None, None
        while best is None:
            hi = min(lo * 2.0, r_max)
            best = attempt(hi)
            if best is None:
                if hi >= r_max:
                    raise InfeasibleBudget(f"even radius {r_max:g} needs more than {budget} centers")
                lo = hi
    best_r = hi
    while hi / lo > 1.0 + _REL_WIDTH:
        mid = math.sqrt(lo * hi)
        trial = _greedy(X, tree, mid, _required(len(X), delta_of(mid)), budget)
        if trial is None:
            lo = mid
        else:
            hi, best, best_r = mid, trial, mid
    return _finish(X, best_r, *best)


def _exact_if_small(X: np.ndarray, n: int) -> DiscreteMeasure | None:
    uniq = make_discrete(X)
    return uniq if uniq.size <= n else None


def cover_delta(eps: float, p: float, q: float) -> float:
    """Uncovered mass allowed at radius eps: eps^(pq/(q-p)), eps^p when q is infinite."""
    expo = p if math.isinf(q) else p * q / (q - p)
    return min(eps**expo, 1.0 - 1e-12)


def quantize_cover(samples, n: int, p: float = 1.0, q: float = math.inf) -> DiscreteMeasure:
    """Measure with at most n atoms: n-1 cover centers plus the origin.

    The radius is the smallest one whose robust cover with
    ``delta = eps^(pq/(q-p))`` uses at most n-1 centers; centers carry
    their cell masses and the origin carries whatever is left uncovered.
    """
    X = as_points(samples)
    if n < 2:
        raise InfeasibleBudget("quantize_cover needs n >= 2")
    if not q > p:
        raise ValueError("need q > p")
    exact = _exact_if_small(X, n)
    if exact is not None:
        return exact
    tree = cKDTree(X)
    cover = _search_radius(X, tree, n - 1, lambda r: cover_delta(r, p, q))
    return _cover_measure(X, cover, include_origin=True)


def _cover_measure(X, cover: CoveringResult, include_origin: bool) -> DiscreteMeasure:
    masses = cover.cell_masses()
    atoms = [cover.centers]
    weights = [masses]
    tail = 1.0 - cover.covered_mass
    if include_origin and tail > 0:
        atoms.append(np.zeros((1, X.shape[1])))
        weights.append([tail])
    return make_discrete(np.vstack(atoms), np.concatenate(weights))


def shell_index(X: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    """j with |x| in (2^(j-1), 2^j], and 0 inside the unit ball.

    Norms within a relative ``rtol`` of a shell radius count as inside it,
    so points on the unit sphere stay in B_0 despite round-off.
    """
    norms = np.linalg.norm(X, axis=1) / (1.0 + rtol)
    j = np.zeros(len(X), dtype=np.int64)
    out = norms > 1.0
    j[out] = np.ceil(np.log2(norms[out])).astype(np.int64)
    # Guard the boundary against log2 round-off.
    j[out & (norms > 2.0 ** j)] += 1
    j[out & (norms <= 2.0 ** (j - 1))] -= 1
    return j


def shell_regime(p: float, q: float, d: int) -> str:
    """'A' when q > p + p/d, else 'B'."""
    return "A" if q > p + p / d else "B"


def shell_plan(n: int, p: float, q: float, d: int) -> tuple[int, np.ndarray]:
    """Outermost shell k and the unnormalized per-shell atom allocation."""
    if shell_regime(p, q, d) == "A":
        k = max(int(math.floor(math.log2(n))) - 1, 0)
        alloc = 2.0 ** (k - np.arange(k + 1))
    else:
        # Rounded first so that exact integers are not pushed up by round-off.
        k = max(int(math.ceil(round(p / (d * (q - p)) * math.log2(n), 9))), 0)
        alloc = np.full(k + 1, float(max((n - 1) // (k + 1), 1)))
    return k, alloc


def _distribute(weights: np.ndarray, total: int) -> np.ndarray:
    """Integer split of ``total`` proportional to weights, at least one each."""
    m = len(weights)
    share = weights / weights.sum() * total
    out = np.maximum(np.floor(share).astype(np.int64), 1)
    while out.sum() > total:
        out[np.argmax(np.where(out > 1, out - share, -np.inf))] -= 1
    rem = share - out
    while out.sum() < total:
        i = int(np.argmax(rem))
        out[i] += 1
        rem[i] -= 1.0
    assert out.sum() == total and np.all(out >= 1) and len(out) == m
    return out


def quantize_shells(samples, n: int, p: float = 1.0, q: float = math.inf) -> DiscreteMeasure:
    """Measure with at most n atoms built shell by shell.

    Samples in the dyadic shells B_0..B_k are covered separately, the
    budget split in proportion to the regime's allocation (2^(k-j) when
    q > p + p/d, uniform otherwise); samples beyond B_k go to the origin.
    """
    X = as_points(samples)
    N, d = X.shape
    if n < 2:
        raise InfeasibleBudget("quantize_shells needs n >= 2")
    if not q > p:
        raise ValueError("need q > p")
    exact = _exact_if_small(X, n)
    if exact is not None:
        return exact
    k, alloc = shell_plan(n, p, q, d)
    shell = shell_index(X)
    present = [j for j in range(k + 1) if np.any(shell == j)]
    in_tail = shell > k
    budget = n - (1 if in_tail.any() else 0)
    if len(present) > budget:
        # Not enough atoms for every shell: outer shells join the tail.
        present = present[: max(budget - 1, 1)]
        in_tail = ~np.isin(shell, present)
        budget = n - 1
    counts = _distribute(alloc[present], budget)

    atoms, weights = [], []
    for j, nj in zip(present, counts):
        Xj = X[shell == j]
        exact = _exact_if_small(Xj, int(nj))
        if exact is not None:
            atoms.append(exact.atoms)
            weights.append(exact.weights * len(Xj) / N)
            continue
        cover = _search_radius(Xj, cKDTree(Xj), int(nj), lambda r: 0.0)
        atoms.append(cover.centers)
        weights.append(cover.cell_masses() * len(Xj) / N)
    tail = np.count_nonzero(in_tail) / N
    if tail > 0:
        atoms.append(np.zeros((1, d)))
        weights.append([tail])
    return make_discrete(np.vstack(atoms), np.concatenate(weights))


def lower_bound_probe(sampler, n: int, p: float, t: float, delta: float, seed: int,
                      n_samples: int = 10_000, q: float = math.inf) -> float:
    """Sample mass at distance >= n^(-1/t) from every atom of a cover quantizer.

    When t is below the lower dimension this mass stays above some fixed
    delta as n grows, which is what forces W_p(mu, P(n)) >= c n^(-1/t).
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    X = as_points(sampler.sample(n_samples, seed))
    nu = quantize_cover(X, n, p, q) if n >= 2 else make_discrete(X[:1])
    eps = n ** (-1.0 / t)
    dist, _ = cKDTree(nu.atoms).query(X)
    return float(np.count_nonzero(dist >= eps)) / len(X)
