import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.spatial.distance import cdist

from relugen.errors import InfeasibleBudget
from relugen.measures import Empirical, UniformCube, UniformSphere, empirical_measure
from relugen.metrics import wasserstein_1d, wasserstein_discrete
from relugen.quantize import (
    cover_delta,
    greedy_cover,
    lower_bound_probe,
    quantize_cover,
    quantize_shells,
    robust_cover,
    shell_index,
    shell_plan,
    shell_regime,
)

points_st = st.lists(st.tuples(st.integers(-6, 6), st.integers(-6, 6)), min_size=1, max_size=9)


def brute_min_cover(X, eps):
    """Smallest number of closed eps-balls centred at samples covering all samples."""
    inside = cdist(X, X) <= eps
    for k in range(1, len(X) + 1):
        for combo in itertools.combinations(range(len(X)), k):
            if inside[list(combo)].any(axis=0).all():
                return k
    raise AssertionError


def check_cover(X, res):
    X = np.asarray(X, dtype=float).reshape(len(X), -1)
    a = res.assignment
    assert res.covered_mass == pytest.approx(np.mean(a >= 0))
    dist = np.linalg.norm(X[a >= 0] - res.centers[a[a >= 0]], axis=1)
    assert np.all(dist <= res.radius)
    # First-cover rule: a sample belongs to the earliest center whose ball holds it.
    for i in np.flatnonzero(a >= 0):
        earlier = np.linalg.norm(res.centers[: a[i]] - X[i], axis=1)
        assert np.all(earlier > res.radius)


def test_greedy_examples():
    assert greedy_cover([0.0, 0.5, 1.0], 0.6).n_centers == 1
    assert greedy_cover([0.0, 0.5, 1.0], 0.6).centers.tolist() == [[0.5]]
    assert greedy_cover([[3.0, 4.0]], 0.1).n_centers == 1
    assert greedy_cover([0.0, 1.0], 0.4).n_centers == 2


@given(points_st, st.sampled_from([0.5, 1.0, 1.5, 2.5, 4.0]))
def test_greedy_against_brute_force(pts, eps):
    X = np.array(pts, dtype=float)
    res = greedy_cover(X, eps)
    check_cover(X, res)
    assert res.covered_mass == 1.0
    opt = brute_min_cover(X, eps)
    assert res.n_centers >= opt
    # Any greedy cover at eps is at most an optimal cover at eps/2 (disjoint-ball packing).
    assert res.n_centers <= max(len(X), 1)


def test_greedy_tie_break_lowest_index():
    res = greedy_cover([0.0, 10.0], 1.0)
    assert res.center_index.tolist() == [0, 1]


def test_robust_examples():
    X = np.concatenate([np.zeros(99), [100.0]])
    assert robust_cover(X, 1.0, 0.02).n_centers == 1
    Y = np.random.default_rng(0).uniform(size=(300, 2))
    a, b = robust_cover(Y, 0.1, 0.0), greedy_cover(Y, 0.1)
    assert a.center_index.tolist() == b.center_index.tolist()


@given(st.integers(0, 2**31 - 1), st.floats(0.02, 0.5))
def test_robust_monotone_in_delta(seed, eps):
    X = np.random.default_rng(seed).standard_normal((200, 2))
    counts = [robust_cover(X, eps, d).n_centers for d in (0.0, 0.01, 0.05, 0.2, 0.5)]
    assert all(a >= b for a, b in zip(counts, counts[1:]))
    res = robust_cover(X, eps, 0.05)
    check_cover(X, res)
    assert res.covered_mass >= 0.95


def test_cover_counts_monotone_in_eps():
    X = np.random.default_rng(1).uniform(size=(1000, 2))
    counts = [greedy_cover(X, e).n_centers for e in (0.4, 0.2, 0.1, 0.05)]
    assert counts == sorted(counts)


def test_cover_scale_covariance():
    X = np.random.default_rng(2).uniform(size=(500, 3))
    for eps in (0.3, 0.1):
        a = greedy_cover(X, eps)
        b = greedy_cover(4.0 * X, 4.0 * eps)
        assert a.center_index.tolist() == b.center_index.tolist()


# Quantizers -------------------------------------------------------------------


def test_quantize_cover_examples():
    X = np.random.default_rng(0).uniform(size=(10, 2))
    nu = quantize_cover(X, 10)
    assert wasserstein_discrete(empirical_measure(X), nu)[0] == pytest.approx(0.0, abs=1e-12)
    same = quantize_cover(np.ones((50, 3)), 4)
    assert same.size == 1
    U = np.random.default_rng(1).uniform(size=10_000)
    nu = quantize_cover(U, 4, 1.0, 1e6)
    assert nu.size <= 4
    assert wasserstein_1d(empirical_measure(U), nu) <= 0.125
    with pytest.raises(InfeasibleBudget):
        quantize_cover(U, 1)


def test_cover_delta():
    assert cover_delta(0.1, 1.0, math.inf) == pytest.approx(0.1)
    assert cover_delta(0.1, 1.0, 2.0) == pytest.approx(0.01)


def test_shell_index():
    X = np.array([[0.0, 0.0], [1.0, 0.0], [1.5, 0.0], [2.0, 0.0], [2.01, 0.0], [0.0, -7.0]])
    assert shell_index(X).tolist() == [0, 0, 1, 1, 2, 3]
    circle = UniformSphere(1, 3).sample(5000, 0)
    assert np.all(shell_index(circle) == 0)


def test_regimes():
    assert shell_regime(1.0, 2.0, 2) == "A"
    assert shell_regime(1.0, 1.2, 2) == "B"
    k, alloc = shell_plan(64, 1.0, 10.0, 2)
    assert k == 5 and alloc.tolist() == [32, 16, 8, 4, 2, 1]
    k, alloc = shell_plan(64, 1.0, 1.2, 2)
    assert k == math.ceil(1 / (2 * 0.2) * 6) and np.all(alloc == alloc[0])


def test_shells_inside_unit_ball_reduce_to_cover():
    X = UniformCube(2).sample(3000, 0) * 0.7
    nu = quantize_shells(X, 16)
    assert nu.size <= 16
    assert not np.any(np.all(nu.atoms == 0, axis=1))  # no tail atom


@given(st.integers(2, 80), st.sampled_from([(1.0, 10.0), (1.0, 1.2), (2.0, 3.0)]), st.integers(0, 2**31 - 1))
def test_shells_support_bound(n, pq, seed):
    X = 3.0 * np.random.default_rng(seed).standard_t(2.5, size=(600, 2))
    nu = quantize_shells(X, n, *pq)
    assert nu.size <= n
    assert abs(nu.weights.sum() - 1.0) <= 1e-12


def test_shells_tail_goes_to_origin():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.uniform(-0.5, 0.5, size=(990, 2)), rng.uniform(1e6, 2e6, size=(10, 2))])
    nu = quantize_shells(X, 8)
    origin = np.all(nu.atoms == 0, axis=1)
    assert origin.any() and nu.weights[origin][0] == pytest.approx(0.01)


def test_lower_bound_probe_examples():
    assert lower_bound_probe(Empirical(np.zeros((1, 2))), 8, 1.0, 1.0, 0.1, 0) == 0.0
    assert lower_bound_probe(UniformCube(2), 300, 1.0, 1.0, 0.1, 0, n_samples=200) == 0.0
    masses = [lower_bound_probe(UniformCube(2), n, 1.0, 1.0, 0.1, 0, n_samples=5000) for n in (16, 64, 256)]
    assert min(masses) > 0.5


def _rate(sampler, d_eff, seed):
    X = sampler.sample(5000, seed)
    mu = empirical_measure(X)
    ns = np.array([2**k for k in range(3, 10)])
    w = [wasserstein_discrete(mu, quantize_shells(X, int(n), 1.0, 10.0))[0] for n in ns]
    return np.polyfit(np.log(ns), np.log(w), 1)[0]


def test_circle_quantizer_rate_uses_intrinsic_dimension():
    slope = _rate(UniformSphere(1, 3), 1, 0)
    assert -1.3 <= slope <= -0.7
