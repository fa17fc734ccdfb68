import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog
from scipy.spatial.distance import cdist

from relugen.compiler import NetworkBudget
from relugen.errors import DimensionMismatch, NotSingular, SizeLimit
from relugen.measures import Empirical, SourceDistribution, UniformCube, UniformSphere, dirac, make_discrete
from relugen.metrics import (
    GENERATORS,
    f_divergence,
    generator,
    kr_dual_check,
    singularity_gap,
    wasserstein_1d,
    wasserstein_discrete,
    wasserstein_mc,
)
from relugen.quantize import quantize_shells
from relugen.transport import PushforwardSampler, synthesize_network


def random_measure(rng, n, d, grid=None):
    atoms = rng.standard_normal((n, d)) if grid is None else rng.integers(0, grid, size=(n, d)).astype(float)
    return make_discrete(atoms, rng.uniform(0.05, 1.0, size=n))


def linprog_cost(mu, nu, p):
    """Independent LP oracle (HiGHS) for the transportation problem."""
    C = cdist(mu.atoms, nu.atoms) ** p
    m, n = C.shape
    A = np.zeros((m + n, m * n))
    for i in range(m):
        A[i, i * n : (i + 1) * n] = 1.0
    for j in range(n):
        A[m + j, j::n] = 1.0
    b = np.concatenate([mu.weights, nu.weights])
    res = linprog(C.ravel(), A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    return res.fun


# Exact W_p ---------------------------------------------------------------------


def test_examples():
    for p in (1.0, 2.0, 3.5):
        assert wasserstein_discrete(dirac([0.0]), dirac([1.0]), p)[0] == 1.0
    mu = make_discrete([[0.0], [1.0]], [0.5, 0.5])
    assert wasserstein_discrete(mu, dirac([0.5]), 1.0)[0] == pytest.approx(0.5, abs=1e-15)
    r = random_measure(np.random.default_rng(0), 20, 3)
    assert wasserstein_discrete(r, r, 2.0)[0] == 0.0


@given(st.integers(1, 12), st.integers(1, 12), st.integers(1, 3), st.sampled_from([1.0, 2.0, 1.5]),
       st.integers(0, 2**31 - 1))
def test_plan_invariants_and_linprog_oracle(m, n, d, p, seed):
    rng = np.random.default_rng(seed)
    mu, nu = random_measure(rng, m, d), random_measure(rng, n, d)
    value, plan = wasserstein_discrete(mu, nu, p)
    assert plan.marginal_error() <= 1e-9
    assert np.all(plan.plan >= 0)
    C = cdist(mu.atoms, nu.atoms) ** p
    assert plan.cost == pytest.approx(np.sum(plan.plan * C), rel=1e-12, abs=1e-15)
    assert plan.dual_gap <= 1e-8
    assert plan.cost == pytest.approx(linprog_cost(mu, nu, p), rel=1e-7, abs=1e-10)
    assert value == pytest.approx(plan.cost ** (1 / p))


def test_errors():
    with pytest.raises(DimensionMismatch):
        wasserstein_discrete(dirac([0.0]), dirac([0.0, 1.0]))
    big = make_discrete(np.arange(5001.0)[:, None])
    with pytest.raises(SizeLimit):
        wasserstein_discrete(big, dirac([0.0]))
    with pytest.raises(DimensionMismatch):
        wasserstein_1d(dirac([0.0, 0.0]), dirac([1.0, 1.0]))


def test_one_dim_examples():
    assert wasserstein_1d(dirac([2.0]), dirac([-3.0]), 2.0) == 5.0
    mu = make_discrete([[0.0], [1.0]], [0.5, 0.5])
    assert wasserstein_1d(mu, dirac([0.5]), 1.0) == pytest.approx(0.5)


@given(st.integers(1, 15), st.integers(1, 15), st.sampled_from([1.0, 2.0, 3.0]), st.floats(-50, 50),
       st.integers(0, 2**31 - 1))
def test_one_dim_translation_and_lp_agreement(m, n, p, c, seed):
    rng = np.random.default_rng(seed)
    mu, nu = random_measure(rng, m, 1), random_measure(rng, n, 1)
    w = wasserstein_1d(mu, nu, p)
    assert w == pytest.approx(wasserstein_discrete(mu, nu, p)[0], rel=1e-9, abs=1e-12)
    shift = lambda x: make_discrete(x.atoms + c, x.weights)  # noqa: E731
    assert wasserstein_1d(shift(mu), shift(nu), p) == pytest.approx(w, rel=1e-9, abs=1e-9)


# Monte-Carlo --------------------------------------------------------------------


def test_mc_examples():
    point = Empirical(np.zeros((1, 2)))
    assert wasserstein_mc(point, point, 1.0, 100, 3, 0) == (0.0, 0.0)
    a, b = Empirical(np.zeros((1, 1))), Empirical(np.ones((1, 1)))
    est, ci = wasserstein_mc(a, b, 2.0, 50, 3, 0)
    assert est == 1.0 and ci == 0.0
    with pytest.raises(SizeLimit):
        wasserstein_mc(a, b, 1.0, 2001, 3, 0)
    with pytest.raises(ValueError):
        wasserstein_mc(a, b, 1.0, 10, 2, 0)


def test_mc_shrinks_with_batch():
    s = UniformCube(2)
    est = [wasserstein_mc(s, s, 1.0, batch, 10, 4)[0] for batch in (100, 400, 1600)]
    assert est[0] > est[1] > est[2]


def test_mc_deterministic():
    s = UniformCube(2)
    assert wasserstein_mc(s, s, 1.0, 200, 3, 9) == wasserstein_mc(s, s, 1.0, 200, 3, 9)


# Kantorovich-Rubinstein ---------------------------------------------------------


def test_kr_examples():
    _, plan = wasserstein_discrete(dirac([0.0]), dirac([1.0]), 1.0)
    cert = kr_dual_check(dirac([0.0]), dirac([1.0]), plan)
    assert cert.gap == 0.0 and cert.lipschitz_excess <= 1e-12
    assert cert.psi_mu[0] - cert.psi_nu[0] == pytest.approx(1.0)
    mu = random_measure(np.random.default_rng(1), 8, 2)
    _, plan = wasserstein_discrete(mu, mu, 1.0)
    cert = kr_dual_check(mu, mu, plan)
    assert cert.gap <= 1e-12
    assert np.ptp(cert.psi_mu - cert.psi_nu) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        kr_dual_check(mu, mu, wasserstein_discrete(mu, mu, 2.0)[1])


@given(st.integers(0, 2**31 - 1))
def test_kr_random_pairs(seed):
    rng = np.random.default_rng(seed)
    mu, nu = random_measure(rng, 10, 2), random_measure(rng, 10, 2)
    value, plan = wasserstein_discrete(mu, nu, 1.0)
    cert = kr_dual_check(mu, nu, plan)
    assert cert.gap <= 1e-8
    assert cert.lipschitz_excess <= 1e-9


# Metric axioms ------------------------------------------------------------------


@given(st.integers(1, 15), st.integers(1, 15), st.integers(1, 15), st.integers(1, 3),
       st.sampled_from([1.0, 2.0]), st.integers(0, 2**31 - 1))
def test_metric_axioms(a, b, c, d, p, seed):
    rng = np.random.default_rng(seed)
    mu, nu, xi = (random_measure(rng, k, d, grid=3) for k in (a, b, c))
    w_mn = wasserstein_discrete(mu, nu, p)[0]
    assert w_mn == pytest.approx(wasserstein_discrete(nu, mu, p)[0], abs=1e-12)
    assert (w_mn == 0) == mu.same_distribution(nu, tol=0)
    assert wasserstein_discrete(mu, xi, p)[0] <= w_mn + wasserstein_discrete(nu, xi, p)[0] + 1e-8


@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**31 - 1))
def test_order_monotonicity(m, n, seed):
    rng = np.random.default_rng(seed)
    mu, nu = random_measure(rng, m, 2), random_measure(rng, n, 2)
    vals = [wasserstein_discrete(mu, nu, p)[0] for p in (1.0, 1.5, 2.0, 4.0)]
    assert all(x <= y + 1e-9 for x, y in zip(vals, vals[1:]))


def test_triangle_pipeline():
    # W(mu, phi#nu) <= W(mu, gamma) + W(gamma, phi#nu) on samples of the same laws.
    src = SourceDistribution.uniform()
    X = UniformCube(2).sample(1500, 0)
    mu = make_discrete(X)
    gamma = quantize_shells(X, 14, 1.0, 10.0)
    net, _, _ = synthesize_network(gamma, src, None, 1.0, NetworkBudget(15, 4, 2))
    push = make_discrete(PushforwardSampler(net, src).sample(1500, 1))
    lhs = wasserstein_discrete(mu, push)[0]
    rhs = wasserstein_discrete(mu, gamma)[0] + wasserstein_discrete(gamma, push)[0]
    assert lhs <= rhs + 1e-8


# f-divergences ------------------------------------------------------------------


@pytest.mark.parametrize("name", sorted(GENERATORS))
def test_generator_properties(name):
    g = generator(name)
    assert abs(float(g(1.0))) <= 1e-12
    t = np.logspace(-6, 6, 2001)
    s = np.random.default_rng(0).permutation(t)
    mid = g(0.5 * (t + s))
    assert np.all(mid <= 0.5 * (g(t) + g(s)) + 1e-9 * (1 + np.abs(mid)))
    # Limits f(0) and f*(0) = lim f(t)/t.
    near0, big = float(g(1e-12)), float(g(1e12)) / 1e12
    assert (math.isinf(g.f0) and near0 > 20) or abs(near0 - g.f0) < 1e-4
    assert (math.isinf(g.fstar0) and big > 20) or abs(big - g.fstar0) < 1e-4


def test_fdiv_examples():
    m = make_discrete([[0.0], [1.0]], [0.5, 0.5])
    n = make_discrete([[0.0], [1.0]], [0.25, 0.75])
    assert f_divergence(m, n, "kl") == pytest.approx(0.5 * math.log(2) + 0.5 * math.log(2 / 3), abs=1e-15)
    assert f_divergence(m, n, "kl") == pytest.approx(0.14384, abs=1e-5)
    far = make_discrete([[5.0], [6.0]], [0.3, 0.7])
    assert f_divergence(m, far, "js") == math.log(2)
    assert f_divergence(m, far, "kl") == math.inf
    assert f_divergence(m, far, "chi2") == math.inf
    assert f_divergence(m, far, "tv") == 1.0


@pytest.mark.parametrize("name", sorted(GENERATORS))
def test_fdiv_self_zero_and_nonnegative(name, rng):
    for _ in range(30):
        mu = random_measure(rng, 8, 1, grid=6)
        nu = random_measure(rng, 8, 1, grid=6)
        assert f_divergence(mu, mu, name) == 0.0
        assert f_divergence(mu, nu, name) >= 0.0


def test_singularity_examples():
    a = make_discrete([[0.0, 0.0], [1.0, 1.0]], [0.5, 0.5])
    b = make_discrete([[2.0, 0.0]], [1.0])
    assert singularity_gap(a, b, "js") == math.log(2)
    assert singularity_gap(a, b, "chi2") == math.inf
    with pytest.raises(NotSingular):
        singularity_gap(a, make_discrete([[0.0, 0.0], [3.0, 3.0]]), "js")
    with pytest.raises(ValueError):
        singularity_gap(a, b, "tv")


@pytest.mark.parametrize("name", ["kl", "js", "chi2"])
def test_singularity_constancy(name, rng):
    values = set()
    for _ in range(100):
        mu = random_measure(rng, int(rng.integers(1, 20)), 2)
        nu = random_measure(rng, int(rng.integers(1, 20)), 2)
        values.add(f_divergence(mu, nu, name))
        values.add(singularity_gap(mu, nu, name))
    assert len(values) == 1


def test_constant_generator_on_circle_is_at_distance_one():
    # Every point of the unit circle is at distance 1 from the origin.
    circle = make_discrete(UniformSphere(1, 2).sample(500, 0))
    value = wasserstein_discrete(circle, dirac([0.0, 0.0]), 1.0)[0]
    assert value == pytest.approx(1.0, abs=1e-12)
