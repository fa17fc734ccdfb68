import numpy as np
import pytest
from _util import interp_oracle, random_cpwl, sup_error
from hypothesis import given
from hypothesis import strategies as st

from relugen.compiler import (
    NetworkBudget,
    ReluNetwork,
    budget_max_breakpoints,
    capacity,
    capacity_exact,
    compile_deep,
    compile_shallow,
    depth,
    eval_network,
    param_count,
    planned_hidden_widths,
    width,
)
from relugen.cpwl import CpwlMap
from relugen.errors import BudgetTooSmall, NonzeroBoundary, ShapeMismatch, TooManyBreakpoints


def tol(f):
    return 1e-8 * (1.0 + f.max_abs_value())


# Counting ---------------------------------------------------------------------


def test_budget_max_breakpoints_examples():
    assert budget_max_breakpoints(NetworkBudget(8, 2, 1)) == 6
    assert budget_max_breakpoints(NetworkBudget(15, 4, 2)) == 24
    with pytest.raises(BudgetTooSmall):
        budget_max_breakpoints(NetworkBudget(7, 2, 1))
    with pytest.raises(BudgetTooSmall):
        budget_max_breakpoints(NetworkBudget(8, 1, 1))


def _count_params(shapes):
    # Independent count: weights and biases of consecutive dense layers.
    return sum(a * b + b for a, b in zip(shapes[:-1], shapes[1:]))


@pytest.mark.parametrize("W,L,d", [(2, 1, 1), (8, 2, 1), (1, 1, 1), (5, 3, 2), (20, 6, 3)])
def test_param_count(W, L, d):
    assert param_count(W, L, d) == _count_params([1] + [W] * L + [d])
    assert param_count(2, 1, 1) == 7 and param_count(8, 2, 1) == 97 and param_count(1, 1, 1) == 4


@given(st.integers(1, 8), st.integers(0, 200), st.integers(2, 64))
def test_capacity_identity(d, extra, L):
    b = NetworkBudget(7 * d + 1 + extra, L, d)
    W = b.W
    n = capacity(b)
    assert capacity_exact(b) == (W - d - 1) * ((W - d - 1) // (6 * d)) * (L // 2) / 2 + 2
    assert n == int(capacity_exact(b))
    # (1/384) W^2 L / d <= n <= (1/12) W^2 L / d, in integers.
    assert W * W * L <= 384 * d * capacity_exact(b) <= 32 * W * W * L
    assert 12 * d * capacity_exact(b) <= W * W * L


# Networks ---------------------------------------------------------------------


def test_eval_network_examples():
    ident = ReluNetwork((([[1.0]], [0.0]),))
    assert eval_network(ident, 3.5).tolist() == [3.5] and depth(ident) == 0
    relu = ReluNetwork((([[1.0]], [0.0]), ([[1.0]], [0.0])))
    assert eval_network(relu, -1.0).tolist() == [0.0]
    assert eval_network(relu, 2.0).tolist() == [2.0]
    assert width(relu) == 1 and depth(relu) == 1


def test_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        ReluNetwork((([[1.0, 2.0]], [0.0, 1.0]),))
    with pytest.raises(ShapeMismatch):
        eval_network(ReluNetwork((([[1.0, 2.0]], [0.0]),)), 1.0)
    with pytest.raises(ShapeMismatch):
        ReluNetwork((([[1.0], [1.0]], [0.0, 0.0]), ([[1.0, 1.0, 1.0]], [0.0])))
    with pytest.raises(ShapeMismatch):
        ReluNetwork(())


def test_network_json_round_trip(tmp_path, rng):
    f = random_cpwl(rng, 20, 2)
    net = compile_deep(f, NetworkBudget(15, 4, 2))
    net.save(tmp_path / "n.json")
    back = ReluNetwork.load(tmp_path / "n.json")
    for (w0, b0), (w1, b1) in zip(net.layers, back.layers):
        assert np.array_equal(w0, w1) and np.array_equal(b0, b1)
    d = net.to_dict()
    assert d["activation"] == "relu" and d["layers"][-1]["linear"] is True


# Shallow ---------------------------------------------------------------------


def test_shallow_hat():
    hat = CpwlMap([0, 1, 2], [[0], [1], [0]])
    net = compile_shallow(hat, 6)
    assert eval_network(net, 1.0).tolist() == pytest.approx([1.0], abs=1e-12)
    assert eval_network(net, 3.0).tolist() == pytest.approx([0.0], abs=1e-12)
    assert depth(net) == 2 and width(net) <= 6


def test_shallow_zero_map():
    f = CpwlMap([0, 1, 2, 3], np.zeros((4, 2)))
    net = compile_shallow(f, 13)
    assert np.all(net.layers[-1][0] == 0)
    assert np.all(eval_network(net, np.linspace(-2, 5, 101)) == 0)


def test_shallow_random_s2():
    f = random_cpwl(np.random.default_rng(3), 12, 2, zero_boundary=True)
    net = compile_shallow(f, 13)
    assert width(net) <= 13 and depth(net) == 2
    assert sup_error(f, net) <= 1e-8


def test_shallow_errors():
    f = random_cpwl(np.random.default_rng(0), 5, 1)
    with pytest.raises(NonzeroBoundary):
        compile_shallow(f, 12)
    g = random_cpwl(np.random.default_rng(0), 5, 1, zero_boundary=True)
    with pytest.raises(BudgetTooSmall):
        compile_shallow(g, 5)
    with pytest.raises(TooManyBreakpoints):
        compile_shallow(random_cpwl(np.random.default_rng(0), 13, 2, zero_boundary=True), 13)


@given(st.integers(1, 3), st.integers(0, 30), st.integers(0, 2**31 - 1), st.data())
def test_shallow_exact(d, extra, seed, data):
    W = 6 * d + extra
    q = W // (6 * d)
    N = data.draw(st.integers(0, q * (W - 1)))
    f = random_cpwl(np.random.default_rng(seed), N, d, zero_boundary=True)
    net = compile_shallow(f, W)
    assert width(net) <= W and depth(net) == 2
    assert sup_error(f, net, 2000) <= tol(f)


# Deep ------------------------------------------------------------------------


def test_deep_constant_and_ramp():
    const = CpwlMap([0, 1], [[2.5], [2.5]])
    net = compile_deep(const, NetworkBudget(8, 2, 1))
    assert np.allclose(eval_network(net, np.linspace(-5, 5, 101)), 2.5, atol=1e-12, rtol=0)
    ramp = CpwlMap([0, 1], [[0], [1]])
    net = compile_deep(ramp, NetworkBudget(8, 2, 1))
    assert eval_network(net, 0.3).tolist() == pytest.approx([0.3], abs=1e-12)
    assert eval_network(net, 2.0).tolist() == pytest.approx([1.0], abs=1e-12)


def test_deep_full_budget_d3():
    b = NetworkBudget(22, 4, 3)
    f = random_cpwl(np.random.default_rng(11), budget_max_breakpoints(b), 3)
    net = compile_deep(f, b)
    assert width(net) <= 22 and depth(net) <= 4
    assert sup_error(f, net) <= tol(f)


def test_deep_too_many_breakpoints():
    b = NetworkBudget(8, 2, 1)
    with pytest.raises(TooManyBreakpoints) as info:
        compile_deep(random_cpwl(np.random.default_rng(0), 7, 1), b)
    assert info.value.n_breakpoints == 7 and info.value.budget == 6
    with pytest.raises(BudgetTooSmall):
        compile_deep(random_cpwl(np.random.default_rng(0), 2, 2), NetworkBudget(14, 2, 2))


@given(st.integers(1, 3), st.integers(0, 12), st.integers(2, 8), st.integers(0, 2**31 - 1), st.data())
def test_deep_exact_and_within_budget(d, extra, L, seed, data):
    b = NetworkBudget(7 * d + 1 + extra, L, d)
    N = data.draw(st.integers(0, budget_max_breakpoints(b)))
    f = random_cpwl(np.random.default_rng(seed), N, d)
    net = compile_deep(f, b)
    assert width(net) <= b.W and depth(net) <= b.L
    planned = planned_hidden_widths(b, N)
    assert len(net.hidden_widths()) == len(planned)
    assert all(a <= p for a, p in zip(net.hidden_widths(), planned))
    assert sup_error(f, net, 2000) <= tol(f)


@pytest.mark.parametrize("alpha", [-2.0, 0.5])
def test_scale_equivariance(alpha, rng):
    f = random_cpwl(rng, 30, 2)
    b = NetworkBudget(15, 6, 2)
    z = np.linspace(-5, 7, 3001)
    lhs = eval_network(compile_deep(f.scaled(alpha), b), z)
    rhs = alpha * eval_network(compile_deep(f, b), z)
    assert np.max(np.abs(lhs - rhs)) <= 1e-8 * (1 + abs(alpha) * f.max_abs_value())


def test_nonunit_domain(rng):
    f = random_cpwl(rng, 10, 1, span=(-1000.0, 3000.0))
    net = compile_deep(f, NetworkBudget(8, 4, 1))
    z = np.linspace(-1100, 3100, 5001)
    assert np.max(np.abs(eval_network(net, z) - interp_oracle(f, z))) <= tol(f)
