"""Exact compilation of piecewise-linear maps into explicit ReLU networks.

A map with N interior breakpoints is written in a hat basis whose hats are
grouped so that every group is ``+-relu(g)`` for a single pre-activation ``g``
that only kinks at "principal" breakpoints.  Two hidden layers per chunk of
breakpoints realize that, and chunks are stacked with a pass-through neuron
carrying ``relu(input)`` and ``d`` offset accumulators carrying the running
sum.  Evaluation is exact up to floating-point round-off.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .cpwl import CpwlMap, affine_reparam, breakpoint_count, refine
from .errors import BudgetTooSmall, NonzeroBoundary, ShapeMismatch, TooManyBreakpoints

# ---------------------------------------------------------------------------
# Networks
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ReluNetwork:
    """Affine layers ``(weights, bias)`` with ReLU after every layer but the last."""

    layers: tuple

    def __post_init__(self):
        if not self.layers:
            raise ShapeMismatch("a network needs at least one layer")
        fixed = []
        prev_out = None
        for idx, (w, b) in enumerate(self.layers):
            w = np.array(w, dtype=float, ndmin=2)
            b = np.array(b, dtype=float, ndmin=1)
            if w.ndim != 2 or b.ndim != 1 or b.shape[0] != w.shape[0]:
                raise ShapeMismatch(f"layer {idx}: weights {w.shape} do not match bias {b.shape}")
            if prev_out is not None and w.shape[1] != prev_out:
                raise ShapeMismatch(
                    f"layer {idx} expects {w.shape[1]} inputs but layer {idx - 1} has {prev_out} outputs"
                )
            w.setflags(write=False)
            b.setflags(write=False)
            fixed.append((w, b))
            prev_out = w.shape[0]
        object.__setattr__(self, "layers", tuple(fixed))

    @property
    def in_dim(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1][0].shape[0]

    @property
    def depth(self) -> int:
        """Number of hidden layers."""
        return len(self.layers) - 1

    @property
    def width(self) -> int:
        """Largest hidden-layer size (0 for a purely affine network)."""
        return max((w.shape[0] for w, _ in self.layers[:-1]), default=0)

    def hidden_widths(self) -> list[int]:
        return [w.shape[0] for w, _ in self.layers[:-1]]

    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in self.layers)

    def __call__(self, x):
        return eval_network(self, x)

    def to_dict(self) -> dict:
        layers = [{"weights": w.tolist(), "bias": b.tolist()} for w, b in self.layers]
        layers[-1]["linear"] = True
        return {"layers": layers, "activation": "relu"}

    @classmethod
    def from_dict(cls, data: dict) -> "ReluNetwork":
        if data.get("activation", "relu") != "relu":
            raise ShapeMismatch(f"unsupported activation {data.get('activation')!r}")
        layers = data["layers"]
        for spec in layers[:-1]:
            if spec.get("linear", False):
                raise ShapeMismatch("only the final layer may be linear")
        return cls(tuple((spec["weights"], spec["bias"]) for spec in layers))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "ReluNetwork":
        return cls.from_dict(json.loads(Path(path).read_text()))


def eval_network(net: ReluNetwork, x) -> np.ndarray:
    """Forward pass.  Scalars give shape (d,), a 1-D batch gives (n, d)."""
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    h = arr.reshape(-1, 1) if arr.ndim <= 1 else arr
    if h.shape[1] != net.in_dim:
        raise ShapeMismatch(f"network expects inputs of dimension {net.in_dim}")
    last = len(net.layers) - 1
    for idx, (w, b) in enumerate(net.layers):
        h = h @ w.T + b
        if idx < last:
            np.maximum(h, 0.0, out=h)
    return h[0] if scalar else h


def width(net: ReluNetwork) -> int:
    return net.width


def depth(net: ReluNetwork) -> int:
    return net.depth


# ---------------------------------------------------------------------------
# Budgets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NetworkBudget:
    W: int
    L: int
    d: int

    def check(self) -> None:
        if self.d < 1:
            raise BudgetTooSmall("output dimension must be >= 1")
        if self.W < 7 * self.d + 1:
            raise BudgetTooSmall(f"width {self.W} < 7d+1 = {7 * self.d + 1}")
        if self.L < 2:
            raise BudgetTooSmall(f"depth {self.L} < 2")

    @property
    def inner_width(self) -> int:
        """Principal-breakpoint neurons per chunk (width minus pass-through and accumulators)."""
        return self.W - self.d - 1

    @property
    def hats_per_principal(self) -> int:
        return self.inner_width // (6 * self.d)

    @property
    def chunks(self) -> int:
        return self.L // 2


def budget_max_breakpoints(b: NetworkBudget) -> int:
    """Interior breakpoints a budget can represent exactly."""
    b.check()
    return b.inner_width * b.hats_per_principal * b.chunks


def capacity(b: NetworkBudget) -> int:
    """Largest atom count n with 2(n-1) breakpoints fitting the budget."""
    return budget_max_breakpoints(b) // 2 + 2


def capacity_exact(b: NetworkBudget) -> Fraction:
    """``(W-d-1)/2 * floor((W-d-1)/6d) * floor(L/2) + 2`` as an exact rational."""
    return Fraction(budget_max_breakpoints(b), 2) + 2


def param_count(W: int, L: int, d: int) -> int:
    """Weights plus biases of a 1 -> W -> ... -> W -> d network with L hidden layers."""
    return (L - 1) * W * W + (L + d + 1) * W + d


def planned_hidden_widths(b: NetworkBudget, n_breakpoints: int) -> list[int]:
    """Upper bounds on the hidden widths :func:`compile_deep` produces.

    Odd layers hold pass-through, principal neurons and accumulators; even
    layers hold pass-through, at most ``6dq`` group neurons and accumulators.
    """
    b.check()
    k, q, d = b.inner_width, b.hats_per_principal, b.d
    n_chunks = _chunks_needed(b, n_breakpoints)
    widths = []
    for c in range(n_chunks):
        widths.append(1 + k + (1 if c == 0 else d))
        widths.append(1 + 6 * d * q + d)
    return widths


def _chunks_needed(b: NetworkBudget, n_breakpoints: int) -> int:
    per_chunk = b.inner_width * b.hats_per_principal
    return max(1, math.ceil(n_breakpoints / per_chunk))


# ---------------------------------------------------------------------------
# Shallow stage: one chunk of breakpoints -> two hidden layers
# ---------------------------------------------------------------------------


@dataclass
class _Block:
    """Second-layer data for one chunk.

    ``knots`` are the kink locations of every pre-activation: the origin
    followed by the K principal breakpoints.  Row r of ``coef`` holds the
    coefficients on ``relu(s - knot)`` and ``bias[r]`` the constant term of
    group r; ``component``/``sign`` say where the group's output goes.
    """

    knots: np.ndarray
    coef: np.ndarray
    bias: np.ndarray
    component: np.ndarray
    sign: np.ndarray


def hat_coefficients(zl: np.ndarray, vals: np.ndarray, q: int, K: int) -> np.ndarray:
    """Coefficients of a zero-boundary map in the hat basis.

    Hat ``n`` (1-based) vanishes outside ``[z_{n-1}, z_{jq+1}]`` with
    principal breakpoint ``z_{jq}``, ``j = ceil(n/q)``.  Hats of different
    principals do not interact at breakpoints, so each block of ``q`` is a
    small lower-triangular solve.  Returns shape (qK, d).
    """
    d = vals.shape[1]
    idx = np.arange(1, q + 1)
    base = (np.arange(K) * q)[:, None]  # (K, 1): index (j-1)q
    kk = base + idx  # breakpoint indices in each block, (K, q)
    principal = zl[(np.arange(1, K + 1) * q)]  # (K,)
    left = zl[kk - 1]  # left endpoint of hat n=kk, (K, q)
    denom = principal[:, None] - left
    coef = np.zeros((K, q, d))
    for t in range(q):
        k = kk[:, t]
        rhs = vals[k].copy()
        zk = zl[k]
        for u in range(t):
            h = (zk - left[:, u]) / denom[:, u] if t < q - 1 else np.ones(K)
            rhs -= coef[:, u, :] * h[:, None]
        h_self = (zk - left[:, t]) / denom[:, t] if t < q - 1 else np.ones(K)
        coef[:, t, :] = rhs / h_self[:, None]
    return coef.reshape(K * q, d)


def _hat_values(zl, q, n, points):
    """Value of hat n (1-based) at ``points``."""
    j = (n - 1) // q + 1
    a, p, c = zl[n - 1], zl[j * q], zl[j * q + 1]
    out = np.zeros_like(points)
    up = (points > a) & (points <= p)
    down = (points > p) & (points < c)
    out[up] = (points[up] - a) / (p - a)
    out[down] = (c - points[down]) / (c - p)
    return out


def _group_hats(principals: list[int]) -> list[list[int]]:
    """Greedy first-fit grouping with principal indices at least 3 apart.

    ``principals`` must be nondecreasing; returns lists of positions.
    """
    groups: list[list[int]] = []
    last: list[int] = []
    for pos, j in enumerate(principals):
        for g, lj in enumerate(last):
            if abs(j - lj) >= 3:
                groups[g].append(pos)
                last[g] = j
                break
        else:
            groups.append([pos])
            last.append(j)
    return groups


def _shallow_block(zl: np.ndarray, vals: np.ndarray, q: int, K: int, origin: float) -> _Block:
    """Groups and pre-activations for a zero-boundary map on one chunk.

    ``zl`` holds qK+2 local breakpoints, ``vals`` the values there (first and
    last rows zero).  Pre-activations kink at ``origin`` (which must not
    exceed ``zl[0]``) and at the K principal breakpoints ``zl[jq]``.
    """
    d = vals.shape[1]
    coefs = hat_coefficients(zl, vals, q, K)
    principal = zl[np.arange(1, K + 1) * q]
    knots = np.concatenate([[origin], principal])
    rows, biases, comps, signs = [], [], [], []

    for i in range(d):
        c_i = coefs[:, i]
        V = 1.0 + float(np.max(np.abs(c_i))) if c_i.size else 1.0
        for sgn, mask in ((1.0, c_i > 0), (-1.0, c_i < 0)):
            hats = np.flatnonzero(mask) + 1  # 1-based hat indices, increasing
            if hats.size == 0:
                continue
            js = [(int(n) - 1) // q + 1 for n in hats]
            for members in _group_hats(js):
                gvals = np.full(K + 1, -V)  # at knots: origin, principal 1..K
                final_slope = 0.0
                for pos in members:
                    n = int(hats[pos])
                    j = js[pos]
                    c = abs(float(c_i[n - 1]))
                    a, p, r = zl[n - 1], zl[j * q], zl[j * q + 1]
                    gvals[j] = c
                    gvals[j - 1] = c * (knots[j - 1] - a) / (p - a)
                    if j < K:
                        gvals[j + 1] = c * (r - knots[j + 1]) / (r - p)
                    else:
                        final_slope = -c / (r - p)
                slopes = np.empty(K + 1)
                slopes[:K] = np.diff(gvals) / np.diff(knots)
                slopes[K] = final_slope
                coef = np.empty(K + 1)
                coef[0] = slopes[0]
                coef[1:] = np.diff(slopes)
                rows.append(coef)
                biases.append(gvals[0])
                comps.append(i)
                signs.append(sgn)
                _check_group(zl, q, hats[members], c_i, knots, coef, gvals[0], V)

    if rows:
        coef_arr = np.array(rows)
    else:
        coef_arr = np.zeros((0, K + 1))
    return _Block(knots, coef_arr, np.array(biases), np.array(comps, dtype=int), np.array(signs))


def _check_group(zl, q, members, c_i, knots, coef, bias, V):
    # relu(g) must reproduce the group's hat sum at every breakpoint.
    g = bias + np.maximum(zl[:, None] - knots[None, :], 0.0) @ coef
    target = np.zeros_like(zl)
    for n in members:
        target += abs(c_i[n - 1]) * _hat_values(zl, q, int(n), zl)
    span = zl[-1] - knots[0]
    tol = 1e-9 * (V + np.abs(coef).sum() * span)
    err = np.max(np.abs(np.maximum(g, 0.0) - target))
    if not err <= tol:
        raise AssertionError(f"group pre-activation mismatch {err:.3e} > {tol:.3e}")


# ---------------------------------------------------------------------------
# Public compilers
# ---------------------------------------------------------------------------


def compile_shallow(f: CpwlMap, W: int) -> ReluNetwork:
    """Depth-2 network of width <= W for a map vanishing at both boundary breakpoints.

    The first hidden layer holds ``relu(z - z_0)`` and ``W - 1`` principal
    neurons ``relu(z - z_{jq})``; up to ``q(W-1)`` interior breakpoints fit,
    with ``q = floor(W / 6d)``.
    """
    d = f.dim
    if W < 6 * d:
        raise BudgetTooSmall(f"width {W} < 6d = {6 * d}")
    if np.any(f.values[0] != 0.0) or np.any(f.values[-1] != 0.0):
        raise NonzeroBoundary("map must vanish at its first and last breakpoints")
    q = W // (6 * d)
    K = W - 1
    n_max = q * K
    N = breakpoint_count(f)
    if N > n_max:
        raise TooManyBreakpoints(N, n_max)
    g = refine(f, n_max)
    zl = g.breakpoints
    block = _shallow_block(zl, g.values, q, K, origin=float(zl[0]))

    w1 = np.ones((K + 1, 1))
    b1 = -block.knots
    if block.coef.shape[0]:
        w2, b2 = block.coef, block.bias
        w3 = np.zeros((d, w2.shape[0]))
        w3[block.component, np.arange(w2.shape[0])] = block.sign
    else:
        w2, b2 = np.zeros((1, K + 1)), np.zeros(1)
        w3 = np.zeros((d, 1))
    return ReluNetwork(((w1, b1), (w2, b2), (w3, np.zeros(d))))


def compile_deep(f: CpwlMap, b: NetworkBudget) -> ReluNetwork:
    """Network of width <= b.W and depth <= b.L that reproduces ``f`` exactly."""
    b.check()
    d = f.dim
    if d != b.d:
        raise BudgetTooSmall(f"budget is for d={b.d} but the map has d={d}")
    N = breakpoint_count(f)
    n_max = budget_max_breakpoints(b)
    if N > n_max:
        raise TooManyBreakpoints(N, n_max)
    K, q = b.inner_width, b.hats_per_principal
    per_chunk = q * K
    n_chunks = _chunks_needed(b, N)

    unit = affine_reparam(f)
    scale, shift = _domain_affine(f)
    g = refine(unit, per_chunk * n_chunks)
    s = g.breakpoints
    x0, x1 = g.values[0], g.values[-1]
    delta = x1 - x0
    base = x0[None, :] + s[:, None] * delta[None, :]  # the boundary part on [0, 1]
    resid = g.values - base
    resid[0] = 0.0
    resid[-1] = 0.0

    blocks = []
    partial = base.copy()  # running sum evaluated at the breakpoints
    offsets = [1.0 + np.max(np.abs(partial), axis=0)]
    for c in range(n_chunks):
        lo = c * per_chunk
        zl = s[lo : lo + per_chunk + 2]
        vals = resid[lo : lo + per_chunk + 2].copy()
        vals[0] = 0.0
        vals[-1] = 0.0
        blocks.append(_shallow_block(zl, vals, q, K, origin=0.0))
        partial[lo + 1 : lo + per_chunk + 1] += resid[lo + 1 : lo + per_chunk + 1]
        offsets.append(1.0 + np.max(np.abs(partial), axis=0))

    layers = []
    # Layer 1: pass-through relu(s), principal neurons of chunk 1, relu(s - 1).
    p1 = blocks[0].knots[1:]
    w = np.concatenate([[scale], np.full(K, scale), [scale]])[:, None]
    bias = np.concatenate([[shift], shift - p1, [shift - 1.0]])
    layers.append((w, bias))
    prev_groups = None  # block whose group neurons sit in the previous layer
    for c, blk in enumerate(blocks):
        G = blk.coef.shape[0]
        # Even layer: pass-through, groups of this chunk, accumulators.
        if c == 0:
            in_dim = 1 + K + 1
        else:
            in_dim = 1 + K + d
        w = np.zeros((1 + max(G, 1) + d, in_dim))
        bias = np.zeros(w.shape[0])
        w[0, 0] = 1.0
        if G:
            w[1 : 1 + G, 0] = blk.coef[:, 0]
            w[1 : 1 + G, 1 : 1 + K] = blk.coef[:, 1:]
            bias[1 : 1 + G] = blk.bias
        acc = slice(1 + max(G, 1), 1 + max(G, 1) + d)
        if c == 0:
            # acc_i = relu(x0_i + delta_i * (relu(s) - relu(s - 1)) + C_i)
            w[acc, 0] = delta
            w[acc, 1 + K] = -delta
            bias[acc] = x0 + offsets[0]
        else:
            w[acc, 1 + K : 1 + K + d] = np.eye(d)
        layers.append((w, bias))
        prev_groups = blk
        C_prev = offsets[c]
        if c + 1 < len(blocks):
            # Odd layer: next chunk's principal neurons, accumulate finished groups.
            nxt = blocks[c + 1]
            Gp = max(G, 1)
            w = np.zeros((1 + K + d, 1 + Gp + d))
            bias = np.zeros(w.shape[0])
            w[0, 0] = 1.0
            w[1 : 1 + K, 0] = 1.0
            bias[1 : 1 + K] = -nxt.knots[1:]
            acc_rows = slice(1 + K, 1 + K + d)
            w[acc_rows, 1 + Gp : 1 + Gp + d] = np.eye(d)
            if G:
                w[1 + K + prev_groups.component, 1 + np.arange(G)] = prev_groups.sign
            bias[acc_rows] = offsets[c + 1] - C_prev
            layers.append((w, bias))

    # Output: accumulators minus their offset plus the last chunk's groups.
    blk = blocks[-1]
    G = blk.coef.shape[0]
    Gp = max(G, 1)
    w = np.zeros((d, 1 + Gp + d))
    w[:, 1 + Gp :] = np.eye(d)
    if G:
        w[blk.component, 1 + np.arange(G)] = blk.sign
    layers.append((w, -offsets[n_chunks - 1] if n_chunks > 1 else -offsets[0]))
    return ReluNetwork(tuple(layers))


def _domain_affine(f: CpwlMap) -> tuple[float, float]:
    z0, z1 = float(f.breakpoints[0]), float(f.breakpoints[-1])
    scale = 1.0 / (z1 - z0)
    return scale, -z0 * scale
