"""Experiment pipelines: approximation-rate sweeps and the circle f-divergence demo."""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .compiler import NetworkBudget, capacity
from .errors import ConfigError, RelugenError
from .measures import SourceDistribution, UniformSphere, make_discrete, sampler_from_spec
from .metrics import f_divergence, generator, singularity_gap, wasserstein_mc
from .quantize import quantize_shells
from .transport import PushforwardSampler, synthesize_network

CSV_HEADER = ["W", "L", "capacity", "atoms", "wp", "ci", "eps", "seconds"]
ROUNDOFF = 1e-12  # relative error level below which a row counts as exact


@dataclass(frozen=True)
class SweepConfig:
    target: dict
    source: str = "uniform:0,1"
    p: float = 1.0
    q: float = 10.0
    budgets: tuple = ()
    mc_batch: int = 1000
    mc_reps: int = 10
    target_samples: int = 10_000
    seed: int = 0
    epsilon: float | None = None
    stratified: bool = True
    out: str | None = None

    @property
    def dim(self) -> int:
        return sampler_from_spec(self.target).dim

    def to_dict(self) -> dict:
        out = asdict(self)
        out["budgets"] = [list(b) for b in self.budgets]
        return out


@dataclass(frozen=True)
class SweepRow:
    W: int
    L: int
    capacity: int
    atoms: int
    wp: float
    ci: float
    eps: float
    seconds: float
    error: str | None = field(default=None, compare=False)

    @property
    def failed(self) -> bool:
        return self.error is not None

    def csv_fields(self) -> list[str]:
        return [str(self.W), str(self.L), str(self.capacity), str(self.atoms),
                repr(self.wp), repr(self.ci), repr(self.eps), repr(self.seconds)]


@dataclass(frozen=True)
class SweepResult:
    rows: list
    slope: float | None
    residual: float | None
    note: str = ""

    @property
    def n_failed(self) -> int:
        return sum(r.failed for r in self.rows)


# ---------------------------------------------------------------------------
# Config handling
# ---------------------------------------------------------------------------

_REQUIRED = ("target", "p", "budgets")
_FIELDS = {f for f in SweepConfig.__dataclass_fields__}


def _fail(where: str, name: str, msg: str):
    raise ConfigError(f"{where}: field '{name}': {msg}")


def validate_config(raw: dict, where: str = "<config>") -> SweepConfig:
    """Check a raw mapping and return the normalized config (budgets sorted by W^2 L)."""
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected a mapping at top level")
    for name in _REQUIRED:
        if name not in raw:
            _fail(where, name, "missing required field")
    unknown = sorted(set(raw) - _FIELDS)
    if unknown:
        _fail(where, unknown[0], "unknown field")
    try:
        sampler = sampler_from_spec(raw["target"])
    except (RelugenError, KeyError, TypeError, ValueError) as exc:
        _fail(where, "target", f"invalid target spec ({exc})")
    d = sampler.dim
    try:
        SourceDistribution.parse(str(raw.get("source", "uniform:0,1")))
    except (RelugenError, ValueError) as exc:
        _fail(where, "source", str(exc))

    def number(name, default, lo=None, integer=False, allow_none=False):
        val = raw.get(name, default)
        if val is None and allow_none:
            return None
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            _fail(where, name, f"expected a number, got {val!r}")
        if integer and int(val) != val:
            _fail(where, name, f"expected an integer, got {val!r}")
        if lo is not None and not val >= lo:
            _fail(where, name, f"must be >= {lo}")
        return int(val) if integer else float(val)

    p = number("p", None, lo=1.0)
    q = number("q", 10.0)
    if not q > p:
        _fail(where, "q", f"must exceed p={p}")
    budgets = raw["budgets"]
    if not isinstance(budgets, (list, tuple)) or not budgets:
        _fail(where, "budgets", "expected a nonempty list of [W, L] pairs")
    pairs = []
    for k, b in enumerate(budgets):
        if not isinstance(b, (list, tuple)) or len(b) != 2 or not all(isinstance(v, int) for v in b):
            _fail(where, f"budgets[{k}]", f"expected [W, L] integers, got {b!r}")
        W, L = b
        if W < 7 * d + 1 or L < 2:
            _fail(where, f"budgets[{k}]", f"need W >= {7 * d + 1} and L >= 2 for d={d}, got {b!r}")
        pairs.append((W, L))
    pairs.sort(key=lambda wl: (wl[0] ** 2 * wl[1], wl))
    eps = number("epsilon", None, allow_none=True)
    if eps is not None and not eps > 0:
        _fail(where, "epsilon", "must be positive")
    stratified = raw.get("stratified", True)
    if not isinstance(stratified, bool):
        _fail(where, "stratified", "expected true or false")
    out = raw.get("out")
    if out is not None and not isinstance(out, str):
        _fail(where, "out", "expected a path string")
    return SweepConfig(
        target=dict(raw["target"]),
        source=str(raw.get("source", "uniform:0,1")),
        p=p,
        q=q,
        budgets=tuple(pairs),
        mc_batch=number("mc_batch", 1000, lo=2, integer=True),
        mc_reps=number("mc_reps", 10, lo=3, integer=True),
        target_samples=number("target_samples", 10_000, lo=1, integer=True),
        seed=number("seed", 0, integer=True),
        epsilon=eps,
        stratified=stratified,
        out=out,
    )


def load_config(path: str | Path) -> SweepConfig:
    """Read a TOML or JSON config file."""
    path = Path(path)
    text = path.read_text()
    try:
        if path.suffix.lower() == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:  # Python < 3.11
                import tomli as tomllib
            raw = tomllib.loads(text)
        else:
            raw = json.loads(text)
    except ValueError as exc:
        raise ConfigError(f"{path}: cannot parse ({exc})") from exc
    return validate_config(raw, str(path))


def save_config(cfg: SweepConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))


# ---------------------------------------------------------------------------
# Pipelines
# ---------------------------------------------------------------------------


def _fit_slope(rows: list[SweepRow], floor: float = 0.0) -> tuple[float | None, float | None, str]:
    """Log-log slope of wp against W^2 L over rows with error above ``floor``.

    ``floor`` is the round-off level of the compiled networks; errors at or
    below it carry no rate information.
    """
    good = [r for r in rows if not r.failed and r.wp > floor and math.isfinite(r.wp)]
    if len(rows) >= 5 and good and good[0] is rows[0]:
        good = good[1:]  # the smallest budget sits in the pre-asymptotic regime
    if len(good) < 2:
        return None, None, "slope undefined: fewer than two rows with error above round-off"
    x = np.log([r.W**2 * r.L for r in good])
    y = np.log([r.wp for r in good])
    if np.ptp(x) == 0:
        return None, None, "slope undefined: all budgets have the same W^2 L"
    coef, res, *_ = np.polyfit(x, y, 1, full=True)
    resid = float(np.sqrt(res[0] / len(x))) if len(res) else 0.0
    return float(coef[0]), resid, ""


def run_row(cfg: SweepConfig, W: int, L: int, row_seed: int) -> SweepRow:
    """Quantize the target to the budget's capacity, build the generator, measure W_p."""
    sampler = sampler_from_spec(cfg.target)
    source = SourceDistribution.parse(cfg.source)
    budget = NetworkBudget(W, L, sampler.dim)
    n_cap = capacity(budget)
    t0 = time.perf_counter()
    try:
        draw = sampler.stratified_sample if cfg.stratified else sampler.sample
        samples = draw(cfg.target_samples, row_seed)
        gamma = quantize_shells(samples, n_cap, cfg.p, cfg.q)
        net, spec, _ = synthesize_network(gamma, source, cfg.epsilon, cfg.p, budget)
        pushed = PushforwardSampler(net, source)
        wp, ci = wasserstein_mc(sampler, pushed, cfg.p, cfg.mc_batch, cfg.mc_reps, row_seed, cfg.stratified)
    except (RelugenError, ValueError, RuntimeError) as exc:
        nan = float("nan")
        return SweepRow(W, L, n_cap, 0, nan, nan, nan, time.perf_counter() - t0, error=str(exc))
    return SweepRow(W, L, n_cap, gamma.size, wp, ci, spec.epsilon, time.perf_counter() - t0)


def rate_sweep(cfg: SweepConfig, progress=None) -> SweepResult:
    """One row per budget (seed + row index per row), then the log-log slope against W^2 L."""
    rows = []
    for k, (W, L) in enumerate(cfg.budgets):
        row = run_row(cfg, W, L, cfg.seed + k)
        rows.append(row)
        if progress is not None:
            progress(row)
    scale = float(np.max(np.abs(sampler_from_spec(cfg.target).sample(1000, cfg.seed))))
    slope, resid, note = _fit_slope(rows, ROUNDOFF * (1.0 + scale))
    return SweepResult(rows, slope, resid, note)


def write_csv(rows: list[SweepRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow(r.csv_fields())


def read_csv(path: str | Path) -> list[SweepRow]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_HEADER:
            raise ConfigError(f"{path}: unexpected header {header}")
        return [
            SweepRow(int(W), int(L), int(c), int(a), float(wp), float(ci), float(eps), float(sec))
            for W, L, c, a, wp, ci, eps, sec in reader
        ]


@dataclass(frozen=True)
class CircleRow:
    W: int
    L: int
    w2l: int
    atoms: int
    w1: float
    ci: float
    js: float


def circle_fdiv_demo(budgets, seed: int = 0, target_samples: int = 10_000, batch: int = 1000,
                     reps: int = 5, source: str = "uniform:0,1") -> list[CircleRow]:
    """Generators for the uniform unit circle in R^2 at growing budgets.

    W_1 to the circle shrinks with the budget while the Jensen-Shannon
    divergence between generated and circle samples stays at ln 2: the
    generator's support (points and segments) never meets the circle's
    samples.
    """
    circle = UniformSphere(1, 2)
    src = SourceDistribution.parse(source)
    js = generator("js")
    rows = []
    for k, (W, L) in enumerate(sorted(budgets, key=lambda wl: wl[0] ** 2 * wl[1])):
        budget = NetworkBudget(W, L, 2)
        row_seed = seed + k
        gamma = quantize_shells(circle.stratified_sample(target_samples, row_seed), capacity(budget), 1.0, 10.0)
        net, _, _ = synthesize_network(gamma, src, None, 1.0, budget)
        pushed = PushforwardSampler(net, src, stratified=True)
        w1, ci = wasserstein_mc(circle, pushed, 1.0, batch, reps, row_seed, stratified=True)
        gen = make_discrete(pushed.sample(batch, row_seed))
        ref = make_discrete(circle.sample(batch, row_seed + 10_000))
        value = f_divergence(gen, ref, js)
        assert value == singularity_gap(gen, ref, js)
        rows.append(CircleRow(W, L, W * W * L, gamma.size, w1, ci, value))
    return rows
