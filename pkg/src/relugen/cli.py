"""Command-line entry point: ``relugen <subcommand> ...``.

Exit codes: 0 success, 2 invalid input or configuration, 3 when a sweep
finished with failed rows.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .compiler import NetworkBudget, capacity
from .dimension import estimate_lower_dimension, estimate_minkowski, estimate_upper_dimension
from .errors import RelugenError
from .experiments import circle_fdiv_demo, load_config, rate_sweep, write_csv
from .measures import DiscreteTarget, SourceDistribution, load_measure, load_target, save_measure
from .metrics import f_divergence, generator, kr_dual_check, wasserstein_1d, wasserstein_discrete
from .quantize import quantize_cover, quantize_shells
from .transport import certify, synthesize_network

EXIT_OK, EXIT_INVALID, EXIT_ROWS = 0, 2, 3


def _emit(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _cmd_synthesize(args) -> int:
    sampler = load_target(args.target)
    source = SourceDistribution.parse(args.source)
    budget = NetworkBudget(args.width, args.depth, sampler.dim)
    if isinstance(sampler, DiscreteTarget):
        target = sampler.measure
    else:
        draw = sampler.stratified_sample(args.samples, args.seed)
        target = quantize_shells(draw, capacity(budget), args.p, args.q)
    net, spec, f = synthesize_network(target, source, args.eps, args.p, budget)
    cert = certify(spec, f, net, n_samples=args.mc_samples, seed=args.seed)
    net.save(args.out)
    cert_path = args.certificate or str(Path(args.out).with_suffix(".cert.json"))
    _emit(cert.to_dict(), cert_path)
    print(f"wrote {args.out} (width {net.width}, depth {net.depth}) and {cert_path}")
    return EXIT_OK


def _cmd_discretize(args) -> int:
    sampler = load_target(args.target)
    draw = sampler.sample(args.samples, args.seed)
    quantizer = quantize_shells if args.method == "shells" else quantize_cover
    measure = quantizer(draw, args.n, args.p, args.q)
    save_measure(args.out, measure)
    print(f"wrote {args.out} ({measure.size} atoms)")
    return EXIT_OK


def _cmd_wasserstein(args) -> int:
    a, b = load_measure(args.a), load_measure(args.b)
    value, plan = wasserstein_discrete(a, b, args.p)
    report = {"value": value, "dual_gap": plan.dual_gap, "plan_nnz": plan.nnz}
    if args.p == 1:
        report["kr_gap"] = kr_dual_check(a, b, plan).gap
    if a.dim == 1:
        report["closed_form"] = wasserstein_1d(a, b, args.p)
    _emit(report, args.out)
    return EXIT_OK


def _cmd_fdiv(args) -> int:
    a, b = load_measure(args.a), load_measure(args.b)
    value = f_divergence(a, b, generator(args.gen))
    _emit({"generator": args.gen, "value": "inf" if math.isinf(value) else value}, args.out)
    return EXIT_OK


def _cmd_dimension(args) -> int:
    sampler = load_target(args.target)
    X = sampler.sample(args.samples, args.seed)
    grid = None if args.grid is None else [float(v) for v in args.grid.split(",")]
    if args.kind == "upper":
        est = estimate_upper_dimension(X, args.p, grid)
    elif args.kind == "lower":
        est = estimate_lower_dimension(X, args.delta, grid)
    else:
        est = estimate_minkowski(X, grid)
    _emit(est.to_dict(), args.out)
    return EXIT_OK


def _cmd_rate_sweep(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = type(cfg)(**{**cfg.__dict__, "seed": args.seed})
    out = args.out or cfg.out
    result = rate_sweep(cfg, progress=lambda r: print(
        f"W={r.W} L={r.L} n={r.capacity} wp={r.wp:.5g} ci={r.ci:.2g}" + (f" FAILED: {r.error}" if r.failed else ""),
        file=sys.stderr))
    if out:
        write_csv(result.rows, out)
    else:
        write_csv(result.rows, "/dev/stdout")
    summary = {"slope": result.slope, "residual": result.residual, "failed_rows": result.n_failed}
    if result.note:
        summary["note"] = result.note
    print(json.dumps(summary), file=sys.stderr)
    return EXIT_ROWS if result.n_failed else EXIT_OK


def _parse_budgets(text: str) -> list[tuple[int, int]]:
    out = []
    for item in text.split(","):
        W, _, L = item.strip().partition("x")
        out.append((int(W), int(L)))
    return out


def _cmd_circle_demo(args) -> int:
    rows = circle_fdiv_demo(_parse_budgets(args.budgets), seed=args.seed, batch=args.batch, reps=args.reps)
    lines = ["W,L,W2L,atoms,w1,ci,js"]
    lines += [f"{r.W},{r.L},{r.w2l},{r.atoms},{r.w1!r},{r.ci!r},{r.js!r}" for r in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relugen", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", help="build a generator network for a target")
    p.add_argument("--target", required=True, help="target spec JSON")
    p.add_argument("--source", default="uniform:0,1")
    p.add_argument("--eps", type=float, default=None, help="accuracy (default: half the feasible maximum)")
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--q", type=float, default=10.0)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--samples", type=int, default=10_000, help="target samples when it must be discretized")
    p.add_argument("--mc-samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--certificate", default=None)
    p.set_defaults(func=_cmd_synthesize)

    p = sub.add_parser("discretize", help="quantize a target to at most n atoms")
    p.add_argument("--target", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--q", type=float, default=10.0)
    p.add_argument("--method", choices=["shells", "cover"], default="shells")
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_discretize)

    p = sub.add_parser("wasserstein", help="exact W_p between two discrete measures")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_wasserstein)

    p = sub.add_parser("fdiv", help="f-divergence between two discrete measures")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--gen", choices=sorted(["kl", "reverse_kl", "js", "tv", "chi2"]), default="js")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_fdiv)

    p = sub.add_parser("dimension", help="covering-number dimension estimate")
    p.add_argument("--target", required=True)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--kind", choices=["upper", "lower", "minkowski"], default="upper")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--grid", default=None, help="comma-separated decreasing radii")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_dimension)

    p = sub.add_parser("rate-sweep", help="error versus W^2 L over a list of budgets")
    p.add_argument("--config", required=True, help="TOML or JSON sweep config")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="CSV path (default: config 'out' or stdout)")
    p.set_defaults(func=_cmd_rate_sweep)

    p = sub.add_parser("circle-demo", help="W_1 shrinks, Jensen-Shannon stays ln 2")
    p.add_argument("--budgets", default="15x2,15x4,15x8,15x16")
    p.add_argument("--batch", type=int, default=1000)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_circle_demo)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (RelugenError, ValueError, KeyError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
