"""Command-line front end producing reproducible CSV/JSON artifacts.

Every subcommand writes its results next to a JSON manifest recording the
full parameter set, so re-running a manifest reproduces the outputs
byte-identically.  Analysis findings (infeasible profiles, negative bounds)
are data, not errors; only structural problems exit nonzero.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import bound_report, bound_reports_to_csv
from .core import InstanceSpec, Mechanism, load_instance, run_instance, save_instance
from .dynamics import DynamicsConfig, run_cdf_ensemble, run_two_phase
from .instances import (
    AdviceSpec,
    ImpossibilityParams,
    impossibility_instance,
    ml_advice,
    motivating_example,
    random_separated_instance,
    region_example_instance,
    tightness_instance,
)
from .search import GridSpec, map_uniform_region, worst_case_general, worst_case_uniform
from .welfare import build_report, efficient_outcome, empirical_cdf, fmt, report_to_csv, welfare_loss


def _write_with_manifest(out: Path, text: str, subcommand: str, params: dict) -> None:
    out = Path(out)
    out.write_text(text)
    manifest = {
        "subcommand": subcommand,
        "params": params,
        "outputs": [out.name],
        "version": __version__,
    }
    out.with_suffix(out.suffix + ".manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )


def _parse_floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _parse_ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _grid(args) -> GridSpec:
    lo, hi, points = args.grid.split(":")
    return GridSpec(float(lo), float(hi), int(points))


def _apply_advice(instance: InstanceSpec, args) -> InstanceSpec:
    if getattr(args, "beta_advice", None):
        reserves, _ = ml_advice(
            instance.values, AdviceSpec(args.beta_advice, args.seed)
        )
        return instance.with_reserves(reserves)
    return instance


def cmd_gen(args) -> int:
    if args.kind == "motivating":
        instance = motivating_example(args.v)
    elif args.kind == "tightness":
        instance, _ = tightness_instance(args.beta, args.alpha1, args.gamma, args.eps, args.y)
    elif args.kind == "impossibility":
        params = ImpossibilityParams(k=args.k, beta=args.beta, alpha_0=args.alpha0, gamma=args.gamma)
        instance, _, _ = impossibility_instance(params)
    elif args.kind == "region-example":
        instance = region_example_instance(args.beta)
    elif args.kind == "random-separated":
        instance = random_separated_instance(
            args.n, args.m, args.delta, args.slots_max, args.seed
        )
    else:
        raise SystemExit(f"unknown kind {args.kind!r}")
    out = Path(args.out)
    save_instance(instance, out)
    manifest = {
        "subcommand": "gen",
        "params": {k: v for k, v in vars(args).items() if k != "func"},
        "outputs": [out.name],
        "version": __version__,
    }
    out.with_suffix(out.suffix + ".manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )
    return 0


def cmd_run(args) -> int:
    instance = _apply_advice(load_instance(args.instance), args)
    mechanism = Mechanism.parse(args.mechanism)
    if args.alphas:
        alphas = np.asarray(_parse_floats(args.alphas))
        bids = alphas[:, None] * instance.values
    elif args.bids:
        bids = np.asarray(json.loads(Path(args.bids).read_text()), dtype=np.float64)
    else:
        bids = instance.values.copy()  # truthful by default
    report = build_report(instance, bids, mechanism, args.tolerance)
    text = report_to_csv(report)
    if args.bounds is not None:
        opt = efficient_outcome(instance)
        reports = []
        for i in range(instance.n_bidders):
            if opt.opt_per_bidder[i] <= 0:
                continue
            alpha_i = float(alphas[i]) if args.alphas else args.bounds
            if alpha_i > 1.0 and 0.0 < args.beta_bound < 1.0:
                reports.append(
                    bound_report(instance, i, alpha_i, args.beta_bound, opt=opt)
                )
        text += bound_reports_to_csv(reports)
    _write_with_manifest(args.out, text, "run", {k: v for k, v in vars(args).items() if k != "func"})
    return 0


def cmd_bounds(args) -> int:
    instance = _apply_advice(load_instance(args.instance), args)
    reports = [
        bound_report(instance, args.bidder, args.alpha, args.beta, cap=args.cap)
    ]
    _write_with_manifest(
        args.out,
        bound_reports_to_csv(reports),
        "bounds",
        {k: v for k, v in vars(args).items() if k != "func"},
    )
    return 0


def cmd_region(args) -> int:
    instance = _apply_advice(load_instance(args.instance), args)
    region = map_uniform_region(
        instance,
        Mechanism.parse(args.mechanism),
        _grid(args),
        designated=args.bidder,
        tolerance=args.tolerance,
    )
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    n = instance.n_bidders
    writer.writerow([*(f"alpha_{i}" for i in range(n)), "feasible", "pattern", "ratio"])
    for row, feas, pattern, ratio in zip(
        region.alphas, region.feasible, region.patterns, region.ratios
    ):
        writer.writerow([*(fmt(a) for a in row), int(feas), pattern, fmt(ratio)])
    _write_with_manifest(args.out, out.getvalue(), "region", {k: v for k, v in vars(args).items() if k != "func"})
    return 0


def cmd_worst_case(args) -> int:
    instance = _apply_advice(load_instance(args.instance), args)
    mechanism = Mechanism.parse(args.mechanism)
    if args.general:
        bid_i = args.alpha * instance.values[args.bidder]
        wc = worst_case_general(
            instance,
            mechanism,
            args.bidder,
            bid_i,
            n_samples=args.samples,
            seed=args.seed,
            undominated=mechanism is not Mechanism.VCG,
            tolerance=args.tolerance,
        )
    else:
        wc = worst_case_uniform(
            instance,
            mechanism,
            args.bidder,
            args.alpha,
            _grid(args),
            tolerance=args.tolerance,
        )
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["bidder", "alpha", "mechanism", "min_ratio", "n_feasible", "empty"])
    writer.writerow(
        [
            args.bidder,
            fmt(args.alpha),
            mechanism.value,
            "nan" if wc.empty else fmt(wc.ratio),
            wc.n_feasible,
            int(wc.empty),
        ]
    )
    _write_with_manifest(args.out, out.getvalue(), "worst-case", {k: v for k, v in vars(args).items() if k != "func"})
    return 0


def cmd_dynamics(args) -> int:
    config = DynamicsConfig(
        rounds_per_phase=args.phase_rounds,
        eta0=args.eta0,
        mechanism=Mechanism.parse(args.mechanism),
    )
    params = {k: v for k, v in vars(args).items() if k != "func"}
    if args.betas:
        result = run_cdf_ensemble(
            seeds=range(args.seed, args.seed + args.seeds),
            betas=_parse_floats(args.betas),
            z=args.z,
            config=config,
            n_bidders=args.n,
            n_auctions=args.m,
            slots_max=args.slots_max,
        )
        _write_with_manifest(args.out, result.to_csv(), "dynamics", params)
        return 0
    if not args.instance:
        raise SystemExit("dynamics needs either --betas (ensemble) or an instance file")
    instance = load_instance(args.instance)
    trace = run_two_phase(instance, args.beta, config, advice_seed=args.seed)
    _write_with_manifest(args.out, trace.to_csv(), "dynamics", params)
    return 0


def cmd_impossibility(args) -> int:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["k", "loss_ratio", "bound", "max_roas_violation"])
    for k in _parse_ints(args.k):
        params = ImpossibilityParams(k=k, beta=args.beta, alpha_0=args.alpha0, gamma=args.gamma)
        instance, bidder, profile = impossibility_instance(params)
        result = run_instance(instance, profile[:, None] * instance.values, Mechanism.VCG)
        opt = efficient_outcome(instance)
        loss = welfare_loss(instance, result, bidder, opt)
        slacks = result.welfare_totals() - result.payment_totals()
        writer.writerow(
            [
                k,
                fmt(loss / opt.opt_minus[bidder]),
                fmt((1.0 - args.beta) / (args.alpha0 - 1.0)),
                fmt(max(0.0, float(-slacks.min()))),
            ]
        )
    _write_with_manifest(args.out, out.getvalue(), "impossibility", {k: v for k, v in vars(args).items() if k != "func"})
    return 0


def cmd_cdf(args) -> int:
    with open(args.ratios) as fh:
        rows = list(csv.DictReader(fh))
    ratios = [float(r[args.column]) for r in rows if r[args.column] not in ("", "nan")]
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["z", "theta"])
    for z in _parse_floats(args.z):
        writer.writerow([fmt(z), fmt(empirical_cdf(ratios, z))])
    _write_with_manifest(args.out, out.getvalue(), "cdf", {k: v for k, v in vars(args).items() if k != "func"})
    return 0


def cmd_replay(args) -> int:
    """Re-run a recorded manifest; outputs reproduce byte-identically."""
    manifest = json.loads(Path(args.manifest).read_text())
    handlers = {
        "gen": cmd_gen,
        "run": cmd_run,
        "bounds": cmd_bounds,
        "region": cmd_region,
        "worst-case": cmd_worst_case,
        "dynamics": cmd_dynamics,
        "impossibility": cmd_impossibility,
        "cdf": cmd_cdf,
    }
    params = dict(manifest["params"])
    if args.out:
        params["out"] = args.out
    return handlers[manifest["subcommand"]](argparse.Namespace(**params))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="autobid",
        description="parallel position auction simulation and bound verification",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", required=True, help="output file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--tolerance", type=float, default=1e-9)

    p = sub.add_parser("gen", help="generate a named instance file")
    p.add_argument("--kind", required=True,
                   choices=["motivating", "tightness", "impossibility", "region-example", "random-separated"])
    p.add_argument("--v", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--alpha1", type=float, default=2.0)
    p.add_argument("--alpha0", type=float, default=2.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--y", type=float, default=1.0)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--m", type=int, default=3)
    p.add_argument("--delta", type=float, default=2.0)
    p.add_argument("--slots-max", type=int, default=2)
    common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("run", help="evaluate one bid profile, emit a welfare report")
    p.add_argument("instance")
    p.add_argument("--alphas", help="comma-separated uniform multipliers")
    p.add_argument("--bids", help="JSON file with an N x M bid matrix")
    p.add_argument("--mechanism", default="vcg")
    p.add_argument("--beta-advice", type=float, help="draw advice reserves at this accuracy")
    p.add_argument("--bounds", type=float, nargs="?", const=2.0,
                   help="append bound columns (value = fallback multiplier)")
    p.add_argument("--beta-bound", type=float, default=0.5)
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bounds", help="closed-form bound report for one bidder")
    p.add_argument("instance")
    p.add_argument("--bidder", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--beta-advice", type=float)
    p.add_argument("--cap", type=int, default=12)
    common(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("region", help="feasible-region map over uniform multipliers")
    p.add_argument("instance")
    p.add_argument("--mechanism", default="vcg")
    p.add_argument("--grid", default="1:5:401", help="lo:hi:points")
    p.add_argument("--bidder", type=int, default=0)
    p.add_argument("--beta-advice", type=float)
    common(p)
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("worst-case", help="worst feasible welfare ratio for one bidder")
    p.add_argument("instance")
    p.add_argument("--bidder", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--mechanism", default="vcg")
    p.add_argument("--grid", default="1:5:401")
    p.add_argument("--general", action="store_true", help="sampled general bids instead of the uniform grid")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--beta-advice", type=float)
    common(p)
    p.set_defaults(func=cmd_worst_case)

    p = sub.add_parser("dynamics", help="two-phase gradient-descent bidding dynamics")
    p.add_argument("instance", nargs="?")
    p.add_argument("--phase-rounds", type=int, default=500)
    p.add_argument("--eta0", type=float, default=0.3)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--betas", help="comma-separated accuracies for ensemble mode")
    p.add_argument("--seeds", type=int, default=20, help="ensemble size")
    p.add_argument("--z", type=float, default=0.8)
    p.add_argument("--n", type=int, default=30)
    p.add_argument("--m", type=int, default=50)
    p.add_argument("--slots-max", type=int, default=3)
    p.add_argument("--mechanism", default="vcg")
    common(p)
    p.set_defaults(func=cmd_dynamics)

    p = sub.add_parser("impossibility", help="loss ratio and ROAS violation vs K")
    p.add_argument("--k", default="10,50,200", help="comma-separated K values")
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--alpha0", type=float, default=2.0)
    p.add_argument("--gamma", type=float, default=1.0)
    common(p)
    p.set_defaults(func=cmd_impossibility)

    p = sub.add_parser("cdf", help="empirical cdf of welfare ratios")
    p.add_argument("--ratios", required=True, help="CSV file with a ratio column")
    p.add_argument("--column", default="ratio")
    p.add_argument("--z", default="0.8", help="comma-separated thresholds")
    common(p)
    p.set_defaults(func=cmd_cdf)

    p = sub.add_parser("replay", help="re-run a recorded manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help="override the recorded output path")
    p.set_defaults(func=cmd_replay)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
