"""Command-line interface: ``voterlab {sweep,region,check,graph}``.

Exit codes: 0 success, 1 usage or runtime error, 2 invariant-suite failure.
"""
from __future__ import annotations

import argparse
import json
import sys

from . import harness, netgen, theory

EXIT_OK, EXIT_ERROR, EXIT_CHECK_FAILED = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    # keep exit status 2 for a failed check suite
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _cmd_sweep(args) -> int:
    cfg = harness.ExperimentConfig.load(args.config)
    for name in ("out_csv", "out_json", "out_svg"):
        value = getattr(args, name)
        if value:
            setattr(cfg, name, value)
    if cfg.mode == harness.Mode.REGION.value:
        pts = harness.run_region(cfg)
        print(f"region: {len(pts)} points" + (f" -> {cfg.out_csv}" if cfg.out_csv else ""))
        return EXIT_OK
    result = harness.run_sweep(cfg)
    written = harness.emit_configured(result, cfg)
    for p in result.points:
        print(f"N={p.n:>8d}  mean={p.mean:.6g}  stderr={p.stderr:.3g}  replicas={p.replicas}"
              + (f"  censored={p.censored}" if p.censored else ""))
    pred = "none" if result.predicted_exponent is None else f"{result.predicted_exponent:.4g}"
    coef = "" if result.polylog_coefficient is None else f"  loglog={result.polylog_coefficient:.4g}"
    print(f"exponent={result.fitted_exponent:.4f} +- {result.fit_stderr:.4f}{coef}  predicted={pred}")
    if not written:
        json.dump(result.to_dict(), sys.stdout, indent=2, sort_keys=True)
        print()
    return EXIT_OK


def _cmd_region(args) -> int:
    pts = theory.region_grid(args.beta_max, args.beta_step)
    theory.write_region_csv(pts, args.out)
    held = sum(p.assumption_holds for p in pts)
    print(f"{len(pts)} points, integral condition holds at {held} -> {args.out}")
    return EXIT_OK


def _cmd_check(args) -> int:
    results = harness.run_checks(quick=args.quick)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_CHECK_FAILED


def _parse_params(text: str) -> netgen.NetworkParams:
    """``beta=2,gamma=0.3,n=1000,variant=SNR,seed=1`` or a JSON file path."""
    if "=" not in text:
        with open(text) as fh:
            d = json.load(fh)
    else:
        d = {}
        for item in text.split(","):
            key, _, value = item.partition("=")
            d[key.strip()] = value.strip()
    known = {"beta": float, "gamma": float, "n": int, "seed": int, "variant": netgen.Variant}
    unknown = set(d) - set(known)
    if unknown:
        raise ValueError(f"unknown graph parameters: {sorted(unknown)}")
    missing = {"beta", "gamma", "n"} - set(d)
    if missing:
        raise ValueError(f"missing graph parameters: {sorted(missing)}")
    conv = {k: known[k](str(v).upper() if k == "variant" else v) for k, v in d.items()}
    return netgen.NetworkParams(**conv)


def _cmd_graph(args) -> int:
    params = _parse_params(args.params)
    g = netgen.generate(params)
    netgen.write_edgelist(g, args.out)
    cd = netgen.components(g)
    print(f"n={g.n} m={g.m} components={cd.count} giant={cd.giant_size} -> {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="voterlab", description="Discursive voter model experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sweep", help="run an N-sweep from a JSON config")
    s.add_argument("--config", required=True, help="JSON file with ExperimentConfig fields")
    s.add_argument("--out-csv", dest="out_csv")
    s.add_argument("--out-json", dest="out_json")
    s.add_argument("--out-svg", dest="out_svg")
    s.set_defaults(func=_cmd_sweep)

    r = sub.add_parser("region", help="export the (beta, gamma) region grid as CSV")
    r.add_argument("--beta-max", type=float, default=4.0)
    r.add_argument("--beta-step", type=float, default=0.05)
    r.add_argument("--out", required=True)
    r.set_defaults(func=_cmd_region)

    c = sub.add_parser("check", help="run the exact-oracle invariant suite")
    c.add_argument("--quick", action="store_true", help="fewer Monte Carlo replicas")
    c.set_defaults(func=_cmd_check)

    g = sub.add_parser("graph", help="sample a graph and write its edge list")
    g.add_argument("--params", required=True,
                   help="beta=..,gamma=..,n=..[,variant=SNR][,seed=0] or a JSON file")
    g.add_argument("--out", required=True, help="edge-list output path")
    g.set_defaults(func=_cmd_graph)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"voterlab: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
