"""Command-line interface: run scenarios, batch them, verify, print metrics."""
from __future__ import annotations

import argparse
import glob
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .aircraft import AeroParams, glide_metrics
from .errors import PathwingError
from .scenario import load_scenario
from .simulate import run_scenario


def _cmd_run(args) -> int:
    scn = load_scenario(args.scenario)
    result = run_scenario(scn, duration=args.duration, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result.log.to_csv(out / f"{scn.name}_log.csv")
    summary_path = out / f"{scn.name}_summary.json"
    summary_path.write_text(json.dumps(result.summary, indent=2) + "\n")
    steady = result.summary.get("steady", {})
    print(f"scenario:        {scn.name}")
    print(f"steps:           {result.summary['n_steps']}")
    print(f"steady mean |y|: {steady.get('mean_y_m', float('nan')):.3f} m")
    print(f"steady max |y|:  {steady.get('max_y_m', float('nan')):.3f} m")
    print(f"steady max |beta|: {steady.get('max_beta_deg', float('nan')):.2f} deg")
    print(f"thrust saturation duty: {result.summary['thrust_sat_duty']:.3f}")
    print(f"log:     {out / (scn.name + '_log.csv')}")
    print(f"summary: {summary_path}")
    if result.aborted:
        print("run ABORTED on non-finite state", file=sys.stderr)
        return 2
    return 0


def _run_one(job) -> tuple[str, bool]:
    path, out_dir, seed = job
    scn = load_scenario(path)
    result = run_scenario(scn, seed=seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result.log.to_csv(out / f"{scn.name}_log.csv")
    (out / f"{scn.name}_summary.json").write_text(
        json.dumps(result.summary, indent=2) + "\n")
    return scn.name, not result.aborted


def _cmd_batch(args) -> int:
    paths = sorted(glob.glob(args.scenarios))
    if not paths:
        print(f"no scenario files match {args.scenarios!r}", file=sys.stderr)
        return 1
    jobs = [(p, args.out, args.seed) for p in paths]
    ok = True
    if args.parallel > 1:
        with ProcessPoolExecutor(max_workers=args.parallel) as pool:
            for name, good in pool.map(_run_one, jobs):
                print(f"{'ok  ' if good else 'FAIL'} {name}")
                ok = ok and good
    else:
        for job in jobs:
            name, good = _run_one(job)
            print(f"{'ok  ' if good else 'FAIL'} {name}")
            ok = ok and good
    return 0 if ok else 2


def _cmd_verify(args) -> int:
    from .oracles import run_verification_suite

    results = run_verification_suite(fast=args.fast)
    failed = 0
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"[{status}] {r.name}: {r.detail}")
        failed += 0 if r.passed else 1
    if failed:
        print(f"{failed}/{len(results)} checks failed", file=sys.stderr)
        return 1
    print(f"all {len(results)} checks passed")
    return 0


def _cmd_metrics(args) -> int:
    params = AeroParams(mass=args.mass, c0=args.c0, c1=args.c1)
    gm = glide_metrics(params, g0=args.g0)
    print(f"c0 = {params.c0}, c1 = {params.c1}, c0bar = {params.c0bar}, "
          f"m = {params.mass} kg, g0 = {args.g0} m/s^2")
    print(f"glide ratio (approx): {gm.glide_ratio:.3f}")
    print(f"glide ratio (exact):  {gm.glide_ratio_exact:.3f}")
    print(f"glide speed:          {gm.glide_speed:.3f} m/s")
    print(f"sink rate:            {gm.sink_rate:.3f} m/s")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pathwing",
        description="Fixed-wing path-following workbench: closed-loop runs, "
                    "verification oracles, and glide metrics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario file")
    p_run.add_argument("--scenario", required=True, help="scenario YAML file")
    p_run.add_argument("--out", default="out", help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="noise seed override")
    p_run.add_argument("--duration", type=float, default=None,
                       help="duration override in seconds")
    p_run.set_defaults(func=_cmd_run)

    p_batch = sub.add_parser("batch", help="run every scenario matching a glob")
    p_batch.add_argument("--scenarios", required=True, help="glob of scenario files")
    p_batch.add_argument("--out", default="out", help="output directory")
    p_batch.add_argument("--parallel", type=int, default=1, help="worker processes")
    p_batch.add_argument("--seed", type=int, default=None)
    p_batch.set_defaults(func=_cmd_batch)

    p_verify = sub.add_parser("verify", help="run the verification-oracle suite")
    p_verify.add_argument("--fast", action="store_true",
                          help="reduced fuzz grid for quick checks")
    p_verify.set_defaults(func=_cmd_verify)

    p_metrics = sub.add_parser("metrics", help="print glide metrics for coefficients")
    p_metrics.add_argument("--c0", type=float, default=0.006)
    p_metrics.add_argument("--c1", type=float, default=0.5)
    p_metrics.add_argument("--mass", type=float, default=2.0)
    p_metrics.add_argument("--g0", type=float, default=9.81)
    p_metrics.set_defaults(func=_cmd_metrics)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PathwingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
