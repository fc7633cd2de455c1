"""Command line front end: ``shefluct <subcommand> [scenario.json] [options]``.

Exit status: 0 success, 2 malformed configuration, 3 failed ``--check``
assertion (or too few usable sweep points), 4 too many solver blow-ups.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

from . import expansion, solver
from .harness.engine import default_workers
from .harness.experiments import (
    BlowUpThresholdError,
    InsufficientDataError,
    covariance_check,
    divergence_sweep,
    estimate_dict,
    rate_sweep,
    run_moment_estimate,
    survival_curve,
    survival_monotone,
)
from .harness.regimes import RegimeSchedule
from .harness.scenario import PRESETS, ConfigError, Scenario, scenario_from_document
from .io import write_manifest, write_table
from .noise import NoisePath

log = logging.getLogger("shefluct")

EXIT_CONFIG, EXIT_CHECK, EXIT_BLOWUP = 2, 3, 4


def _load(path: str | None) -> tuple[dict, Scenario]:
    if path is None:
        doc = {"schema": 1}
    else:
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read scenario file: {exc}") from None
    return doc, scenario_from_document(doc)


def _schedule(exp: dict, sc: Scenario) -> RegimeSchedule:
    if "schedule" in exp:
        return RegimeSchedule.from_dict(exp["schedule"])
    return RegimeSchedule.fixed(sc.delta)


def _cmd_presets(args, doc, sc, out):
    listing = {name: p.to_dict() for name, p in PRESETS.items()}
    print(json.dumps(listing, indent=2))
    return 0, {"presets": sorted(listing)}


def _cmd_simulate(args, doc, sc, out):
    grid = sc.grid()
    path = NoisePath(grid, args.seed, sc.dt, sc.steps, grid.d if sc.conservative else 1)
    cfg = solver.SolverConfig(sc.eps, sc.delta, sc.dt, sc.steps, sc.conservative, sc.gamma,
                              sc.gamma_margin, args.seed, sc.n_moll, sc.dealias)
    traj = solver.simulate(cfg, sc.G(), sc.initial(), path)
    traj.export(out / "trajectory")
    return 0, {"stop_index": traj.stop_index}


def _cmd_expand(args, doc, sc, out):
    grid = sc.grid()
    path = NoisePath(grid, args.seed, sc.dt, sc.steps, grid.d if sc.conservative else 1)
    stack = expansion.solve_coefficients(sc.n, sc.G(), sc.initial(), path, sc.delta, sc.conservative,
                                         gamma=sc.gamma, gamma_margin=sc.gamma_margin,
                                         n_moll=sc.n_moll, dealias=sc.dealias)
    stack.export(out / "stack")
    return 0, {"order": stack.order}


def _cmd_remainder(args, doc, sc, out):
    exp = doc.get("experiment", {})
    est = run_moment_estimate(sc, exp.get("estimator", "pointwise-sup"), args.replicas, args.seed,
                              p=exp.get("p", 2.0), quantity=exp.get("quantity", "remainder"),
                              workers=args.workers)
    write_table(out / "results.csv", [est.row()])
    return 0, {"estimate": estimate_dict(est)}


def _cmd_rates(args, doc, sc, out):
    exp = doc.get("experiment", {})
    if "epsilons" not in exp:
        raise ConfigError("'epsilons' is a required property", "$.experiment")
    rep = rate_sweep(sc, exp["epsilons"], _schedule(exp, sc), sc.n, exp.get("p", 2.0), args.replicas,
                     args.seed, estimator=exp.get("estimator"), tolerance=exp.get("tolerance", 0.1),
                     workers=args.workers)
    write_table(out / "results.csv", rep.rows())
    print(f"slope {rep.slope:.3f} (95% CI {rep.ci[0]:.3f}..{rep.ci[1]:.3f}), predicted {rep.predicted:.3f}")
    return (0 if rep.passed or not args.check else EXIT_CHECK), {"report": rep.summary()}


def _cmd_divergence(args, doc, sc, out):
    exp = doc.get("experiment", {})
    if "deltas" not in exp:
        raise ConfigError("'deltas' is a required property", "$.experiment")
    rep = divergence_sweep(sc, exp["deltas"], max(sc.n, 1), exp.get("p", 2.0), args.replicas,
                           exp.get("case"), args.seed, estimator=exp.get("estimator", "terminal-mean"),
                           max_spread=exp.get("max_ratio_spread", 10.0), workers=args.workers)
    write_table(out / "results.csv", rep.rows())
    ok = rep.passed
    if "min_r2" in exp:
        ok = ok and rep.extras["r2"] >= exp["min_r2"]
    print(f"ratio spread {rep.extras['spread']:.3f}, affine R^2 {rep.extras['r2']:.4f}")
    return (0 if ok or not args.check else EXIT_CHECK), {"report": rep.summary()}


def _cmd_survival(args, doc, sc, out):
    exp = doc.get("experiment", {})
    if "epsilons" not in exp:
        raise ConfigError("'epsilons' is a required property", "$.experiment")
    if sc.gamma is None:
        raise ConfigError("survival needs a stopping margin gamma", "$.scenario.gamma")
    pts = survival_curve(sc, sc.gamma, exp["epsilons"], _schedule(exp, sc), args.replicas, args.seed,
                         workers=args.workers)
    write_table(out / "results.csv", [pt.row() for pt in pts])
    ok = survival_monotone(pts) and pts[-1].fraction >= exp.get("min_final_survival", 0.99)
    for pt in pts:
        print(f"eps={pt.eps!r} delta={pt.delta!r} survival={pt.fraction:.4f} CI=({pt.ci[0]:.4f}, {pt.ci[1]:.4f})")
    return (0 if ok or not args.check else EXIT_CHECK), {
        "points": [{"eps": p.eps, "delta": p.delta, "fraction": p.fraction, "ci": list(p.ci),
                    "eps_threshold": p.eps_threshold if math.isfinite(p.eps_threshold) else None} for p in pts]
    }


def _cmd_covariance(args, doc, sc, out):
    samples = doc.get("experiment", {}).get("samples", args.replicas)
    res = covariance_check(sc, samples, args.seed)
    print(json.dumps(res, indent=2))
    return (0 if res["passed"] else EXIT_CHECK), {"covariance": res}


COMMANDS = {
    "simulate": (_cmd_simulate, "integrate one trajectory and dump it"),
    "expand": (_cmd_expand, "compute expansion coefficients on one noise path"),
    "remainder": (_cmd_remainder, "Monte Carlo moment of the remainder"),
    "rates": (_cmd_rates, "fit the remainder rate over an eps sweep"),
    "divergence": (_cmd_divergence, "coefficient moments across delta"),
    "survival": (_cmd_survival, "empirical survival of the stopping time"),
    "covariance-check": (_cmd_covariance, "per-mode variance test of the noise"),
    "presets": (_cmd_presets, "list application presets"),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="shefluct", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config", nargs="?", help="JSON scenario file (schema 1)")
        sp.add_argument("--seed", type=int, default=0, help="master seed")
        sp.add_argument("--replicas", type=int, default=200, help="Monte Carlo sample count M")
        sp.add_argument("--out", type=Path, default=Path("shefluct-out"), help="output directory")
        sp.add_argument("--workers", type=int, default=None,
                        help="worker processes (default: $SHEFLUCT_WORKERS or 1)")
        sp.add_argument("--check", action="store_true", help="exit 3 when the acceptance assertion fails")
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    handler, _ = COMMANDS[args.command]
    needs_file = args.command not in ("presets", "covariance-check")
    if needs_file and args.config is None:
        print(f"error: {args.command} requires a scenario file", file=sys.stderr)
        return EXIT_CONFIG
    if args.workers is None:
        args.workers = default_workers()
    t0 = time.perf_counter()
    try:
        doc, sc = _load(args.config)
        status, summary = handler(args, doc, sc, args.out)
    except ConfigError as exc:
        print(f"config error at {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BlowUpThresholdError, solver.BlowUpError) as exc:
        print(f"blow-up: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except InsufficientDataError as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except (ValueError, KeyError) as exc:
        print(f"config error at $: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    config = {"command": args.command, "document": doc, "scenario": sc.to_dict(), "seed": args.seed,
              "replicas": args.replicas, "workers": args.workers}
    write_manifest(args.out / "manifest.json", config, time.perf_counter() - t0,
                   {"result": summary, "status": status})
    return status


if __name__ == "__main__":
    sys.exit(main())
