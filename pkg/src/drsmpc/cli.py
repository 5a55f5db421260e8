"""Command-line entry point: ``drsmpc {simulate,monte-carlo,conservatism,tightening}``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .harness import (ExperimentConfig, build_controller, export, horizon_conservatism, load_config,
                      run_monte_carlo, run_paired, summary, _json_default)
from .regret import regret_series
from .tightening import psi_dr, psi_gaussian

MODES = ("dr", "gaussian", "empirical")


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "runs", None) is not None:
        updates["runs"] = args.runs
    return dataclasses.replace(cfg, **updates) if updates else cfg


def _emit(data, out: Path | None, name: str):
    text = json.dumps(data, indent=2, sort_keys=True, default=_json_default)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text + "\n")
    print(text)


def cmd_simulate(args) -> int:
    cfg = _config(args)
    if args.mode:
        cfg = dataclasses.replace(cfg, informed_mode=args.mode)
    star = build_controller(cfg, cfg.informed_mode, "fully_informed")
    dagger = build_controller(cfg, cfg.dr_mode, "dr")
    run = run_paired(cfg, star, dagger)
    model = star.model
    series = regret_series(run.star, run.dagger, model.Q, model.R)
    cons = horizon_conservatism(cfg)
    extra = {
        "x0": list(cfg.x0),
        "seed": cfg.seed,
        "informed_mode": cfg.informed_mode,
        "psi_informed": star.tightening.psis.tolist(),
        "psi_gaussian_reference": star.tightening.reference_psis.tolist(),
        "psi_dr": dagger.tightening.psis.tolist(),
    }
    data = summary(run, series, conservatism={k: cons[k] for k in ("value", "std_error", "flags")},
                   extra=extra)
    out = Path(args.out)
    export(run, series, out, dt=model.dt, summary_data=data)
    print(json.dumps(data, indent=2, sort_keys=True, default=_json_default))
    return 0


def cmd_monte_carlo(args) -> int:
    cfg = _config(args)
    mode = args.mode or cfg.dr_mode
    stats = run_monte_carlo(cfg, cfg.runs, mode=mode, n_jobs=args.jobs)
    data = dataclasses.asdict(stats)
    data.update(mode=mode, risk=cfg.risk, seed=cfg.seed)
    _emit(data, Path(args.out) if args.out else None, "monte_carlo.json")
    return 0


def cmd_conservatism(args) -> int:
    cfg = _config(args)
    data = horizon_conservatism(cfg, mode=args.mode or cfg.informed_mode, n_samples=args.samples)
    if args.stage is not None:
        if not 1 <= args.stage <= cfg.N:
            print(f"stage must lie in 1..{cfg.N}", file=sys.stderr)
            return 2
        data = dict(data["per_stage"][args.stage - 1], stage=args.stage, mode=data["mode"])
    _emit(data, Path(args.out) if args.out else None, "conservatism.json")
    return 0


def cmd_tightening(args) -> int:
    deltas = np.array(args.deltas) if args.deltas else np.array([0.5, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.001])
    print(f"{'delta':>10} {'psi_dr':>14} {'psi_gaussian':>14}")
    for d in deltas:
        print(f"{d:>10.4g} {psi_dr(d):>14.8f} {psi_gaussian(d):>14.8f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drsmpc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default=None):
        p.add_argument("--config", help="JSON file with experiment settings")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--out", default=out_default, help="output directory")
        p.add_argument("--mode", choices=MODES, help="tightening rule (see subcommand help)")

    p = sub.add_parser("simulate", help="one paired closed-loop run with regret series")
    common(p, out_default="out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("monte-carlo", help="empirical violation rate of one controller")
    common(p)
    p.add_argument("--runs", type=int, help="number of closed-loop runs")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.set_defaults(func=cmd_monte_carlo)

    p = sub.add_parser("conservatism", help="erosion volume of exact vs robust tightened sets")
    common(p)
    p.add_argument("--stage", type=int, help="report a single prediction stage (1..N)")
    p.add_argument("--samples", type=int, default=1_000_000, help="Monte-Carlo samples if needed")
    p.set_defaults(func=cmd_conservatism)

    p = sub.add_parser("tightening", help="print tightening constants over a risk grid")
    p.add_argument("deltas", nargs="*", type=float)
    p.set_defaults(func=cmd_tightening)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
