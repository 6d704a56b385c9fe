"""Command-line front end.

Subcommands:
  run       simulate one scenario file; export trajectory/footsteps CSVs,
            a summary JSON and report figures
  compare   run several controller modes on one gait and tabulate their
            push-recovery envelopes
  envelope  bisect the maximum recoverable push along one direction

Exit codes: 0 completed, 1 configuration/IO error, 2 fall. Output files are
written atomically (temp + rename). The default output directory comes from
the DCM_MPC_OUT environment variable, falling back to the current directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .plots import plot_comparison, plot_envelope, plot_time_series, plot_top_view
from .scenario_io import ScenarioFormatError, load_scenario, scenario_to_dict
from .simulator import (
    CONTROLLER_MODES,
    Scenario,
    SimLog,
    max_recoverable_push,
    run as run_scenario,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_FALL = 2

TRAJECTORY_COLUMNS = [
    "t",
    "x",
    "y",
    "z",
    "vx",
    "vy",
    "xi_x",
    "xi_y",
    "cop_x",
    "cop_y",
    "cmp_x",
    "cmp_y",
    "Hdot_x",
    "Hdot_y",
    "foothold_id",
    "push_active",
]


def _atomic_write(path: Path, writer) -> None:
    """Write through a temp file in the same directory, then rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v: float) -> str:
    return format(float(v), ".12g")


def write_trajectory_csv(log: SimLog, path: Path) -> None:
    def writer(fh):
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_COLUMNS)
        for i in range(len(log.t)):
            w.writerow(
                [
                    _fmt(log.t[i]),
                    _fmt(log.com[i, 0]),
                    _fmt(log.com[i, 1]),
                    _fmt(log.com_z[i]),
                    _fmt(log.vel[i, 0]),
                    _fmt(log.vel[i, 1]),
                    _fmt(log.dcm[i, 0]),
                    _fmt(log.dcm[i, 1]),
                    _fmt(log.cop[i, 0]),
                    _fmt(log.cop[i, 1]),
                    _fmt(log.cmp[i, 0]),
                    _fmt(log.cmp[i, 1]),
                    _fmt(log.hdot[i, 0]),
                    _fmt(log.hdot[i, 1]),
                    int(log.foothold_id[i]),
                    int(log.push_active[i]),
                ]
            )

    _atomic_write(path, writer)


def write_footsteps_csv(log: SimLog, path: Path) -> None:
    def writer(fh):
        w = csv.writer(fh)
        w.writerow(["foothold_id", "nominal_x", "nominal_y", "final_x", "final_y"])
        for i, (fin, nom) in enumerate(zip(log.footholds_final, log.nominal_footholds)):
            w.writerow([i, _fmt(nom[0]), _fmt(nom[1]), _fmt(fin[0]), _fmt(fin[1])])

    _atomic_write(path, writer)


def _summary(log: SimLog) -> dict:
    final = {}
    if log.completed and len(log.t):
        final = {
            "cop_minus_dcm": float(np.max(np.abs(log.cop[-1] - log.dcm[-1]))),
            "cop_minus_com": float(np.max(np.abs(log.cop[-1] - log.com[-1]))),
            "hdot": float(np.max(np.abs(log.hdot[-1]))),
        }
    return {
        "outcome": log.outcome,
        "fall_time": log.fall_time,
        "fall_reason": log.fall_reason,
        "peak_hdot": log.peak_hdot(),
        "max_foothold_deviation": log.max_foothold_deviation(),
        "final_residuals": final,
        "scenario": scenario_to_dict(log.scenario),
    }


def write_json(obj: dict, path: Path) -> None:
    _atomic_write(path, lambda fh: json.dump(obj, fh, indent=2, sort_keys=False))


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("DCM_MPC_OUT") or "."
    return Path(out)


def _load(args) -> Scenario:
    sc = load_scenario(args.scenario)
    if args.seed is not None:
        sc = replace(sc, seed=args.seed)
    return sc


def cmd_run(args) -> int:
    sc = _load(args)
    out = _out_dir(args)
    log = run_scenario(sc)
    write_trajectory_csv(log, out / "trajectory.csv")
    write_footsteps_csv(log, out / "footsteps.csv")
    write_json(_summary(log), out / "summary.json")
    if not args.no_plots:
        plot_top_view(log, out / "top_view.png")
        plot_time_series(log, out / "time_series.png")
    print(f"{sc.name}: {log.outcome}" + (f" ({log.fall_reason} at t={log.fall_time:.2f} s)" if log.fall_reason else ""))
    return EXIT_OK if log.completed else EXIT_FALL


def _mode_row(payload) -> dict:
    """One comparison row; module-level so worker processes can import it."""
    scenario, mode, duration, tol = payload
    sc = scenario.with_mode(mode)
    log = run_scenario(sc)
    env_x = max_recoverable_push(sc, (1.0, 0.0), duration=duration, tol=tol)
    env_y = max_recoverable_push(sc, (0.0, 1.0), duration=duration, tol=tol)
    return {
        "mode": mode,
        "outcome": log.outcome,
        "envelope_forward": env_x.magnitude,
        "envelope_lateral": env_y.magnitude,
        "peak_hdot": log.peak_hdot(),
        "max_foothold_deviation": log.max_foothold_deviation(),
    }


def cmd_compare(args) -> int:
    sc = _load(args)
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    if len(modes) < 2:
        print("compare: need at least two modes", file=sys.stderr)
        return EXIT_CONFIG
    unknown = [m for m in modes if m not in CONTROLLER_MODES]
    if unknown:
        print(f"compare: unknown modes {unknown}; choose from {sorted(CONTROLLER_MODES)}", file=sys.stderr)
        return EXIT_CONFIG
    out = _out_dir(args)
    payloads = [(sc, m, args.duration, args.tol) for m in modes]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_mode_row, payloads))
    else:
        rows = [_mode_row(p) for p in payloads]

    def writer(fh):
        w = csv.writer(fh)
        w.writerow(
            ["mode", "outcome", "envelope_forward", "envelope_lateral", "peak_hdot", "max_foothold_deviation"]
        )
        for r in rows:
            w.writerow(
                [
                    r["mode"],
                    r["outcome"],
                    _fmt(r["envelope_forward"]),
                    _fmt(r["envelope_lateral"]),
                    _fmt(r["peak_hdot"]),
                    _fmt(r["max_foothold_deviation"]),
                ]
            )

    _atomic_write(out / "comparison.csv", writer)
    if not args.no_plots:
        plot_comparison(rows, out / "comparison.png")
    for r in rows:
        print(
            f"{r['mode']:14s} {r['outcome']:9s} fwd {r['envelope_forward']:7.1f} N"
            f"  lat {r['envelope_lateral']:7.1f} N"
        )
    return EXIT_OK


def cmd_envelope(args) -> int:
    sc = _load(args)
    direction = {"x": (1.0, 0.0), "y": (0.0, 1.0)}[args.dir]
    out = _out_dir(args)
    env = max_recoverable_push(sc, direction, duration=args.duration, tol=args.tol)
    doc = {
        "direction": list(map(float, env.direction)),
        "duration": env.duration,
        "magnitude": env.magnitude,
        "bracket": list(env.bracket),
        "tolerance": env.tolerance,
        "capped": env.capped,
        "trace": [[m, bool(ok)] for m, ok in env.trace],
        "scenario": scenario_to_dict(sc),
    }
    write_json(doc, out / "envelope.json")
    if not args.no_plots:
        plot_envelope(env, out / "envelope.png")
    print(f"envelope along {args.dir}: {env.magnitude:.1f} N" + (" (at cap)" if env.capped else ""))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dcm-mpc",
        description="DCM-based walking MPC: simulate scenarios, compare controller modes, measure push envelopes.",
    )
    parser.add_argument("--jobs", type=int, default=1, help="worker processes for comparisons")
    parser.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate a scenario file")
    p_run.add_argument("scenario", help="scenario JSON path")
    p_run.add_argument("--out", default=None, help="output directory (default: $DCM_MPC_OUT or .)")
    p_run.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="compare controller modes on one gait")
    p_cmp.add_argument("scenario")
    p_cmp.add_argument("--modes", required=True, help="comma-separated mode list")
    p_cmp.add_argument("--duration", type=float, default=0.1, help="push duration (s)")
    p_cmp.add_argument("--tol", type=float, default=5.0, help="bisection tolerance (N)")
    p_cmp.add_argument("--out", default=None)
    p_cmp.add_argument("--no-plots", action="store_true")
    p_cmp.set_defaults(func=cmd_compare)

    p_env = sub.add_parser("envelope", help="maximum recoverable push along one direction")
    p_env.add_argument("scenario")
    p_env.add_argument("--dir", choices=("x", "y"), required=True)
    p_env.add_argument("--duration", type=float, default=0.1)
    p_env.add_argument("--tol", type=float, default=5.0)
    p_env.add_argument("--out", default=None)
    p_env.add_argument("--no-plots", action="store_true")
    p_env.set_defaults(func=cmd_envelope)
    return parser


def main(argv: list | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioFormatError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
