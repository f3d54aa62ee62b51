"""Command-line surface: record demonstrations, train, run, compare, evaluate.

Exit codes: 0 success, 2 configuration error, 3 simulation abort (marker
lost), 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import demos as demos_mod
from .camera import default_scenario, desired_features, load_scenario, save_scenario
from .episodes import RunConfig, compare_gains, run_episode, write_trace_csv, read_trace_csv
from .errors import ConfigError, IlvsError, SimulationAbort, exit_code_for
from .gmr import load_model, save_model, train_compensation_model
from .metrics import (DEFAULT_THRESHOLD_PX, episode_metrics, rmse_vs_demo,
                      tracking_phase_metrics, write_metrics_json)
from .plots import error_vs_time_svg, feature_trajectories_svg, write_svg
from .se3 import pose_from_dict


def _load_scenario_arg(path: str | None):
    return load_scenario(path) if path else default_scenario()


def _load_pose_file(path):
    try:
        with open(path) as f:
            return pose_from_dict(json.load(f))
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot read pose file {path}: {exc}") from exc


def _parse_perturb(spec: str):
    parts = spec.split(",")
    if len(parts) != 4:
        raise ConfigError(f"--perturb wants t,dx,dy,dz, got {spec!r}")
    try:
        t, dx, dy, dz = (float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"--perturb wants numbers: {exc}") from exc
    return (t, (dx, dy, dz))


def _parse_grid(spec: str):
    lo, sep, hi = spec.partition("..")
    try:
        if sep:
            return range(int(lo), int(hi) + 1)
        return [int(k) for k in spec.split(",")]
    except ValueError as exc:
        raise ConfigError(f"--grid wants LO..HI or a comma list: {exc}") from exc


def _emit_run_outputs(trace, metrics, scenario, outdir: Path, make_plots: bool):
    outdir.mkdir(parents=True, exist_ok=True)
    write_trace_csv(trace, outdir / "trace.csv")
    write_metrics_json(metrics, outdir / "metrics.json")
    if make_plots:
        desired_px = desired_features(scenario).pixels
        intr = scenario.intrinsics
        write_svg(feature_trajectories_svg(trace, desired_px, intr.width, intr.height),
                  outdir / "feature_trajectories.svg")
        write_svg(error_vs_time_svg(trace, desired_px), outdir / "error_vs_time.svg")


def cmd_demo(args) -> int:
    scenario = _load_scenario_arg(args.scenario)
    poses = None
    if args.poses:
        try:
            with open(args.poses) as f:
                poses = [pose_from_dict(d) for d in json.load(f)]
        except (OSError, json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"cannot read poses file {args.poses}: {exc}") from exc
    suite = demos_mod.collect_suite(scenario, poses, gain=args.gain)
    outdir = Path(args.out)
    demos_mod.save_suite(suite, outdir)
    save_scenario(scenario, outdir / "scenario.json")
    print(f"recorded {len(suite)} demonstrations into {outdir}")
    return 0


def cmd_train(args) -> int:
    suite = demos_mod.load_suite(args.suite)
    ts = demos_mod.build_training_set(suite)
    k_grid = _parse_grid(args.grid) if args.grid else None
    model = train_compensation_model(
        ts, n_components=args.k, random_state=args.seed,
        k_grid=k_grid, n_folds=args.folds)
    save_model(model, args.out)
    print(f"trained {model.regressor.n_components}-component model on "
          f"{len(ts)} samples -> {args.out}")
    return 0


def cmd_run(args) -> int:
    scenario = _load_scenario_arg(args.scenario)
    model = load_model(args.model) if args.model else None
    pose = _load_pose_file(args.pose) if args.pose else None
    perturbations = tuple(_parse_perturb(p) for p in args.perturb or [])
    config = RunConfig(
        scenario=scenario, controller=args.controller, gain=getattr(args, "lambda"),
        model=model, initial_camera_pose=pose, perturbations=perturbations,
        t_cut=args.t_cut, tau=args.tau, seed=args.seed)
    trace = run_episode(config)
    metrics = episode_metrics(trace, scenario, threshold_px=args.threshold_px)
    _emit_run_outputs(trace, metrics, scenario, Path(args.out), args.plots)
    if trace.aborted is not None:
        raise SimulationAbort(
            f"episode aborted ({trace.aborted}) after {len(trace)} steps; "
            f"partial trace written to {args.out}")
    print(f"episode finished: {len(trace)} steps -> {args.out}")
    return 0


def cmd_compare(args) -> int:
    scenario = _load_scenario_arg(args.scenario)
    model = load_model(args.model)
    try:
        gains = [float(g) for g in args.gains.split(",")]
    except ValueError as exc:
        raise ConfigError(f"--gains wants a comma list of numbers: {exc}") from exc
    summaries, traces = compare_gains(scenario, gains, model)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "comparison.json", "w") as f:
        json.dump(summaries, f, indent=2, sort_keys=True)
        f.write("\n")
    for label, trace in traces.items():
        write_trace_csv(trace, outdir / f"trace_{label}.csv")
    width = max(len(s["run"]) for s in summaries)
    for s in summaries:
        err = s["steady_state_mean_err_px"]
        detail = f"steady-state error: {err:10.3f} px" if err is not None else "aborted"
        print(f"{s['run']:<{width}}  {detail}")
    return 0


def cmd_eval(args) -> int:
    trace = read_trace_csv(args.trace)
    scenario = load_scenario(args.scenario) if args.scenario else None
    if scenario is not None:
        desired_px = desired_features(scenario).pixels
    else:
        # Without a scenario the desired corners default to the baseline
        # setup; pass --scenario when the trace used a different one.
        desired_px = desired_features(default_scenario()).pixels
    metrics = tracking_phase_metrics(trace, desired_px, args.threshold_px,
                                     scenario=scenario)
    if args.demo:
        r = rmse_vs_demo(trace, demos_mod.read_demo_csv(args.demo))
        metrics.rmse_features_px = r.rmse_features_px
        metrics.rmse_position_mm = r.rmse_position_mm
        metrics.rmse_velocity_mms = r.rmse_velocity_mms
    write_metrics_json(metrics, args.out)
    print(f"metrics -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ilvs",
        description="Eye-in-hand conveyor tracking: demonstrations, "
                    "mixture-regression training, and episode evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("demo", help="record an oracle demonstration suite")
    p.add_argument("--scenario", help="scenario JSON (default: built-in baseline)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--poses", help="JSON list of initial camera poses")
    p.add_argument("--lambda", dest="gain", type=float, default=demos_mod.DEFAULT_GAIN,
                   help="oracle control gain (default 2)")
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("train", help="fit the compensation model on a suite")
    p.add_argument("--suite", required=True, help="directory written by `demo`")
    p.add_argument("--k", type=int, default=11, help="mixture components (default 11)")
    p.add_argument("--grid", help="grid-search range LO..HI (overrides --k)")
    p.add_argument("--folds", type=int, default=5, help="cross-validation folds")
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("run", help="run one closed-loop episode")
    p.add_argument("--scenario", help="scenario JSON (default: built-in baseline)")
    p.add_argument("--controller", required=True, choices=["vs", "oracle", "ilvs", "reshaped"])
    p.add_argument("--lambda", type=float, default=2.0, help="control gain")
    p.add_argument("--model", help="model JSON (required for ilvs/reshaped)")
    p.add_argument("--perturb", action="append", metavar="t,dx,dy,dz",
                   help="displace the target by (dx,dy,dz) m at time t; repeatable")
    p.add_argument("--pose", help="initial camera pose JSON (overrides scenario)")
    p.add_argument("--t-cut", type=float, default=5.0,
                   help="reshaped controller: time the corrective term starts fading")
    p.add_argument("--tau", type=float, default=1.0,
                   help="reshaped controller: fade time constant")
    p.add_argument("--threshold-px", type=float, default=DEFAULT_THRESHOLD_PX)
    p.add_argument("--plots", action="store_true", help="also write SVG plots")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="steady-state comparison across gains")
    p.add_argument("--scenario", help="scenario JSON (default: built-in baseline)")
    p.add_argument("--model", required=True, help="model JSON")
    p.add_argument("--gains", default="1,2,5", help="comma list (default 1,2,5)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("eval", help="compute metrics from a trace CSV")
    p.add_argument("--trace", required=True, help="trace CSV")
    p.add_argument("--demo", help="reference demonstration CSV for replay RMSE")
    p.add_argument("--threshold-px", type=float, default=DEFAULT_THRESHOLD_PX)
    p.add_argument("--scenario", help="scenario JSON enabling camera-position stats")
    p.add_argument("--out", required=True, help="metrics JSON path")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except IlvsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    except np.linalg.LinAlgError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
