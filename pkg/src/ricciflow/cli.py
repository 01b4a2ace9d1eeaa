"""Command-line front end: run, verify, fit, rescale.

Exit codes: 0 success (and, for verify, all checks passed), 2 a check
failed or the run stopped for an unexpected reason, 3 configuration or
input-file error, 4 numerical failure during integration.
"""

import argparse
import json
import os
import sys

from . import config as config_mod
from . import engine
from . import io as io_mod
from . import presets, verify
from .config import ConfigError
from .warped import WarpedState

EXIT_OK = 0
EXIT_VERIFY = 2
EXIT_CONFIG = 3
EXIT_NUMERICAL = 4


def run_scenario(cfg, output_dir=None):
    """Integrate one configured scenario and write its run directory.

    Returns (trajectory, run_dir).  Raises the engine's errors as-is;
    configuration problems surface as ConfigError or ValueError before
    stepping starts.
    """
    preset = presets.get(cfg.scenario)
    holonomy = None
    if cfg.holonomy is not None and cfg.holonomy != preset.holonomy:
        holonomy = cfg.holonomy
    state = presets.build_initial(
        preset, n=cfg.n, holonomy=holonomy, initial=cfg.initial_dict
    )
    controller = engine.StepController(
        t_end=cfg.t_end,
        cfl=cfg.cfl,
        dt_min=cfg.dt_min,
        dt_max=cfg.dt_max,
        curvature_stop=cfg.curvature_stop,
    )
    trajectory = engine.run(
        state, controller, cfg.mode,
        snapshot_dt=cfg.snapshot_dt,
        snapshot_times=presets.snapshot_times(preset, cfg.t_end),
        max_steps=cfg.max_steps,
        record_steps=True,
    )
    profile = None
    if (trajectory.stop_reason == engine.CURVATURE_BLOWUP
            and isinstance(trajectory.final_state, WarpedState)):
        try:
            profile = engine.singularity_profile(trajectory)
        except ValueError:
            profile = None
    run_dir = output_dir if output_dir is not None else cfg.output_dir
    io_mod.save_run(
        run_dir, trajectory,
        config_text=config_mod.serialize_config(cfg),
        profile=profile,
    )
    return trajectory, run_dir


def _cmd_run(args):
    try:
        cfg = config_mod.load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        trajectory, run_dir = run_scenario(cfg, output_dir=args.output)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RuntimeError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    final_t = trajectory.samples[-1].time
    steps = len(trajectory.step_times)
    print(f"scenario {cfg.scenario}: stopped with {trajectory.stop_reason} "
          f"at t = {final_t:.6g} after {steps} recorded steps")
    print(f"wrote {run_dir}")
    if trajectory.stop_reason != cfg.expected_stop:
        print(f"expected stop reason {cfg.expected_stop}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def _load_run_dir(run_dir):
    trajectory, config_text, profile = io_mod.load_run(run_dir)
    cfg = None
    if config_text is not None:
        cfg = config_mod.parse_config(config_text)
    return trajectory, cfg, profile


def _cmd_verify(args):
    try:
        trajectory, cfg, _ = _load_run_dir(args.run_dir)
    except (ConfigError, OSError, ValueError, KeyError) as exc:
        print(f"cannot load run directory: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    checks = None
    tolerances = None
    expectations = None
    if cfg is not None:
        checks = cfg.checks
        tolerances = cfg.tolerance_dict
        expectations = {
            "stop_reason": cfg.expected_stop,
            "family": presets.get(cfg.scenario).family,
            "mode": cfg.mode,
        }
    if args.checks is not None:
        if args.checks in ("default", ""):
            checks = None
        elif args.checks == "all":
            checks = "all"
        else:
            checks = tuple(c.strip() for c in args.checks.split(","))
    try:
        report = verify.verify_bounds(
            trajectory, checks=checks, tolerances=tolerances,
            expectations=expectations,
        )
    except ValueError as exc:
        print(f"verification setup error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(report.format_text())
    io_mod.save_report(report, os.path.join(args.run_dir, io_mod.REPORT_FILE))
    return EXIT_OK if report.passed else EXIT_VERIFY


def _cmd_fit(args):
    try:
        trajectory, _, _ = _load_run_dir(args.run_dir)
    except (ConfigError, OSError, ValueError, KeyError) as exc:
        print(f"cannot load run directory: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = verify.fit_asymptotics(trajectory, args.kind)
    except ValueError as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(json.dumps(result, indent=2))
    return EXIT_OK


def _cmd_rescale(args):
    try:
        trajectory, _, _ = _load_run_dir(args.run_dir)
    except (ConfigError, OSError, ValueError, KeyError) as exc:
        print(f"cannot load run directory: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    kind = args.kind
    if kind is None:
        kind = (engine.BUNDLE
                if not isinstance(trajectory.final_state, WarpedState)
                else engine.WARPED_3D)
    try:
        rescaled = engine.parabolic_rescale(trajectory, args.scale, kind)
    except ValueError as exc:
        print(f"rescale failed: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    io_mod.save_run(args.output, rescaled)
    print(f"wrote {args.output} (scale {args.scale:g}, kind {kind})")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ricciflow",
        description="reduced Ricci flow runs, verification, and fits",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="integrate a configured scenario")
    p_run.add_argument("config", help="INI config file")
    p_run.add_argument("--output", default=None,
                       help="run directory (overrides the config)")
    p_run.set_defaults(func=_cmd_run)

    p_verify = sub.add_parser("verify", help="check bounds on a stored run")
    p_verify.add_argument("run_dir")
    p_verify.add_argument("--checks", default=None,
                          help="'default', 'all', or comma-separated names")
    p_verify.set_defaults(func=_cmd_verify)

    p_fit = sub.add_parser("fit", help="fit late-time asymptotics")
    p_fit.add_argument("run_dir")
    p_fit.add_argument("--kind", required=True, choices=verify.FIT_KINDS)
    p_fit.set_defaults(func=_cmd_fit)

    p_rescale = sub.add_parser(
        "rescale", help="store a parabolically rescaled view of a run"
    )
    p_rescale.add_argument("run_dir")
    p_rescale.add_argument("--scale", type=float, required=True)
    p_rescale.add_argument("--kind", default=None,
                           choices=engine.RESCALE_KINDS)
    p_rescale.add_argument("--output", required=True)
    p_rescale.set_defaults(func=_cmd_rescale)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
