"""Command line front end.

Subcommands:

* ``solve CONFIG [--out DIR]`` -- run a configuration (or a manifest) and
  write probe/mode CSVs, field dumps, figures, and a manifest.
* ``preset NAME [--out DIR] [--config-only PATH]`` -- run one of the built-in
  experiments, or just write its configuration.
* ``convergence CONFIG --dts a,b,c [--out DIR]`` -- time-step refinement
  study against the two-layer reference configured under ``oracle.*``.
* ``validate CONFIG`` -- dry-run checks (mesh invariants, contour margins,
  causality, probe placement) without solving.
"""

from __future__ import annotations

import argparse
import sys

from . import harness, presets
from .config import Config, ConfigError

__all__ = ["main"]


def _cmd_solve(args):
    cfg = Config.load(args.config)
    if args.out:
        outdir = args.out
    else:
        outdir = cfg.get_str("output.dir", "out")
    if args.workers is not None:
        cfg.set("solver.workers", args.workers)
    harness.run(cfg, outdir)
    print(f"run complete, outputs in {outdir}")
    return 0


def _cmd_preset(args):
    cfg = presets.preset_config(args.name)
    if args.config_only:
        cfg.save(args.config_only)
        print(f"wrote {args.config_only}")
        return 0
    outdir = args.out or f"out_{args.name}"
    if args.workers is not None:
        cfg.set("solver.workers", args.workers)
    harness.run(cfg, outdir)
    print(f"preset {args.name} complete, outputs in {outdir}")
    return 0


def _cmd_convergence(args):
    cfg = Config.load(args.config)
    T = cfg.get_float("time.T")
    if T is None:
        raise ConfigError("config needs time.T")
    dts = [float(tok) for tok in args.dts.split(",") if tok.strip()]
    if not dts:
        raise ConfigError("--dts needs at least one value")
    steps = []
    for dt in dts:
        n = round(T / dt)
        if abs(n * dt - T) > 1e-9 * T:
            raise ConfigError(f"dt={dt} does not divide T={T}")
        steps.append(int(n))
    rule = cfg.get_str("time.rule", "bdf2")
    cfg.set("study.rules", [rule])
    cfg.set(f"study.steps.{rule}", sorted(steps))
    if "study.error_times" not in cfg:
        cfg.set("study.error_times", [1.5])
    outdir = args.out or cfg.get_str("output.dir", "out")
    _, fits = harness.study_run(cfg, outdir)
    for rname, (s_l2, s_h1) in fits.items():
        print(f"{rname}: fitted L2 slope {s_l2:.3f}, H1 slope {s_h1:.3f}")
    print(f"study complete, outputs in {outdir}")
    return 0


def _cmd_validate(args):
    cfg = Config.load(args.config)
    results = harness.validate_run(cfg)
    width = max(len(name) for name, _, _ in results)
    ok_all = True
    for name, ok, detail in results:
        status = "ok  " if ok else "FAIL"
        print(f"{name:<{width}}  {status}  {detail}")
        ok_all = ok_all and ok
    return 0 if ok_all else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gratingcq",
        description=(
            "Time-domain scattering of a plane-wave pulse by a periodic "
            "grating, computed by convolution-quadrature time stepping over "
            "Laplace-domain finite element solves."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run a configuration file")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (default: output.dir or 'out')")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(fn=_cmd_solve)

    p = sub.add_parser("preset", help="run a built-in experiment")
    p.add_argument("name", choices=presets.preset_names())
    p.add_argument("--out")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--config-only", metavar="PATH",
                   help="write the preset configuration and exit")
    p.set_defaults(fn=_cmd_preset)

    p = sub.add_parser("convergence", help="time-step refinement study")
    p.add_argument("config")
    p.add_argument("--dts", required=True, help="comma separated time steps")
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_convergence)

    p = sub.add_parser("validate", help="dry-run configuration checks")
    p.add_argument("config")
    p.set_defaults(fn=_cmd_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:  # noqa: BLE001 - single reporting point
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
