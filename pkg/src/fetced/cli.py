"""Command-line entry point.

    fetced run --scenario FILE --out DIR
    fetced presets --table {1,2,3} --out DIR
    fetced profile --eps0 3 --K 4 --Ts 40 [--dt 0.01] --out FILE
    fetced export-presets --out DIR
    fetced check

Exit status: 0 success, 1 failed expectations, 2 usage or schema errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .error_dynamics import FeTCParams, reaching_profile
from .scenario_io import (ScenarioSchemaError, build_report, export_presets, load_scenario,
                          metrics_dict, report_json, run_table, write_profile_csv,
                          write_trajectory_csv)
from .simulator import run_engagement

log = logging.getLogger("fetced")

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


def _cmd_run(args) -> int:
    try:
        sc = load_scenario(args.scenario)
    except (FileNotFoundError, ScenarioSchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    name = sc.label or Path(args.scenario).stem
    traj, metrics = run_engagement(sc.missile, sc.target, sc.spec, sc.sim, label=name)
    write_trajectory_csv(traj, out / f"{name}.csv")
    report = build_report([sc], [(traj, metrics)])
    (out / f"{name}_metrics.json").write_text(report_json(report))
    print(json.dumps(metrics_dict(metrics), indent=2, sort_keys=True))
    return EXIT_OK if report.passed else EXIT_FAILED


def _cmd_presets(args) -> int:
    report, energy = run_table(args.table, args.out)
    for label, m, checks in report.entries:
        status = "ok" if all(checks.values()) else "FAILED " + ",".join(k for k, v in checks.items() if not v)
        print(f"{label:6s} {m.law.value:12s} miss={m.miss_distance:.3e} m  t_f={m.impact_time:8.4f} s  "
              f"angle={metrics_dict(m)['impact_angle_deg']:9.4f} deg  E={m.total_energy:10.1f}  {status}")
    print("energy ranking: " + ", ".join(f"{lbl}={e:.1f}" for lbl, e in energy.ranking))
    ok = report.passed and energy.claims_hold
    return EXIT_OK if ok else EXIT_FAILED


def _cmd_profile(args) -> int:
    try:
        p = FeTCParams(K=args.K, T_s=args.Ts)
        if not args.t0 < args.Ts:
            raise ValueError("--t0 must be below --Ts")
        prof = reaching_profile(args.eps0, args.t0, p, args.dt)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    write_profile_csv(prof, out)
    print(f"wrote {len(prof)} samples to {out}")
    return EXIT_OK


def _cmd_export(args) -> int:
    for path in export_presets(args.out):
        print(path)
    return EXIT_OK


def _cmd_check(args) -> int:
    from .acceptance import run_all

    results = run_all()
    for r in results:
        print(r.line())
    n_ok = sum(r.passed for r in results)
    print(f"{n_ok}/{len(results)} criteria passed")
    return EXIT_OK if n_ok == len(results) else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fetced", description="Free-time convergent guidance simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one scenario file")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("presets", help="run one of the preset comparison tables")
    p.add_argument("--table", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_presets)

    p = sub.add_parser("profile", help="sample the reaching-law closed form")
    p.add_argument("--eps0", type=float, required=True)
    p.add_argument("--K", type=float, required=True)
    p.add_argument("--Ts", type=float, required=True)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--out", required=True, help="output CSV file")
    p.set_defaults(func=_cmd_profile)

    p = sub.add_parser("export-presets", help="write the preset catalog as scenario files")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_export)

    p = sub.add_parser("check", help="run the acceptance criteria")
    p.set_defaults(func=_cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
