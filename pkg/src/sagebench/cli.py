"""Command-line entry points: synth, estimate, experiment, report."""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import channel, evaluation, sage
from .array_geometry import ColumnScheme, RowScheme, default_cylindrical_array, full_selection, select_subarray


def _parse_seeds(args: argparse.Namespace) -> list[int]:
    if args.seeds:
        return [int(s) for s in args.seeds.split(",")]
    return list(range(args.n_seeds))


def _load_scenario_arg(path: str):
    return channel.load_scenario(path)


def _apply_sage_overrides(cfg: sage.SageConfig, args: argparse.Namespace) -> sage.SageConfig:
    kwargs = {}
    if getattr(args, "paths", None) is not None:
        kwargs["n_paths"] = args.paths
    if getattr(args, "max_cycles", None) is not None:
        kwargs["max_cycles"] = args.max_cycles
    if getattr(args, "refine", False):
        kwargs["refine"] = True
    if getattr(args, "delay_range_ns", None) is not None:
        lo, hi = args.delay_range_ns
        kwargs["delay_range"] = (lo * 1e-9, hi * 1e-9)
    return replace(cfg, **kwargs) if kwargs else cfg


def cmd_synth(args: argparse.Namespace) -> int:
    spec, geom = _load_scenario_arg(args.scenario)
    if args.seed is not None:
        spec = spec.reseeded(args.seed)
    if args.snr is not None:
        spec = replace(spec, snr_db=None if math.isinf(args.snr) else args.snr)
    truth = channel.ground_truth_from_scenario(spec, geom.carrier_frequency)
    if not spec.los_blocked and args.los_excess is not None:
        truth = channel.apply_los_dominance(truth, args.los_excess)
    if args.columns is not None:
        sel = select_subarray(geom, ColumnScheme(args.columns, args.rotation))
    elif args.rows is not None:
        sel = select_subarray(geom, RowScheme(args.rows, args.row_offset))
    else:
        sel = full_selection(geom)
    data = channel.synthesize_channel(
        geom, sel, truth, channel.default_grid(), spec.snr_db, spec.seed
    )
    channel.save_channel(args.out, data)
    print(f"wrote {args.out}: {data.matrix.shape[0]} elements x {data.matrix.shape[1]} points")
    return 0


def cmd_estimate(args: argparse.Namespace) -> int:
    data = channel.load_channel(args.channel)
    if args.scenario:
        _, geom = _load_scenario_arg(args.scenario)
    else:
        geom = default_cylindrical_array()
    cfg = _apply_sage_overrides(sage.SageConfig(), args)
    if cfg.n_paths is None:
        n = len(data.truth) if data.truth else 1
        cfg = cfg.resolve_paths(n)
    result = sage.run_sage(data, geom, cfg)
    sage.save_result(args.out, result)
    for p in result.paths:
        print(
            f"path: delay={p.delay * 1e9:8.3f} ns  az={math.degrees(p.azimuth):7.2f} deg  "
            f"el={math.degrees(p.elevation):7.2f} deg  |gain|={abs(p.gain):.3e}"
        )
    print(f"cycles={result.cycles_run} residual_power={result.residual_power:.3e}")
    print(f"wrote {args.out}")
    return 0


def cmd_experiment(args: argparse.Namespace) -> int:
    if args.from_report:
        report = evaluation.rerun_from_report(args.from_report)
    else:
        scenario_dir = Path(args.scenario_dir) if args.scenario_dir else channel.scenario_directory()
        numbers = [int(s) for s in args.scenarios.split(",")]
        loaded = [channel.load_scenario(scenario_dir / f"scenario{n}.yaml") for n in numbers]
        scenarios = [spec for spec, _ in loaded]
        geom = loaded[0][1]
        if args.snr is not None:
            snr = None if math.isinf(args.snr) else args.snr
            scenarios = [replace(s, snr_db=snr) for s in scenarios]
        cfg = _apply_sage_overrides(sage.SageConfig(), args)
        schemes = [evaluation.parse_scheme(s) for s in args.schemes.split(",")]
        report = evaluation.run_experiment(
            scenarios,
            geom,
            cfg,
            schemes,
            _parse_seeds(args),
            los_excess_db=args.los_excess,
        )
    evaluation.export_report_text(report, args.out)
    print(f"wrote {args.out} ({len(report.cells)} cells)")
    if args.csv:
        evaluation.export_report_csv(report, args.csv)
        print(f"wrote {args.csv}")
    if report.any_failed:
        for c in report.cells:
            if c.failed:
                print(f"FAILED cell {c.scenario_id}/{c.scheme}: {c.error}", file=sys.stderr)
        return 2
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    report = evaluation.import_report(args.report)
    if args.csv:
        evaluation.export_report_csv(report, args.csv)
        print(f"wrote {args.csv}")
    if args.plot:
        evaluation.write_error_plot(report, args.plot)
        print(f"wrote {args.plot}")
    if not args.csv and not args.plot:
        for c in report.cells:
            print(
                f"{c.scenario_id:40s} {c.scheme:12s} n={c.n_antennas:3d} "
                f"az={c.mean_az_err_deg:7.3f} el={c.mean_el_err_deg:7.3f} "
                f"match={c.match_rate:6.3f} runs={c.n_runs}"
            )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sagebench",
        description="Synthetic channel-sounding testbed: synthesize chamber "
        "multipath snapshots, extract paths with SAGE, sweep antenna subsets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="scenario file -> channel snapshot (.npz)")
    p.add_argument("--scenario", required=True, help="scenario YAML file")
    p.add_argument("--out", default="channel.npz")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--snr", type=float, default=None, help="override SNR in dB (inf = noiseless)")
    p.add_argument("--los-excess", type=float, default=evaluation.DEFAULT_LOS_EXCESS_DB,
                   help="LOS gain excess over the strongest reflection, dB")
    p.add_argument("--columns", type=int, default=None, help="column-subset size")
    p.add_argument("--rotation", type=int, default=0, help="column rotation offset")
    p.add_argument("--rows", type=int, default=None, help="row-subset size")
    p.add_argument("--row-offset", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("estimate", help="channel snapshot -> estimated paths (YAML)")
    p.add_argument("--channel", required=True, help="channel .npz file")
    p.add_argument("--out", default="result.yaml")
    p.add_argument("--scenario", default=None, help="scenario YAML supplying the array geometry")
    p.add_argument("--paths", type=int, default=None, help="number of paths L")
    p.add_argument("--max-cycles", type=int, default=None)
    p.add_argument("--refine", action="store_true", help="enable quadratic off-grid refinement")
    p.add_argument("--delay-range-ns", type=float, nargs=2, default=None, metavar=("LO", "HI"))
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("experiment", help="scenario x scheme sweep -> report (YAML)")
    p.add_argument("--scenario-dir", default=None, help="directory of scenarioN.yaml files")
    p.add_argument("--scenarios", default="1,2,3,4", help="comma list of scenario numbers")
    p.add_argument("--schemes", default="columns:16,columns:8,columns:4,columns:2")
    p.add_argument("--seeds", default=None, help="explicit comma list of seeds")
    p.add_argument("--n-seeds", type=int, default=20, help="use seeds 0..N-1")
    p.add_argument("--paths", type=int, default=None, help="override L for every scenario")
    p.add_argument("--snr", type=float, default=None, help="override SNR in dB")
    p.add_argument("--los-excess", type=float, default=evaluation.DEFAULT_LOS_EXCESS_DB)
    p.add_argument("--max-cycles", type=int, default=None)
    p.add_argument("--refine", action="store_true")
    p.add_argument("--from-report", default=None,
                   help="re-run the sweep embedded in an exported report")
    p.add_argument("--out", default="report.yaml")
    p.add_argument("--csv", default=None, help="also write the cell CSV")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report", help="report YAML -> CSV / plot")
    p.add_argument("--report", required=True)
    p.add_argument("--csv", default=None)
    p.add_argument("--plot", default=None, help="vector-graphic output (.svg/.pdf)")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # hard errors -> exit 1 with a message
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
