"""Command-line entry point: run, sweep, synth, validate-trace.

Exit codes: 0 success (unsatisfiable jobs are warnings), 1 configuration or
parse error, 2 internal invariant violation.
"""

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from clustersim.analysis import compare_runs
from clustersim.config import execute_run, load_run_config
from clustersim.errors import (AccountingError, ClusterSimError, ConfigError,
                               ParamError, ParseError, SlotConflict,
                               TraceValidationError)
from clustersim.trace import SynthParams, parse_trace, serialize_trace, synth_workload


def _cmd_run(args):
    cfg = load_run_config(args.config, seed_override=args.seed)
    log, report, out = execute_run(cfg, out_dir=args.out,
                                   debug_invariants=args.debug_invariants)
    for job_id in log.unsatisfiable:
        print(f"warning: job {job_id} is unsatisfiable on this topology",
              file=sys.stderr)
    print(f"run complete: {report.completed_jobs}/{report.total_jobs} jobs, "
          f"avg JCT {report.avg_jct_s if report.avg_jct_s is None else round(report.avg_jct_s, 2)} s, "
          f"artifacts in {out}")
    return 0


def _sweep_cell(argv):
    config_path, scheduler, placement, out_dir, seed, debug = argv
    cfg = load_run_config(config_path, seed_override=seed)
    cfg.scheduler = scheduler
    cfg.placement = placement
    cfg.partition_policies = {}
    _log, report, _out = execute_run(cfg, out_dir=out_dir, debug_invariants=debug)
    return report


def _cmd_sweep(args):
    cfg = load_run_config(args.config, seed_override=args.seed)
    with open(args.config) as fh:
        raw = json.load(fh)
    sweep_spec = raw.get("sweep", {})
    schedulers = args.schedulers.split(",") if args.schedulers else sweep_spec.get("schedulers", [])
    placements = args.placements.split(",") if args.placements else sweep_spec.get("placements", [])
    schedulers = [s.strip() for s in schedulers if s.strip()]
    placements = [p.strip() for p in placements if p.strip()]
    if not schedulers or not placements:
        raise ConfigError("sweep needs a non-empty scheduler x placement matrix "
                          "(--schedulers/--placements or a 'sweep' config section)")
    out_root = args.out or cfg.output_dir
    os.makedirs(out_root, exist_ok=True)
    cells = [(args.config, s, p, os.path.join(out_root, f"{s}__{p}"),
              args.seed if args.seed is not None else cfg.seed,
              args.debug_invariants)
             for s in schedulers for p in placements]

    reports, failures = [], []
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = {pool.submit(_sweep_cell, cell): cell for cell in cells}
            results = {}
            for fut, cell in futures.items():
                try:
                    results[cell] = fut.result()
                except ClusterSimError as e:
                    failures.append((cell[1], cell[2], str(e)))
            reports = [results[c] for c in cells if c in results]
    else:
        for cell in cells:
            try:
                reports.append(_sweep_cell(cell))
            except ClusterSimError as e:
                failures.append((cell[1], cell[2], str(e)))

    for sched_name, place_name, err in failures:
        print(f"warning: cell {sched_name}x{place_name} failed: {err}", file=sys.stderr)
    payload = {"failures": [{"scheduler": s, "placement": p, "error": e}
                            for s, p, e in failures]}
    if len(reports) >= 2:
        table = compare_runs(reports)
        payload["comparison"] = table.to_dict()
    elif len(reports) == 1:
        payload["comparison"] = {"rows": {f"{reports[0].scheduler}+{reports[0].placement}":
                                          reports[0].to_dict()}}
    with open(os.path.join(out_root, "comparison.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"sweep complete: {len(reports)} runs, {len(failures)} failures, "
          f"comparison in {out_root}/comparison.json")
    return 0


def _cmd_synth(args):
    with open(args.params) as fh:
        raw = json.load(fh)
    seed = args.seed if args.seed is not None else int(raw.pop("seed", 0))
    params = SynthParams.from_dict(raw)
    workload = synth_workload(params, seed)
    serialize_trace(workload, args.out)
    print(f"wrote {len(workload)} jobs to {args.out}")
    return 0


def _cmd_validate(args):
    workload = parse_trace(args.trace)
    print(f"{args.trace}: OK ({len(workload)} jobs, horizon {workload.horizon} s)")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="clustersim",
                                description="Trace-driven GPU cluster scheduling simulator")
    sub = p.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="simulate one configuration")
    runp.add_argument("config")
    runp.add_argument("--out", default=None, help="override output directory")
    runp.add_argument("--seed", type=int, default=None)
    runp.add_argument("--debug-invariants", action="store_true")
    runp.set_defaults(func=_cmd_run)

    sweepp = sub.add_parser("sweep", help="run a scheduler x placement matrix")
    sweepp.add_argument("config")
    sweepp.add_argument("--schedulers", default=None, help="comma-separated list")
    sweepp.add_argument("--placements", default=None, help="comma-separated list")
    sweepp.add_argument("--out", default=None)
    sweepp.add_argument("--seed", type=int, default=None)
    sweepp.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    sweepp.add_argument("--debug-invariants", action="store_true")
    sweepp.set_defaults(func=_cmd_sweep)

    synthp = sub.add_parser("synth", help="generate a synthetic trace CSV")
    synthp.add_argument("params")
    synthp.add_argument("-o", "--out", required=True)
    synthp.add_argument("--seed", type=int, default=None)
    synthp.set_defaults(func=_cmd_synth)

    valp = sub.add_parser("validate-trace", help="validate a trace CSV")
    valp.add_argument("trace")
    valp.set_defaults(func=_cmd_validate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TraceValidationError as e:
        for diag in e.diagnostics:
            print(f"error: {diag}", file=sys.stderr)
        return 1
    except (ConfigError, ParseError, ParamError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (AccountingError, SlotConflict) as e:
        print(f"internal error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
