"""Run configuration: one JSON file naming the topology, the trace (or
inline synthesis parameters), the policies, and the output location.

Relative paths inside a config resolve against the config file's directory.
"""

import json
import os
from dataclasses import dataclass, field
from typing import Optional

from clustersim.analysis import (export_chrome_trace, export_joblog_csv,
                                 export_metrics_csv, summarize,
                                 write_report_json)
from clustersim.cluster import build_cluster
from clustersim.engine import EngineConfig, Simulation
from clustersim.errors import ConfigError
from clustersim.placement import MigrationCostModel, PLACEMENT_POLICIES, PenaltyModel
from clustersim.scheduler import MlfqConfig, SCHEDULER_NAMES
from clustersim.trace import SynthParams, parse_trace, synth_workload

ARTIFACTS = ("report.json", "metrics.csv", "timeline.trace.json", "joblog.csv")


@dataclass
class RunConfig:
    topology_path: str
    trace_path: Optional[str]
    synth: Optional[SynthParams]
    scheduler: str = "fcfs"
    placement: str = "best-fit"
    partition_policies: dict = field(default_factory=dict)
    mlfq: MlfqConfig = field(default_factory=MlfqConfig)
    rr_slice_s: float = 3250.0
    preempt_overhead_s: float = 8.0
    penalty: PenaltyModel = field(default_factory=PenaltyModel)
    migration: MigrationCostModel = field(default_factory=MigrationCostModel)
    sample_period_s: float = 60.0
    seed: int = 0
    output_dir: str = "out"

    def engine_config(self, debug_invariants=False):
        return EngineConfig(
            scheduler=self.scheduler,
            placement=self.placement,
            partition_policies=self.partition_policies,
            mlfq=self.mlfq,
            rr_slice_s=self.rr_slice_s,
            preempt_overhead_s=self.preempt_overhead_s,
            penalty=self.penalty,
            migration=self.migration,
            sample_period_s=self.sample_period_s,
            debug_invariants=debug_invariants,
            seed=self.seed,
        )


def _check_names(scheduler, placement):
    if scheduler not in SCHEDULER_NAMES:
        raise ConfigError(
            f"unknown scheduler {scheduler!r} (field 'scheduler'; "
            f"choose from {', '.join(SCHEDULER_NAMES)})")
    if placement not in PLACEMENT_POLICIES:
        raise ConfigError(
            f"unknown placement {placement!r} (field 'placement'; "
            f"choose from {', '.join(sorted(PLACEMENT_POLICIES))})")


def load_run_config(path, seed_override=None):
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: not valid JSON: {e}")
    base = os.path.dirname(os.path.abspath(path))

    def resolve(p):
        return p if os.path.isabs(p) else os.path.join(base, p)

    if "topology" not in raw:
        raise ConfigError("run config needs a 'topology' path")
    trace_path = raw.get("trace")
    synth_raw = raw.get("synth")
    if (trace_path is None) == (synth_raw is None):
        raise ConfigError("run config needs exactly one of 'trace' or 'synth'")

    scheduler = raw.get("scheduler", "fcfs")
    placement = raw.get("placement", "best-fit")
    _check_names(scheduler, placement)
    for pid, binding in raw.get("partition_policies", {}).items():
        _check_names(binding.get("scheduler", scheduler),
                     binding.get("placement", placement))

    mlfq_raw = raw.get("mlfq", {})
    mlfq = MlfqConfig(
        quanta=tuple(float(q) for q in mlfq_raw.get("quanta_s", (3250, 7200, 18000))),
        scaling=mlfq_raw.get("scaling", "none"),
    )
    mig_raw = raw.get("migration", {})
    migration = MigrationCostModel(
        enabled=bool(mig_raw.get("enabled", False)),
        fixed_overhead_s=float(mig_raw.get("fixed_overhead_s", 8.0)),
        model_size_bytes=float(mig_raw.get("model_size_bytes", 0.0)),
        pcie_bw_bytes_per_s=float(mig_raw.get("pcie_bw_bytes_per_s", 16e9)),
    )
    penalty = PenaltyModel(float(raw.get("penalty", {}).get("cross_switch_ratio", 1.0)))

    cfg = RunConfig(
        topology_path=resolve(raw["topology"]),
        trace_path=resolve(trace_path) if trace_path else None,
        synth=SynthParams.from_dict(synth_raw) if synth_raw else None,
        scheduler=scheduler,
        placement=placement,
        partition_policies=raw.get("partition_policies", {}),
        mlfq=mlfq,
        rr_slice_s=float(raw.get("rr", {}).get("slice_s", 3250)),
        preempt_overhead_s=float(raw.get("preempt_overhead_s", 8.0)),
        penalty=penalty,
        migration=migration,
        sample_period_s=float(raw.get("sample_period_s", 60.0)),
        seed=int(raw.get("seed", 0)) if seed_override is None else int(seed_override),
        output_dir=resolve(raw.get("output_dir", "out")),
    )
    if not os.path.exists(cfg.topology_path):
        raise ConfigError(f"topology file not found: {cfg.topology_path}")
    if cfg.trace_path is not None and not os.path.exists(cfg.trace_path):
        raise ConfigError(f"trace file not found: {cfg.trace_path}")
    return cfg


def load_topology(path):
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: not valid JSON: {e}")
    return build_cluster(raw)


def load_workload(cfg):
    if cfg.trace_path is not None:
        return parse_trace(cfg.trace_path)
    return synth_workload(cfg.synth, cfg.seed)


def execute_run(cfg, out_dir=None, debug_invariants=False):
    """Run one simulation and write the four artifact files; returns
    (RunLog, RunReport, output_dir)."""
    cluster = load_topology(cfg.topology_path)
    workload = load_workload(cfg)
    sim = Simulation(workload, cluster, cfg.engine_config(debug_invariants))
    log = sim.run()
    report = summarize(log)
    out = out_dir or cfg.output_dir
    os.makedirs(out, exist_ok=True)
    write_report_json(report, os.path.join(out, "report.json"))
    export_metrics_csv(log.samples, os.path.join(out, "metrics.csv"))
    export_chrome_trace(log, os.path.join(out, "timeline.trace.json"))
    export_joblog_csv(log, os.path.join(out, "joblog.csv"))
    return log, report, out
