"""Scheduling-efficiency and utilization metrics over a RunLog, plus
machine-readable exports (report JSON, metrics CSV, Chrome-trace timeline,
per-job CSV) and cross-run comparison."""

import csv
import json
import warnings
from dataclasses import dataclass
from typing import Optional


class MismatchedWorkloadWarning(UserWarning):
    """Compared reports were produced from different traces."""


def nearest_rank(sorted_values, pct):
    """Nearest-rank percentile of an ascending list (no interpolation)."""
    if not sorted_values:
        return None
    n = len(sorted_values)
    idx = max(0, (int(pct) * n + 99) // 100 - 1)
    return sorted_values[min(idx, n - 1)]


@dataclass(frozen=True)
class RunReport:
    scheduler: str
    placement: str
    seed: int
    trace_hash: str
    total_jobs: int
    completed_jobs: int
    unsatisfiable_jobs: tuple
    avg_jct_s: Optional[float]
    median_jct_s: Optional[float]
    p95_jct_s: Optional[float]
    avg_pending_time_s: Optional[float]
    avg_effective_service_s: Optional[float]
    max_pending_jobs: int
    mean_frag_ratio: Optional[float]
    min_frag_ratio: Optional[float]
    time_avg_frag_ratio: Optional[float]
    preemptions: int
    migrations: int
    makespan_s: float

    def to_dict(self):
        d = dict(self.__dict__)
        d["unsatisfiable_jobs"] = list(self.unsatisfiable_jobs)
        return d

    METRIC_KEYS = ("avg_jct_s", "median_jct_s", "p95_jct_s", "avg_pending_time_s",
                   "avg_effective_service_s", "max_pending_jobs", "mean_frag_ratio",
                   "min_frag_ratio", "time_avg_frag_ratio", "preemptions",
                   "migrations", "makespan_s", "completed_jobs")


def _frag_stats(samples):
    vals = [(t, f) for (t, _p, _r, _g, _n, f) in samples if f is not None]
    if not vals:
        return None, None, None
    fs = [f for _t, f in vals]
    mean = sum(fs) / len(fs)
    # step integral over the defined stretches of the sample series
    num = 0.0
    den = 0.0
    for (t0, f0), (t1, _f1) in zip(vals, vals[1:]):
        if t1 > t0:
            num += f0 * (t1 - t0)
            den += t1 - t0
    tavg = num / den if den > 0 else mean
    return mean, min(fs), tavg


def summarize(log):
    """Aggregate a RunLog into a RunReport (pure, deterministic)."""
    done = [j for j in log.jobs.values() if j.finish is not None]
    jcts = sorted(j.jct for j in done)
    pend = [j.pending_time for j in done]
    eff = [j.run_wall - j.overhead_paid for j in done]
    mean_frag, min_frag, tavg_frag = _frag_stats(log.samples)
    n = len(jcts)
    return RunReport(
        scheduler=log.scheduler_name,
        placement=log.placement_name,
        seed=log.seed,
        trace_hash=log.trace_hash,
        total_jobs=len(log.jobs),
        completed_jobs=n,
        unsatisfiable_jobs=tuple(log.unsatisfiable),
        avg_jct_s=(sum(jcts) / n) if n else None,
        median_jct_s=nearest_rank(jcts, 50),
        p95_jct_s=nearest_rank(jcts, 95),
        avg_pending_time_s=(sum(pend) / n) if n else None,
        avg_effective_service_s=(sum(eff) / n) if n else None,
        max_pending_jobs=max((s[1] for s in log.samples), default=0),
        mean_frag_ratio=mean_frag,
        min_frag_ratio=min_frag,
        time_avg_frag_ratio=tavg_frag,
        preemptions=len(log.preemption_events),
        migrations=len(log.migration_events),
        makespan_s=log.makespan,
    )


def write_report_json(report, path):
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def export_chrome_trace(log, path):
    """Trace-Event-Format JSON array: one complete ("ph":"X") event per
    contiguous running interval per job; pid = partition, tid = first node
    of the interval, ts/dur in microseconds."""
    events = []
    for job in log.jobs.values():
        for iv in job.intervals:
            events.append({
                "name": job.job_name or job.job_id,
                "ph": "X",
                "pid": job.partition_id,
                "tid": iv.nodes[0],
                "ts": int(round(iv.start * 1e6)),
                "dur": int(round((iv.end - iv.start) * 1e6)),
                "args": {
                    "job_id": job.job_id,
                    "gpus": len(iv.slots),
                    "nodes": list(iv.nodes),
                    "switch_span": iv.switch_span,
                },
            })
    with open(path, "w") as fh:
        json.dump(events, fh, separators=(",", ":"))
        fh.write("\n")


METRICS_HEADER = ("t", "pending", "running", "used_gpus", "used_nodes", "frag_ratio")


def export_metrics_csv(samples, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for t, pending, running, used_gpus, used_nodes, frag in samples:
            w.writerow([repr(float(t)), pending, running, used_gpus, used_nodes,
                        "" if frag is None else repr(float(frag))])


def read_metrics_csv(path):
    out = []
    with open(path, "r", newline="") as fh:
        r = csv.reader(fh)
        header = tuple(next(r))
        if header != METRICS_HEADER:
            raise ValueError(f"unexpected metrics header {header}")
        for row in r:
            t, pending, running, used_gpus, used_nodes, frag = row
            out.append((float(t), int(pending), int(running), int(used_gpus),
                        int(used_nodes), None if frag == "" else float(frag)))
    return out


JOBLOG_HEADER = ("job_id", "job_name", "partition", "total_gpus", "submit",
                 "first_start", "finish", "jct_s", "pending_time_s",
                 "n_intervals", "preemptions", "migrations", "resumes",
                 "overhead_paid_s", "status", "trace_state")


def export_joblog_csv(log, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(JOBLOG_HEADER)
        for job in log.jobs.values():
            w.writerow([
                job.job_id, job.job_name, job.partition_id, job.total_gpus,
                repr(job.submit),
                "" if job.first_start is None else repr(job.first_start),
                "" if job.finish is None else repr(job.finish),
                "" if job.jct is None else repr(job.jct),
                "" if job.pending_time is None else repr(job.pending_time),
                len(job.intervals), job.preemptions, job.migrations,
                job.resumes, repr(job.overhead_paid), job.status,
                job.trace_state,
            ])


@dataclass
class ComparisonTable:
    metrics: tuple
    rows: dict  # label -> {metric: value}
    baseline: str
    deltas: dict  # label -> {metric: value - baseline}
    warnings: list

    def to_dict(self):
        return {
            "metrics": list(self.metrics),
            "baseline": self.baseline,
            "rows": self.rows,
            "deltas": self.deltas,
            "warnings": self.warnings,
        }


def run_label(report):
    return f"{report.scheduler}+{report.placement}"


def compare_runs(reports, baseline=None):
    """Side-by-side metric table with deltas against a named baseline row
    (default: first label in sorted order). Emits MismatchedWorkloadWarning
    when the reports come from different traces."""
    if len(reports) < 2:
        raise ValueError("compare_runs needs at least two reports")
    labeled = {}
    for rep in sorted(reports, key=lambda r: (r.scheduler, r.placement, r.seed)):
        label = run_label(rep)
        k = 2
        while label in labeled:
            label = f"{run_label(rep)}#{k}"
            k += 1
        labeled[label] = rep
    warns = []
    hashes = {rep.trace_hash for rep in reports}
    if len(hashes) > 1:
        msg = "MismatchedWorkload: reports stem from different trace hashes"
        warns.append(msg)
        warnings.warn(msg, MismatchedWorkloadWarning)
    if baseline is None:
        baseline = next(iter(labeled))
    if baseline not in labeled:
        raise ValueError(f"baseline {baseline!r} not among compared runs")
    rows = {lbl: {m: getattr(rep, m) for m in RunReport.METRIC_KEYS}
            for lbl, rep in labeled.items()}
    base = rows[baseline]
    deltas = {}
    for lbl, row in rows.items():
        deltas[lbl] = {
            m: (row[m] - base[m]) if isinstance(row[m], (int, float)) and
               isinstance(base[m], (int, float)) else None
            for m in RunReport.METRIC_KEYS
        }
    return ComparisonTable(metrics=RunReport.METRIC_KEYS, rows=rows,
                           baseline=baseline, deltas=deltas, warnings=warns)
