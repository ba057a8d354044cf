"""Accounting-style job traces: CSV parsing/serialization, validation, and
seeded synthetic workload generation.

Trace CSV columns (header required, this exact order):
job_id,job_name,partition,req_nodes,req_gpus_per_node,total_gpus,
submit_time,start_time,end_time,final_state,service_time
Times are integer seconds relative to trace start; empty string = absent.
"""

import csv
import hashlib
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from clustersim.errors import ParamError, ParseError, TraceValidationError, ValidationError

COLUMNS = (
    "job_id", "job_name", "partition", "req_nodes", "req_gpus_per_node",
    "total_gpus", "submit_time", "start_time", "end_time", "final_state",
    "service_time",
)

FINAL_STATES = ("Completed", "Failed", "Cancelled")


@dataclass(frozen=True)
class JobRecord:
    job_id: str
    job_name: str
    partition_id: str
    req_nodes: Optional[int]
    req_gpus_per_node: Optional[int]
    total_gpus: Optional[int]
    submit_time: int
    start_time: Optional[int]
    end_time: Optional[int]
    final_state: str
    service_time: int

    @property
    def gpu_total(self):
        if self.total_gpus is not None:
            return self.total_gpus
        return self.req_nodes * self.req_gpus_per_node

    @property
    def is_per_node_request(self):
        return self.req_nodes is not None and self.req_gpus_per_node is not None


@dataclass(frozen=True)
class Workload:
    jobs: tuple
    horizon: int

    def __len__(self):
        return len(self.jobs)


def _validate_record(rec):
    """Return a list of invariant-violation messages for one JobRecord."""
    problems = []
    has_tuple = rec.req_nodes is not None and rec.req_gpus_per_node is not None
    if (rec.req_nodes is None) != (rec.req_gpus_per_node is None):
        problems.append("req_nodes and req_gpus_per_node must be given together")
    if not has_tuple and rec.total_gpus is None:
        problems.append("no resource request (need nodes x gpus tuple or total_gpus)")
    for name in ("req_nodes", "req_gpus_per_node", "total_gpus"):
        v = getattr(rec, name)
        if v is not None and v < 1:
            problems.append(f"{name} must be >= 1")
    if has_tuple and rec.total_gpus is not None:
        if rec.total_gpus != rec.req_nodes * rec.req_gpus_per_node:
            problems.append("total_gpus != req_nodes * req_gpus_per_node")
    if rec.final_state not in FINAL_STATES:
        problems.append(f"final_state must be one of {FINAL_STATES}")
    if rec.submit_time < 0:
        problems.append("submit_time must be >= 0")
    if rec.start_time is not None and rec.start_time < rec.submit_time:
        problems.append("start_time earlier than submit_time")
    if rec.start_time is not None and rec.end_time is not None:
        if rec.end_time < rec.start_time:
            problems.append("end_time earlier than start_time")
        if rec.service_time != rec.end_time - rec.start_time:
            problems.append("service_time != end_time - start_time")
    if rec.final_state == "Completed":
        if rec.service_time <= 0:
            problems.append("service_time must be > 0 for Completed jobs")
    elif rec.service_time < 0:
        problems.append("service_time must be >= 0")
    return problems


def _parse_row(row, rownum):
    def opt_int(name):
        raw = row[name].strip()
        if raw == "":
            return None
        try:
            return int(raw)
        except ValueError:
            raise ParseError(rownum, name, f"not an integer: {raw!r}")

    job_id = row["job_id"].strip()
    if not job_id:
        raise ParseError(rownum, "job_id", "empty")
    submit = opt_int("submit_time")
    if submit is None:
        raise ParseError(rownum, "submit_time", "required")
    start = opt_int("start_time")
    end = opt_int("end_time")
    service = opt_int("service_time")
    if service is None:
        if start is not None and end is not None:
            service = end - start
        else:
            raise ParseError(rownum, "service_time",
                             "required unless start_time and end_time are both given")
    return JobRecord(
        job_id=job_id,
        job_name=row["job_name"].strip(),
        partition_id=row["partition"].strip(),
        req_nodes=opt_int("req_nodes"),
        req_gpus_per_node=opt_int("req_gpus_per_node"),
        total_gpus=opt_int("total_gpus"),
        submit_time=submit,
        start_time=start,
        end_time=end,
        final_state=row["final_state"].strip(),
        service_time=service,
    )


def parse_trace(path, format="csv"):
    """Parse and validate a trace file into a Workload.

    Every offending row is reported (row-numbered) in one
    TraceValidationError; type-level failures raise ParseError immediately.
    """
    if format != "csv":
        raise ParseError(0, "format", f"unsupported trace format {format!r}")
    with open(path, "r", newline="") as fh:
        return _parse_trace_stream(fh)


def _parse_trace_stream(fh):
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(0, "header", "empty file")
    if tuple(h.strip() for h in header) != COLUMNS:
        raise ParseError(0, "header", f"expected columns {','.join(COLUMNS)}")

    jobs = []
    diagnostics = []
    seen = {}
    for rownum, values in enumerate(reader, start=1):
        if not values or (len(values) == 1 and not values[0].strip()):
            continue
        if len(values) != len(COLUMNS):
            raise ParseError(rownum, "row", f"expected {len(COLUMNS)} fields, got {len(values)}")
        row = dict(zip(COLUMNS, values))
        rec = _parse_row(row, rownum)
        problems = _validate_record(rec)
        if rec.job_id in seen:
            problems.append(f"duplicate job_id (first seen at row {seen[rec.job_id]})")
        else:
            seen[rec.job_id] = rownum
        if problems:
            diagnostics.extend(
                ValidationError(f"row {rownum}: job {rec.job_id!r}: {p}") for p in problems)
        else:
            jobs.append(rec)
    if diagnostics:
        raise TraceValidationError(diagnostics)

    jobs.sort(key=lambda r: r.submit_time)
    horizon = max((r.submit_time for r in jobs), default=0)
    return Workload(jobs=tuple(jobs), horizon=horizon)


def serialize_trace(workload, path):
    with open(path, "w", newline="") as fh:
        write_trace(workload, fh)


def write_trace(workload, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in workload.jobs:
        w.writerow([
            r.job_id, r.job_name, r.partition_id,
            "" if r.req_nodes is None else r.req_nodes,
            "" if r.req_gpus_per_node is None else r.req_gpus_per_node,
            "" if r.total_gpus is None else r.total_gpus,
            r.submit_time,
            "" if r.start_time is None else r.start_time,
            "" if r.end_time is None else r.end_time,
            r.final_state,
            r.service_time,
        ])


def trace_digest(workload):
    """Stable content hash of a workload (used to flag cross-run comparisons
    of different traces)."""
    buf = io.StringIO()
    write_trace(workload, buf)
    return hashlib.sha256(buf.getvalue().encode()).hexdigest()


def split_total(total, cap):
    """Decompose a free-GPU total into (nodes, gpus_per_node) with
    gpus_per_node <= cap, minimizing nodes; exact cover only."""
    if total <= cap:
        return 1, total
    for g in range(cap, 0, -1):
        if total % g == 0:
            return total // g, g
    raise AssertionError("unreachable: g=1 always divides")


# default GPU-size mix: 40% of jobs ask for more than 4 GPUs
DEFAULT_GPU_WEIGHTS = {1: 0.28, 2: 0.20, 4: 0.12, 8: 0.22, 16: 0.10,
                       32: 0.05, 48: 0.02, 64: 0.01}


@dataclass(frozen=True)
class SynthParams:
    n_jobs: int
    mean_interarrival_s: float
    service_median_s: float
    service_sigma: float
    gpu_size_weights: dict = field(default_factory=lambda: dict(DEFAULT_GPU_WEIGHTS))
    partition_weights: dict = field(default_factory=lambda: {"p0": 1.0})
    fail_fraction: float = 0.04
    cancel_fraction: float = 0.02
    max_gpus_per_node: int = 8
    name_prefix: str = "job"

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "gpu_size_weights" in d:
            d["gpu_size_weights"] = {int(k): float(v) for k, v in d["gpu_size_weights"].items()}
        return cls(**d)

    def large_job_target(self):
        total = sum(self.gpu_size_weights.values())
        return sum(w for s, w in self.gpu_size_weights.items() if s > 4) / total


def synth_workload(params, seed):
    """Deterministic synthetic workload: Poisson arrivals, configurable
    GPU-size mix, log-normal (heavy-tailed) service times."""
    if params.n_jobs < 0:
        raise ParamError("n_jobs must be >= 0")
    if params.mean_interarrival_s <= 0:
        raise ParamError("mean_interarrival_s must be > 0")
    if params.service_median_s <= 0:
        raise ParamError("service_median_s must be > 0")
    if params.service_sigma < 0:
        raise ParamError("service_sigma must be >= 0")
    if not params.gpu_size_weights or min(params.gpu_size_weights.values()) < 0 \
            or sum(params.gpu_size_weights.values()) <= 0:
        raise ParamError("gpu_size_weights must be a nonnegative, nonzero mix")
    if not params.partition_weights:
        raise ParamError("partition_weights must be non-empty")
    bad = [s for s in params.gpu_size_weights
           if s < 1 or (s > params.max_gpus_per_node and not any(
               s % g == 0 for g in range(1, params.max_gpus_per_node + 1)))]
    if bad:
        raise ParamError(f"unusable gpu sizes: {bad}")

    n = params.n_jobs
    if n == 0:
        return Workload(jobs=(), horizon=0)

    rng = np.random.default_rng(seed)
    submit = np.floor(np.cumsum(rng.exponential(params.mean_interarrival_s, n))).astype(np.int64)

    sizes = np.array(sorted(params.gpu_size_weights), dtype=np.int64)
    p = np.array([params.gpu_size_weights[int(s)] for s in sizes], dtype=np.float64)
    job_sizes = rng.choice(sizes, size=n, p=p / p.sum())

    mu = math.log(params.service_median_s)
    service = np.maximum(1, np.ceil(rng.lognormal(mu, params.service_sigma, n))).astype(np.int64)

    parts = sorted(params.partition_weights)
    pw = np.array([params.partition_weights[q] for q in parts], dtype=np.float64)
    job_parts = rng.choice(np.array(parts, dtype=object), size=n, p=pw / pw.sum())

    u = rng.random(n)
    jobs = []
    for i in range(n):
        size = int(job_sizes[i])
        nodes, gpn = split_total(size, params.max_gpus_per_node)
        if u[i] < params.fail_fraction:
            state = "Failed"
        elif u[i] < params.fail_fraction + params.cancel_fraction:
            state = "Cancelled"
        else:
            state = "Completed"
        jobs.append(JobRecord(
            job_id=f"j{i + 1:05d}",
            job_name=f"{params.name_prefix}-{i + 1:05d}",
            partition_id=str(job_parts[i]),
            req_nodes=nodes,
            req_gpus_per_node=gpn,
            total_gpus=size,
            submit_time=int(submit[i]),
            start_time=None,
            end_time=None,
            final_state=state,
            service_time=int(service[i]),
        ))
    jobs.sort(key=lambda r: r.submit_time)
    return Workload(jobs=tuple(jobs), horizon=int(submit.max()))
