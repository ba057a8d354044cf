"""Job-scheduling policies and the per-partition admission decision.

Implements FCFS, FCFS with EASY backfill, SJF, LAS, Round-Robin, MLFQ, and
LAS-MLFQ behind one interface. Non-preemptive policies admit the longest
feasible prefix of their priority order (the blocked head blocks the rest);
preemptive policies skip over jobs that do not fit right now. Preemption
itself is driven by quantum-expiry events, never by admission decisions.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from clustersim import kernels
from clustersim.errors import ConfigError
from clustersim.placement import FREE_GPU, PER_NODE

PENDING = "pending"
RUNNING = "running"
PREEMPTED = "preempted"
DONE = "done"
UNSATISFIABLE = "unsatisfiable"


@dataclass(eq=False)
class JobState:
    """Evolving simulation state of one traced job.

    `attained`/`remaining` count base service seconds (before the
    cross-switch penalty); `rate` is wall seconds per service second under
    the current allocation. `pending_overhead` is wall time still owed for
    resume/migration before service progresses; `quantum_remaining` counts
    productive wall time left in the current turn.
    """

    record: object
    request: object
    status: str = PENDING
    attained: float = 0.0
    remaining: float = 0.0
    pending_overhead: float = 0.0
    overhead_paid: float = 0.0
    rate: float = 1.0
    queue_level: int = 0
    quantum_remaining: float = math.inf
    allocation: object = None
    epoch: int = 0
    resume_count: int = 0
    preempt_count: int = 0
    migration_count: int = 0
    enqueue_seq: int = 0
    last_advance: float = 0.0
    projected_finish: float = math.inf
    first_start: Optional[float] = None
    finish: Optional[float] = None
    intervals: list = field(default_factory=list)

    @property
    def job_id(self):
        return self.record.job_id

    @property
    def total_gpus(self):
        return self.request.total


@dataclass(frozen=True)
class MlfqConfig:
    quanta: tuple = (3250.0, 7200.0, 18000.0)
    scaling: str = "none"  # "none" | "per-gpu"

    def __post_init__(self):
        if not self.quanta:
            raise ConfigError("mlfq needs at least one quantum")
        if any(b <= a for a, b in zip(self.quanta, self.quanta[1:])):
            raise ConfigError("mlfq quanta must be strictly increasing")
        if self.scaling not in ("none", "per-gpu"):
            raise ConfigError("mlfq scaling must be 'none' or 'per-gpu'")

    @property
    def levels(self):
        return len(self.quanta)

    def quantum_at(self, level, total_gpus):
        base = self.quanta[level]
        if self.scaling == "per-gpu":
            return float(las_mlfq_quantum(base, total_gpus))
        return float(base)


@dataclass
class Decision:
    admit: list  # ordered [(job_id, ResourceRequest), ...]
    preempt: list  # [job_id, ...]


@dataclass
class QueueState:
    partition_id: str
    pending: list  # JobStates with status pending/preempted
    running: list  # JobStates with status running


# -- standalone policy operations -------------------------------------------

def las_priority(job):
    """Least-attained-service ordering key."""
    return (job.attained, job.record.submit_time, job.record.job_id)


def las_mlfq_quantum(base_quantum, total_gpus):
    """Quantum divided by the job's GPU count, exact (a 4-GPU job gets a
    quarter of a 1-GPU job's quantum)."""
    if total_gpus < 1:
        raise ValueError("total_gpus must be >= 1")
    return Fraction(base_quantum) / total_gpus


def mlfq_on_quantum_expiry(job, cfg):
    """Demote a running job whose quantum ran out: down one level (clamped),
    preempted, next level's quantum armed. The engine releases its GPUs and
    charges the resume overhead when it next starts."""
    assert job.status == RUNNING, "quantum expiry on a non-running job"
    assert job.quantum_remaining <= 1e-9
    job.queue_level = min(job.queue_level + 1, cfg.levels - 1)
    job.status = PREEMPTED
    job.quantum_remaining = cfg.quantum_at(job.queue_level, job.total_gpus)
    return job


def round_robin_tick(running, pending, time_slice):
    """Slice-boundary decision: expired runners go to the queue tail when
    anyone is waiting; waiters are admitted head-first."""
    if time_slice <= 0:
        raise ValueError("time_slice must be > 0")
    preempt = []
    if pending:
        preempt = [j.job_id for j in running if j.quantum_remaining <= 1e-9]
    order = sorted(pending, key=lambda j: (j.enqueue_seq, j.job_id))
    admit = [(j.job_id, j.request) for j in order]
    return Decision(admit=admit, preempt=preempt)


# -- admission feasibility ---------------------------------------------------

class FeasibilityTracker:
    """Incremental feasibility over a scratch copy of a partition's per-node
    idle counts, mirroring exactly what sequential placements would do."""

    def __init__(self, idle, max_gpus, placement_name):
        self.idle = idle.astype(np.int64).copy()
        self.maxg = int(max_gpus)
        self.placement = placement_name
        hist = np.bincount(self.idle, minlength=self.maxg + 1)
        self.count_ge = np.cumsum(hist[::-1])[::-1]  # count_ge[k] = #nodes idle >= k
        self.total_idle = int(self.idle.sum())

    def feasible(self, req):
        if req.mode == PER_NODE:
            g = req.gpus_per_node
            if g > self.maxg:
                return False
            return int(self.count_ge[g]) >= req.req_nodes
        return self.total_idle >= req.total

    def try_commit(self, req):
        """Reserve nodes exactly as the placement policy would; returns
        (positions, takes) or None."""
        if not self.feasible(req):
            return None
        if req.mode == PER_NODE:
            g, n = req.gpus_per_node, req.req_nodes
            if self.placement == "first-fit":
                pos = kernels.first_fit_nodes(self.idle, g, n)
            else:
                pos = kernels.best_fit_nodes(self.idle, g, n)
            takes = [g] * n
        else:
            pos, takes = kernels.free_gpu_nodes(self.idle, req.total)
        assert len(pos), "feasibility pre-check disagreed with kernel"
        for p, t in zip(pos, takes):
            self._take(int(p), int(t))
        return pos, takes

    def _take(self, p, t):
        v = int(self.idle[p])
        self.idle[p] = v - t
        hi = min(v, self.maxg)
        for k in range(v - t + 1, hi + 1):
            self.count_ge[k] -= 1
        self.total_idle -= t


def _local_positions(pnodes, global_positions):
    return np.searchsorted(pnodes, np.asarray(global_positions, dtype=np.int64))


def fcfs_backfill_order(pending, cluster, partition_id, placement_name, running, now):
    """EASY backfill over submit-ordered pending jobs.

    The head blocked job gets a reservation at the earliest instant the
    known remaining work of running (and just-admitted) jobs frees enough
    resources; later jobs start now only if they fit now and their full
    estimated run ends by that reservation.
    """
    pnodes = cluster.partition_nodes[partition_id]
    tracker = FeasibilityTracker(cluster.idle[pnodes],
                                 cluster.gpu_counts[pnodes].max(), placement_name)
    admit = []
    releases = []  # (finish_time, local positions, counts)
    for job in running:
        alloc = job.allocation
        releases.append((job.projected_finish,
                         _local_positions(pnodes, alloc.node_positions),
                         np.array(alloc.counts_by_position(), dtype=np.int64)))

    i = 0
    n = len(pending)
    while i < n:
        job = pending[i]
        res = tracker.try_commit(job.request)
        if res is None:
            break
        admit.append((job.job_id, job.request))
        est_finish = now + job.pending_overhead + job.remaining * job.rate
        releases.append((est_finish, res[0].astype(np.int64),
                         np.array(res[1], dtype=np.int64)))
        i += 1
    if i >= n:
        return admit

    head = pending[i]
    t_res = _head_reservation(tracker, releases, head.request)
    if t_res is None:
        # head cannot start on any known release; nothing may jump it
        return admit
    for j in range(i + 1, n):
        job = pending[j]
        est = job.pending_overhead + job.remaining * job.rate
        if now + est > t_res:
            continue
        if tracker.try_commit(job.request) is not None:
            admit.append((job.job_id, job.request))
    return admit


def _head_reservation(tracker, releases, head_req):
    releases = sorted(releases, key=lambda r: r[0])
    rel_pos, rel_cnt, group_start, times = [], [], [0], []
    for t, pos, cnt in releases:
        if times and t == times[-1]:
            rel_pos.extend(pos)
            rel_cnt.extend(cnt)
            group_start[-1] = len(rel_pos)
        else:
            times.append(t)
            rel_pos.extend(pos)
            rel_cnt.extend(cnt)
            group_start.append(len(rel_pos))
    if head_req.mode == PER_NODE:
        mode, g, nn, tot = 0, head_req.gpus_per_node, head_req.req_nodes, 0
    else:
        mode, g, nn, tot = 1, 0, 0, head_req.total
    idx = kernels.earliest_feasible_group(
        tracker.idle,
        np.array(rel_pos, dtype=np.int64),
        np.array(rel_cnt, dtype=np.int64),
        np.array(group_start, dtype=np.int64),
        mode, g, nn, tot)
    if idx < 0:
        return None
    return times[idx]


# -- policy classes -----------------------------------------------------------

class SchedulingPolicy:
    name = "?"
    preemptive = False
    admission = "strict"  # strict | skip | backfill

    def sort_key(self, job):
        raise NotImplementedError

    def initial_quantum(self, job):
        return math.inf

    def quantum_on_start(self, job):
        """Fresh turn length granted at (re)start, None to keep the armed one."""
        return None

    def handle_expiry(self, job, has_waiters):
        """Mutate job at quantum expiry; True when the job must be preempted."""
        raise AssertionError("quantum expiry under a non-preemptive policy")


class FcfsPolicy(SchedulingPolicy):
    name = "fcfs"

    def sort_key(self, job):
        return (job.record.submit_time, job.record.job_id)


class FcfsBackfillPolicy(FcfsPolicy):
    name = "fcfs-backfill"
    admission = "backfill"


class SjfPolicy(SchedulingPolicy):
    name = "sjf"

    def sort_key(self, job):
        return (job.record.service_time, job.record.submit_time, job.record.job_id)


class LasPolicy(SchedulingPolicy):
    name = "las"

    def sort_key(self, job):
        return las_priority(job)


class RoundRobinPolicy(SchedulingPolicy):
    name = "rr"
    preemptive = True
    admission = "skip"

    def __init__(self, time_slice):
        if time_slice <= 0:
            raise ConfigError("rr slice_s must be > 0")
        self.time_slice = float(time_slice)

    def sort_key(self, job):
        return (job.enqueue_seq,)

    def initial_quantum(self, job):
        return self.time_slice

    def quantum_on_start(self, job):
        return self.time_slice

    def handle_expiry(self, job, has_waiters):
        # work-conserving: no context switch when nobody waits
        job.quantum_remaining = self.time_slice
        if has_waiters:
            job.status = PREEMPTED
            return True
        return False


class MlfqPolicy(SchedulingPolicy):
    name = "mlfq"
    preemptive = True
    admission = "skip"

    def __init__(self, cfg):
        self.cfg = cfg

    def sort_key(self, job):
        return (job.queue_level, job.enqueue_seq)

    def initial_quantum(self, job):
        return self.cfg.quantum_at(0, job.total_gpus)

    def handle_expiry(self, job, has_waiters):
        # demotion preempts unconditionally; an uncontended job resumes on
        # the spot, paying the stop/resume overhead
        mlfq_on_quantum_expiry(job, self.cfg)
        return True


class LasMlfqPolicy(MlfqPolicy):
    name = "las-mlfq"

    def sort_key(self, job):
        return (job.queue_level,) + las_priority(job)


def build_policy(name, *, rr_slice_s=3250.0, mlfq=None):
    if name == "fcfs":
        return FcfsPolicy()
    if name == "fcfs-backfill":
        return FcfsBackfillPolicy()
    if name == "sjf":
        return SjfPolicy()
    if name == "las":
        return LasPolicy()
    if name == "rr":
        return RoundRobinPolicy(rr_slice_s)
    if name == "mlfq":
        return MlfqPolicy(mlfq or MlfqConfig())
    if name == "las-mlfq":
        cfg = mlfq or MlfqConfig()
        return LasMlfqPolicy(MlfqConfig(quanta=cfg.quanta, scaling="per-gpu"))
    raise ConfigError(f"unknown scheduler {name!r}")


SCHEDULER_NAMES = ("fcfs", "fcfs-backfill", "sjf", "las", "rr", "mlfq", "las-mlfq")


def decide(policy, queue, cluster, now, placement_name="best-fit", presorted=False):
    """One admission decision for one partition at time `now`.

    Returns the ordered admissions the engine can apply verbatim: every
    listed request is guaranteed to place on the current cluster state when
    applied in order. Preemptions are not decided here; they come from
    quantum-expiry events.
    """
    pending = queue.pending if presorted else sorted(queue.pending, key=policy.sort_key)
    if not pending:
        return Decision([], [])
    if policy.admission == "backfill":
        admit = fcfs_backfill_order(pending, cluster, queue.partition_id,
                                    placement_name, queue.running, now)
        return Decision(admit, [])
    pnodes = cluster.partition_nodes[queue.partition_id]
    tracker = FeasibilityTracker(cluster.idle[pnodes],
                                 cluster.gpu_counts[pnodes].max(), placement_name)
    admit = []
    for job in pending:
        if tracker.try_commit(job.request) is not None:
            admit.append((job.job_id, job.request))
        elif policy.admission == "strict":
            break
    return Decision(admit, [])
