"""Deterministic discrete-event loop driving the simulation.

Event order at equal timestamps is fixed: completions free resources first,
then quantum expiries, then submits, and one coalesced reschedule per
partition runs last. Job-targeted events carry the job's epoch and are
dropped when stale (the job was preempted, migrated, or finished since the
event was armed).
"""

import heapq
import math
from bisect import insort
from dataclasses import dataclass, field
from typing import Optional

from clustersim import scheduler as sched
from clustersim.errors import AccountingError, ConfigError
from clustersim.placement import (MigrationCostModel, PenaltyModel,
                                  PLACEMENT_POLICIES, plan_migration,
                                  request_for_policy, satisfiable)
from clustersim.scheduler import (DONE, PREEMPTED, RUNNING, UNSATISFIABLE,
                                  JobState, MlfqConfig, QueueState)
from clustersim.trace import trace_digest

K_COMPLETION, K_EXPIRY, K_SUBMIT, K_RESCHEDULE = 0, 1, 2, 3

_EPS = 1e-6


@dataclass(frozen=True)
class RunInterval:
    start: float
    end: float
    nodes: tuple  # node ids, ascending
    slots: tuple  # GpuSlots held
    switch_span: int

    @property
    def duration(self):
        return self.end - self.start


@dataclass
class JobLifecycle:
    job_id: str
    job_name: str
    partition_id: str
    total_gpus: int
    submit: float
    first_start: Optional[float]
    finish: Optional[float]
    status: str
    trace_state: str
    base_service: float
    overhead_paid: float
    preemptions: int
    migrations: int
    resumes: int
    intervals: tuple

    @property
    def jct(self):
        if self.finish is None:
            return None
        return self.finish - self.submit

    @property
    def run_wall(self):
        return sum(iv.duration for iv in self.intervals)

    @property
    def pending_time(self):
        if self.jct is None:
            return None
        return self.jct - self.run_wall


@dataclass(frozen=True)
class MigrationEvent:
    time: float
    job_id: str
    from_nodes: tuple
    to_nodes: tuple
    used_nodes_before: int
    used_nodes_after: int
    overhead_s: float


@dataclass
class RunLog:
    jobs: dict  # job_id -> JobLifecycle, trace order
    samples: list  # (t, pending, running, used_gpus, used_nodes, frag|None)
    unsatisfiable: list
    migration_events: list
    preemption_events: list  # (t, job_id)
    scheduler_name: str
    placement_name: str
    partition_policies: dict
    seed: int
    trace_hash: str
    sample_period_s: float
    makespan: float
    total_gpus: int
    max_node_gpus: int

    def interval_count(self):
        return sum(len(j.intervals) for j in self.jobs.values())


@dataclass
class EngineConfig:
    scheduler: str = "fcfs"
    placement: str = "best-fit"
    partition_policies: dict = field(default_factory=dict)
    mlfq: MlfqConfig = field(default_factory=MlfqConfig)
    rr_slice_s: float = 3250.0
    preempt_overhead_s: float = 8.0
    penalty: PenaltyModel = field(default_factory=PenaltyModel)
    migration: MigrationCostModel = field(default_factory=MigrationCostModel)
    sample_period_s: float = 60.0
    debug_invariants: bool = False
    seed: int = 0


def advance_running_job(job, interval):
    """Account `interval` wall seconds of running time: owed overhead burns
    first, the rest progresses service (scaled by the penalty rate) and the
    quantum."""
    if interval < -1e-9:
        raise AccountingError("negative running interval")
    if interval <= 0:
        return job
    oh = job.pending_overhead if job.pending_overhead < interval else interval
    job.pending_overhead -= oh
    job.overhead_paid += oh
    wall = interval - oh
    if wall > 0:
        service = wall / job.rate
        if service > job.remaining + _EPS:
            raise AccountingError(
                f"job {job.job_id}: service overrun ({service} > {job.remaining})")
        job.remaining = max(0.0, job.remaining - service)
        job.attained += service
        if job.quantum_remaining != math.inf:
            job.quantum_remaining = max(0.0, job.quantum_remaining - wall)
    job.last_advance += interval
    return job


class _PartitionRuntime:
    __slots__ = ("pid", "policy", "placement_name", "place_fn", "pending", "running")

    def __init__(self, pid, policy, placement_name):
        self.pid = pid
        self.policy = policy
        self.placement_name = placement_name
        self.place_fn = PLACEMENT_POLICIES[placement_name]
        self.pending = []  # JobStates sorted by policy.sort_key
        self.running = {}  # job_id -> JobState


class Simulation:
    def __init__(self, workload, cluster, config=None):
        self.workload = workload
        self.cluster = cluster
        self.config = config or EngineConfig()
        self.parts = {}
        for pid in cluster.partition_ids:
            binding = self.config.partition_policies.get(pid, {})
            sname = binding.get("scheduler", self.config.scheduler)
            plname = binding.get("placement", self.config.placement)
            if plname not in PLACEMENT_POLICIES:
                raise ConfigError(f"unknown placement {plname!r} (field 'placement')")
            policy = sched.build_policy(sname, rr_slice_s=self.config.rr_slice_s,
                                        mlfq=self.config.mlfq)
            self.parts[pid] = _PartitionRuntime(pid, policy, plname)

        self.jobs = {}
        self.heap = []
        self._seq = 0
        self._queue_seq = 0
        self._resched_pending = {}
        self._open_iv = {}
        self.samples = []
        self.unsatisfiable = []
        self.migration_events = []
        self.preemption_events = []
        self.n_pending = 0
        self.n_running = 0
        self.now = 0.0

        for rec in workload.jobs:
            rt = self.parts.get(rec.partition_id)
            if rt is None:
                raise ConfigError(
                    f"job {rec.job_id!r} targets unknown partition {rec.partition_id!r}")
            pnodes = cluster.partition_nodes[rec.partition_id]
            pmax = int(cluster.gpu_counts[pnodes].max())
            req = request_for_policy(rec, rt.placement_name, pmax)
            js = JobState(record=rec, request=req, remaining=float(rec.service_time))
            js.quantum_remaining = rt.policy.initial_quantum(js)
            self.jobs[rec.job_id] = js
            self._push(float(rec.submit_time), K_SUBMIT, js, 0)

    # -- event plumbing ------------------------------------------------------

    def _push(self, t, kind, payload, epoch):
        heapq.heappush(self.heap, (t, kind, self._seq, payload, epoch))
        self._seq += 1

    def _schedule_resched(self, pid, t):
        if self._resched_pending.get(pid) == t:
            return
        self._resched_pending[pid] = t
        self._push(t, K_RESCHEDULE, pid, 0)

    def _arm_job_events(self, js, now):
        t_done = now + js.pending_overhead + js.remaining * js.rate
        js.projected_finish = t_done
        self._push(t_done, K_COMPLETION, js, js.epoch)
        if js.quantum_remaining != math.inf:
            t_exp = now + js.pending_overhead + js.quantum_remaining
            if t_exp < t_done:
                self._push(t_exp, K_EXPIRY, js, js.epoch)

    # -- run loop ------------------------------------------------------------

    def run(self):
        period = self.config.sample_period_s
        next_cadence = period if period and period > 0 else math.inf
        current_t = None
        while self.heap:
            t, kind, _seq, payload, epoch = heapq.heappop(self.heap)
            if current_t is None:
                while next_cadence < t:
                    self._sample(next_cadence)
                    next_cadence += period
                current_t = t
            elif t > current_t:
                self._sample(current_t)
                while next_cadence < t:
                    if next_cadence > current_t:
                        self._sample(next_cadence)
                    next_cadence += period
                current_t = t
            self.now = t
            if kind == K_SUBMIT:
                self.on_submit(payload, t)
            elif kind == K_COMPLETION:
                self.on_completion(payload, epoch, t)
            elif kind == K_EXPIRY:
                self.on_expiry(payload, epoch, t)
            else:
                self.on_reschedule(payload, t)
            if self.config.debug_invariants:
                self.cluster.check_conservation()
        if current_t is not None:
            self._sample(current_t)
        for js in self.jobs.values():
            if js.status not in (DONE, UNSATISFIABLE):
                raise AccountingError(
                    f"job {js.job_id} ended the run in state {js.status}")
        if self.cluster.allocations:
            raise AccountingError("allocations leaked past quiescence")
        return self._build_log(current_t if current_t is not None else 0.0)

    def _sample(self, t):
        self.samples.append((
            t, self.n_pending, self.n_running,
            self.cluster.used_gpu_count(), self.cluster.used_node_count(),
            self.cluster.fragmentation_ratio(),
        ))

    # -- handlers --------------------------------------------------------------

    def on_submit(self, js, now):
        rt = self.parts[js.record.partition_id]
        if not satisfiable(self.cluster, js.request):
            js.status = UNSATISFIABLE
            self.unsatisfiable.append(js.job_id)
            return
        self._enqueue(rt, js)
        self._schedule_resched(rt.pid, now)

    def _advance_to(self, js, now):
        advance_running_job(js, now - js.last_advance)
        js.last_advance = now

    def on_completion(self, js, epoch, now):
        if js.epoch != epoch or js.status != RUNNING:
            return
        self._advance_to(js, now)
        if js.remaining > _EPS:
            raise AccountingError(
                f"completion fired with {js.remaining}s service left on {js.job_id}")
        js.remaining = 0.0
        self._close_interval(js, now)
        self.cluster.release_allocation(js.job_id)
        rt = self.parts[js.record.partition_id]
        del rt.running[js.job_id]
        self.n_running -= 1
        js.status = DONE
        js.finish = now
        js.allocation = None
        js.epoch += 1
        if self.config.migration.enabled:
            self._migration_pass(rt, now)
        self._schedule_resched(rt.pid, now)

    def on_expiry(self, js, epoch, now):
        if js.epoch != epoch or js.status != RUNNING:
            return
        self._advance_to(js, now)
        if js.quantum_remaining > _EPS:
            raise AccountingError(f"early quantum expiry on {js.job_id}")
        js.quantum_remaining = 0.0
        rt = self.parts[js.record.partition_id]
        has_waiters = bool(rt.pending)
        if rt.policy.handle_expiry(js, has_waiters):
            self._close_interval(js, now)
            self.cluster.release_allocation(js.job_id)
            del rt.running[js.job_id]
            self.n_running -= 1
            js.allocation = None
            js.epoch += 1
            js.preempt_count += 1
            self.preemption_events.append((now, js.job_id))
            self._enqueue(rt, js)
            self._schedule_resched(rt.pid, now)
        else:
            if js.pending_overhead > _EPS:
                raise AccountingError("renewed quantum with overhead outstanding")
            t_exp = now + js.quantum_remaining
            if t_exp < js.projected_finish:
                self._push(t_exp, K_EXPIRY, js, js.epoch)

    def on_reschedule(self, pid, now):
        if self._resched_pending.get(pid) == now:
            del self._resched_pending[pid]
        rt = self.parts[pid]
        if not rt.pending:
            return
        queue = QueueState(pid, rt.pending, list(rt.running.values()))
        decision = sched.decide(rt.policy, queue, self.cluster, now,
                                rt.placement_name, presorted=True)
        for job_id, request in decision.admit:
            js = self.jobs[job_id]
            alloc = rt.place_fn(self.cluster, request)
            if alloc is None:
                raise AccountingError(
                    f"admission of {job_id} failed to place (decision bug)")
            self.cluster.commit_allocation(alloc)
            rt.pending.remove(js)
            self.n_pending -= 1
            self._start(rt, js, alloc, now)

    # -- state transitions ------------------------------------------------------

    def _enqueue(self, rt, js):
        js.enqueue_seq = self._queue_seq
        self._queue_seq += 1
        insort(rt.pending, js, key=rt.policy.sort_key)
        self.n_pending += 1

    def _start(self, rt, js, alloc, now):
        js.allocation = alloc
        if js.status == PREEMPTED:
            js.pending_overhead += self.config.preempt_overhead_s
            js.resume_count += 1
        js.status = RUNNING
        if js.first_start is None:
            js.first_start = now
        js.rate = self._rate_for(alloc)
        js.last_advance = now
        js.epoch += 1
        q = rt.policy.quantum_on_start(js)
        if q is not None:
            js.quantum_remaining = q
        rt.running[js.job_id] = js
        self.n_running += 1
        self._open_interval(js, now)
        self._arm_job_events(js, now)

    def _rate_for(self, alloc):
        if alloc.switch_span > 1:
            return self.config.penalty.cross_switch_ratio
        return 1.0

    def _migration_pass(self, rt, now):
        if not rt.running:
            return
        pairs = [(jid, j.request) for jid, j in rt.running.items()]
        plan = plan_migration(self.cluster, pairs, self.config.migration)
        if plan is None:
            return
        for job_id, _old, new_alloc in plan.moves:
            js = self.jobs[job_id]
            used_before = self.cluster.used_node_count()
            self._advance_to(js, now)
            self._close_interval(js, now)
            old = self.cluster.release_allocation(job_id)
            self.cluster.commit_allocation(new_alloc)
            used_after = self.cluster.used_node_count()
            if used_after >= used_before:
                raise AccountingError("migration move failed to reduce used nodes")
            js.allocation = new_alloc
            js.rate = self._rate_for(new_alloc)
            js.pending_overhead += plan.overhead_per_job_s
            js.migration_count += 1
            js.epoch += 1
            self._open_interval(js, now)
            self._arm_job_events(js, now)
            self.migration_events.append(MigrationEvent(
                time=now, job_id=job_id,
                from_nodes=self._alloc_nodes(old),
                to_nodes=self._alloc_nodes(new_alloc),
                used_nodes_before=used_before, used_nodes_after=used_after,
                overhead_s=plan.overhead_per_job_s))

    # -- interval log -------------------------------------------------------------

    def _alloc_nodes(self, alloc):
        return tuple(sorted((self.cluster.node_ids[p] for p in alloc.node_positions),
                            key=lambda nid: self.cluster.node_index[nid]))

    def _open_interval(self, js, now):
        self._open_iv[js.job_id] = now

    def _close_interval(self, js, now):
        start = self._open_iv.pop(js.job_id)
        alloc = js.allocation
        js.intervals.append(RunInterval(
            start=start, end=now,
            nodes=self._alloc_nodes(alloc),
            slots=alloc.slots,
            switch_span=alloc.switch_span))

    # -- output ---------------------------------------------------------------------

    def _build_log(self, makespan):
        jobs = {}
        for rec in self.workload.jobs:
            js = self.jobs[rec.job_id]
            jobs[rec.job_id] = JobLifecycle(
                job_id=rec.job_id,
                job_name=rec.job_name,
                partition_id=rec.partition_id,
                total_gpus=js.request.total,
                submit=float(rec.submit_time),
                first_start=js.first_start,
                finish=js.finish,
                status=js.status,
                trace_state=rec.final_state,
                base_service=float(rec.service_time),
                overhead_paid=js.overhead_paid,
                preemptions=js.preempt_count,
                migrations=js.migration_count,
                resumes=js.resume_count,
                intervals=tuple(js.intervals),
            )
        return RunLog(
            jobs=jobs,
            samples=self.samples,
            unsatisfiable=self.unsatisfiable,
            migration_events=self.migration_events,
            preemption_events=self.preemption_events,
            scheduler_name=self.config.scheduler,
            placement_name=self.config.placement,
            partition_policies=dict(self.config.partition_policies),
            seed=self.config.seed,
            trace_hash=trace_digest(self.workload),
            sample_period_s=self.config.sample_period_s,
            makespan=makespan,
            total_gpus=self.cluster.total_gpus,
            max_node_gpus=int(self.cluster.gpu_counts.max()) if len(self.cluster.node_ids) else 0,
        )


def run(workload, cluster, config=None):
    """Simulate `workload` on `cluster` under `config` and return the RunLog."""
    return Simulation(workload, cluster, config).run()
