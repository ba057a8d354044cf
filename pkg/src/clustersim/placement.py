"""Placement policies (first-fit, best-fit, free-GPU), the cross-switch
penalty model, and post-completion migration planning.

All policies are deterministic: ties break by ascending node order, and GPU
slots within a node are taken lowest-index first.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from clustersim import kernels
from clustersim.cluster import make_allocation
from clustersim.errors import CostModelError, UnknownPartition
from clustersim.trace import split_total

PER_NODE = "per-node"
FREE_GPU = "free-gpu"


@dataclass(frozen=True)
class ResourceRequest:
    job_id: str
    partition_id: str
    mode: str
    req_nodes: Optional[int] = None
    gpus_per_node: Optional[int] = None
    total_gpus: Optional[int] = None

    @classmethod
    def per_node(cls, job_id, partition_id, req_nodes, gpus_per_node):
        if req_nodes < 1 or gpus_per_node < 1:
            raise ValueError("request counts must be >= 1")
        return cls(job_id, partition_id, PER_NODE, req_nodes, gpus_per_node,
                   req_nodes * gpus_per_node)

    @classmethod
    def free_gpu(cls, job_id, partition_id, total_gpus):
        if total_gpus < 1:
            raise ValueError("request counts must be >= 1")
        return cls(job_id, partition_id, FREE_GPU, None, None, total_gpus)

    @property
    def total(self):
        return self.total_gpus


@dataclass(frozen=True)
class PenaltyModel:
    cross_switch_ratio: float = 1.0

    def __post_init__(self):
        if self.cross_switch_ratio < 1.0:
            raise ValueError("cross_switch_ratio must be >= 1")


@dataclass(frozen=True)
class MigrationCostModel:
    enabled: bool = False
    fixed_overhead_s: float = 8.0
    model_size_bytes: float = 0.0
    pcie_bw_bytes_per_s: float = 16e9

    def __post_init__(self):
        if self.pcie_bw_bytes_per_s <= 0:
            raise CostModelError("pcie bandwidth must be positive")
        if self.fixed_overhead_s < 0 or self.model_size_bytes < 0:
            raise CostModelError("overheads must be nonnegative")


def migration_overhead(cost):
    """Seconds charged to a migrated job: fixed stop/resume cost plus the
    PCI-e transfer time of its model state."""
    return cost.fixed_overhead_s + cost.model_size_bytes / cost.pcie_bw_bytes_per_s


def effective_service_time(alloc, base_service, penalty):
    """Service time inflated by the communication penalty when the
    allocation spans more than one switch."""
    if base_service <= 0:
        raise ValueError("base_service must be > 0")
    if alloc.switch_span > 1:
        return base_service * penalty.cross_switch_ratio
    return base_service


def _partition_nodes(cluster, partition_id):
    pnodes = cluster.partition_nodes.get(partition_id)
    if pnodes is None:
        raise UnknownPartition(f"no partition {partition_id!r}")
    return pnodes


def place_first_fit(cluster, req):
    """First `req_nodes` nodes in ascending order with enough idle GPUs."""
    if req.mode != PER_NODE:
        raise ValueError("first-fit takes per-node requests")
    pnodes = _partition_nodes(cluster, req.partition_id)
    pos = kernels.first_fit_nodes(cluster.idle[pnodes], req.gpus_per_node, req.req_nodes)
    if len(pos) == 0:
        return None
    return make_allocation(cluster, req.job_id, req.partition_id,
                           pnodes[pos], [req.gpus_per_node] * req.req_nodes)


def place_best_fit(cluster, req):
    """The qualifying nodes with the fewest idle GPUs ("smallest
    sufficient"), ties by ascending node order."""
    if req.mode != PER_NODE:
        raise ValueError("best-fit takes per-node requests")
    pnodes = _partition_nodes(cluster, req.partition_id)
    pos = kernels.best_fit_nodes(cluster.idle[pnodes], req.gpus_per_node, req.req_nodes)
    if len(pos) == 0:
        return None
    return make_allocation(cluster, req.job_id, req.partition_id,
                           pnodes[pos], [req.gpus_per_node] * req.req_nodes)


def place_free_gpu(cluster, req):
    """Exactly `total` idle GPUs from any partition nodes, minimizing the
    node count (greedy by descending idle count)."""
    if req.mode != FREE_GPU:
        raise ValueError("free-gpu takes total-GPU requests")
    pnodes = _partition_nodes(cluster, req.partition_id)
    pos, takes = kernels.free_gpu_nodes(cluster.idle[pnodes], req.total)
    if len(pos) == 0:
        return None
    return make_allocation(cluster, req.job_id, req.partition_id, pnodes[pos], takes)


PLACEMENT_POLICIES = {
    "first-fit": place_first_fit,
    "best-fit": place_best_fit,
    "free-gpu": place_free_gpu,
}


def request_for_policy(record, placement_name, partition_max_gpus):
    """Convert a trace record's request into the form the partition's
    placement policy consumes.

    free-gpu placement works from the GPU total even when the trace gave a
    (nodes, gpus-per-node) tuple; node-based placements turn a bare total
    into the fewest-node exact decomposition with gpus_per_node <= node
    capacity.
    """
    if placement_name == "free-gpu":
        return ResourceRequest.free_gpu(record.job_id, record.partition_id, record.gpu_total)
    if record.is_per_node_request:
        return ResourceRequest.per_node(record.job_id, record.partition_id,
                                        record.req_nodes, record.req_gpus_per_node)
    nodes, gpn = split_total(record.gpu_total, partition_max_gpus)
    return ResourceRequest.per_node(record.job_id, record.partition_id, nodes, gpn)


def satisfiable(cluster, req):
    """Static capacity check: can this request ever be placed on an empty
    partition?"""
    pnodes = _partition_nodes(cluster, req.partition_id)
    caps = cluster.gpu_counts[pnodes]
    if req.mode == PER_NODE:
        return int(np.count_nonzero(caps >= req.gpus_per_node)) >= req.req_nodes
    return int(caps.sum()) >= req.total


@dataclass(frozen=True)
class MigrationPlan:
    moves: tuple  # tuple[(job_id, old Allocation, new Allocation), ...]
    overhead_per_job_s: float
    freed_nodes: int


def plan_migration(cluster, running_jobs, cost):
    """Single consolidation pass over running jobs in ascending allocated-GPU
    order: re-place each onto nodes already hosting other jobs and keep the
    move only when it strictly reduces the number of used nodes.

    `running_jobs` is an iterable of (job_id, ResourceRequest) pairs whose
    request mode matches how the job was placed. Returns None when no move
    improves node usage.
    """
    overhead = migration_overhead(cost)
    scratch = cluster.copy()
    used0 = scratch.used_node_count()
    moves = []
    order = sorted(running_jobs,
                   key=lambda jr: (scratch.allocations[jr[0]].slot_count(), jr[0]))
    for job_id, req in order:
        old = scratch.allocations[job_id]
        pid = old.partition_id
        pnodes = scratch.partition_nodes[pid]
        used_before = scratch.used_node_count(pnodes)
        released = scratch.release_allocation(job_id)
        idle_sub = scratch.idle[pnodes]
        hosting_others = (scratch.gpu_counts[pnodes] - idle_sub) > 0
        new_alloc = None
        if req.mode == PER_NODE:
            masked = np.where(hosting_others, idle_sub, -1)
            pos = kernels.best_fit_nodes(masked, req.gpus_per_node, req.req_nodes)
            if len(pos):
                new_alloc = make_allocation(scratch, job_id, pid, pnodes[pos],
                                            [req.gpus_per_node] * req.req_nodes)
        else:
            masked = np.where(hosting_others, idle_sub, 0)
            pos, takes = kernels.free_gpu_nodes(masked, req.total)
            if len(pos):
                new_alloc = make_allocation(scratch, job_id, pid, pnodes[pos], takes)
        if new_alloc is not None:
            scratch.commit_allocation(new_alloc)
            if scratch.used_node_count(pnodes) < used_before:
                moves.append((job_id, old, new_alloc))
                continue
            scratch.release_allocation(job_id)
        scratch.commit_allocation(released)
    if not moves:
        return None
    return MigrationPlan(moves=tuple(moves), overhead_per_job_s=overhead,
                         freed_nodes=used0 - scratch.used_node_count())
