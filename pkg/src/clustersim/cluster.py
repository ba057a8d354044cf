"""Cluster resource model: physical nodes/switches, logical partitions, and
per-GPU occupancy bookkeeping.

Occupancy is tracked per GPU card in a numpy grid (-2 = no such card,
-1 = idle, >=0 = internal job key); placement policies scan the derived
per-node idle counts.
"""

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from clustersim.errors import AccountingError, ConfigError, SlotConflict, UnknownJob

PAD = -2
IDLE = -1


class GpuSlot(NamedTuple):
    node_id: str
    gpu_index: int


@dataclass(frozen=True)
class Node:
    node_id: str
    gpu_count: int
    switch_id: str
    partition_id: str


@dataclass(frozen=True)
class Switch:
    switch_id: str
    node_ids: tuple


@dataclass(frozen=True)
class Partition:
    partition_id: str
    node_ids: tuple
    policy_binding: Optional[tuple] = None  # (scheduler_name, placement_name)


@dataclass(frozen=True)
class Allocation:
    """The concrete GPU slots held by one job, all inside one partition."""

    job_id: str
    partition_id: str
    slots: tuple  # tuple[GpuSlot, ...], sorted
    node_span: int
    switch_span: int
    node_positions: tuple  # internal node indexes, parallel to gpu_indexes
    gpu_indexes: tuple  # tuple[tuple[int, ...], ...] per node

    def slot_count(self):
        return len(self.slots)

    def counts_by_position(self):
        return tuple(len(g) for g in self.gpu_indexes)


@dataclass(frozen=True)
class UsageSample:
    time: float
    used_gpus: int
    used_nodes: int
    idle_gpus: int
    per_partition: dict  # partition_id -> (used_gpus, used_nodes)


def _id_sort_key(ids):
    """Numeric order when every id parses as an int, else lexicographic."""
    try:
        keys = {i: int(i) for i in ids}
        return lambda x: keys[x]
    except (TypeError, ValueError):
        return lambda x: x


class Cluster:
    """Mutable cluster state for one simulation run.

    Node order (used by every "ascending node_id" rule) is numeric when all
    node ids are integers, lexicographic otherwise; zero-padded string ids
    keep the two consistent.
    """

    def __init__(self, nodes, switches, partitions):
        ids = [n.node_id for n in nodes]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate node id")
        order = sorted(ids, key=_id_sort_key(ids))
        by_id = {n.node_id: n for n in nodes}
        self.node_ids = list(order)
        self.node_index = {nid: i for i, nid in enumerate(order)}
        self.nodes = {nid: by_id[nid] for nid in order}
        self.switches = {s.switch_id: s for s in switches}
        self.partitions = {p.partition_id: p for p in partitions}
        self.partition_ids = sorted(self.partitions, key=_id_sort_key(self.partitions))
        self.switch_ids = sorted(self.switches, key=_id_sort_key(self.switches))

        n = len(order)
        self.gpu_counts = np.array([by_id[i].gpu_count for i in order], dtype=np.int64)
        sw_idx = {sid: k for k, sid in enumerate(self.switch_ids)}
        pt_idx = {pid: k for k, pid in enumerate(self.partition_ids)}
        self.switch_of = np.array([sw_idx[by_id[i].switch_id] for i in order], dtype=np.int64)
        self.partition_of = np.array([pt_idx[by_id[i].partition_id] for i in order], dtype=np.int64)
        self.partition_nodes = {
            pid: np.array(sorted((self.node_index[nid] for nid in self.partitions[pid].node_ids)),
                          dtype=np.int64)
            for pid in self.partition_ids
        }

        maxg = int(self.gpu_counts.max()) if n else 0
        self.grid = np.full((n, maxg), PAD, dtype=np.int64)
        for i in range(n):
            self.grid[i, : self.gpu_counts[i]] = IDLE
        self.idle = self.gpu_counts.copy()
        self.total_gpus = int(self.gpu_counts.sum())

        self.allocations = {}
        self._job_keys = {}
        self._key_jobs = []

    # -- construction ------------------------------------------------------

    def copy(self):
        c = Cluster.__new__(Cluster)
        c.node_ids = self.node_ids
        c.node_index = self.node_index
        c.nodes = self.nodes
        c.switches = self.switches
        c.partitions = self.partitions
        c.partition_ids = self.partition_ids
        c.switch_ids = self.switch_ids
        c.gpu_counts = self.gpu_counts
        c.switch_of = self.switch_of
        c.partition_of = self.partition_of
        c.partition_nodes = self.partition_nodes
        c.total_gpus = self.total_gpus
        c.grid = self.grid.copy()
        c.idle = self.idle.copy()
        c.allocations = dict(self.allocations)
        c._job_keys = dict(self._job_keys)
        c._key_jobs = list(self._key_jobs)
        return c

    # -- occupancy bookkeeping ---------------------------------------------

    def _key_for(self, job_id):
        key = self._job_keys.get(job_id)
        if key is None:
            key = len(self._key_jobs)
            self._job_keys[job_id] = key
            self._key_jobs.append(job_id)
        return key

    def commit_allocation(self, alloc):
        """Mark every slot of `alloc` as held by its job.

        Raises SlotConflict when any slot is not idle (placement-policy bug).
        """
        key = self._key_for(alloc.job_id)
        for pos, idxs in zip(alloc.node_positions, alloc.gpu_indexes):
            row = self.grid[pos]
            for g in idxs:
                if row[g] != IDLE:
                    holder = self._key_jobs[row[g]] if row[g] >= 0 else "<no such GPU>"
                    raise SlotConflict(GpuSlot(self.node_ids[pos], int(g)), holder)
        if alloc.job_id in self.allocations:
            raise SlotConflict(alloc.slots[0], alloc.job_id)
        for pos, idxs in zip(alloc.node_positions, alloc.gpu_indexes):
            self.grid[pos, list(idxs)] = key
            self.idle[pos] -= len(idxs)
        self.allocations[alloc.job_id] = alloc

    def release_allocation(self, job_id):
        """Free every slot held by `job_id`; returns the released Allocation."""
        alloc = self.allocations.pop(job_id, None)
        if alloc is None:
            raise UnknownJob(f"job {job_id!r} holds no allocation")
        for pos, idxs in zip(alloc.node_positions, alloc.gpu_indexes):
            self.grid[pos, list(idxs)] = IDLE
            self.idle[pos] += len(idxs)
        return alloc

    def node_occupancy(self, node_id):
        """gpu_index -> job_id or None for one node."""
        row = self.grid[self.node_index[node_id]]
        out = {}
        for g in range(int(self.gpu_counts[self.node_index[node_id]])):
            v = int(row[g])
            out[g] = self._key_jobs[v] if v >= 0 else None
        return out

    # -- metrics -----------------------------------------------------------

    def used_gpu_count(self):
        return self.total_gpus - int(self.idle.sum())

    def used_node_count(self, node_positions=None):
        if node_positions is None:
            return int(np.count_nonzero(self.idle < self.gpu_counts))
        return int(np.count_nonzero(self.idle[node_positions] < self.gpu_counts[node_positions]))

    def fragmentation_ratio(self):
        """Occupied GPUs per occupied node; None when nothing runs."""
        used_nodes = self.used_node_count()
        if used_nodes == 0:
            return None
        return self.used_gpu_count() / used_nodes

    def utilization_snapshot(self, time):
        per_partition = {}
        for pid in self.partition_ids:
            pn = self.partition_nodes[pid]
            used = int((self.gpu_counts[pn] - self.idle[pn]).sum())
            per_partition[pid] = (used, self.used_node_count(pn))
        return UsageSample(
            time=time,
            used_gpus=self.used_gpu_count(),
            used_nodes=self.used_node_count(),
            idle_gpus=int(self.idle.sum()),
            per_partition=per_partition,
        )

    # -- integrity ---------------------------------------------------------

    def check_conservation(self):
        """Occupied slots must equal the union of live allocations exactly."""
        expect = np.full_like(self.grid, PAD)
        for i in range(len(self.node_ids)):
            expect[i, : self.gpu_counts[i]] = IDLE
        for alloc in self.allocations.values():
            key = self._job_keys[alloc.job_id]
            for pos, idxs in zip(alloc.node_positions, alloc.gpu_indexes):
                for g in idxs:
                    if expect[pos, g] != IDLE:
                        raise AccountingError(
                            f"slot ({self.node_ids[pos]},{g}) in two allocations")
                    expect[pos, g] = key
        if not np.array_equal(expect, self.grid):
            raise AccountingError("occupancy grid diverged from live allocations")
        derived_idle = (expect == IDLE).sum(axis=1)
        if not np.array_equal(derived_idle, self.idle):
            raise AccountingError("idle counters diverged from occupancy grid")

    def state_fingerprint(self):
        return (self.grid.tobytes(), tuple(sorted(self.allocations)))


def make_allocation(cluster, job_id, partition_id, node_positions, takes):
    """Build an Allocation taking `takes[i]` lowest-index idle GPUs on each
    node position. The caller guarantees the counts fit."""
    from clustersim import kernels

    slot_list = []
    gpu_indexes = []
    for pos, take in zip(node_positions, takes):
        idxs = kernels.lowest_idle_slots(cluster.grid[int(pos)], int(take))
        if len(idxs) < take:
            raise SlotConflict(GpuSlot(cluster.node_ids[int(pos)], -1), "<short node>")
        idxs = tuple(int(g) for g in idxs)
        gpu_indexes.append(idxs)
        slot_list.extend(GpuSlot(cluster.node_ids[int(pos)], g) for g in idxs)
    positions = tuple(int(p) for p in node_positions)
    switch_span = len({int(cluster.switch_of[p]) for p in positions})
    return Allocation(
        job_id=job_id,
        partition_id=partition_id,
        slots=tuple(sorted(slot_list)),
        node_span=len(positions),
        switch_span=switch_span,
        node_positions=positions,
        gpu_indexes=tuple(gpu_indexes),
    )


def build_cluster(config):
    """Build an all-idle Cluster from a topology config dict.

    Expected shape: {"partitions": [{"id", "nodes": [...]}],
    "switches": [{"id", "nodes": [...]}], "nodes": [{"id", "gpus": int}]}.
    """
    for section in ("partitions", "switches", "nodes"):
        if section not in config or not config[section]:
            raise ConfigError(f"topology config needs a non-empty '{section}' list")

    node_gpus = {}
    for entry in config["nodes"]:
        nid = str(entry["id"])
        if nid in node_gpus:
            raise ConfigError(f"duplicate node id {nid!r}")
        gpus = int(entry.get("gpus", 8))
        if gpus < 1:
            raise ConfigError(f"node {nid!r} has nonpositive gpu count")
        node_gpus[nid] = gpus

    def member_map(section):
        seen = {}
        for entry in config[section]:
            gid = str(entry["id"])
            if gid in seen:
                raise ConfigError(f"duplicate {section[:-1]} id {gid!r}")
            seen[gid] = [str(n) for n in entry["nodes"]]
        return seen

    switch_members = member_map("switches")
    partition_members = member_map("partitions")

    def owner_of(members, what):
        owner = {}
        for gid, nids in members.items():
            for nid in nids:
                if nid not in node_gpus:
                    raise ConfigError(f"{what} {gid!r} references unknown node {nid!r}")
                if nid in owner:
                    raise ConfigError(f"node {nid!r} appears in multiple {what}s")
                owner[nid] = gid
        missing = set(node_gpus) - set(owner)
        if missing:
            raise ConfigError(f"node(s) in no {what}: {sorted(missing)}")
        return owner

    node_switch = owner_of(switch_members, "switch")
    node_partition = owner_of(partition_members, "partition")

    nodes = [
        Node(nid, node_gpus[nid], node_switch[nid], node_partition[nid])
        for nid in node_gpus
    ]
    switches = [Switch(sid, tuple(m)) for sid, m in switch_members.items()]
    partitions = [Partition(pid, tuple(m)) for pid, m in partition_members.items()]
    return Cluster(nodes, switches, partitions)


# function-style aliases for the class operations
def commit_allocation(cluster, alloc):
    cluster.commit_allocation(alloc)
    return cluster


def release_allocation(cluster, job_id):
    cluster.release_allocation(job_id)
    return cluster


def fragmentation_ratio(cluster):
    return cluster.fragmentation_ratio()


def utilization_snapshot(cluster, time):
    return cluster.utilization_snapshot(time)
