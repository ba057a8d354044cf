import json
import os

import numpy as np
import pytest

from clustersim.cluster import (GpuSlot, build_cluster, commit_allocation,
                                fragmentation_ratio, make_allocation,
                                release_allocation, utilization_snapshot)
from clustersim.errors import ConfigError, SlotConflict, UnknownJob
from conftest import CONFIGS, cluster_with_idle, make_cluster, simple_topology


def test_build_minimal_cluster():
    c = make_cluster(1, gpus=8)
    assert c.total_gpus == 8
    assert c.used_gpu_count() == 0


def test_build_full_scale_topology():
    with open(os.path.join(CONFIGS, "topo_scale.json")) as fh:
        c = build_cluster(json.load(fh))
    assert len(c.node_ids) == 154
    assert c.total_gpus == 1160
    assert c.used_gpu_count() == 0


def test_build_rejects_duplicate_node_id():
    topo = simple_topology(2)
    topo["nodes"].append({"id": "n000", "gpus": 8})
    with pytest.raises(ConfigError):
        build_cluster(topo)


def test_build_rejects_node_in_two_partitions():
    topo = simple_topology(3)
    topo["partitions"] = [
        {"id": "p0", "nodes": ["n000", "n001", "n002"]},
        {"id": "p1", "nodes": ["n002"]},
    ]
    with pytest.raises(ConfigError):
        build_cluster(topo)


def test_build_rejects_orphan_node():
    topo = simple_topology(2)
    topo["partitions"] = [{"id": "p0", "nodes": ["n000"]}]
    with pytest.raises(ConfigError):
        build_cluster(topo)


def test_build_is_pure_function_of_config():
    topo = simple_topology(4)
    a, b = build_cluster(topo), build_cluster(topo)
    assert a.state_fingerprint() == b.state_fingerprint()
    assert a.node_ids == b.node_ids


def test_commit_marks_slots_and_release_restores():
    c = make_cluster(2)
    before = c.state_fingerprint()
    alloc = make_allocation(c, "job-a", "p0", [0], [2])
    commit_allocation(c, alloc)
    assert c.node_occupancy("n000")[0] == "job-a"
    assert c.node_occupancy("n000")[1] == "job-a"
    assert c.node_occupancy("n000")[2] is None
    assert c.used_gpu_count() == 2
    release_allocation(c, "job-a")
    assert c.state_fingerprint() == before


def test_commit_conflict_raises():
    c = make_cluster(1)
    commit_allocation(c, make_allocation(c, "a", "p0", [0], [2]))
    clash = make_allocation(c, "b", "p0", [0], [8 - 2])  # ok, picks idle ones
    commit_allocation(c, clash)
    # hand-build an allocation pointing at an occupied slot
    from clustersim.cluster import Allocation
    bad = Allocation(job_id="c", partition_id="p0",
                     slots=(GpuSlot("n000", 0),), node_span=1, switch_span=1,
                     node_positions=(0,), gpu_indexes=((0,),))
    with pytest.raises(SlotConflict):
        c.commit_allocation(bad)


def test_release_unknown_job():
    c = make_cluster(1)
    with pytest.raises(UnknownJob):
        c.release_allocation("ghost")


def test_release_leaves_colocated_job_untouched():
    c = make_cluster(1)
    c.commit_allocation(make_allocation(c, "a", "p0", [0], [3]))
    c.commit_allocation(make_allocation(c, "b", "p0", [0], [2]))
    occ_before = c.node_occupancy("n000")
    c.release_allocation("a")
    occ = c.node_occupancy("n000")
    for g, holder in occ_before.items():
        if holder == "b":
            assert occ[g] == "b"
        else:
            assert occ[g] is None
    c.check_conservation()


def test_fragmentation_ratio_examples():
    # two fully used 8-GPU nodes -> the ideal ratio of 8
    c = cluster_with_idle([0, 0, 8])
    assert fragmentation_ratio(c) == 8
    # 12 GPUs over 3 nodes -> 4
    c = cluster_with_idle([4, 4, 4])
    assert fragmentation_ratio(c) == 4
    # idle cluster -> undefined
    c = make_cluster(3)
    assert fragmentation_ratio(c) is None


def test_fragmentation_bounded_by_node_capacity():
    rng = np.random.default_rng(3)
    for _ in range(50):
        idle = rng.integers(0, 9, size=5)
        c = cluster_with_idle(idle)
        frag = c.fragmentation_ratio()
        if frag is not None:
            assert frag <= 8
            fully_used = all(v in (0, 8) for v in idle)
            if fully_used and frag is not None:
                assert frag == 8


def test_snapshot_examples():
    c = make_cluster(2)
    snap = utilization_snapshot(c, 0)
    assert snap.used_gpus == 0 and snap.used_nodes == 0
    c.commit_allocation(make_allocation(c, "j", "p0", [0], [4]))
    snap = c.utilization_snapshot(5)
    assert snap.used_gpus == 4 and snap.used_nodes == 1 and snap.time == 5


def test_snapshot_matches_brute_force_scan():
    rng = np.random.default_rng(9)
    for _ in range(30):
        idle = rng.integers(0, 9, size=6)
        c = cluster_with_idle(idle)
        snap = c.utilization_snapshot(0)
        used = sum(1 for nid in c.node_ids for g, holder in c.node_occupancy(nid).items()
                   if holder is not None)
        used_nodes = sum(1 for nid in c.node_ids
                         if any(h is not None for h in c.node_occupancy(nid).values()))
        assert snap.used_gpus == used
        assert snap.used_nodes == used_nodes
        assert snap.idle_gpus == c.total_gpus - used
        c.check_conservation()


def test_conservation_catches_tampering():
    from clustersim.errors import AccountingError
    c = make_cluster(1)
    c.commit_allocation(make_allocation(c, "a", "p0", [0], [2]))
    c.grid[0, 7] = 0  # fake an occupied slot outside any allocation
    with pytest.raises(AccountingError):
        c.check_conservation()
