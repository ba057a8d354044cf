import os

import numpy as np
import pytest

from clustersim import kernels
from clustersim.cluster import build_cluster, make_allocation
from clustersim.kernels import _numpy as kernels_numpy
from clustersim.trace import JobRecord, Workload

try:
    from clustersim.kernels import _numba as kernels_numba
except ImportError:
    kernels_numba = None

REPO = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIGS = os.path.join(REPO, "configs")
TRACES = os.path.join(REPO, "traces")

KERNEL_FNS = ("first_fit_nodes", "best_fit_nodes", "free_gpu_nodes",
              "lowest_idle_slots", "earliest_feasible_group")


@pytest.fixture(params=["numpy"] + (["numba"] if kernels_numba else []))
def kernel_backend(request, monkeypatch):
    """Run the test under each kernel backend."""
    impl = kernels_numpy if request.param == "numpy" else kernels_numba
    for fn in KERNEL_FNS:
        monkeypatch.setattr(kernels, fn, getattr(impl, fn))
    return request.param


def simple_topology(n_nodes, gpus=8, per_switch=8, partitions=None):
    node_ids = [f"n{i:03d}" for i in range(n_nodes)]
    switches = [{"id": f"s{k}", "nodes": node_ids[k * per_switch:(k + 1) * per_switch]}
                for k in range((n_nodes + per_switch - 1) // per_switch)]
    if partitions is None:
        partitions = [{"id": "p0", "nodes": node_ids}]
    return {
        "partitions": partitions,
        "switches": switches,
        "nodes": [{"id": nid, "gpus": gpus} for nid in node_ids],
    }


def make_cluster(n_nodes, gpus=8, per_switch=8, partitions=None):
    return build_cluster(simple_topology(n_nodes, gpus, per_switch, partitions))


def cluster_with_idle(idle, gpus=8, per_switch=100):
    """Cluster whose per-node idle counts equal `idle`, produced by parking
    filler jobs on the occupied slots."""
    c = make_cluster(len(idle), gpus=gpus, per_switch=per_switch)
    for i, v in enumerate(idle):
        used = gpus - int(v)
        if used:
            alloc = make_allocation(c, f"filler-{i}", "p0", [i], [used])
            c.commit_allocation(alloc)
    assert list(c.idle) == [int(v) for v in idle]
    return c


def record(job_id, submit, service, nodes=None, gpn=None, total=None,
           partition="p0", state="Completed", name=None):
    if nodes is None and total is None:
        nodes, gpn = 1, 1
    if nodes is not None and gpn is not None and total is None:
        total = nodes * gpn
    return JobRecord(
        job_id=job_id, job_name=name or job_id, partition_id=partition,
        req_nodes=nodes, req_gpus_per_node=gpn, total_gpus=total,
        submit_time=submit, start_time=None, end_time=None,
        final_state=state, service_time=service)


def workload(*records):
    jobs = tuple(sorted(records, key=lambda r: r.submit_time))
    horizon = max((r.submit_time for r in jobs), default=0)
    return Workload(jobs=jobs, horizon=horizon)


def random_workload(rng, n_jobs, n_nodes, gpus=8, horizon=2000, partitions=("p0",)):
    """Small randomized workload mixing request forms, states, and sizes
    (including some that are unsatisfiable on purpose)."""
    records = []
    for i in range(n_jobs):
        submit = int(rng.integers(0, horizon))
        service = int(rng.integers(0, 400)) if rng.random() < 0.05 else int(rng.integers(1, 400))
        state = rng.choice(["Completed", "Completed", "Completed", "Failed", "Cancelled"])
        if state == "Completed" and service == 0:
            service = 1
        partition = str(rng.choice(list(partitions)))
        if rng.random() < 0.3:
            total = int(rng.integers(1, n_nodes * gpus + 3))  # occasionally unsatisfiable
            records.append(record(f"r{i:04d}", submit, service, total=total,
                                  partition=partition, state=state))
        else:
            nodes = int(rng.integers(1, min(n_nodes, 4) + 1))
            gpn = int(rng.integers(1, gpus + 2))  # gpn can exceed capacity
            records.append(record(f"r{i:04d}", submit, service, nodes=nodes, gpn=gpn,
                                  partition=partition, state=state))
    return workload(*records)
