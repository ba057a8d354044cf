"""Pure-numpy reference implementations of the placement hot kernels.

All kernels work on positions into the `idle` array they are handed (the
caller passes a partition-local view), never on global node ids.
"""

import numpy as np

_EMPTY = np.empty(0, dtype=np.int64)


def first_fit_nodes(idle, gpus_per_node, num_nodes):
    """First `num_nodes` positions (ascending) with >= gpus_per_node idle GPUs.

    Returns an empty array when fewer than `num_nodes` positions qualify.
    """
    q = np.flatnonzero(idle >= gpus_per_node)
    if q.size < num_nodes:
        return _EMPTY
    return q[:num_nodes].astype(np.int64)


def best_fit_nodes(idle, gpus_per_node, num_nodes):
    """The `num_nodes` qualifying positions with fewest idle GPUs.

    Ties broken by ascending position; empty array when infeasible.
    """
    q = np.flatnonzero(idle >= gpus_per_node)
    if q.size < num_nodes:
        return _EMPTY
    order = np.argsort(idle[q], kind="stable")
    return q[order[:num_nodes]].astype(np.int64)


def free_gpu_nodes(idle, total):
    """Greedy minimum-node cover of `total` GPUs: nodes by descending idle
    count (ties ascending position), taking each node's full idle count and a
    remainder from the last node.

    Returns (positions, takes); both empty when the idle sum is short.
    """
    if int(idle.sum()) < total:
        return _EMPTY, _EMPTY
    order = np.argsort(-idle, kind="stable")
    csum = np.cumsum(idle[order])
    k = int(np.searchsorted(csum, total, side="left"))
    pos = order[: k + 1].astype(np.int64)
    takes = idle[pos].astype(np.int64).copy()
    takes[-1] = total - (int(csum[k]) - int(idle[pos[-1]]))
    return pos, takes


def lowest_idle_slots(row, count):
    """First `count` indices of `row` equal to -1 (the idle marker)."""
    return np.flatnonzero(row == -1)[:count].astype(np.int64)


def earliest_feasible_group(idle, rel_pos, rel_cnt, group_start, mode,
                            gpus_per_node, num_nodes, total_needed):
    """Replay release groups onto a scratch copy of `idle` and return the
    index of the first group after which the request fits, or -1.

    Groups are slices group_start[g]:group_start[g+1] of (rel_pos, rel_cnt).
    mode 0 checks count(idle >= gpus_per_node) >= num_nodes; mode 1 checks
    sum(idle) >= total_needed.
    """
    scratch = idle.astype(np.int64).copy()
    n_groups = group_start.shape[0] - 1
    for g in range(n_groups):
        lo, hi = int(group_start[g]), int(group_start[g + 1])
        np.add.at(scratch, rel_pos[lo:hi], rel_cnt[lo:hi])
        if mode == 0:
            if int(np.count_nonzero(scratch >= gpus_per_node)) >= num_nodes:
                return g
        else:
            if int(scratch.sum()) >= total_needed:
                return g
    return -1
