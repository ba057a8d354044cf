"""Numba-compiled placement kernels, semantically identical to `_numpy`."""

import numpy as np
from numba import njit

_EMPTY = np.empty(0, dtype=np.int64)


@njit(cache=True)
def first_fit_nodes(idle, gpus_per_node, num_nodes):
    out = np.empty(num_nodes, dtype=np.int64)
    found = 0
    for i in range(idle.shape[0]):
        if idle[i] >= gpus_per_node:
            out[found] = i
            found += 1
            if found == num_nodes:
                return out
    return np.empty(0, dtype=np.int64)


@njit(cache=True)
def best_fit_nodes(idle, gpus_per_node, num_nodes):
    n = idle.shape[0]
    qual = np.empty(n, dtype=np.int64)
    nq = 0
    for i in range(n):
        if idle[i] >= gpus_per_node:
            qual[nq] = i
            nq += 1
    if nq < num_nodes:
        return np.empty(0, dtype=np.int64)
    # selection of the num_nodes smallest (idle, position) pairs
    out = np.empty(num_nodes, dtype=np.int64)
    taken = np.zeros(nq, dtype=np.uint8)
    for k in range(num_nodes):
        best = -1
        best_idle = np.int64(2**62)
        for j in range(nq):
            if taken[j]:
                continue
            v = idle[qual[j]]
            if v < best_idle:
                best_idle = v
                best = j
        taken[best] = 1
        out[k] = qual[best]
    return out


@njit(cache=True)
def free_gpu_nodes(idle, total):
    n = idle.shape[0]
    s = np.int64(0)
    for i in range(n):
        s += idle[i]
    if s < total:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    taken = np.zeros(n, dtype=np.uint8)
    pos_buf = np.empty(n, dtype=np.int64)
    take_buf = np.empty(n, dtype=np.int64)
    remaining = np.int64(total)
    used = 0
    while remaining > 0:
        best = -1
        best_idle = np.int64(-1)
        for i in range(n):
            if taken[i]:
                continue
            if idle[i] > best_idle:
                best_idle = idle[i]
                best = i
        taken[best] = 1
        take = best_idle if best_idle < remaining else remaining
        pos_buf[used] = best
        take_buf[used] = take
        used += 1
        remaining -= take
    return pos_buf[:used].copy(), take_buf[:used].copy()


@njit(cache=True)
def lowest_idle_slots(row, count):
    out = np.empty(count, dtype=np.int64)
    found = 0
    for i in range(row.shape[0]):
        if row[i] == -1:
            out[found] = i
            found += 1
            if found == count:
                return out
    return out[:found].copy()


@njit(cache=True)
def earliest_feasible_group(idle, rel_pos, rel_cnt, group_start, mode,
                            gpus_per_node, num_nodes, total_needed):
    n = idle.shape[0]
    scratch = idle.astype(np.int64).copy()
    qualifying = 0
    total_idle = np.int64(0)
    for i in range(n):
        total_idle += scratch[i]
        if scratch[i] >= gpus_per_node:
            qualifying += 1
    n_groups = group_start.shape[0] - 1
    for g in range(n_groups):
        for r in range(group_start[g], group_start[g + 1]):
            p = rel_pos[r]
            before = scratch[p]
            scratch[p] = before + rel_cnt[r]
            total_idle += rel_cnt[r]
            if before < gpus_per_node and scratch[p] >= gpus_per_node:
                qualifying += 1
        if mode == 0:
            if qualifying >= num_nodes:
                return g
        else:
            if total_idle >= total_needed:
                return g
    return -1
