"""Backend equivalence: the numba kernels must match the pure-numpy
reference bit-for-bit on random inputs."""

import numpy as np
import pytest

from clustersim.kernels import _numpy as knp

try:
    from clustersim.kernels import _numba as knb
except ImportError:
    knb = None

needs_numba = pytest.mark.skipif(knb is None, reason="numba not installed")


def random_idle(rng, n, maxg=8):
    return rng.integers(0, maxg + 1, size=n).astype(np.int64)


@needs_numba
def test_node_selection_kernels_agree():
    rng = np.random.default_rng(123)
    for _ in range(300):
        n = int(rng.integers(1, 12))
        idle = random_idle(rng, n)
        g = int(rng.integers(1, 9))
        k = int(rng.integers(1, n + 1))
        assert knp.first_fit_nodes(idle, g, k).tolist() == knb.first_fit_nodes(idle, g, k).tolist()
        assert knp.best_fit_nodes(idle, g, k).tolist() == knb.best_fit_nodes(idle, g, k).tolist()
        total = int(rng.integers(1, max(2, idle.sum() + 2)))
        p1, t1 = knp.free_gpu_nodes(idle, total)
        p2, t2 = knb.free_gpu_nodes(idle, total)
        assert p1.tolist() == p2.tolist()
        assert t1.tolist() == t2.tolist()


@needs_numba
def test_slot_pick_kernels_agree():
    rng = np.random.default_rng(5)
    for _ in range(200):
        row = rng.choice([-2, -1, 0, 3], size=int(rng.integers(1, 16))).astype(np.int64)
        k = int(rng.integers(1, 9))
        assert knp.lowest_idle_slots(row, k).tolist() == knb.lowest_idle_slots(row, k).tolist()


@needs_numba
def test_reservation_kernels_agree():
    rng = np.random.default_rng(77)
    for _ in range(200):
        n = int(rng.integers(1, 10))
        idle = random_idle(rng, n)
        n_rel = int(rng.integers(1, 12))
        rel_pos = rng.integers(0, n, size=n_rel).astype(np.int64)
        rel_cnt = rng.integers(1, 4, size=n_rel).astype(np.int64)
        cuts = sorted(rng.integers(0, n_rel + 1, size=int(rng.integers(0, 4))).tolist())
        group_start = np.array([0] + cuts + [n_rel], dtype=np.int64)
        group_start = np.maximum.accumulate(group_start)
        mode = int(rng.integers(0, 2))
        g = int(rng.integers(1, 9))
        k = int(rng.integers(1, n + 1))
        tot = int(rng.integers(1, 40))
        a = knp.earliest_feasible_group(idle, rel_pos, rel_cnt, group_start, mode, g, k, tot)
        b = knb.earliest_feasible_group(idle, rel_pos, rel_cnt, group_start, mode, g, k, tot)
        assert a == b


def test_free_gpu_exact_total():
    idle = np.array([3, 8, 5, 8, 1], dtype=np.int64)
    pos, takes = knp.free_gpu_nodes(idle, 14)
    assert takes.sum() == 14
    # greedy by descending idle, ties by ascending position
    assert pos.tolist() == [1, 3]
    assert takes.tolist() == [8, 6]


def test_free_gpu_infeasible_is_empty():
    idle = np.array([2, 2], dtype=np.int64)
    pos, takes = knp.free_gpu_nodes(idle, 5)
    assert pos.size == 0 and takes.size == 0
