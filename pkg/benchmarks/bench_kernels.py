#!/usr/bin/env python3
"""Microbenchmark of the placement hot kernels: numba backend vs the pure
numpy fallback, at production cluster scale (154 nodes).

Usage:
    python benchmarks/bench_kernels.py [--nodes 154] [--iters 20000]
    python benchmarks/bench_kernels.py --end-to-end   # whole-sim comparison
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from clustersim.kernels import _numpy as knp

try:
    from clustersim.kernels import _numba as knb
except ImportError:
    knb = None


def bench(fn, args_list, iters):
    t0 = time.perf_counter()
    for i in range(iters):
        fn(*args_list[i % len(args_list)])
    return (time.perf_counter() - t0) / iters * 1e6  # us/op


def make_cases(rng, nodes, n_cases=256):
    cases = {"first_fit_nodes": [], "best_fit_nodes": [], "free_gpu_nodes": [],
             "lowest_idle_slots": [], "earliest_feasible_group": []}
    for _ in range(n_cases):
        idle = rng.integers(0, 9, size=nodes).astype(np.int64)
        g = int(rng.integers(1, 9))
        k = int(rng.integers(1, 8))
        cases["first_fit_nodes"].append((idle, g, k))
        cases["best_fit_nodes"].append((idle, g, k))
        cases["free_gpu_nodes"].append((idle, int(rng.integers(1, 65))))
        row = rng.choice([-1, 0], size=8, p=[0.5, 0.5]).astype(np.int64)
        cases["lowest_idle_slots"].append((row, int(rng.integers(1, 5))))
        n_rel = 64
        rel_pos = rng.integers(0, nodes, size=n_rel).astype(np.int64)
        rel_cnt = rng.integers(1, 9, size=n_rel).astype(np.int64)
        group_start = np.arange(0, n_rel + 1, dtype=np.int64)
        cases["earliest_feasible_group"].append(
            (idle, rel_pos, rel_cnt, group_start, 0, 8, 4, 0))
    return cases


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nodes", type=int, default=154)
    ap.add_argument("--iters", type=int, default=20000)
    ap.add_argument("--end-to-end", action="store_true",
                    help="time a full reference-scenario simulation per backend")
    args = ap.parse_args()

    if args.end_to_end:
        return end_to_end()

    if knb is None:
        print("numba not installed; only the numpy fallback is available")
        return 1

    rng = np.random.default_rng(0)
    cases = make_cases(rng, args.nodes)
    print(f"cluster size {args.nodes} nodes, {args.iters} iterations per kernel")
    print(f"{'kernel':26s} {'numpy us/op':>12s} {'numba us/op':>12s} {'speedup':>8s}")
    for name, case_list in cases.items():
        f_np = getattr(knp, name)
        f_nb = getattr(knb, name)
        f_nb(*case_list[0])  # trigger JIT before timing
        t_np = bench(f_np, case_list, args.iters)
        t_nb = bench(f_nb, case_list, args.iters)
        print(f"{name:26s} {t_np:12.2f} {t_nb:12.2f} {t_np / t_nb:7.1f}x")
    return 0


def end_to_end():
    here = os.path.dirname(os.path.abspath(__file__))
    repo = os.path.dirname(here)
    script = (
        "import time, json, os\n"
        "from clustersim.config import load_run_config, load_topology, load_workload\n"
        "from clustersim.engine import Simulation\n"
        "from clustersim import kernels\n"
        f"cfg = load_run_config(os.path.join({repo!r}, 'configs', 'run_reference.json'))\n"
        "cfg.scheduler = 'mlfq'\n"
        "cluster = load_topology(cfg.topology_path)\n"
        "wl = load_workload(cfg)\n"
        "Simulation(wl, cluster.copy(), cfg.engine_config()).run()  # warm caches\n"
        "t0 = time.perf_counter()\n"
        "for _ in range(5):\n"
        "    Simulation(wl, cluster.copy(), cfg.engine_config()).run()\n"
        "dt = (time.perf_counter() - t0) / 5\n"
        "print(f'{kernels.backend_name()}: {dt*1000:.1f} ms per reference run')\n"
    )
    for backend in ("numba", "numpy"):
        env = dict(os.environ, CLUSTERSIM_KERNELS=backend)
        subprocess.run([sys.executable, "-c", script], env=env, check=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
