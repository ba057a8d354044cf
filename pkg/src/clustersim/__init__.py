"""Trace-driven discrete-event simulator for multi-tenant GPU clusters.

Replays job traces under interchangeable placement and scheduling policies
(including preemption and migration) and reports scheduling-efficiency and
GPU-utilization metrics.
"""

__version__ = "0.1.0"
