import json

import pytest

from clustersim.analysis import (MismatchedWorkloadWarning, compare_runs,
                                 export_chrome_trace, export_metrics_csv,
                                 nearest_rank, read_metrics_csv, summarize)
from clustersim.engine import EngineConfig, run
from clustersim.scheduler import MlfqConfig
from conftest import make_cluster, record, workload


def small_log(scheduler="fcfs", **kw):
    wl = workload(record("a", 0, 10), record("b", 0, 30, nodes=1, gpn=2))
    return run(wl, make_cluster(2), EngineConfig(scheduler=scheduler, **kw))


def test_summarize_avg_of_two_jcts():
    log = small_log()
    rep = summarize(log)
    assert rep.avg_jct_s == 20.0
    assert rep.total_jobs == 2 and rep.completed_jobs == 2


def test_summarize_single_unobstructed_job():
    log = run(workload(record("a", 0, 42)), make_cluster(1), EngineConfig())
    rep = summarize(log)
    assert rep.avg_jct_s == 42.0
    assert rep.avg_jct_s >= rep.avg_effective_service_s


def test_summarize_empty_log():
    log = run(workload(), make_cluster(1), EngineConfig())
    rep = summarize(log)
    assert rep.total_jobs == 0
    assert rep.avg_jct_s is None and rep.median_jct_s is None
    assert rep.max_pending_jobs == 0


def test_summarize_matches_independent_recomputation():
    wl = workload(*[record(f"j{i}", i * 5, 20 + 7 * i) for i in range(12)])
    log = run(wl, make_cluster(2), EngineConfig(scheduler="mlfq",
                                                mlfq=MlfqConfig((10.0, 30.0, 90.0))))
    rep = summarize(log)
    jcts = sorted(j.finish - j.submit for j in log.jobs.values() if j.finish is not None)
    assert rep.avg_jct_s == pytest.approx(sum(jcts) / len(jcts))
    assert rep.median_jct_s == jcts[(50 * len(jcts) + 99) // 100 - 1]
    assert rep.p95_jct_s == jcts[(95 * len(jcts) + 99) // 100 - 1]
    pend = [(j.finish - j.submit) - sum(iv.end - iv.start for iv in j.intervals)
            for j in log.jobs.values() if j.finish is not None]
    assert rep.avg_pending_time_s == pytest.approx(sum(pend) / len(pend))


def test_nearest_rank():
    assert nearest_rank([], 50) is None
    assert nearest_rank([1, 2, 3], 50) == 2
    assert nearest_rank([1, 2, 3, 4], 50) == 2
    assert nearest_rank(list(range(1, 101)), 95) == 95


def test_chrome_trace_single_interval(tmp_path):
    log = run(workload(record("a", 0, 10)), make_cluster(1), EngineConfig())
    path = tmp_path / "t.json"
    export_chrome_trace(log, str(path))
    events = json.loads(path.read_text())
    assert isinstance(events, list) and len(events) == 1
    ev = events[0]
    assert ev["ph"] == "X"
    assert ev["ts"] == 0
    assert ev["dur"] == 10_000_000
    assert ev["pid"] == "p0"
    assert ev["tid"] == "n000"


def test_chrome_trace_preempted_job_two_events(tmp_path):
    wl = workload(record("m", 0, 3600))
    log = run(wl, make_cluster(1), EngineConfig(scheduler="mlfq"))
    path = tmp_path / "t.json"
    export_chrome_trace(log, str(path))
    events = json.loads(path.read_text())
    assert len(events) == 2
    assert {e["name"] for e in events} == {"m"}


def test_chrome_trace_event_count_equals_interval_count(tmp_path):
    wl = workload(*[record(f"j{i}", i, 40 + i) for i in range(10)])
    log = run(wl, make_cluster(1), EngineConfig(scheduler="rr", rr_slice_s=7.0))
    path = tmp_path / "t.json"
    export_chrome_trace(log, str(path))
    events = json.loads(path.read_text())
    assert len(events) == log.interval_count()


def test_metrics_csv_roundtrip(tmp_path):
    wl = workload(*[record(f"j{i}", i * 3, 25) for i in range(8)])
    log = run(wl, make_cluster(2), EngineConfig(sample_period_s=10.0))
    path = tmp_path / "m.csv"
    export_metrics_csv(log.samples, str(path))
    back = read_metrics_csv(str(path))
    assert back == [(float(t), p, r, g, n, f) for t, p, r, g, n, f in log.samples]


def test_metrics_csv_empty_and_undefined_frag(tmp_path):
    path = tmp_path / "m.csv"
    export_metrics_csv([], str(path))
    assert path.read_text() == "t,pending,running,used_gpus,used_nodes,frag_ratio\n"
    export_metrics_csv([(60.0, 3, 10, 80, 10, 8.0), (120.0, 0, 0, 0, 0, None)], str(path))
    lines = path.read_text().splitlines()
    assert lines[1] == "60.0,3,10,80,10,8.0"
    assert lines[2] == "120.0,0,0,0,0,"
    assert read_metrics_csv(str(path))[1][5] is None


def test_compare_runs_identical_zero_deltas():
    rep = summarize(small_log())
    table = compare_runs([rep, rep])
    label = "fcfs+best-fit"
    assert label in table.rows
    dup = f"{label}#2"
    assert dup in table.rows
    for metric, delta in table.deltas[dup].items():
        if delta is not None:
            assert delta == 0


def test_compare_runs_warns_on_mismatched_traces():
    rep1 = summarize(small_log())
    other = run(workload(record("z", 0, 99)), make_cluster(2),
                EngineConfig(scheduler="sjf"))
    rep2 = summarize(other)
    with pytest.warns(MismatchedWorkloadWarning):
        table = compare_runs([rep1, rep2])
    assert table.warnings
    assert list(table.rows) == sorted(table.rows)


def test_compare_runs_needs_two():
    rep = summarize(small_log())
    with pytest.raises(ValueError):
        compare_runs([rep])
