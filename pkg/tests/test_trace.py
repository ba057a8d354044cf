import io

import pytest

from clustersim.errors import ParamError, ParseError, TraceValidationError
from clustersim.trace import (COLUMNS, SynthParams, parse_trace, serialize_trace,
                              split_total, synth_workload, trace_digest, write_trace)

HEADER = ",".join(COLUMNS)


def parse_text(text, tmp_path):
    p = tmp_path / "trace.csv"
    p.write_text(text)
    return parse_trace(str(p))


def test_parse_basic_row(tmp_path):
    wl = parse_text(HEADER + "\n1,train-resnet,p0,2,8,,0,,,Completed,3600\n", tmp_path)
    assert len(wl) == 1
    rec = wl.jobs[0]
    assert rec.req_nodes == 2
    assert rec.req_gpus_per_node == 8
    assert rec.gpu_total == 16
    assert rec.service_time == 3600
    assert rec.submit_time == 0


def test_parse_derives_service_from_times(tmp_path):
    wl = parse_text(HEADER + "\n1,a,p0,1,1,,0,10,110,Completed,\n", tmp_path)
    assert wl.jobs[0].service_time == 100


def test_parse_rejects_start_after_end(tmp_path):
    with pytest.raises(TraceValidationError) as exc:
        parse_text(HEADER + "\n1,a,p0,1,1,,0,200,100,Completed,\n", tmp_path)
    assert "row 1" in str(exc.value)


def test_parse_rejects_bad_total(tmp_path):
    with pytest.raises(TraceValidationError):
        parse_text(HEADER + "\n1,a,p0,2,8,15,0,,,Completed,10\n", tmp_path)


def test_parse_rejects_unknown_state_and_duplicates(tmp_path):
    with pytest.raises(TraceValidationError) as exc:
        parse_text(HEADER + "\n1,a,p0,1,1,,0,,,Exploded,10\n"
                            "2,b,p0,1,1,,0,,,Completed,10\n"
                            "2,c,p0,1,1,,1,,,Completed,10\n", tmp_path)
    msg = str(exc.value)
    assert "Exploded" in msg or "final_state" in msg
    assert "duplicate" in msg


def test_parse_rejects_non_integer_field(tmp_path):
    with pytest.raises(ParseError):
        parse_text(HEADER + "\n1,a,p0,1,1,,zero,,,Completed,10\n", tmp_path)


def test_parse_requires_exact_header(tmp_path):
    with pytest.raises(ParseError):
        parse_text("job_id,job_name\n1,a\n", tmp_path)


def test_roundtrip_identity(tmp_path):
    params = SynthParams(n_jobs=50, mean_interarrival_s=60.0,
                         service_median_s=100.0, service_sigma=1.0)
    wl = synth_workload(params, 3)
    p = tmp_path / "t.csv"
    serialize_trace(wl, str(p))
    wl2 = parse_trace(str(p))
    assert wl2 == wl
    p2 = tmp_path / "t2.csv"
    serialize_trace(wl2, str(p2))
    assert p.read_bytes() == p2.read_bytes()


def test_synth_deterministic():
    params = SynthParams(n_jobs=200, mean_interarrival_s=60.0,
                         service_median_s=100.0, service_sigma=1.0)
    a = io.StringIO()
    b = io.StringIO()
    write_trace(synth_workload(params, 7), a)
    write_trace(synth_workload(params, 7), b)
    assert a.getvalue() == b.getvalue()
    c = io.StringIO()
    write_trace(synth_workload(params, 8), c)
    assert a.getvalue() != c.getvalue()


def test_synth_large_job_fraction():
    params = SynthParams(n_jobs=2000, mean_interarrival_s=60.0,
                         service_median_s=100.0, service_sigma=1.5)
    wl = synth_workload(params, 7)
    frac = sum(1 for j in wl.jobs if j.gpu_total > 4) / len(wl)
    target = params.large_job_target()
    assert abs(target - 0.40) < 1e-9
    assert 0.37 <= frac <= 0.43


def test_synth_empty_and_param_errors():
    params = SynthParams(n_jobs=0, mean_interarrival_s=60.0,
                         service_median_s=100.0, service_sigma=1.0)
    wl = synth_workload(params, 1)
    assert len(wl) == 0 and wl.horizon == 0
    with pytest.raises(ParamError):
        synth_workload(SynthParams(n_jobs=-1, mean_interarrival_s=60.0,
                                   service_median_s=100.0, service_sigma=1.0), 1)
    with pytest.raises(ParamError):
        synth_workload(SynthParams(n_jobs=5, mean_interarrival_s=0.0,
                                   service_median_s=100.0, service_sigma=1.0), 1)


def test_synth_output_passes_validation(tmp_path):
    params = SynthParams(n_jobs=300, mean_interarrival_s=30.0,
                         service_median_s=500.0, service_sigma=2.0)
    wl = synth_workload(params, 5)
    p = tmp_path / "synth.csv"
    serialize_trace(wl, str(p))
    wl2 = parse_trace(str(p))
    assert trace_digest(wl2) == trace_digest(wl)


def test_split_total_minimizes_nodes():
    assert split_total(48, 8) == (6, 8)
    assert split_total(12, 8) == (2, 6)
    assert split_total(13, 8) == (13, 1)
    assert split_total(7, 8) == (1, 7)
    for total in range(1, 65):
        nodes, gpn = split_total(total, 8)
        assert nodes * gpn == total and 1 <= gpn <= 8
