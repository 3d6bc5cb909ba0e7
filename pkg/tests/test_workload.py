import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mecoffload.workload import (CycleError, DagValidationError, TraceParseError, WorkloadConfig,
                                 dump_trace, generate_synthetic, parse_trace, topological_order,
                                 validate_dag)

from conftest import make_job, make_sub, trace_line


def test_single_record_gives_one_job():
    jobs = parse_trace(trace_line())
    assert len(jobs) == 1
    (job,) = jobs
    assert job.job_id == "j1" and len(job.subtasks) == 1
    assert job.subtasks[0].deps == ()


def test_dependency_becomes_edge():
    text = "\n".join([trace_line(task="t1"), trace_line(task="t2", deps=["t1"])])
    job = parse_trace(text)[0]
    assert job.successors()["t1"] == ["t2"]
    assert topological_order(job) == ["t1", "t2"]


def test_dangling_dependency_names_missing_id():
    text = "\n".join([trace_line(task="t1"), trace_line(task="t2", deps=["t9"])])
    with pytest.raises(DagValidationError, match="t9"):
        parse_trace(text)


def test_malformed_line_reports_line_number():
    text = trace_line() + "\n{not json\n"
    with pytest.raises(TraceParseError) as e:
        parse_trace(text)
    assert e.value.line_no == 2


def test_missing_field_is_parse_error():
    with pytest.raises(TraceParseError, match="cpu_cycles"):
        parse_trace('{"job_id": "j", "task_id": "t", "deps": [], "data_in_bits": 1, "data_out_bits": 1,'
                    ' "deadline_ms": 1, "submit_time_ms": 0, "origin_device": "mobile-0"}')


def test_interleaved_records_are_grouped():
    text = "\n".join([trace_line(job="a", task="t1"), trace_line(job="b", task="t1"),
                      trace_line(job="a", task="t2", deps=["t1"])])
    jobs = parse_trace(text)
    assert [j.job_id for j in jobs] == ["a", "b"]
    assert [s.id for s in jobs[0].subtasks] == ["t1", "t2"]


def test_pinned_flag_inferred_for_entry_and_exit():
    text = "\n".join([trace_line(task="t1"), trace_line(task="t2", deps=["t1"]),
                      trace_line(task="t3", deps=["t2"])])
    pinned = [s.pinned_local for s in parse_trace(text)[0].subtasks]
    assert pinned == [True, False, True]


def fig2_job():
    # s1 fans out to s2..s4, which feed s5, s6 and finally s7
    edges = {"s2": ["s1"], "s3": ["s1"], "s4": ["s1"], "s5": ["s2", "s3"], "s6": ["s4"],
             "s7": ["s5", "s6"]}
    subs = [make_sub("s1", pinned=True)]
    subs += [make_sub(s, deps=edges[s], pinned=(s == "s7")) for s in ("s2", "s3", "s4", "s5", "s6", "s7")]
    return make_job("j0", subs)


def test_fig2_topology_is_valid():
    job = fig2_job()
    validate_dag(job)
    order = topological_order(job)
    assert order[0] == "s1" and order[-1] == "s7" and len(order) == 7


def test_two_cycle_reported():
    job = make_job("j0", [make_sub("t1", deps=["t2"]), make_sub("t2", deps=["t1"])])
    with pytest.raises(CycleError) as e:
        validate_dag(job)
    assert set(e.value.members) == {"t1", "t2"}


def test_duplicate_ids_rejected():
    with pytest.raises(DagValidationError, match="duplicate"):
        validate_dag(make_job("j0", [make_sub("t1"), make_sub("t1")]))


def test_generator_is_deterministic():
    cfg = WorkloadConfig(n_jobs=30, seed=11)
    assert dump_trace(generate_synthetic(cfg)) == dump_trace(generate_synthetic(cfg))


def test_zero_density_has_no_edges():
    jobs = generate_synthetic(WorkloadConfig(n_jobs=40, edge_density=0.0))
    assert all(s.deps == () for j in jobs for s in j.subtasks)


def test_generator_ranges_exhaustive_scan():
    cfg = WorkloadConfig(n_jobs=100, subtasks_per_job=(1, 8), seed=3)
    jobs = generate_synthetic(cfg)
    assert len(jobs) == 100
    for j in jobs:
        assert 1 <= len(j.subtasks) <= 8
        for s in j.subtasks:
            assert cfg.cpu_cycles[0] <= s.cpu_cycles <= cfg.cpu_cycles[1]
            assert cfg.data_in_bits[0] <= s.data_in_bits <= cfg.data_in_bits[1]
            assert cfg.data_out_bits[0] <= s.data_out_bits <= cfg.data_out_bits[1]
            assert cfg.cpu_req_cps[0] <= s.cpu_req <= cfg.cpu_req_cps[1]
    times = [j.submit_time_ms for j in jobs]
    assert times == sorted(times)


def _dfs_acyclic(job):
    deps = {s.id: s.deps for s in job.subtasks}
    state = {}

    def visit(n):
        if state.get(n) == 1:
            return False
        if state.get(n) == 2:
            return True
        state[n] = 1
        ok = all(visit(d) for d in deps[n])
        state[n] = 2
        return ok
    return all(visit(n) for n in deps)


def test_fifty_node_generated_dag_is_valid():
    (job,) = generate_synthetic(WorkloadConfig(n_jobs=1, subtasks_per_job=(50, 50), edge_density=0.2, seed=5))
    assert len(job.subtasks) == 50
    assert _dfs_acyclic(job)
    validate_dag(job)


def test_config_validation():
    with pytest.raises(ValueError):
        WorkloadConfig(cpu_cycles=(5.0, 1.0)).validate()
    with pytest.raises(ValueError):
        WorkloadConfig(edge_density=1.5).validate()


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), density=st.floats(0, 1), n=st.integers(1, 12))
def test_generated_workloads_round_trip(seed, density, n):
    cfg = WorkloadConfig(n_jobs=n, edge_density=density, seed=seed)
    jobs = generate_synthetic(cfg)
    for j in jobs:
        validate_dag(j)
        assert len(topological_order(j)) == len(j.subtasks)
    assert parse_trace(dump_trace(jobs)) == jobs


def test_topological_order_short_iff_cycle():
    job = make_job("j0", [make_sub("a"), make_sub("b", deps=["c"]), make_sub("c", deps=["b"])])
    assert len(topological_order(job)) < len(job.subtasks)
    assert np.isclose(len(topological_order(fig2_job())), 7)
