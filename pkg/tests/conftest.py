"""Shared builders for small clusters and hand-made jobs."""

import json

import pytest

from mecoffload.simulator import ClusterConfig
from mecoffload.workload import DagJob, Subtask


def make_sub(tid, job="j0", deps=(), cycles=1e7, din=1e5, dout=1e5, deadline=100.0,
             pinned=False, cpu_req=None, mem_req=None):
    return Subtask(id=tid, job_id=job, deps=tuple(deps), data_in_bits=din, data_out_bits=dout,
                   cpu_cycles=cycles, deadline_ms=deadline, pinned_local=pinned,
                   cpu_req_cps=cpu_req, mem_req_bytes=mem_req)


def make_job(job_id, subs, origin="mobile-0", submit=0.0):
    return DagJob(job_id=job_id, origin_device=origin, submit_time_ms=submit, subtasks=tuple(subs))


def trace_line(job="j1", task="t1", deps=(), **kw):
    rec = {"job_id": job, "task_id": task, "deps": list(deps), "cpu_cycles": 2e7,
           "data_in_bits": 1e6, "data_out_bits": 5e5, "deadline_ms": 200.0,
           "submit_time_ms": 0.0, "origin_device": "mobile-0"}
    rec.update(kw)
    return json.dumps(rec)


@pytest.fixture
def small_cluster():
    return ClusterConfig.build(2, 2, 1)


@pytest.fixture
def desk_cluster():
    return ClusterConfig.build(5, 10, 2)


# criterion number -> (passed, detail), filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
