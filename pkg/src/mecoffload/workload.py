"""DAG-structured mobile jobs: trace ingestion, synthetic generation, validation.

A job is a DAG of subtasks. Each subtask carries its input/output data size in
bits, its compute demand in CPU cycles and a deadline relative to the job's
submission. The trace format is JSON-lines with one subtask per line::

    {"job_id": "j1", "task_id": "t1", "deps": [], "cpu_cycles": 2e7,
     "data_in_bits": 1e6, "data_out_bits": 5e5, "deadline_ms": 200,
     "submit_time_ms": 0, "origin_device": "mobile-0"}

Optional per-line fields: ``pinned_local`` (bool), ``cpu_req_cps`` and
``mem_req_bytes`` (the resources a placement reserves on its target device).
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Subtask",
    "DagJob",
    "WorkloadConfig",
    "TraceParseError",
    "DagValidationError",
    "CycleError",
    "parse_trace",
    "dump_trace",
    "load_trace",
    "generate_synthetic",
    "validate_dag",
    "topological_order",
]


class TraceParseError(ValueError):
    def __init__(self, line_no: int, msg: str):
        super().__init__(f"line {line_no}: {msg}")
        self.line_no = line_no


class DagValidationError(ValueError):
    """Structural problem with a job: dangling dependency, duplicate id, ..."""


class CycleError(DagValidationError):
    def __init__(self, job_id: str, members: list[str]):
        super().__init__(f"job {job_id!r} has a dependency cycle through {members}")
        self.members = members


@dataclass(frozen=True)
class Subtask:
    id: str
    job_id: str
    deps: tuple[str, ...]
    data_in_bits: float
    data_out_bits: float
    cpu_cycles: float
    deadline_ms: float
    pinned_local: bool = False
    # Reservation on the target device while placed (admission control).
    # None means "derive from demand": cycles needed per second to meet the deadline.
    cpu_req_cps: float | None = None
    mem_req_bytes: float | None = None

    def __post_init__(self):
        if self.data_in_bits < 0 or self.data_out_bits < 0:
            raise DagValidationError(f"{self.key}: negative data size")
        if not self.cpu_cycles > 0:
            raise DagValidationError(f"{self.key}: cpu_cycles must be positive")
        if not self.deadline_ms > 0:
            raise DagValidationError(f"{self.key}: deadline_ms must be positive")

    @property
    def key(self) -> str:
        return f"{self.job_id}/{self.id}"

    @property
    def cpu_req(self) -> float:
        if self.cpu_req_cps is not None:
            return self.cpu_req_cps
        return self.cpu_cycles / (self.deadline_ms / 1000.0)

    @property
    def mem_req(self) -> float:
        if self.mem_req_bytes is not None:
            return self.mem_req_bytes
        return (self.data_in_bits + self.data_out_bits) / 8.0


@dataclass(frozen=True)
class DagJob:
    job_id: str
    origin_device: str
    submit_time_ms: float
    subtasks: tuple[Subtask, ...]

    def __post_init__(self):
        if self.submit_time_ms < 0:
            raise DagValidationError(f"job {self.job_id!r}: negative submit time")

    def task(self, task_id: str) -> Subtask:
        for s in self.subtasks:
            if s.id == task_id:
                return s
        raise KeyError(task_id)

    def successors(self) -> dict[str, list[str]]:
        succ: dict[str, list[str]] = {s.id: [] for s in self.subtasks}
        for s in self.subtasks:
            for d in s.deps:
                succ[d].append(s.id)
        return succ

    @property
    def total_cycles(self) -> float:
        return float(sum(s.cpu_cycles for s in self.subtasks))


@dataclass
class WorkloadConfig:
    n_jobs: int = 100
    n_mobile: int = 5
    subtasks_per_job: tuple[int, int] = (1, 8)
    edge_density: float = 0.3
    data_in_bits: tuple[float, float] = (2e5, 2e6)
    data_out_bits: tuple[float, float] = (1e5, 1e6)
    cpu_cycles: tuple[float, float] = (1e7, 4e7)
    # Deadline of a depth-0 subtask; deeper subtasks get (depth + 1) times this.
    deadline_ms: tuple[float, float] = (150.0, 400.0)
    interarrival_ms: tuple[float, float] = (20.0, 60.0)
    # Reserved resources per subtask; None leaves the trace defaults
    # (cycles / deadline and the data footprint).
    cpu_req_cps: tuple[float, float] | None = (2e7, 1e8)
    mem_req_bytes: tuple[float, float] | None = (5e7, 2e8)
    seed: int = 0

    def validate(self) -> None:
        if self.n_jobs < 1 or self.n_mobile < 1:
            raise ValueError("n_jobs and n_mobile must be positive")
        for name in ("subtasks_per_job", "data_in_bits", "data_out_bits", "cpu_cycles",
                     "deadline_ms", "interarrival_ms", "cpu_req_cps", "mem_req_bytes"):
            if getattr(self, name) is None:
                continue
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name}: lower bound {lo} exceeds upper bound {hi}")
            if lo < 0:
                raise ValueError(f"{name}: negative bound")
        if self.subtasks_per_job[0] < 1:
            raise ValueError("subtasks_per_job lower bound must be >= 1")
        if self.cpu_cycles[0] <= 0 or self.deadline_ms[0] <= 0:
            raise ValueError("cpu_cycles and deadline_ms must be positive")
        if not 0.0 <= self.edge_density <= 1.0:
            raise ValueError("edge_density must lie in [0, 1]")


# --- validation -----------------------------------------------------------

def topological_order(job: DagJob) -> list[str]:
    """Kahn's algorithm; ties resolved by declaration order. May be shorter than
    the subtask list when a cycle exists."""
    indeg = {s.id: len(set(s.deps)) for s in job.subtasks}
    succ = job.successors()
    ready = [s.id for s in job.subtasks if indeg[s.id] == 0]
    order = []
    while ready:
        t = ready.pop(0)
        order.append(t)
        for u in sorted(set(succ[t]), key=list(indeg).index):
            indeg[u] -= 1
            if indeg[u] == 0:
                ready.append(u)
    return order


def _find_cycle(job: DagJob, remaining: set[str]) -> list[str]:
    deps = {s.id: [d for d in s.deps if d in remaining] for s in job.subtasks if s.id in remaining}
    # Every remaining node has a remaining predecessor, so walking backwards must revisit.
    node = next(iter(sorted(remaining)))
    seen: dict[str, int] = {}
    path: list[str] = []
    while node not in seen:
        seen[node] = len(path)
        path.append(node)
        node = deps[node][0]
    return path[seen[node]:]


def validate_dag(job: DagJob) -> None:
    """Raise DagValidationError (or CycleError) unless ``job`` is a well-formed DAG."""
    if not job.subtasks:
        raise DagValidationError(f"job {job.job_id!r} has no subtasks")
    ids = [s.id for s in job.subtasks]
    if len(set(ids)) != len(ids):
        dup = sorted({i for i in ids if ids.count(i) > 1})
        raise DagValidationError(f"job {job.job_id!r}: duplicate subtask ids {dup}")
    known = set(ids)
    for s in job.subtasks:
        if s.job_id != job.job_id:
            raise DagValidationError(f"subtask {s.id!r} belongs to {s.job_id!r}, not {job.job_id!r}")
        for d in s.deps:
            if d not in known:
                raise DagValidationError(
                    f"job {job.job_id!r}: subtask {s.id!r} depends on missing subtask {d!r}")
    order = topological_order(job)
    if len(order) != len(job.subtasks):
        raise CycleError(job.job_id, _find_cycle(job, known - set(order)))


# --- trace I/O ------------------------------------------------------------

_REQUIRED = ("job_id", "task_id", "deps", "cpu_cycles", "data_in_bits",
             "data_out_bits", "deadline_ms", "submit_time_ms", "origin_device")


def parse_trace(text: str) -> list[DagJob]:
    """Parse JSON-lines trace text into validated jobs.

    Lines for one job may be interleaved with other jobs' lines; jobs are
    returned in order of first appearance. Blank lines are skipped. When a line
    omits ``pinned_local`` the flag is inferred: sources and sinks of the DAG
    are pinned to the originating device.
    """
    records: dict[str, list[tuple[int, dict]]] = defaultdict(list)
    for line_no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as e:
            raise TraceParseError(line_no, f"invalid JSON ({e.msg})") from None
        if not isinstance(rec, dict):
            raise TraceParseError(line_no, "record is not an object")
        missing = [k for k in _REQUIRED if k not in rec]
        if missing:
            raise TraceParseError(line_no, f"missing fields {missing}")
        if not isinstance(rec["deps"], list):
            raise TraceParseError(line_no, "deps must be a list")
        records[str(rec["job_id"])].append((line_no, rec))

    jobs = []
    for job_id, recs in records.items():
        first_line, head = recs[0]
        for line_no, rec in recs[1:]:
            for k in ("submit_time_ms", "origin_device"):
                if rec[k] != head[k]:
                    raise TraceParseError(line_no, f"{k} differs from line {first_line} of job {job_id!r}")
        succ_count: dict[str, int] = defaultdict(int)
        for _, rec in recs:
            for d in rec["deps"]:
                succ_count[str(d)] += 1
        subtasks = []
        for line_no, rec in recs:
            tid = str(rec["task_id"])
            deps = tuple(str(d) for d in rec["deps"])
            pinned = rec.get("pinned_local")
            if pinned is None:
                pinned = not deps or succ_count[tid] == 0
            try:
                subtasks.append(Subtask(
                    id=tid, job_id=job_id, deps=deps,
                    data_in_bits=float(rec["data_in_bits"]),
                    data_out_bits=float(rec["data_out_bits"]),
                    cpu_cycles=float(rec["cpu_cycles"]),
                    deadline_ms=float(rec["deadline_ms"]),
                    pinned_local=bool(pinned),
                    cpu_req_cps=_opt_float(rec.get("cpu_req_cps")),
                    mem_req_bytes=_opt_float(rec.get("mem_req_bytes")),
                ))
            except (TypeError, ValueError) as e:
                if isinstance(e, DagValidationError):
                    raise
                raise TraceParseError(line_no, str(e)) from None
        job = DagJob(job_id=job_id, origin_device=str(head["origin_device"]),
                     submit_time_ms=float(head["submit_time_ms"]), subtasks=tuple(subtasks))
        validate_dag(job)
        jobs.append(job)
    return jobs


def _opt_float(v):
    return None if v is None else float(v)


def dump_trace(jobs: list[DagJob]) -> str:
    lines = []
    for job in jobs:
        for s in job.subtasks:
            rec = {
                "job_id": job.job_id, "task_id": s.id, "deps": list(s.deps),
                "cpu_cycles": s.cpu_cycles, "data_in_bits": s.data_in_bits,
                "data_out_bits": s.data_out_bits, "deadline_ms": s.deadline_ms,
                "submit_time_ms": job.submit_time_ms, "origin_device": job.origin_device,
                "pinned_local": s.pinned_local,
            }
            if s.cpu_req_cps is not None:
                rec["cpu_req_cps"] = s.cpu_req_cps
            if s.mem_req_bytes is not None:
                rec["mem_req_bytes"] = s.mem_req_bytes
            lines.append(json.dumps(rec))
    return "\n".join(lines) + ("\n" if lines else "")


def load_trace(path) -> list[DagJob]:
    with open(path, encoding="utf-8") as f:
        return parse_trace(f.read())


# --- synthetic generation -------------------------------------------------

def generate_synthetic(cfg: WorkloadConfig) -> list[DagJob]:
    """Random DAG jobs.

    Subtasks of a job are laid out in index order; each forward pair (i, j),
    i < j, becomes an edge with probability ``edge_density``, so every job is
    acyclic by construction. The first and last subtask are the job's entry and
    exit and are pinned to the originating device. Origins rotate over the
    mobile devices and submit times are integral milliseconds.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    jobs = []
    t = 0.0
    lo_n, hi_n = cfg.subtasks_per_job
    for j in range(cfg.n_jobs):
        n = int(rng.integers(lo_n, hi_n + 1))
        deps: list[list[int]] = [[] for _ in range(n)]
        for b in range(1, n):
            for a in range(b):
                if rng.random() < cfg.edge_density:
                    deps[b].append(a)
        depth = [0] * n
        for b in range(n):
            depth[b] = 1 + max((depth[a] for a in deps[b]), default=-1)
        subtasks = []
        for i in range(n):
            subtasks.append(Subtask(
                id=f"t{i}", job_id=f"j{j}", deps=tuple(f"t{a}" for a in deps[i]),
                data_in_bits=float(rng.uniform(*cfg.data_in_bits)),
                data_out_bits=float(rng.uniform(*cfg.data_out_bits)),
                cpu_cycles=float(rng.uniform(*cfg.cpu_cycles)),
                deadline_ms=float(rng.uniform(*cfg.deadline_ms)) * (depth[i] + 1),
                pinned_local=(i == 0 or i == n - 1),
                cpu_req_cps=None if cfg.cpu_req_cps is None else float(rng.uniform(*cfg.cpu_req_cps)),
                mem_req_bytes=None if cfg.mem_req_bytes is None else float(rng.uniform(*cfg.mem_req_bytes)),
            ))
        jobs.append(DagJob(job_id=f"j{j}", origin_device=f"mobile-{j % cfg.n_mobile}",
                           submit_time_ms=t, subtasks=tuple(subtasks)))
        t += float(np.floor(rng.uniform(*cfg.interarrival_ms)))
    return jobs
