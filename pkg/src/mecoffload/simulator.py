"""Discrete-time simulator of DAG job offloading across mobiles, edge servers and a cloud.

Time advances in fixed steps of ``step_ms``. Inside a step, concurrent
executions on a device share its processing rate equally, and concurrent
transfers sent by one device share its radio equally; completions inside a step
are timed exactly, while anything that becomes startable waits for the next
step boundary.

Lifecycle of a subtask::

    submit -> [queued -> placed] -> (download) -> exec -> (upload) -> done

Pinned subtasks skip the queue and are placed on the origin device. A download
is needed when a predecessor's output (or, for a subtask without predecessors,
the job input on the origin) lives on another device; an upload sends a sink's
result back to the origin.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import metrics
from .metrics import DeviceProfile, db_to_linear
from .priority import DEFAULT_COMPARISON, factor_weights, priority_order, priority_vector, task_weight_matrix
from .workload import DagJob, Subtask

MOBILE_PROFILE = DeviceProfile(
    kind="mobile", p_full_watts=10.0, k_ratio=0.8, proc_rate_cycles_per_s=1e9,
    tx_power_watts=0.1, mem_bytes=2e9)
EDGE_PROFILE = DeviceProfile(
    kind="edge", p_full_watts=40.0, k_ratio=0.6, proc_rate_cycles_per_s=5e9,
    tx_power_watts=1.0, mem_bytes=8e9)
CLOUD_PROFILE = DeviceProfile(
    kind="cloud", p_full_watts=200.0, k_ratio=0.6, proc_rate_cycles_per_s=2e10,
    channel_gain=db_to_linear(-60.0), bandwidth_hz=2.5e5, tx_power_watts=1.0, mem_bytes=6.4e10)


class SimEvent(NamedTuple):
    time_ms: float
    kind: str          # submit | transfer_start | transfer_end | exec_start | exec_end
    subtask: str       # "<job_id>/<task_id>"
    device: str        # executing device; for transfers, the sending device
    quantity: float    # bits for transfers, cycles for executions, 0 for submit


class ConfigError(ValueError):
    pass


class DeadlockError(RuntimeError):
    """Queued subtasks that no device can ever admit."""


class InvalidActionError(RuntimeError):
    pass


@dataclass(frozen=True)
class Device:
    id: str
    profile: DeviceProfile
    region: int | None = None     # edge: its region; mobile: home region; cloud: None

    @property
    def kind(self) -> str:
        return self.profile.kind


@dataclass
class ClusterConfig:
    devices: list
    regions: list                 # edge ids grouped by proximity
    step_ms: float = 1.0
    cross_region_gain: float = 0.1
    load_weights: tuple = metrics.DEFAULT_LOAD_WEIGHTS
    comparison: np.ndarray = field(default_factory=lambda: DEFAULT_COMPARISON.copy())

    @classmethod
    def build(cls, n_mobile: int, m_edge: int, n_regions: int = 10, *,
              mobile: DeviceProfile = MOBILE_PROFILE, edge: DeviceProfile = EDGE_PROFILE,
              cloud: DeviceProfile = CLOUD_PROFILE, step_ms: float = 1.0,
              interference_watts: float = 0.0, **kw) -> "ClusterConfig":
        """Standard layout: mobiles, then edges split into contiguous regions, then one cloud."""
        if n_mobile < 1 or m_edge < 1:
            raise ConfigError("need at least one mobile device and one edge server")
        n_regions = min(n_regions, m_edge)
        if interference_watts:
            from dataclasses import replace
            mobile, edge, cloud = (replace(p, interference_watts=interference_watts)
                                   for p in (mobile, edge, cloud))
        sizes = [m_edge // n_regions + (r < m_edge % n_regions) for r in range(n_regions)]
        regions, devices = [], [Device(f"mobile-{i}", mobile, i % n_regions) for i in range(n_mobile)]
        e = 0
        for r, size in enumerate(sizes):
            ids = []
            for _ in range(size):
                devices.append(Device(f"edge-{e}", edge, r))
                ids.append(f"edge-{e}")
                e += 1
            regions.append(ids)
        devices.append(Device("cloud", cloud, None))
        return cls(devices=devices, regions=regions, step_ms=step_ms, **kw)

    def validate(self) -> None:
        ids = [d.id for d in self.devices]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise ConfigError(f"duplicate device ids {dup}")
        kinds = [d.kind for d in self.devices]
        if kinds.count("cloud") != 1:
            raise ConfigError("exactly one cloud device is required")
        if "mobile" not in kinds or "edge" not in kinds:
            raise ConfigError("need at least one mobile device and one edge server")
        edges = [d.id for d in self.devices if d.kind == "edge"]
        grouped = [e for r in self.regions for e in r]
        if sorted(grouped) != sorted(edges) or len(grouped) != len(set(grouped)):
            raise ConfigError("every edge server must belong to exactly one region")
        for d in self.devices:
            if d.kind == "edge" and self.regions[d.region].count(d.id) != 1:
                raise ConfigError(f"{d.id} region index disagrees with region lists")
        if not self.step_ms > 0:
            raise ConfigError("step_ms must be positive")
        cloud = next(d for d in self.devices if d.kind == "cloud")
        if any(d.profile.proc_rate_cycles_per_s > cloud.profile.proc_rate_cycles_per_s
               for d in self.devices):
            raise ConfigError("the cloud must have the largest processing rate")

    @property
    def n_mobile(self) -> int:
        return sum(d.kind == "mobile" for d in self.devices)

    @property
    def m_edge(self) -> int:
        return sum(d.kind == "edge" for d in self.devices)


def alg1_mask(required, available) -> np.ndarray:
    """Validity of each candidate: 0 when any required resource strictly exceeds
    what the candidate has available, else 1.

    ``required`` has shape (R,), ``available`` shape (D, R).
    """
    req = np.asarray(required, dtype=float)
    av = np.atleast_2d(np.asarray(available, dtype=float))
    return (~np.any(req[None, :] > av, axis=1)).astype(np.int8)


@dataclass(eq=False)
class TaskRun:
    sub: Subtask
    job: DagJob
    key: str
    agent: int                  # index of the originating mobile among mobiles
    origin: int                 # device index of the originating mobile
    preds_left: int
    status: str = "blocked"     # blocked queued downloading ready executing upload_wait uploading done
    device: int | None = None
    pv: float = 0.0
    remaining: float = 0.0
    rate: float = 0.0           # full link rate of the current transfer, bits/s
    sender: int | None = None
    submit_ms: float = 0.0
    finish_ms: float | None = None
    enqueue_seq: int = 0


@dataclass
class JobRun:
    job: DagJob
    submit_ms: float
    left: int
    finish_ms: float | None = None


@dataclass
class StepResult:
    events: list
    penalties: list             # agents whose action was rejected
    done: bool


class Simulator:
    """Mutable simulation state plus the operations that advance it."""

    def __init__(self, cfg: ClusterConfig, strict: bool = False):
        cfg.validate()
        self.cfg = cfg
        self.strict = strict
        self.devices = list(cfg.devices)
        self.index = {d.id: i for i, d in enumerate(self.devices)}
        self.mobiles = [i for i, d in enumerate(self.devices) if d.kind == "mobile"]
        self.edges = [i for i, d in enumerate(self.devices) if d.kind == "edge"]
        self.cloud = next(i for i, d in enumerate(self.devices) if d.kind == "cloud")
        self.agent_of = {dev: a for a, dev in enumerate(self.mobiles)}
        self.step_ms = cfg.step_ms
        self.lam = factor_weights(cfg.comparison)
        nd = len(self.devices)
        self.cap_cpu = np.array([d.profile.cpu_capacity for d in self.devices])
        self.cap_mem = np.array([d.profile.mem_bytes for d in self.devices])
        self.proc = np.array([d.profile.proc_rate_cycles_per_s for d in self.devices])
        self._rate_cache: dict = {}
        self.steps = 0
        self.tasks: dict[str, TaskRun] = {}
        self.jobs: dict[str, JobRun] = {}
        self.queues: list[list[TaskRun]] = [[] for _ in cfg.regions]
        self.reserved: list[list[TaskRun]] = [[] for _ in range(nd)]
        self.executing: list[list[TaskRun]] = [[] for _ in range(nd)]
        self.sending: list[list[TaskRun]] = [[] for _ in range(nd)]
        self.to_start: list[TaskRun] = []
        self.events: list[SimEvent] = []
        self._submitted_now: set[int] = set()
        self._seq = 0
        # incremental accounting
        self.trace_u: list[np.ndarray] = []        # per step CPU busy fraction per device
        self.trace_mem: list[np.ndarray] = []      # per step reserved-memory fraction
        self.trace_radio: list[np.ndarray] = []    # per step radio busy fraction
        self.trace_bits: list[np.ndarray] = []     # per step bits sent per device
        self.energy_comp = np.zeros(nd)
        self.energy_tx = np.zeros(nd)
        na = len(self.mobiles)
        self.agent_energy = np.zeros(na)
        self.agent_latency_ms = np.zeros(na)
        self.agent_tardiness = np.zeros(na)
        self.bits_sent = 0.0
        self.cycles_done = 0.0
        self.placements = np.zeros(nd, dtype=int)
        self.penalties = 0
        self.conflicts = 0

    # --- clock ------------------------------------------------------------
    @property
    def now(self) -> float:
        return self.steps * self.step_ms

    @property
    def n_agents(self) -> int:
        return len(self.mobiles)

    @property
    def n_actions(self) -> int:
        return len(self.mobiles) + len(self.edges) + 1

    def action_devices(self, agent: int) -> list[int]:
        """Device index per action for ``agent``: own device, edges, cloud, other mobiles."""
        own = self.mobiles[agent]
        return [own, *self.edges, self.cloud, *[m for m in self.mobiles if m != own]]

    # --- channel ----------------------------------------------------------
    def link_rate(self, src: int, dst: int) -> float:
        key = (src, dst)
        r = self._rate_cache.get(key)
        if r is None:
            a, b = self.devices[src], self.devices[dst]
            pa, pb = a.profile, b.profile
            gain = min(pa.channel_gain, pb.channel_gain)
            if a.region is not None and b.region is not None and a.region != b.region \
                    and "edge" in (a.kind, b.kind):
                gain *= self.cfg.cross_region_gain
            bw = min(pa.bandwidth_hz, pb.bandwidth_hz)
            snr = pa.tx_power_watts * gain / (pa.noise_watts + pa.interference_watts)
            r = bw * math.log2(1.0 + snr)
            self._rate_cache[key] = r
        return r

    # --- resources ----------------------------------------------------------
    def available(self, dev: int) -> tuple[float, float]:
        res = self.reserved[dev]
        return (self.cap_cpu[dev] - math.fsum(t.sub.cpu_req for t in res),
                self.cap_mem[dev] - math.fsum(t.sub.mem_req for t in res))

    def valid_actions(self, task: TaskRun) -> np.ndarray:
        devs = self.action_devices(task.agent)
        if task.sub.pinned_local:
            mask = np.zeros(len(devs), dtype=np.int8)
            mask[0] = 1
            return mask
        avail = np.array([self.available(d) for d in devs])
        return alg1_mask([task.sub.cpu_req, task.sub.mem_req], avail)

    def usage_now(self) -> np.ndarray:
        """CPU busy fraction of each device over the last completed step."""
        return self.trace_u[-1] if self.trace_u else np.zeros(len(self.devices))

    # --- submission ----------------------------------------------------------
    def submit(self, jobs) -> list[DagJob]:
        """Accept jobs at the current step; at most one request per origin device
        per step. Returns the rejected jobs, to be retried next step."""
        rejected = []
        now = self.now
        for job in jobs:
            origin = self.index.get(job.origin_device)
            if origin is None or self.devices[origin].kind != "mobile":
                raise ConfigError(f"job {job.job_id}: unknown mobile origin {job.origin_device!r}")
            if job.job_id in self.jobs:
                raise ValueError(f"job {job.job_id} submitted twice")
            if origin in self._submitted_now:
                rejected.append(job)
                continue
            self._submitted_now.add(origin)
            self.jobs[job.job_id] = JobRun(job, now, len(job.subtasks))
            runs = []
            for s in job.subtasks:
                tr = TaskRun(sub=s, job=job, key=f"{job.job_id}/{s.id}", agent=self.agent_of[origin],
                             origin=origin, preds_left=len(set(s.deps)), submit_ms=now)
                self.tasks[tr.key] = tr
                self.events.append(SimEvent(now, "submit", tr.key, job.origin_device, 0.0))
                runs.append(tr)
            for tr in runs:
                if tr.preds_left == 0:
                    self._make_ready(tr, now)
        return rejected

    def _make_ready(self, tr: TaskRun, t: float) -> None:
        region = self.devices[tr.origin].region
        if tr.sub.pinned_local:
            tr.pv = self._priorities(self.queues[region] + [tr])[-1]
            self._place(tr, tr.origin, t)
            return
        tr.status = "queued"
        self._seq += 1
        tr.enqueue_seq = self._seq
        q = self.queues[region]
        q.append(tr)
        pv = self._priorities(q)
        for r, p in zip(q, pv):
            r.pv = p
        order = priority_order(pv, [r.submit_ms for r in q], [r.key for r in q])
        self.queues[region] = [q[i] for i in order]

    def _priorities(self, runs) -> np.ndarray:
        return priority_vector(task_weight_matrix([r.sub for r in runs]), self.lam)

    def pending_decisions(self) -> dict[int, TaskRun]:
        """Most urgent queued subtask per agent (one decision per agent per step)."""
        heads: dict[int, TaskRun] = {}
        for q in self.queues:
            for tr in q:
                if tr.agent not in heads:
                    heads[tr.agent] = tr
        return dict(sorted(heads.items()))

    def queued(self, region: int | None = None) -> list[TaskRun]:
        if region is not None:
            return list(self.queues[region])
        return [t for q in self.queues for t in q]

    # --- placement -------------------------------------------------------------
    def _place(self, tr: TaskRun, dev: int, t: float) -> None:
        tr.device = dev
        self.reserved[dev].append(tr)
        self.placements[dev] += 1
        if tr.sub.deps:
            preds = [self.tasks[f"{tr.job.job_id}/{d}"] for d in dict.fromkeys(tr.sub.deps)]
            sources = [p.device for p in preds]
        else:
            sources = [tr.origin]
        remote = [s for s in sources if s != dev]
        if remote and tr.sub.data_in_bits > 0:
            self._start_transfer(tr, remote[0], dev, tr.sub.data_in_bits, t, "downloading")
        else:
            tr.status = "ready"
            self.to_start.append(tr)

    def _start_transfer(self, tr, src, dst, bits, t, status):
        tr.status = status
        tr.sender = src
        tr.rate = self.link_rate(src, dst)
        tr.remaining = bits
        self.sending[src].append(tr)
        self.events.append(SimEvent(t, "transfer_start", tr.key, self.devices[src].id, bits))

    def apply_actions(self, actions: dict) -> list[int]:
        """Place each agent's head-of-queue subtask on the device its action names.
        ``None`` defers. Returns agents whose action was invalid.

        Validity is judged against the masks at decision time. Agents are applied
        in index order; a valid action that an earlier placement in the same step
        made infeasible is deferred (counted in ``conflicts``), not penalised.
        """
        heads = self.pending_decisions()
        masks = {a: self.valid_actions(heads[a]) for a in actions if a in heads}
        bad = []
        for agent, a in sorted(actions.items()):
            if a is None:
                continue
            tr = heads.get(agent)
            if tr is None:
                raise InvalidActionError(f"agent {agent} has no pending decision")
            mask = masks[agent]
            if not (0 <= a < len(mask)) or not mask[a]:
                if self.strict:
                    raise InvalidActionError(f"agent {agent} chose masked action {a} for {tr.key}")
                self.penalties += 1
                bad.append(agent)
                continue
            if not self.valid_actions(tr)[a]:
                self.conflicts += 1
                continue
            q = self.queues[self.devices[tr.origin].region]
            q.remove(tr)
            self._place(tr, self.action_devices(agent)[a], self.now)
        return bad

    # --- time advance -----------------------------------------------------------
    def step(self, actions: dict | None = None) -> StepResult:
        n_before = len(self.events)
        bad = self.apply_actions(actions or {})
        t0 = self.now
        dt = self.step_ms
        nd = len(self.devices)

        for tr in self.to_start:
            if tr.status == "ready":
                tr.status = "executing"
                tr.remaining = tr.sub.cpu_cycles
                self.executing[tr.device].append(tr)
                self.events.append(SimEvent(t0, "exec_start", tr.key, self.devices[tr.device].id,
                                            tr.sub.cpu_cycles))
            elif tr.status == "upload_wait":
                self._start_transfer(tr, tr.device, tr.origin, tr.sub.data_out_bits, t0, "uploading")
        self.to_start = []

        u = np.zeros(nd)
        radio = np.zeros(nd)
        bits = np.zeros(nd)
        mem = np.zeros(nd)
        finished = []     # (time, order, kind, tr)
        held_until: dict[int, float] = {}

        for dev in range(nd):
            runs = self.executing[dev]
            if not runs:
                continue
            rate = self.proc[dev]
            ends, busy, credit = _share([r.remaining for r in runs], [rate] * len(runs), dt)
            prof = self.devices[dev].profile
            power = prof.k_ratio * prof.p_full_watts
            u[dev] = busy / dt
            self.energy_comp[dev] += power * busy / 1000.0
            still = []
            for r, end, cr in zip(runs, ends, credit):
                self.agent_energy[r.agent] += power * cr / 1000.0
                if end is None:
                    r.remaining -= rate * cr / 1000.0
                    self.agent_latency_ms[r.agent] += dt
                    still.append(r)
                else:
                    r.remaining = 0.0
                    self.agent_latency_ms[r.agent] += end
                    held_until[id(r)] = end
                    finished.append((t0 + end, 1, "exec_end", r))
            self.executing[dev] = still

        for dev in range(nd):
            runs = self.sending[dev]
            if not runs:
                continue
            ends, busy, credit = _share([r.remaining for r in runs], [r.rate for r in runs], dt)
            prof = self.devices[dev].profile
            radio[dev] = busy / dt
            is_mobile = prof.kind == "mobile"
            if is_mobile:
                self.energy_tx[dev] += prof.tx_power_watts * busy / 1000.0
            still = []
            for r, end, cr in zip(runs, ends, credit):
                if is_mobile:
                    self.agent_energy[r.agent] += prof.tx_power_watts * cr / 1000.0
                if end is None:
                    sent = r.rate * cr / 1000.0
                    r.remaining -= sent
                    bits[dev] += sent
                    self.agent_latency_ms[r.agent] += dt
                    still.append(r)
                else:
                    bits[dev] += r.remaining
                    r.remaining = 0.0
                    self.agent_latency_ms[r.agent] += end
                    finished.append((t0 + end, 0, "transfer_end", r))
            self.sending[dev] = still

        for dev in range(nd):
            tot = 0.0
            for r in self.reserved[dev]:
                tot += r.sub.mem_req * held_until.get(id(r), dt)
            mem[dev] = tot / (self.cap_mem[dev] * dt)

        t1 = (self.steps + 1) * dt
        finished.sort(key=lambda f: (f[0], f[1], f[3].key))
        completed = []
        for t, _, kind, r in finished:
            if kind == "transfer_end":
                bits_total = r.sub.data_in_bits if r.status == "downloading" else r.sub.data_out_bits
                self.bits_sent += bits_total
                self.events.append(SimEvent(t, "transfer_end", r.key, self.devices[r.sender].id,
                                            bits_total))
                if r.status == "downloading":
                    r.status = "ready"
                    self.to_start.append(r)
                else:
                    completed.append((t, r))
            else:
                self.cycles_done += r.sub.cpu_cycles
                self.events.append(SimEvent(t, "exec_end", r.key, self.devices[r.device].id,
                                            r.sub.cpu_cycles))
                self.reserved[r.device].remove(r)
                is_sink = not any(r.sub.id in s.deps for s in r.job.subtasks)
                if is_sink and r.device != r.origin and r.sub.data_out_bits > 0:
                    r.status = "upload_wait"
                    self.to_start.append(r)
                else:
                    completed.append((t, r))

        self.steps += 1
        self._submitted_now = set()
        for t, r in completed:
            self._complete(r, t, t1)

        self.trace_u.append(u)
        self.trace_mem.append(mem)
        self.trace_radio.append(radio)
        self.trace_bits.append(bits)
        return StepResult(self.events[n_before:], bad, self.done)

    def _complete(self, r: TaskRun, t: float, t_next: float) -> None:
        r.status = "done"
        r.finish_ms = t
        due = r.submit_ms + r.sub.deadline_ms
        self.agent_tardiness[r.agent] += r.pv * max(0.0, t - due) / r.sub.deadline_ms
        jr = self.jobs[r.job.job_id]
        jr.left -= 1
        if jr.left == 0:
            jr.finish_ms = t
        for s in r.job.subtasks:
            if r.sub.id in s.deps:
                succ = self.tasks[f"{r.job.job_id}/{s.id}"]
                succ.preds_left -= 1
                if succ.preds_left == 0:
                    self._make_ready(succ, t_next)

    @property
    def stalled(self) -> bool:
        """True when work is queued, nothing is placed or in flight, and no queue
        head fits anywhere: no future step can change that."""
        if not any(self.queues) or self.to_start or any(self.reserved) or any(self.sending):
            return False
        return not any(self.valid_actions(t).any() for t in self.pending_decisions().values())

    @property
    def done(self) -> bool:
        return bool(self.jobs) and all(j.finish_ms is not None for j in self.jobs.values())

    # --- exports ------------------------------------------------------------------
    def usage_arrays(self):
        """(u, mem, radio, bits) as (devices, steps) arrays."""
        nd = len(self.devices)
        def stack(xs):
            return np.array(xs).T if xs else np.zeros((nd, 0))
        return stack(self.trace_u), stack(self.trace_mem), stack(self.trace_radio), stack(self.trace_bits)

    def profiles(self) -> dict:
        return {d.id: d.profile for d in self.devices}

    def makespans(self) -> dict:
        return {j: jr.finish_ms - jr.submit_ms for j, jr in self.jobs.items() if jr.finish_ms is not None}


def _share(work, rates, span_ms):
    """Processor sharing of one resource among items for ``span_ms``.

    Each of k active items progresses at rate/k. Returns per-item finish offsets
    (ms, None if unfinished), the busy time, and each item's share-time (sum of
    segment length / k), which apportions power among items.
    """
    n = len(work)
    rem = list(work)
    alive = list(range(n))
    ends = [None] * n
    credit = [0.0] * n
    t = 0.0
    snap = 1e-9 * span_ms
    while alive:
        k = len(alive)
        tf = {i: rem[i] * k / rates[i] * 1000.0 for i in alive}
        tmin = min(tf.values())
        left = span_ms - t
        if tmin <= left + snap:
            tau = min(tmin, left)
            done_now = [i for i in alive if tf[i] <= tmin * (1 + 1e-12) + 1e-15]
            for i in alive:
                credit[i] += tau / k
                if i not in done_now:
                    rem[i] -= rates[i] / k * tau / 1000.0
            t = span_ms if tmin >= left - snap else t + tau
            for i in done_now:
                ends[i] = t
            alive = [i for i in alive if i not in done_now]
        else:
            for i in alive:
                credit[i] += left / k
            t = span_ms
            break
    return ends, t, credit


def init_cluster(cfg: ClusterConfig, strict: bool = False) -> Simulator:
    return Simulator(cfg, strict=strict)


# --- driving a policy ----------------------------------------------------------------

def run_policy(policy, jobs, cfg: ClusterConfig, seed: int = 0, *, strict: bool = True,
               max_steps: int = 10_000_000, on_step=None):
    """Run ``jobs`` to completion under ``policy`` and return (report, sim).

    ``policy`` needs ``reset(sim, seed)`` and ``act(sim, decisions) -> {agent: action}``.
    ``on_step(sim)`` is called after every step (for checkpointing).
    """
    sim = Simulator(cfg, strict=strict)
    policy.reset(sim, seed)
    pending = sorted(jobs, key=lambda j: (j.submit_time_ms, j.job_id))
    i = 0
    backlog: list[DagJob] = []
    while True:
        while i < len(pending) and pending[i].submit_time_ms <= sim.now + 1e-9:
            backlog.append(pending[i])
            i += 1
        if backlog:
            backlog = sim.submit(backlog)
        decisions = sim.pending_decisions()
        actions = policy.act(sim, decisions) if decisions else {}
        sim.step(actions)
        if on_step is not None:
            on_step(sim)
        if i == len(pending) and not backlog and sim.done:
            break
        if i == len(pending) and not backlog and sim.stalled:
            raise DeadlockError(f"queued subtasks fit on no device: {[t.key for t in sim.queued()][:5]}")
        if sim.steps >= max_steps:
            raise RuntimeError("simulation did not finish within max_steps")
    report = metrics.report_from_log(sim.events, list(jobs), sim.profiles(), sim.step_ms,
                                     weights=cfg.load_weights)
    return report, sim


def events_to_csv(events) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time_ms", "kind", "subtask", "device", "quantity"])
    for e in events:
        w.writerow([repr(float(e.time_ms)), e.kind, e.subtask, e.device, repr(float(e.quantity))])
    return buf.getvalue()


def events_from_csv(text: str) -> list[SimEvent]:
    rows = csv.DictReader(io.StringIO(text))
    return [SimEvent(float(r["time_ms"]), r["kind"], r["subtask"], r["device"], float(r["quantity"]))
            for r in rows]
