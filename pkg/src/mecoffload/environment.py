"""RL-facing view of the simulator: observations, action masks, rewards, transitions.

One agent per mobile device. At a decision point each agent with a queued
subtask picks a target device; the action index space per agent is
``[own device, edge servers..., cloud, other mobiles...]`` (n + m + 1 entries).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .metrics import RunningZScore, rms_deviation
from .simulator import ClusterConfig, DeadlockError, Simulator, TaskRun

TASK_FIELDS = ("valid", "data_in", "bw_down", "cycles", "data_out", "bw_up", "priority")
N_TASK_LOCAL = 12
N_PER_ACTION = 6


@dataclass
class EnvConfig:
    alpha: float = 0.3            # energy weight
    beta: float = 0.5             # latency + priority weight
    gamma: float = 0.2            # load-status weight
    max_pending: int = 32
    bits_max: float = 2e6
    cycles_max: float = 3e8
    rate_max: float = 3e7
    deadline_max: float = 2000.0
    cpu_ref: float = 1e9
    mem_ref: float = 2e9
    time_ref_ms: float = 100.0
    invalid_penalty: float = 1.0
    # Divide interval energy, latency and load by the interval length, so that the
    # z-scored quantities are mean power, mean in-flight phases and mean load.
    per_unit_time: bool = True

    def validate(self) -> None:
        w = (self.alpha, self.beta, self.gamma)
        if min(w) < 0 or abs(sum(w) - 1.0) > 1e-9:
            raise ValueError(f"reward weights must be non-negative and sum to 1, got {w}")
        if self.max_pending < 1:
            raise ValueError("max_pending must be positive")


@dataclass
class Observation:
    tasks: np.ndarray          # (max_pending, len(TASK_FIELDS)); padding rows all zero
    load: np.ndarray           # per-device weighted load over the last step
    usage: np.ndarray          # per-device CPU usage over the last step
    flag: float = 1.0          # 0 for window padding

    def vector(self) -> np.ndarray:
        return np.concatenate([self.tasks.ravel(), self.load, self.usage, [self.flag]])

    @property
    def priorities(self) -> np.ndarray:
        return self.tasks[:, TASK_FIELDS.index("priority")]


def obs_dim(n_devices: int, max_pending: int = 32) -> int:
    return max_pending * len(TASK_FIELDS) + 2 * n_devices + 1


def local_dim(n_actions: int) -> int:
    return N_TASK_LOCAL + N_PER_ACTION * n_actions


def _nominal_rate(sim: Simulator, tr: TaskRun) -> float:
    region = sim.cfg.regions[sim.devices[tr.origin].region]
    return sim.link_rate(tr.origin, sim.index[region[0]])


def observe(sim: Simulator, cfg: EnvConfig) -> Observation:
    """Snapshot of queued subtasks and device usage, normalised by configured maxima."""
    queued = sorted(sim.queued(), key=lambda t: (-t.pv, t.submit_ms, t.key))[:cfg.max_pending]
    rows = np.zeros((cfg.max_pending, len(TASK_FIELDS)))
    for r, tr in enumerate(queued):
        s = tr.sub
        bw = _nominal_rate(sim, tr) / cfg.rate_max
        rows[r] = (1.0, s.data_in_bits / cfg.bits_max, bw, s.cpu_cycles / cfg.cycles_max,
                   s.data_out_bits / cfg.bits_max, bw, tr.pv)
    u = sim.usage_now()
    mem = sim.trace_mem[-1] if sim.trace_mem else np.zeros(len(sim.devices))
    w_cpu, w_mem = sim.cfg.load_weights
    return Observation(rows, w_cpu * u + w_mem * mem, u.copy())


def padding_observation(sim: Simulator, cfg: EnvConfig) -> Observation:
    nd = len(sim.devices)
    return Observation(np.zeros((cfg.max_pending, len(TASK_FIELDS))), np.zeros(nd), np.zeros(nd), 0.0)


def valid_actions(sim: Simulator, tr: TaskRun) -> np.ndarray:
    return sim.valid_actions(tr)


def _in_flight(sim: Simulator, agent: int):
    ex = sum(t.agent == agent for runs in sim.executing for t in runs)
    tx = sum(t.agent == agent for runs in sim.sending for t in runs)
    q = sum(t.agent == agent for t in sim.queued())
    own = len(sim.executing[sim.mobiles[agent]])
    return ex / 4.0, tx / 4.0, q / 8.0, own / 4.0


def agent_features(sim: Simulator, agent: int, tr: TaskRun | None, cfg: EnvConfig,
                   mask: np.ndarray | None = None) -> np.ndarray:
    """Local observation of one agent: its pending subtask, its own work in flight
    (executing, transferring, queued, executing on its own device) and, per
    candidate device in action order, [valid, usage, running count, est. exec
    time, est. transfer time, backlog]."""
    n_act = sim.n_actions
    out = np.zeros(local_dim(n_act))
    if tr is None:
        return out
    s = tr.sub
    out[:N_TASK_LOCAL] = (1.0, s.data_in_bits / cfg.bits_max, s.cpu_cycles / cfg.cycles_max,
                          s.data_out_bits / cfg.bits_max, tr.pv, s.deadline_ms / cfg.deadline_max,
                          s.cpu_req / cfg.cpu_ref, s.mem_req / cfg.mem_ref,
                          *_in_flight(sim, agent))
    if mask is None:
        mask = sim.valid_actions(tr)
    if s.deps:
        src = [sim.tasks[f"{tr.job.job_id}/{d}"].device for d in s.deps]
    else:
        src = [tr.origin]
    is_sink = not any(s.id in o.deps for o in tr.job.subtasks)
    u = sim.usage_now()
    per = out[N_TASK_LOCAL:].reshape(n_act, N_PER_ACTION)
    ref = cfg.time_ref_ms
    for j, dev in enumerate(sim.action_devices(agent)):
        running = sim.executing[dev]
        k = len(running)
        est_exec = s.cpu_cycles * (k + 1) / sim.proc[dev] * 1000.0
        remote = [x for x in src if x != dev]
        est_tx = s.data_in_bits / sim.link_rate(remote[0], dev) * 1000.0 if remote else 0.0
        if is_sink and dev != tr.origin:
            est_tx += s.data_out_bits / sim.link_rate(dev, tr.origin) * 1000.0
        backlog = sum(r.remaining for r in running) / sim.proc[dev] * 1000.0
        per[j] = (mask[j], u[dev], k / 4.0, est_exec / ref, est_tx / ref, backlog / ref)
    return out


# --- reward -------------------------------------------------------------------

@dataclass
class IntervalMetrics:
    energy: np.ndarray         # per agent, joules
    latency_ms: np.ndarray     # per agent, transfer + compute time of its subtasks
    tardiness: np.ndarray      # per agent, priority-weighted normalised tardiness
    load_status: float         # cluster RMS deviation of interval loads
    total_energy: float
    total_latency_ms: float
    duration_ms: float = 0.0


class RewardModel:
    """Negative weighted sum of running z-scores.

    The cluster-level reward uses totals; each agent's reward uses its own
    energy and latency (z-scored against the pooled per-agent stream), its own
    tardiness term and the shared load-status z-score.
    """

    def __init__(self, alpha: float, beta: float, gamma: float):
        if min(alpha, beta, gamma) < 0 or abs(alpha + beta + gamma - 1.0) > 1e-9:
            raise ValueError("reward weights must be non-negative and sum to 1")
        self.alpha, self.beta, self.gamma = alpha, beta, gamma
        self.en, self.la, self.ls = RunningZScore(), RunningZScore(), RunningZScore()
        self.en_tot, self.la_tot = RunningZScore(), RunningZScore()

    def combine(self, z_en: float, z_la: float, p_bar: float, z_ls: float) -> float:
        return -(self.alpha * z_en + self.beta * (z_la + p_bar) + self.gamma * z_ls)

    def __call__(self, m: IntervalMetrics):
        for x in m.energy:
            self.en.push(x)
        for x in m.latency_ms:
            self.la.push(x)
        z_ls = self.ls.update(m.load_status)
        R = self.combine(self.en_tot.update(m.total_energy), self.la_tot.update(m.total_latency_ms),
                         float(np.sum(m.tardiness)), z_ls)
        r = np.array([self.combine(self.en.z(e), self.la.z(l), p, z_ls)
                      for e, l, p in zip(m.energy, m.latency_ms, m.tardiness)])
        return R, r


def reward(z_en: float, z_la: float, p_bar: float, z_ls: float,
           alpha: float, beta: float, gamma: float) -> float:
    if min(alpha, beta, gamma) < 0 or abs(alpha + beta + gamma - 1.0) > 1e-9:
        raise ValueError("reward weights must be non-negative and sum to 1")
    return -(alpha * z_en + beta * (z_la + p_bar) + gamma * z_ls)


def action_value_targets(rewards, next_values, dones, discount: float) -> np.ndarray:
    """r + discount * V(s') with no bootstrap on terminal transitions."""
    rewards = np.asarray(rewards, dtype=float)
    nv = np.asarray(next_values, dtype=float)
    d = np.asarray(dones, dtype=float)
    return rewards + discount * (1.0 - d) * nv


def max_valid(q: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Max over valid actions along the last axis; rows with no valid action give 0."""
    masked = np.where(mask > 0, q, -np.inf)
    best = masked.max(axis=-1)
    return np.where(np.isfinite(best), best, 0.0)


# --- transitions and the training environment ---------------------------------------

@dataclass
class AgentView:
    """Everything an agent-side network consumes at one decision point."""
    window: tuple              # last W observation vectors, oldest first (references)
    local: np.ndarray          # (N, local_dim)
    masks: np.ndarray          # (N, n_actions)
    active: np.ndarray         # (N,) bool, agent has a decision to make


@dataclass
class Transition:
    s: AgentView
    actions: np.ndarray        # (N,), -1 where inactive
    rewards: np.ndarray        # (N,)
    s_next: AgentView
    done: bool
    reward_total: float = 0.0

    def __post_init__(self):
        n = len(self.actions)
        if len(self.rewards) != n or self.s.local.shape[0] != n or self.s_next.local.shape[0] != n:
            raise ValueError("agent count differs across transition fields")


def decision_view(sim: Simulator, history, cfg: EnvConfig) -> AgentView:
    """Inputs for every agent at the current step; agents whose head-of-queue
    subtask fits nowhere (or that have nothing queued) are inactive."""
    n, A = sim.n_agents, sim.n_actions
    local = np.zeros((n, local_dim(A)))
    masks = np.zeros((n, A))
    active = np.zeros(n, dtype=bool)
    for a, tr in sim.pending_decisions().items():
        m = sim.valid_actions(tr)
        if m.any():
            masks[a] = m
            local[a] = agent_features(sim, a, tr, cfg, m)
            active[a] = True
    return AgentView(tuple(history), local, masks, active)


class MecEnv:
    """Episode driver over a block of jobs that only stops at decision points."""

    def __init__(self, cluster: ClusterConfig, cfg: EnvConfig | None = None, window: int = 10):
        self.cluster = cluster
        self.cfg = cfg or EnvConfig()
        self.cfg.validate()
        self.window = window
        self.rewards = RewardModel(self.cfg.alpha, self.cfg.beta, self.cfg.gamma)
        self.sim: Simulator | None = None

    # episode control
    def reset(self, jobs, rebase: bool = True) -> AgentView:
        self.sim = Simulator(self.cluster, strict=True)
        jobs = sorted(jobs, key=lambda j: (j.submit_time_ms, j.job_id))
        if rebase and jobs:
            from dataclasses import replace
            t0 = jobs[0].submit_time_ms
            jobs = [replace(j, submit_time_ms=j.submit_time_ms - t0) for j in jobs]
        self.jobs = jobs
        self._next_job = 0
        self._backlog = []
        pad = padding_observation(self.sim, self.cfg).vector()
        self._history = deque([pad] * self.window, maxlen=self.window)
        self._snap = self._accumulators()
        self._interval_steps = 0
        self._advance(first=True)
        return self.view()

    def _submit_arrivals(self) -> None:
        sim = self.sim
        while self._next_job < len(self.jobs) and self.jobs[self._next_job].submit_time_ms <= sim.now + 1e-9:
            self._backlog.append(self.jobs[self._next_job])
            self._next_job += 1
        if self._backlog:
            self._backlog = sim.submit(self._backlog)

    @property
    def finished(self) -> bool:
        return self._next_job == len(self.jobs) and not self._backlog and self.sim.done

    def decisions(self) -> dict[int, TaskRun]:
        """Pending decisions whose mask admits at least one device; the rest wait."""
        out = {}
        for a, tr in self.sim.pending_decisions().items():
            if self.sim.valid_actions(tr).any():
                out[a] = tr
        return out

    def _advance(self, actions=None, first=False) -> None:
        """Apply actions (if any) and step until some agent has a decision or the episode ends."""
        if not first:
            self.sim.step(actions or {})
            self._interval_steps += 1
        while True:
            self._submit_arrivals()
            if self.finished or self.decisions():
                break
            if self._next_job == len(self.jobs) and not self._backlog and self.sim.stalled:
                raise DeadlockError("queued subtasks fit on no device: "
                                    f"{[t.key for t in self.sim.queued()][:5]}")
            self.sim.step({})
            self._interval_steps += 1
        self._history.append(observe(self.sim, self.cfg).vector())

    def view(self) -> AgentView:
        return decision_view(self.sim, self._history, self.cfg)

    def _accumulators(self):
        s = self.sim
        mob = np.array(s.mobiles)
        return dict(energy=s.agent_energy.copy(), latency=s.agent_latency_ms.copy(),
                    tard=s.agent_tardiness.copy(),
                    total_energy=s.energy_comp.sum() + s.energy_tx[mob].sum(),
                    steps=len(s.trace_u))

    def interval_metrics(self) -> IntervalMetrics:
        s, old = self.sim, self._snap
        new = self._accumulators()
        lo, hi = old["steps"], new["steps"]
        dur = (hi - lo) * s.step_ms
        scale = 1.0 / dur if self.cfg.per_unit_time and dur > 0 else 1.0
        if hi > lo:
            u = np.array(s.trace_u[lo:hi])
            mem = np.array(s.trace_mem[lo:hi])
            w_cpu, w_mem = s.cfg.load_weights
            loads = (w_cpu * u + w_mem * mem).sum(axis=0) * s.step_ms
            ls = rms_deviation(loads * (scale if self.cfg.per_unit_time else 1e-3))
        else:
            ls = 0.0
        lat = (new["latency"] - old["latency"]) * scale
        self._snap = new
        return IntervalMetrics(energy=(new["energy"] - old["energy"]) * scale, latency_ms=lat,
                               tardiness=new["tard"] - old["tard"], load_status=ls,
                               total_energy=(new["total_energy"] - old["total_energy"]) * scale,
                               total_latency_ms=float(lat.sum()), duration_ms=dur)

    def step(self, actions: dict):
        """Returns (next view, per-agent rewards, total reward, done)."""
        self._interval_steps = 0
        bad = self.sim.apply_actions(actions)
        self._advance({}, first=False)
        R, r = self.rewards(self.interval_metrics())
        for a in bad:
            r[a] -= self.cfg.invalid_penalty
        return self.view(), r, R, self.finished
