"""Shared pieces of the offloading policies: configuration, replay, heuristics,
the training loop and the adapter that drives a learned agent inside a full run."""

from __future__ import annotations

import csv
import io
import math
from collections import deque
from dataclasses import asdict, dataclass, fields

import numpy as np

from ..environment import EnvConfig, MecEnv, Transition, decision_view, observe, padding_observation


class DivergenceError(RuntimeError):
    """Raised when a training loss becomes non-finite."""


@dataclass
class TrainConfig:
    episodes: int = 200
    steps: int = 10_000           # cap on decision points per episode
    batch: int = 16
    lr: float = 0.005
    discount: float = 0.9
    target_period: int = 50       # updates between hard target refreshes (DQN, DRQN)
    window: int = 10
    tau: float = 0.01             # soft target update (Com-DDPG)
    noise_start: float = 1.0      # exploration: Gaussian score noise / epsilon
    noise_end: float = 0.05
    capacity: int = 10_000
    hidden: int = 64
    brnn_hidden: int = 32
    max_grad_norm: float | None = 5.0
    block_size: int = 10
    smooth: int = 5
    seed: int = 0

    def validate(self) -> None:
        if self.episodes < 0:
            raise ValueError("episodes must be non-negative")
        for f in ("steps", "batch", "lr", "target_period", "window", "capacity",
                  "hidden", "brnn_hidden", "block_size", "smooth"):
            if not getattr(self, f) > 0:
                raise ValueError(f"{f} must be positive")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError("discount must lie in [0, 1)")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")
        if self.batch > self.capacity:
            raise ValueError("batch larger than replay capacity")
        if min(self.noise_start, self.noise_end) < 0:
            raise ValueError("exploration scales must be non-negative")

    def exploration(self, episode: int) -> float:
        """Linear decay from noise_start to noise_end over the training episodes."""
        frac = episode / max(self.episodes - 1, 1)
        return self.noise_start + (self.noise_end - self.noise_start) * min(frac, 1.0)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        bad = set(d) - known
        if bad:
            raise ValueError(f"unknown train config keys {sorted(bad)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


class ReplayBuffer:
    """Fixed-capacity ring of transitions with a seeded uniform sampler."""

    def __init__(self, capacity: int, seed: int = 0):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.items: list = []
        self.pos = 0
        self.rng = np.random.default_rng(seed)

    def __len__(self):
        return len(self.items)

    def add(self, item) -> None:
        if len(self.items) < self.capacity:
            self.items.append(item)
        else:
            self.items[self.pos] = item
        self.pos = (self.pos + 1) % self.capacity

    def sample(self, m: int) -> list:
        if m > len(self.items):
            raise ValueError(f"cannot sample {m} from {len(self.items)} transitions")
        idx = self.rng.choice(len(self.items), size=m, replace=False)
        return [self.items[i] for i in idx]


# --- heuristics ---------------------------------------------------------------------

def policy_local(mask) -> int | None:
    """Own device when admissible, else the lowest-index valid device; None defers."""
    valid = np.flatnonzero(np.asarray(mask))
    if valid.size == 0:
        return None
    return 0 if mask[0] else int(valid[0])


def policy_edge_first(mask, n_edges: int) -> int | None:
    """First-fit over edge servers in id order, then the cloud, then the own device."""
    mask = np.asarray(mask)
    for a in [*range(1, n_edges + 2), 0]:
        if mask[a]:
            return a
    return None


class HeuristicPolicy:
    def __init__(self, kind: str):
        if kind not in ("local", "edge_first"):
            raise ValueError(f"unknown heuristic {kind!r}")
        self.kind = kind

    def reset(self, sim, seed):
        pass

    def act(self, sim, decisions):
        out = {}
        for a, tr in decisions.items():
            mask = sim.valid_actions(tr)
            choice = policy_local(mask) if self.kind == "local" else policy_edge_first(mask, len(sim.edges))
            if choice is not None:
                out[a] = choice
        return out


# --- batches ----------------------------------------------------------------------------

@dataclass
class Batch:
    windows: np.ndarray        # (B, W, D)
    local: np.ndarray          # (B, N, L)
    masks: np.ndarray          # (B, N, A)
    active: np.ndarray         # (B, N)
    actions: np.ndarray        # (B, N), -1 where inactive
    rewards: np.ndarray        # (B, N)
    next_windows: np.ndarray
    next_local: np.ndarray
    next_masks: np.ndarray
    next_active: np.ndarray
    done: np.ndarray           # (B,)


def make_batch(transitions) -> Batch:
    def stack(get):
        return np.stack([get(t) for t in transitions])
    return Batch(
        windows=stack(lambda t: np.stack(t.s.window)),
        local=stack(lambda t: t.s.local), masks=stack(lambda t: t.s.masks),
        active=stack(lambda t: t.s.active), actions=stack(lambda t: t.actions),
        rewards=stack(lambda t: t.rewards),
        next_windows=stack(lambda t: np.stack(t.s_next.window)),
        next_local=stack(lambda t: t.s_next.local), next_masks=stack(lambda t: t.s_next.masks),
        next_active=stack(lambda t: t.s_next.active),
        done=np.array([float(t.done) for t in transitions]))


def masked_argmax(values, mask) -> np.ndarray:
    """Argmax over valid entries along the last axis; -1 for rows with no valid entry."""
    v = np.where(np.asarray(mask) > 0, values, -np.inf)
    best = np.argmax(v, axis=-1)
    return np.where(np.isfinite(v.max(axis=-1)), best, -1)


def one_hot(actions, n: int) -> np.ndarray:
    a = np.asarray(actions)
    out = np.zeros(a.shape + (n,))
    idx = np.nonzero(a >= 0)
    out[idx + (a[idx],)] = 1.0
    return out


def check_finite(name: str, value: float) -> float:
    if not math.isfinite(value):
        raise DivergenceError(f"{name} became non-finite ({value}); lower the learning rate "
                              "or enable gradient clipping")
    return value


# --- training loop ------------------------------------------------------------------

@dataclass
class EpisodeRecord:
    episode: int
    loss: float               # mean squared TD error over the episode's updates
    smoothed_loss: float      # trailing mean of ``loss`` over ``smooth`` episodes
    abs_td: float             # mean |target - estimate|
    mean_reward: float        # mean cluster reward per decision point
    updates: int
    decisions: int
    makespan_min: float
    makespan_median: float
    makespan_max: float


LOG_COLUMNS = [f.name for f in fields(EpisodeRecord)]


def log_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LOG_COLUMNS)
    for r in records:
        w.writerow([repr(float(v)) if isinstance(v, float) else v for v in asdict(r).values()])
    return buf.getvalue()


def smoothed(values, width: int) -> list[float]:
    """Trailing mean over the last ``width`` finite values (NaN where none exist yet)."""
    out = []
    for i in range(len(values)):
        win = [v for v in values[max(0, i - width + 1):i + 1] if math.isfinite(v)]
        out.append(float(np.mean(win)) if win else math.nan)
    return out


def blocks(jobs, size: int) -> list:
    jobs = sorted(jobs, key=lambda j: (j.submit_time_ms, j.job_id))
    return [jobs[i:i + size] for i in range(0, len(jobs), size)]


def train(agent, cluster, jobs, tcfg: TrainConfig, env_cfg: EnvConfig | None = None,
          on_episode=None) -> list[EpisodeRecord]:
    """Episodes cycle through consecutive job blocks. One gradient update per
    decision point once the replay buffer holds a full batch."""
    tcfg.validate()
    env = MecEnv(cluster, env_cfg, window=tcfg.window)
    buffer = ReplayBuffer(tcfg.capacity, tcfg.seed + 7919)
    parts = blocks(jobs, tcfg.block_size)
    if not parts:
        raise ValueError("no training jobs")
    losses, records = [], []
    for ep in range(tcfg.episodes):
        view = env.reset(parts[ep % len(parts)])
        scale = tcfg.exploration(ep)
        ep_loss, ep_abs, rewards, n_dec = [], [], [], 0
        done = env.finished
        while not done and n_dec < tcfg.steps:
            acts = agent.act(view, scale)
            nxt, r, R, done = env.step({i: int(a) for i, a in enumerate(acts) if a >= 0})
            buffer.add(Transition(view, acts, r, nxt, done, R))
            rewards.append(R)
            n_dec += 1
            view = nxt
            if len(buffer) >= tcfg.batch:
                loss, abs_td = agent.update(buffer.sample(tcfg.batch))
                ep_loss.append(check_finite("TD loss", loss))
                ep_abs.append(abs_td)
        losses.append(float(np.mean(ep_loss)) if ep_loss else math.nan)
        spans = list(env.sim.makespans().values()) or [math.nan]
        rec = EpisodeRecord(
            episode=ep + 1, loss=losses[-1], smoothed_loss=smoothed(losses, tcfg.smooth)[-1],
            abs_td=float(np.mean(ep_abs)) if ep_abs else math.nan,
            mean_reward=float(np.mean(rewards)) if rewards else math.nan,
            updates=len(ep_loss), decisions=n_dec, makespan_min=float(np.min(spans)),
            makespan_median=float(np.median(spans)), makespan_max=float(np.max(spans)))
        records.append(rec)
        if on_episode is not None:
            on_episode(rec)
    return records


class LearnedPolicy:
    """Drives a trained agent through ``run_policy``: greedy actions, the same
    observation window and local features as in training."""

    def __init__(self, agent, env_cfg: EnvConfig | None = None, window: int = 10):
        self.agent = agent
        self.cfg = env_cfg or EnvConfig()
        self.window = window

    def reset(self, sim, seed):
        pad = padding_observation(sim, self.cfg).vector()
        self.history = deque([pad] * self.window, maxlen=self.window)

    def act(self, sim, decisions):
        view = decision_view(sim, (), self.cfg)
        if not view.active.any():
            return {}
        self.history.append(observe(sim, self.cfg).vector())
        view.window = tuple(self.history)
        acts = self.agent.act(view, 0.0)
        return {i: int(a) for i, a in enumerate(acts) if a >= 0}
