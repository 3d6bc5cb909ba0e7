"""Value-based baselines with parameters shared across agents.

DQN scores actions from the latest observation and the agent's local features;
DRQN replaces the latest observation by the state encoder's summary of the
observation window. Both act epsilon-greedily over valid actions and learn from
squared TD error against a target network refreshed every ``target_period`` updates.
"""

from __future__ import annotations

import numpy as np

from ..environment import max_valid
from ..nn import Dense, StateEncoder, copy_params, merge, sgd_step
from .base import TrainConfig, make_batch, masked_argmax


class QAgent:
    kind = "dqn"

    def __init__(self, obs_dim: int, local_dim: int, n_actions: int, tcfg: TrainConfig | None = None):
        self.tcfg = tcfg or TrainConfig()
        self.obs_dim, self.local_dim, self.n_actions = obs_dim, local_dim, n_actions
        rng = np.random.default_rng(self.tcfg.seed)
        self._build(rng)
        h = self.tcfg.hidden
        self.l1 = Dense(self.feat_dim + local_dim, h, "tanh", rng, "q1.")
        self.l2 = Dense(h, n_actions, "identity", rng, "q2.")
        self.params = merge(self.base_params(), self.l1.params, self.l2.params)
        self.target = copy_params(self.params)
        self.act_rng = np.random.default_rng(self.tcfg.seed + 1)
        self.updates = 0

    # feature extractor over the global observation ----------------------------
    def _build(self, rng):
        self.feat_dim = self.obs_dim

    def base_params(self) -> dict:
        return {}

    def features(self, p, windows):
        return windows[:, -1], None

    def features_backward(self, cache, dfeat) -> dict:
        return {}

    # ---------------------------------------------------------------------
    def topology(self) -> dict:
        return {"agent": self.kind, "obs_dim": self.obs_dim, "local_dim": self.local_dim,
                "n_actions": self.n_actions, "hidden": self.tcfg.hidden, "window": self.tcfg.window}

    def q_values(self, p, windows, local):
        """(B, N, A) action values for every agent."""
        f, fcache = self.features(p, windows)
        B, N, _ = local.shape
        x = np.concatenate([np.broadcast_to(f[:, None, :], (B, N, f.shape[-1])), local], axis=-1)
        z, c1 = self.l1.forward(x, p)
        q, c2 = self.l2.forward(z, p)
        return q, (fcache, c1, c2)

    def q_backward(self, cache, dq) -> dict:
        fcache, c1, c2 = cache
        dz, g2 = self.l2.backward(c2, dq)
        dx, g1 = self.l1.backward(c1, dz)
        dfeat = dx[..., :self.feat_dim].sum(axis=1)
        return merge(self.features_backward(fcache, dfeat), g1, g2)

    def act(self, view, epsilon: float = 0.0) -> np.ndarray:
        windows = np.stack(view.window)[None]
        q, _ = self.q_values(self.params, windows, view.local[None])
        acts = masked_argmax(q[0], view.masks)
        for i in np.flatnonzero(view.active):
            if self.act_rng.random() < epsilon:
                acts[i] = self.act_rng.choice(np.flatnonzero(view.masks[i]))
        return np.where(view.active, acts, -1)

    def update(self, transitions):
        b = make_batch(transitions)
        cfg = self.tcfg
        q, cache = self.q_values(self.params, b.windows, b.local)
        qn, _ = self.q_values(self.target, b.next_windows, b.next_local)
        nmask = np.where(b.next_active[..., None], b.next_masks, 1.0)
        y = b.rewards + cfg.discount * (1.0 - b.done[:, None]) * max_valid(qn, nmask)
        rows, agents = np.nonzero(b.active)
        acts = b.actions[rows, agents]
        delta = q[rows, agents, acts] - y[rows, agents]
        n = max(len(delta), 1)
        dq = np.zeros_like(q)
        dq[rows, agents, acts] = 2.0 * delta / n
        grads = self.q_backward(cache, dq)
        sgd_step(self.params, grads, cfg.lr, cfg.max_grad_norm)
        self.updates += 1
        if self.updates % cfg.target_period == 0:
            self.target = copy_params(self.params)
        return float(np.mean(delta ** 2)) if len(delta) else 0.0, float(np.mean(np.abs(delta))) if len(delta) else 0.0


class DQNAgent(QAgent):
    kind = "dqn"


class DRQNAgent(QAgent):
    kind = "drqn"

    def _build(self, rng):
        self.encoder = StateEncoder(self.obs_dim, hidden=self.tcfg.hidden, rng=rng, prefix="enc.")
        self.feat_dim = self.tcfg.hidden

    def base_params(self) -> dict:
        return self.encoder.params

    def features(self, p, windows):
        return self.encoder.forward(windows, p)

    def features_backward(self, cache, dfeat) -> dict:
        return self.encoder.backward(cache, dfeat)
