"""Cooperative multi-agent DDPG with recurrent state estimation and agent-axis BRNNs.

Actor: state encoder over the observation window, then for every agent the
encoded state joined with its local features, a bidirectional RNN across the
agents so that decisions see each other, and a linear score head. Masked
softmax over the scores is the relaxed (differentiable) action; execution takes
the masked argmax of the noisy scores.

Critic: a separate encoder, the BRNN over [state, local features, action of
each agent], and a linear head giving one value per device; Q_i is the inner
product of that vector with agent i's action, so the action acts both through
the BRNN and directly on the value. The actor maximises
sum_i Q_i(s, pi(s)); since every Q_i sees every agent's action through the
BRNN, the actor gradient for agent j collects terms from all i.
"""

from __future__ import annotations

import numpy as np

from ..nn import BRNN, Dense, StateEncoder, copy_params, merge, sgd_step, soft_update
from .base import TrainConfig, make_batch, masked_argmax, one_hot


def masked_softmax(scores, mask):
    """Softmax over valid entries of the last axis; all-zero rows where nothing is valid."""
    valid = np.asarray(mask) > 0
    s = np.where(valid, scores, -np.inf)
    top = s.max(axis=-1, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    e = np.where(valid, np.exp(np.where(valid, scores - top, 0.0)), 0.0)
    tot = e.sum(axis=-1, keepdims=True)
    return np.divide(e, tot, out=np.zeros_like(e), where=tot > 0)


def masked_softmax_backward(p, dp):
    return p * (dp - (p * dp).sum(axis=-1, keepdims=True))


class ComDDPGAgent:
    kind = "comddpg"

    def __init__(self, obs_dim: int, local_dim: int, n_actions: int, tcfg: TrainConfig | None = None):
        self.tcfg = tcfg or TrainConfig()
        self.obs_dim, self.local_dim, self.n_actions = obs_dim, local_dim, n_actions
        H, G = self.tcfg.hidden, self.tcfg.brnn_hidden
        rng = np.random.default_rng(self.tcfg.seed)
        self.a_enc = StateEncoder(obs_dim, hidden=H, rng=rng, prefix="a.enc.")
        self.a_brnn = BRNN(H + local_dim, G, rng, "a.brnn.")
        self.a_out = Dense(2 * G, n_actions, "identity", rng, "a.out.")
        self.c_enc = StateEncoder(obs_dim, hidden=H, rng=rng, prefix="c.enc.")
        self.c_brnn = BRNN(H + local_dim + n_actions, G, rng, "c.brnn.")
        self.c_out = Dense(2 * G, n_actions, "identity", rng, "c.out.")
        self.actor = merge(self.a_enc.params, self.a_brnn.params, self.a_out.params)
        self.critic = merge(self.c_enc.params, self.c_brnn.params, self.c_out.params)
        self.actor_target = copy_params(self.actor)
        self.critic_target = copy_params(self.critic)
        self.act_rng = np.random.default_rng(self.tcfg.seed + 1)
        self.updates = 0
        self.last_actor_loss = float("nan")

    @property
    def params(self) -> dict:
        return {**self.actor, **self.critic}

    def load(self, params: dict) -> None:
        for k, v in params.items():
            (self.actor if k.startswith("a.") else self.critic)[k][...] = v
        self.actor_target = copy_params(self.actor)
        self.critic_target = copy_params(self.critic)

    def topology(self) -> dict:
        return {"agent": self.kind, "obs_dim": self.obs_dim, "local_dim": self.local_dim,
                "n_actions": self.n_actions, "hidden": self.tcfg.hidden,
                "brnn_hidden": self.tcfg.brnn_hidden, "window": self.tcfg.window}

    # --- actor --------------------------------------------------------------------
    def actor_forward(self, p, windows, local, masks):
        h, ce = self.a_enc.forward(windows, p)
        B, N, _ = local.shape
        X = np.concatenate([np.broadcast_to(h[:, None, :], (B, N, h.shape[-1])), local], axis=-1)
        out, cb = self.a_brnn.forward(X, p)
        scores, cd = self.a_out.forward(out, p)
        probs = masked_softmax(scores, masks)
        return scores, probs, (ce, cb, cd, probs)

    def actor_backward(self, cache, dprobs) -> dict:
        ce, cb, cd, probs = cache
        ds = masked_softmax_backward(probs, dprobs)
        dout, gd = self.a_out.backward(cd, ds)
        dX, gb = self.a_brnn.backward(cb, dout)
        ge = self.a_enc.backward(ce, dX[..., :self.tcfg.hidden].sum(axis=1))
        return merge(ge, gb, gd)

    # --- critic -------------------------------------------------------------------
    def critic_encode(self, p, windows):
        return self.c_enc.forward(windows, p)

    def critic_head(self, p, hc, local, acts):
        B, N, _ = local.shape
        X = np.concatenate([np.broadcast_to(hc[:, None, :], (B, N, hc.shape[-1])), local, acts], axis=-1)
        out, cb = self.c_brnn.forward(X, p)
        qa, cd = self.c_out.forward(out, p)
        return (qa * acts).sum(axis=-1), (cb, cd, qa, acts)

    def critic_head_backward(self, cache, dq):
        """Returns (parameter grads, d/d encoded state, d/d actions)."""
        cb, cd, qa, acts = cache
        dout, gd = self.c_out.backward(cd, dq[..., None] * acts)
        dX, gb = self.c_brnn.backward(cb, dout)
        H = self.tcfg.hidden
        dacts = dX[..., H + self.local_dim:] + dq[..., None] * qa
        return merge(gb, gd), dX[..., :H].sum(axis=1), dacts

    def q_values(self, p, windows, local, acts):
        hc, _ = self.critic_encode(p, windows)
        return self.critic_head(p, hc, local, acts)[0]

    # --- the cooperative actor objective -----------------------------------------
    def actor_loss(self, actor, critic, windows, local, masks, active):
        """-(1/n) sum over active agents of Q_i(s, pi(s)), with its actor gradient."""
        _, probs, ca = self.actor_forward(actor, windows, local, masks)
        hc, _ = self.critic_encode(critic, windows)
        q, cc = self.critic_head(critic, hc, local, probs)
        n = max(int(active.sum()), 1)
        loss = -float(q[active].sum()) / n
        dq = -active.astype(float) / n
        _, _, dacts = self.critic_head_backward(cc, dq)
        return loss, self.actor_backward(ca, dacts)

    # --- acting and learning -----------------------------------------------------
    def act(self, view, noise: float = 0.0) -> np.ndarray:
        windows = np.stack(view.window)[None]
        scores, _, _ = self.actor_forward(self.actor, windows, view.local[None], view.masks[None])
        s = scores[0]
        if noise > 0:
            s = s + noise * self.act_rng.normal(size=s.shape)
        acts = masked_argmax(s, view.masks)
        return np.where(view.active, acts, -1)

    def update(self, transitions):
        cfg = self.tcfg
        b = make_batch(transitions)
        A = self.n_actions

        _, pn, _ = self.actor_forward(self.actor_target, b.next_windows, b.next_local, b.next_masks)
        qn = self.q_values(self.critic_target, b.next_windows, b.next_local, pn)
        y = b.rewards + cfg.discount * (1.0 - b.done[:, None]) * qn

        hc, ce = self.critic_encode(self.critic, b.windows)
        q, cc = self.critic_head(self.critic, hc, b.local, one_hot(b.actions, A))
        active = b.active
        n = max(int(active.sum()), 1)
        delta = np.where(active, q - y, 0.0)
        gc, dhc, _ = self.critic_head_backward(cc, 2.0 * delta / n)
        gc = merge(gc, self.c_enc.backward(ce, dhc))

        _, probs, ca = self.actor_forward(self.actor, b.windows, b.local, b.masks)
        qp, cp = self.critic_head(self.critic, hc, b.local, probs)
        self.last_actor_loss = -float(qp[active].sum()) / n
        _, _, dacts = self.critic_head_backward(cp, -active.astype(float) / n)
        ga = self.actor_backward(ca, dacts)

        sgd_step(self.critic, gc, cfg.lr, cfg.max_grad_norm)
        sgd_step(self.actor, ga, cfg.lr, cfg.max_grad_norm)
        soft_update(self.critic_target, self.critic, cfg.tau)
        soft_update(self.actor_target, self.actor, cfg.tau)
        self.updates += 1
        d = delta[active]
        return (float(np.mean(d ** 2)), float(np.mean(np.abs(d)))) if d.size else (0.0, 0.0)


def gradcheck_case(seed: int = 0):
    """Small frozen mini-batch for checking the actor gradient end to end."""
    rng = np.random.default_rng(seed)
    B, W, D, N, L, A = 2, 3, 7, 3, 5, 4
    agent = ComDDPGAgent(D, L, A, TrainConfig(hidden=4, brnn_hidden=3, window=W, seed=seed))
    windows = rng.normal(size=(B, W, D))
    local = rng.normal(size=(B, N, L))
    masks = (rng.random((B, N, A)) < 0.7).astype(float)
    masks[..., 0] = 1.0
    active = np.ones((B, N), dtype=bool)
    active[1, 2] = False
    masks[1, 2] = 0.0

    def loss(p):
        return agent.actor_loss(p, agent.critic, windows, local, masks, active)[0]

    def grad(p):
        return agent.actor_loss(p, agent.critic, windows, local, masks, active)[1]

    return loss, grad, copy_params(agent.actor)
