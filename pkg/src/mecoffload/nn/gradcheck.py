"""Central finite-difference checks for every backward pass.

Each case builds a small random instance, a scalar loss (a fixed random
projection of the layer output) and the analytic gradient, then compares
against (L(p + h e_k) - L(p - h e_k)) / 2h coordinate by coordinate.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .core import Dense, flatten, unflatten
from .encoder import AdditiveAttention, StateEncoder
from .recurrent import BRNN, LSTM

STEP = 1e-5
THRESHOLD = 1e-4
FLOOR = 1e-6


def relative_error(analytic, numeric, floor: float = FLOOR) -> np.ndarray:
    a = np.asarray(analytic, dtype=float)
    n = np.asarray(numeric, dtype=float)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def numeric_grad(loss: Callable[[dict], float], params: dict, h: float = STEP) -> np.ndarray:
    flat = flatten(params)
    out = np.empty_like(flat)
    for k in range(flat.size):
        old = flat[k]
        flat[k] = old + h
        up = loss(unflatten(flat, params))
        flat[k] = old - h
        down = loss(unflatten(flat, params))
        flat[k] = old
        out[k] = (up - down) / (2 * h)
    return out


def check(loss, grad, params, h: float = STEP) -> float:
    """Max relative error between ``grad(params)`` (a dict) and finite differences of ``loss``."""
    g = grad(params)
    analytic = flatten({k: g[k] for k in params})
    return float(relative_error(analytic, numeric_grad(loss, params, h)).max())


def _projected(forward, backward, out_shape, rng):
    R = rng.normal(size=out_shape)

    def loss(p):
        return float(np.sum(forward(p)[0] * R))

    def grad(p):
        _, cache = forward(p)
        return backward(cache, R)

    return loss, grad


def case_dense(seed=0):
    rng = np.random.default_rng(seed)
    layer = Dense(3, 4, "tanh", rng, "d.")
    x = rng.normal(size=(5, 3))
    loss, grad = _projected(lambda p: layer.forward(x, p), lambda c, R: layer.backward(c, R)[1], (5, 4), rng)
    return loss, grad, layer.params


def case_lstm(seed=0, window=10):
    rng = np.random.default_rng(seed)
    cell = LSTM(3, 4, rng)
    xs = rng.normal(size=(window, 2, 3))

    def fwd(p):
        hs, c, cache = cell.forward(xs, p)
        return hs, cache

    loss, grad = _projected(fwd, lambda c, R: cell.backward(c, dhs=R)[1], (window, 2, 4), rng)
    return loss, grad, cell.params


def case_attention(seed=0):
    rng = np.random.default_rng(seed)
    att = AdditiveAttention(4, 3, rng)
    V = rng.normal(size=(2, 6, 4))

    def fwd(p):
        m, _, cache = att.forward(V, p)
        return m, cache

    loss, grad = _projected(fwd, lambda c, R: att.backward(c, R)[1], (2, 4), rng)
    return loss, grad, att.params


def case_encoder(seed=0, window=10):
    rng = np.random.default_rng(seed)
    enc = StateEncoder(obs_dim=7, hidden=5, channels=3, att_dim=3, rng=rng)
    X = rng.normal(size=(2, window, 7))
    loss, grad = _projected(lambda p: enc.forward(X, p), enc.backward, (2, 5), rng)
    return loss, grad, enc.params


def case_brnn(seed=0, n_agents=3):
    rng = np.random.default_rng(seed)
    net = BRNN(4, 3, rng)
    X = rng.normal(size=(2, n_agents, 4))
    loss, grad = _projected(lambda p: net.forward(X, p), lambda c, R: net.backward(c, R)[1],
                            (2, n_agents, 6), rng)
    return loss, grad, net.params


CASES = {
    "dense": case_dense,
    "lstm": case_lstm,
    "attention": case_attention,
    "encoder": case_encoder,
    "brnn": case_brnn,
}


def run_suite(seed: int = 0, include_actor: bool = True) -> dict:
    """Max relative error per layer (and the cooperative actor loss when requested)."""
    cases = dict(CASES)
    if include_actor:
        from ..agents.comddpg import gradcheck_case
        cases["actor_loss"] = gradcheck_case
    out = {}
    for name, build in cases.items():
        loss, grad, params = build(seed)
        out[name] = check(loss, grad, params)
    return out
