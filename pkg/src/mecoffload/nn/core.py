"""Dense layers, parameter containers, SGD and checkpoints.

Parameters live in plain ``dict[str, np.ndarray]`` (float64). Insertion order
is the flattening order used by checkpoints and gradient checks.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

Params = dict


def uniform_init(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _act(name, z):
    if name == "identity":
        return z
    if name == "tanh":
        return np.tanh(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    raise ValueError(f"unknown activation {name!r}")


def _act_grad(name, z, y, dy):
    if name == "identity":
        return dy
    if name == "tanh":
        return dy * (1.0 - y * y)
    return dy * (z > 0)


def dense_forward(x, W, b, activation: str = "identity"):
    """y = act(W x + b) over the last axis of ``x``; returns (y, cache)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != W.shape[1] or b.shape != (W.shape[0],):
        raise ValueError(f"shape mismatch: x {x.shape}, W {W.shape}, b {b.shape}")
    z = x @ W.T + b
    y = _act(activation, z)
    return y, (x, W, z, y, activation)


def dense_backward(cache, dy):
    """Gradients (dx, dW, db) of a dense layer."""
    x, W, z, y, activation = cache
    dz = _act_grad(activation, z, y, dy)
    x2 = x.reshape(-1, x.shape[-1])
    dz2 = dz.reshape(-1, dz.shape[-1])
    dW = dz2.T @ x2
    db = dz2.sum(axis=0)
    dx = dz @ W
    return dx, dW, db


class Dense:
    def __init__(self, n_in: int, n_out: int, activation: str = "identity", rng=None, prefix: str = ""):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.activation = activation
        self.kW, self.kb = prefix + "W", prefix + "b"
        self.params = {self.kW: uniform_init(rng, (n_out, n_in), n_in),
                       self.kb: uniform_init(rng, (n_out,), n_in)}

    def forward(self, x, params=None):
        p = params or self.params
        return dense_forward(x, p[self.kW], p[self.kb], self.activation)

    def backward(self, cache, dy):
        dx, dW, db = dense_backward(cache, dy)
        return dx, {self.kW: dW, self.kb: db}


# --- parameter utilities -------------------------------------------------------

def merge(*dicts) -> dict:
    out = {}
    for d in dicts:
        for k, v in d.items():
            if k in out:
                out[k] = out[k] + v
            else:
                out[k] = v
    return out


def flatten(params: Params) -> np.ndarray:
    return np.concatenate([np.ravel(v) for v in params.values()]) if params else np.zeros(0)


def unflatten(flat, like: Params) -> Params:
    out, i = {}, 0
    for k, v in like.items():
        out[k] = np.asarray(flat[i:i + v.size], dtype=float).reshape(v.shape)
        i += v.size
    if i != len(flat):
        raise ValueError("flat vector length does not match parameter layout")
    return out


def count(params: Params) -> int:
    return int(sum(v.size for v in params.values()))


def copy_params(params: Params) -> Params:
    return {k: v.copy() for k, v in params.items()}


def global_norm(grads: Params) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def sgd_step(params: Params, grads: Params, lr: float, max_norm: float | None = None) -> Params:
    """In-place p <- p - lr * g (optionally after global-norm clipping); returns params."""
    if not lr > 0:
        raise ValueError("learning rate must be positive")
    scale = 1.0
    if max_norm is not None:
        n = global_norm(grads)
        if n > max_norm:
            scale = max_norm / n
    for k, g in grads.items():
        params[k] -= lr * scale * g
    return params


def soft_update(target: Params, online: Params, tau: float) -> Params:
    """In-place target <- tau * online + (1 - tau) * target."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    for k in target:
        if tau == 1.0:
            target[k][...] = online[k]
        else:
            target[k] *= 1.0 - tau
            target[k] += tau * online[k]
    return target


# --- checkpoints ---------------------------------------------------------------------

FORMAT = "mecoffload-params/1"


def save_params(path, params: Params, topology: dict | None = None) -> None:
    """JSON checkpoint: header (format, topology, names, shapes) then one flat value list
    in parameter order. Floats are written with round-trip precision."""
    doc = {
        "format": FORMAT,
        "topology": topology or {},
        "names": list(params),
        "shapes": [list(v.shape) for v in params.values()],
        "values": flatten(params).tolist(),
    }
    Path(path).write_text(json.dumps(doc))


def load_params(path) -> tuple[Params, dict]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != FORMAT:
        raise ValueError(f"unsupported checkpoint format {doc.get('format')!r}")
    flat = np.array(doc["values"], dtype=float)
    out, i = {}, 0
    for name, shape in zip(doc["names"], doc["shapes"]):
        n = int(np.prod(shape)) if shape else 1
        out[name] = flat[i:i + n].reshape(shape)
        i += n
    return out, doc["topology"]
