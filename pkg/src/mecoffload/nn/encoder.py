"""Internal-state encoder: 1-D convolution over observation features, additive
attention pooling into a context vector, then an LSTM over the observation window.
"""

from __future__ import annotations

import numpy as np

from .core import merge, uniform_init
from .recurrent import LSTM


class Conv1D:
    """Single input channel, ``channels`` outputs, kernel 3, same (zero) padding,
    tanh activation. (B, L) -> (B, L, channels)."""

    def __init__(self, channels: int, rng=None, prefix: str = "conv.", kernel: int = 3):
        rng = rng if rng is not None else np.random.default_rng(0)
        if kernel % 2 != 1:
            raise ValueError("kernel size must be odd for same padding")
        self.kernel = kernel
        self.kK, self.kb = prefix + "K", prefix + "b"
        self.params = {self.kK: uniform_init(rng, (channels, kernel), kernel),
                       self.kb: uniform_init(rng, (channels,), kernel)}

    def _patches(self, x):
        r = self.kernel // 2
        L = x.shape[1]
        xp = np.pad(x, ((0, 0), (r, r)))
        return np.stack([xp[:, k:k + L] for k in range(self.kernel)], axis=-1)

    def forward(self, x, params=None):
        p = params or self.params
        X3 = self._patches(x)
        y = np.tanh(X3 @ p[self.kK].T + p[self.kb])
        return y, (X3, y, p[self.kK])

    def backward(self, cache, dy):
        X3, y, K = cache
        dz = y * y
        np.subtract(1.0, dz, out=dz)
        dz *= dy
        flat = dz.reshape(-1, dz.shape[-1])
        dK = flat.T @ X3.reshape(-1, self.kernel)
        db = np.ones(len(flat)) @ flat
        dX3 = dz @ K
        r = self.kernel // 2
        L = X3.shape[1]
        dxp = np.zeros((X3.shape[0], L + 2 * r))
        for k in range(self.kernel):
            dxp[:, k:k + L] += dX3[..., k]
        return dxp[:, r:r + L], {self.kK: dK, self.kb: db}


def softmax(e, axis=-1):
    e = e - e.max(axis=axis, keepdims=True)
    w = np.exp(e)
    return w / w.sum(axis=axis, keepdims=True)


class AdditiveAttention:
    """score_p = v . tanh(W x_p + b); weights = softmax(scores); context = sum_p w_p x_p.

    Input (B, P, C) -> context (B, C) and weights (B, P)."""

    def __init__(self, dim: int, att_dim: int, rng=None, prefix: str = "att."):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.k = (prefix + "W", prefix + "b", prefix + "v")
        self.params = {self.k[0]: uniform_init(rng, (att_dim, dim), dim),
                       self.k[1]: uniform_init(rng, (att_dim,), dim),
                       self.k[2]: uniform_init(rng, (att_dim,), att_dim)}

    def forward(self, V, params=None):
        V = np.asarray(V, dtype=float)
        if V.ndim == 2:
            V = V[None]
        if V.shape[1] == 0:
            raise ValueError("attention needs at least one input vector")
        p = params or self.params
        W, b, v = (p[k] for k in self.k)
        s = np.tanh(V @ W.T + b)
        w = softmax(s @ v, axis=1)
        m = (w[:, None, :] @ V)[:, 0]
        return m, w, (V, s, w, W, v)

    def backward(self, cache, dm):
        V, s, w, W, v = cache
        dV = w[..., None] * dm[:, None, :]
        dw = (V @ dm[:, :, None])[..., 0]
        de = w * (dw - (w * dw).sum(axis=1, keepdims=True))
        a = s.shape[-1]
        dv = de.reshape(1, -1) @ s.reshape(-1, a)
        dpre = s * s
        np.subtract(1.0, dpre, out=dpre)
        dpre *= v
        dpre *= de[..., None]
        flat = dpre.reshape(-1, a)
        dW = flat.T @ V.reshape(-1, V.shape[-1])
        db = np.ones(len(flat)) @ flat
        dV += dpre @ W
        return dV, dict(zip(self.k, (dW, db, dv[0])))


class StateEncoder:
    """Window of observation vectors (B, W, D) -> estimated internal state (B, hidden).

    Each observation goes through the convolution (features become D positions
    with ``channels`` values each), attention pools the positions into a context
    vector, and the LSTM consumes the contexts oldest-first starting from zero
    states. The final hidden state is the output.
    """

    def __init__(self, obs_dim: int, hidden: int = 64, channels: int = 4, att_dim: int = 4,
                 rng=None, prefix: str = "enc."):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.obs_dim = obs_dim
        self.hidden = hidden
        self.conv = Conv1D(channels, rng, prefix + "conv.")
        self.att = AdditiveAttention(channels, att_dim, rng, prefix + "att.")
        self.lstm = LSTM(channels, hidden, rng, prefix + "lstm.")
        self.params = merge(self.conv.params, self.att.params, self.lstm.params)

    @staticmethod
    def pad_window(observations, window: int, obs_dim: int) -> np.ndarray:
        """Left-pad a short history with zero observations (their validity flag is 0)."""
        obs = list(observations)[-window:]
        pad = [np.zeros(obs_dim)] * (window - len(obs))
        return np.stack(pad + obs)

    def forward(self, windows, params=None):
        p = params or self.params
        windows = np.asarray(windows, dtype=float)
        if windows.ndim == 2:
            windows = windows[None]
        B, W, D = windows.shape
        if D != self.obs_dim:
            raise ValueError(f"observation width {D} != {self.obs_dim}")
        feats, c_conv = self.conv.forward(windows.reshape(B * W, D), p)
        ctx, _, c_att = self.att.forward(feats, p)
        xs = ctx.reshape(B, W, -1).transpose(1, 0, 2)
        hs, _, c_lstm = self.lstm.forward(xs, p)
        return hs[-1], (B, W, D, c_conv, c_att, c_lstm)

    def backward(self, cache, dh):
        """Gradient of the parameters given dL/d(output); the windows are data."""
        B, W, D, c_conv, c_att, c_lstm = cache
        dxs, g_lstm, _, _ = self.lstm.backward(c_lstm, dh_last=dh)
        dctx = dxs.transpose(1, 0, 2).reshape(B * W, -1)
        dfeats, g_att = self.att.backward(c_att, dctx)
        _, g_conv = self.conv.backward(c_conv, dfeats)
        return merge(g_conv, g_att, g_lstm)
