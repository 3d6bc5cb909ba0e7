"""LSTM with backpropagation through time, and a bidirectional tanh RNN scanned
over the agent axis."""

from __future__ import annotations

import numpy as np

from .core import sigmoid, uniform_init


def lstm_step(x, h_prev, c_prev, Wx, Wh, b):
    """One LSTM step, gate order (input, forget, output, candidate).

    Returns (h, c, cache)."""
    H = h_prev.shape[-1]
    z = x @ Wx.T + h_prev @ Wh.T + b
    i = sigmoid(z[..., :H])
    f = sigmoid(z[..., H:2 * H])
    o = sigmoid(z[..., 2 * H:3 * H])
    g = np.tanh(z[..., 3 * H:])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    return h, c, (x, h_prev, c_prev, i, f, o, g, tc)


def lstm_step_backward(cache, dh, dc, Wx, Wh):
    x, h_prev, c_prev, i, f, o, g, tc = cache
    do = dh * tc
    dc = dc + dh * o * (1.0 - tc * tc)
    di = dc * g
    dg = dc * i
    df = dc * c_prev
    dc_prev = dc * f
    dz = np.concatenate([di * i * (1 - i), df * f * (1 - f), do * o * (1 - o), dg * (1 - g * g)], axis=-1)
    dWx = dz.T @ x
    dWh = dz.T @ h_prev
    db = dz.sum(axis=0)
    return dz @ Wx, dz @ Wh, dc_prev, dWx, dWh, db


class LSTM:
    def __init__(self, n_in: int, hidden: int, rng=None, prefix: str = "lstm."):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.hidden = hidden
        self.k = (prefix + "Wx", prefix + "Wh", prefix + "b")
        fan = n_in + hidden
        self.params = {self.k[0]: uniform_init(rng, (4 * hidden, n_in), fan),
                       self.k[1]: uniform_init(rng, (4 * hidden, hidden), fan),
                       self.k[2]: uniform_init(rng, (4 * hidden,), fan)}

    def forward(self, xs, params=None, h0=None, c0=None):
        """xs: (T, B, n_in). Returns (hs (T, B, H), c_T, cache); zero initial states by default."""
        p = params or self.params
        Wx, Wh, b = (p[k] for k in self.k)
        T, B = xs.shape[:2]
        h = np.zeros((B, self.hidden)) if h0 is None else h0
        c = np.zeros((B, self.hidden)) if c0 is None else c0
        hs = np.empty((T, B, self.hidden))
        caches = []
        for t in range(T):
            h, c, cache = lstm_step(xs[t], h, c, Wx, Wh, b)
            hs[t] = h
            caches.append(cache)
        return hs, c, (caches, Wx, Wh)

    def backward(self, cache, dhs=None, dh_last=None, dc_last=None):
        """BPTT. ``dhs`` holds gradients on every hidden output (T, B, H);
        ``dh_last``/``dc_last`` add gradients on the final states.
        Returns (dxs, grads, dh0, dc0)."""
        caches, Wx, Wh = cache
        T = len(caches)
        B = caches[0][0].shape[0]
        H = self.hidden
        dh = np.zeros((B, H)) if dh_last is None else dh_last.copy()
        dc = np.zeros((B, H)) if dc_last is None else dc_last.copy()
        gWx, gWh, gb = np.zeros_like(Wx), np.zeros_like(Wh), np.zeros(4 * H)
        dxs = np.empty((T, B, Wx.shape[1]))
        for t in reversed(range(T)):
            if dhs is not None:
                dh = dh + dhs[t]
            dx, dh, dc, dWx, dWh, db = lstm_step_backward(caches[t], dh, dc, Wx, Wh)
            dxs[t] = dx
            gWx += dWx
            gWh += dWh
            gb += db
        return dxs, dict(zip(self.k, (gWx, gWh, gb))), dh, dc


class BRNN:
    """Bidirectional recurrence over the agent axis with parameters shared across
    positions. Input (B, N, n_in) -> output (B, N, 2 * hidden): forward-scan state
    (agents 1..N) concatenated with backward-scan state (agents N..1)."""

    def __init__(self, n_in: int, hidden: int, rng=None, prefix: str = "brnn."):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.hidden = hidden
        fan = n_in + hidden
        self.params = {}
        for d in ("f", "b"):
            self.params[f"{prefix}{d}Wx"] = uniform_init(rng, (hidden, n_in), fan)
            self.params[f"{prefix}{d}Wh"] = uniform_init(rng, (hidden, hidden), fan)
            self.params[f"{prefix}{d}b"] = uniform_init(rng, (hidden,), fan)
        self.prefix = prefix

    def _keys(self, d):
        p = self.prefix
        return f"{p}{d}Wx", f"{p}{d}Wh", f"{p}{d}b"

    def _scan(self, X, Wx, Wh, b, order):
        B, N, _ = X.shape
        hs = np.zeros((B, N, self.hidden))
        h = np.zeros((B, self.hidden))
        for n in order:
            h = np.tanh(X[:, n] @ Wx.T + h @ Wh.T + b)
            hs[:, n] = h
        return hs

    def forward(self, X, params=None):
        p = params or self.params
        N = X.shape[1]
        fwd = self._scan(X, *(p[k] for k in self._keys("f")), range(N))
        bwd = self._scan(X, *(p[k] for k in self._keys("b")), range(N - 1, -1, -1))
        return np.concatenate([fwd, bwd], axis=-1), (X, fwd, bwd, p)

    def _scan_backward(self, X, hs, dhs, Wx, Wh, order):
        B, N, _ = X.shape
        dX = np.zeros_like(X)
        gWx, gWh, gb = np.zeros_like(Wx), np.zeros_like(Wh), np.zeros(Wx.shape[0])
        carry = np.zeros((B, self.hidden))
        order = list(order)
        for step in reversed(range(len(order))):
            n = order[step]
            dz = (dhs[:, n] + carry) * (1.0 - hs[:, n] ** 2)
            prev = hs[:, order[step - 1]] if step > 0 else np.zeros((B, self.hidden))
            gWx += dz.T @ X[:, n]
            gWh += dz.T @ prev
            gb += dz.sum(axis=0)
            dX[:, n] += dz @ Wx
            carry = dz @ Wh
        return dX, gWx, gWh, gb

    def backward(self, cache, dout):
        X, fwd, bwd, p = cache
        H = self.hidden
        N = X.shape[1]
        grads = {}
        kf, kb = self._keys("f"), self._keys("b")
        dXf, *gf = self._scan_backward(X, fwd, dout[..., :H], p[kf[0]], p[kf[1]], range(N))
        dXb, *gb = self._scan_backward(X, bwd, dout[..., H:], p[kb[0]], p[kb[1]], range(N - 1, -1, -1))
        grads.update(zip(kf, gf))
        grads.update(zip(kb, gb))
        return dXf + dXb, grads
