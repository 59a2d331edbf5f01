"""Stacked LSTM regressor with a linear head on the last hidden state.

Per layer: ``W`` of shape (4n, in + n) acting on ``[x_t, h_{t-1}]`` and bias
``b`` (4n,), gate blocks ordered input, forget, candidate, output. Head: ``Wo``
(n, out) and ``bo`` (out,). Windows are processed statelessly (zero initial
state per window).
"""

from __future__ import annotations

import numpy as np


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def init_params(input_dim: int, n: int, l: int, output_dim: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Glorot-uniform kernels, zero biases except forget-gate bias 1."""
    params = []
    d = input_dim
    for _ in range(l):
        lim_x = np.sqrt(6.0 / (d + 4 * n))
        lim_h = np.sqrt(6.0 / (n + 4 * n))
        W = np.concatenate(
            [rng.uniform(-lim_x, lim_x, size=(4 * n, d)), rng.uniform(-lim_h, lim_h, size=(4 * n, n))], axis=1
        )
        b = np.zeros(4 * n)
        b[n : 2 * n] = 1.0
        params += [W, b]
        d = n
    lim = np.sqrt(6.0 / (n + output_dim))
    params += [rng.uniform(-lim, lim, size=(n, output_dim)), np.zeros(output_dim)]
    return params


def param_names(l: int) -> list[str]:
    names = []
    for k in range(l):
        names += [f"lstm{k + 1}.W", f"lstm{k + 1}.b"]
    return names + ["out.W", "out.b"]


def _layer_forward(W, b, xs: np.ndarray, keep: bool):
    """Run one layer over ``xs`` (B, L, D); returns hidden sequence and cache."""
    B, L, D = xs.shape
    n = b.size // 4
    Wx, Wh = W[:, :D], W[:, D:]
    zx = xs @ Wx.T + b
    h = np.zeros((B, n))
    c = np.zeros((B, n))
    hs = np.empty((B, L, n))
    cache = []
    for t in range(L):
        z = zx[:, t] + h @ Wh.T
        i = _sigmoid(z[:, :n])
        f = _sigmoid(z[:, n : 2 * n])
        g = np.tanh(z[:, 2 * n : 3 * n])
        o = _sigmoid(z[:, 3 * n :])
        c_prev, h_prev = c, h
        c = f * c_prev + i * g
        tc = np.tanh(c)
        h = o * tc
        hs[:, t] = h
        if keep:
            cache.append((i, f, g, o, c_prev, h_prev, tc))
    return hs, cache


def forward(params, x: np.ndarray) -> np.ndarray:
    """``x``: (B, L, D) windows -> (B, out)."""
    hs = x
    n_layers = (len(params) - 2) // 2
    for k in range(n_layers):
        hs, _ = _layer_forward(params[2 * k], params[2 * k + 1], hs, keep=False)
    return hs[:, -1] @ params[-2] + params[-1]


def loss_and_grads(params, x: np.ndarray, y: np.ndarray) -> tuple[float, list[np.ndarray]]:
    n_layers = (len(params) - 2) // 2
    inputs, caches = [], []
    hs = x
    for k in range(n_layers):
        inputs.append(hs)
        hs, cache = _layer_forward(params[2 * k], params[2 * k + 1], hs, keep=True)
        caches.append(cache)
    h_last = hs[:, -1]
    out = h_last @ params[-2] + params[-1]
    diff = out - y
    loss = float(np.mean(diff * diff))

    grads = [None] * len(params)
    dy = (2.0 / diff.size) * diff
    grads[-2] = h_last.T @ dy
    grads[-1] = dy.sum(axis=0)

    B, L, _ = x.shape
    dh_seq = np.zeros_like(hs)
    dh_seq[:, -1] = dy @ params[-2].T
    for k in range(n_layers - 1, -1, -1):
        W = params[2 * k]
        xs = inputs[k]
        D = xs.shape[2]
        n = W.shape[0] // 4
        dW = np.zeros_like(W)
        db = np.zeros(4 * n)
        dx_seq = np.empty_like(xs)
        dh_next = np.zeros((B, n))
        dc_next = np.zeros((B, n))
        dz = np.empty((B, 4 * n))
        for t in range(L - 1, -1, -1):
            i, f, g, o, c_prev, h_prev, tc = caches[k][t]
            dh = dh_seq[:, t] + dh_next
            dc = dc_next + dh * o * (1.0 - tc * tc)
            dz[:, :n] = dc * g * i * (1.0 - i)
            dz[:, n : 2 * n] = dc * c_prev * f * (1.0 - f)
            dz[:, 2 * n : 3 * n] = dc * i * (1.0 - g * g)
            dz[:, 3 * n :] = dh * tc * o * (1.0 - o)
            dW[:, :D] += dz.T @ xs[:, t]
            dW[:, D:] += dz.T @ h_prev
            db += dz.sum(axis=0)
            dcat = dz @ W
            dx_seq[:, t] = dcat[:, :D]
            dh_next = dcat[:, D:]
            dc_next = dc * f
        grads[2 * k] = dW
        grads[2 * k + 1] = db
        dh_seq = dx_seq
    return loss, grads
