"""Feed-forward ReLU regressor: parameters are ``[W1, b1, ..., W_out, b_out]``
with ``W`` of shape (fan_in, fan_out)."""

from __future__ import annotations

import numpy as np


def layer_sizes(input_dim: int, n: int, l: int, output_dim: int) -> list[int]:
    return [input_dim] + [n] * l + [output_dim]


def init_params(input_dim: int, n: int, l: int, output_dim: int, rng: np.random.Generator) -> list[np.ndarray]:
    """He-uniform weights, zero biases."""
    sizes = layer_sizes(input_dim, n, l, output_dim)
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / fan_in)
        params.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        params.append(np.zeros(fan_out))
    return params


def param_names(l: int) -> list[str]:
    names = []
    for k in range(l + 1):
        tag = "out" if k == l else f"h{k + 1}"
        names += [f"{tag}.W", f"{tag}.b"]
    return names


def forward(params, x: np.ndarray) -> np.ndarray:
    h = x
    n_layers = len(params) // 2
    for k in range(n_layers - 1):
        h = np.maximum(h @ params[2 * k] + params[2 * k + 1], 0.0)
    return h @ params[-2] + params[-1]


def loss_and_grads(params, x: np.ndarray, y: np.ndarray) -> tuple[float, list[np.ndarray]]:
    """Mean squared error over all batch entries and outputs, with its gradient."""
    n_layers = len(params) // 2
    acts = [x]
    h = x
    for k in range(n_layers - 1):
        h = np.maximum(h @ params[2 * k] + params[2 * k + 1], 0.0)
        acts.append(h)
    out = h @ params[-2] + params[-1]
    diff = out - y
    loss = float(np.mean(diff * diff))

    grads = [None] * len(params)
    delta = (2.0 / diff.size) * diff
    for k in range(n_layers - 1, -1, -1):
        grads[2 * k] = acts[k].T @ delta
        grads[2 * k + 1] = delta.sum(axis=0)
        if k > 0:
            # subgradient of ReLU at 0 is 0
            delta = (delta @ params[2 * k].T) * (acts[k] > 0.0)
    return loss, grads
