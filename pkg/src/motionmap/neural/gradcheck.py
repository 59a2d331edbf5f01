from __future__ import annotations

import numpy as np

from .model import TrainedModel, loss_and_grads

FD_STEP = 1e-5
# gradients whose combined magnitude is below this are compared absolutely
ABS_FLOOR = 1e-6


def numeric_gradient(model: TrainedModel, x, y, step: float = FD_STEP) -> list[np.ndarray]:
    """Central finite differences of the MSE loss w.r.t. every parameter."""
    kernel = model.kernel
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    params = [p.copy() for p in model.params]
    num = []
    for p in params:
        g = np.zeros_like(p)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up, _ = kernel.loss_and_grads(params, x, y)
            flat[i] = orig - step
            down, _ = kernel.loss_and_grads(params, x, y)
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * step)
        num.append(g)
    return num


def gradient_check(model: TrainedModel, x, y, step: float = FD_STEP) -> float:
    """Max relative error ``|a - n| / max(|a| + |n|, 1e-6)`` over all parameters."""
    if model.n_params() > 5000:
        raise ValueError("gradient_check is meant for small models")
    _, analytic = loss_and_grads(model, x, y)
    numeric = numeric_gradient(model, x, y, step)
    worst = 0.0
    for a, n in zip(analytic, numeric):
        rel = np.abs(a - n) / np.maximum(np.abs(a) + np.abs(n), ABS_FLOOR)
        worst = max(worst, float(rel.max()))
    return worst
