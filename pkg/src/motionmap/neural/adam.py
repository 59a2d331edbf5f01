from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    """First/second moment accumulators mirroring a parameter list."""

    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    step: int = 0

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], 0)


def adam_update(params, grads, state: AdamState, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8, decay=0.0):
    """One in-place Adam step with bias correction and time-based lr decay."""
    state.step += 1
    t = state.step
    lr_t = lr / (1.0 + decay * (t - 1))
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr_t * (m / c1) / (np.sqrt(v / c2) + eps)
