"""Frame-by-frame inference for the streaming use case."""

from __future__ import annotations

from collections import deque
from typing import Iterable, Iterator

import numpy as np

from ..dataset import pad_history
from .model import TrainedModel, predict


class StreamPredictor:
    """Stateful per-stream predictor; one instance per consumer.

    LSTM models keep a rolling window of normalized frames. Until the window
    fills, the first frame is repeated as history, which matches
    :func:`predict_sequence`.
    """

    def __init__(self, model: TrainedModel):
        if model.norm is None:
            raise ValueError("model has no normalization parameters; train it first")
        self.model = model
        self.norm = model.norm
        self._lstm = model.config.architecture == "lstm"
        self._window = deque(maxlen=model.config.window_length)
        kernel = model.kernel
        self._forward = kernel.forward
        self._params = model.params

    def reset(self) -> None:
        self._window.clear()

    def push(self, joint_angles) -> np.ndarray:
        """Degrees in, tool state (roll, pitch, yaw, jaw) in degrees out."""
        x = self.norm.scale_x(joint_angles)
        if x.shape != (self.model.config.input_dim,):
            raise ValueError(f"frame has {x.shape[-1]} features, model expects {self.model.config.input_dim}")
        if self._lstm:
            if not self._window:
                self._window.extend([x] * (self._window.maxlen - 1))
            self._window.append(x)
            inp = np.stack(self._window)[None]
        else:
            inp = x[None]
        return self.norm.unscale_y(self._forward(self._params, inp)[0])


def predict_stream(model: TrainedModel, frames: Iterable) -> Iterator[np.ndarray]:
    sp = StreamPredictor(model)
    for frame in frames:
        yield sp.push(frame)


def predict_sequence(model: TrainedModel, joint_angles: np.ndarray) -> np.ndarray:
    """Offline counterpart of :func:`predict_stream` over a whole (N, D) sequence."""
    if model.norm is None:
        raise ValueError("model has no normalization parameters; train it first")
    x = model.norm.scale_x(joint_angles)
    if model.config.architecture == "lstm":
        x = pad_history(x, model.config.window_length)
    return model.norm.unscale_y(predict(model, x))
