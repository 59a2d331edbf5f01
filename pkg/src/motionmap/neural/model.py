"""Network configuration, training loop and model persistence."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

import numpy as np

from ..dataset import DEFAULT_WINDOW, Dataset, NormParams, SequenceSet, window_split
from . import dfnn, lstm
from .adam import AdamState, adam_update

log = logging.getLogger(__name__)

MODEL_FORMAT = "motionmap-model"
MODEL_VERSION = 1
ARCHITECTURES = ("dfnn", "lstm")


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class NetworkConfig:
    architecture: str = "dfnn"
    hidden_layers: int = 2
    neurons: int = 20
    input_dim: int = 15
    output_dim: int = 4
    epochs: int = 200
    loss: str = "mse"
    hidden_activation: str = "relu"
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    decay: float = 0.0
    epsilon: float = 1e-8
    batch_size: int = 32
    seed: int = 0
    window_length: int = DEFAULT_WINDOW

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}")
        for name in ("hidden_layers", "neurons", "input_dim", "output_dim", "batch_size", "window_length"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.loss != "mse":
            raise ValueError("only the mse loss is supported")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("Adam betas must lie in [0, 1)")
        if self.learning_rate < 0 or self.epsilon <= 0 or self.decay < 0:
            raise ValueError("learning_rate/decay must be >= 0 and epsilon > 0")
        if self.architecture == "lstm" and self.hidden_activation == "relu":
            object.__setattr__(self, "hidden_activation", "tanh")

    @classmethod
    def from_dict(cls, obj: dict) -> "NetworkConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in obj.items() if k in known})


@dataclass
class TrainedModel:
    config: NetworkConfig
    params: list
    norm: Optional[NormParams] = None
    history: dict = field(default_factory=lambda: {"train_mse": [], "test_mse": []})
    train_time: float = 0.0

    @property
    def kernel(self):
        return lstm if self.config.architecture == "lstm" else dfnn

    @property
    def param_names(self) -> list[str]:
        return self.kernel.param_names(self.config.hidden_layers)

    def n_params(self) -> int:
        return int(sum(p.size for p in self.params))

    def copy(self) -> "TrainedModel":
        return replace(
            self,
            params=[p.copy() for p in self.params],
            history={k: list(v) for k, v in self.history.items()},
        )


def _rngs(seed: int):
    init_ss, shuffle_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(init_ss), np.random.default_rng(shuffle_ss)


def init_network(cfg: NetworkConfig) -> TrainedModel:
    init_rng, _ = _rngs(cfg.seed)
    kernel = lstm if cfg.architecture == "lstm" else dfnn
    params = kernel.init_params(cfg.input_dim, cfg.neurons, cfg.hidden_layers, cfg.output_dim, init_rng)
    return TrainedModel(cfg, params)


def _check_input(model: TrainedModel, x: np.ndarray) -> None:
    cfg = model.config
    if x.shape[-1] != cfg.input_dim:
        raise ValueError(f"input has {x.shape[-1]} features, model expects {cfg.input_dim}")
    if cfg.architecture == "lstm" and x.ndim != 3:
        raise ValueError("LSTM input must be windows of shape (batch, length, features)")
    if cfg.architecture == "dfnn" and x.ndim != 2:
        raise ValueError("DFNN input must have shape (batch, features)")


def forward(model: TrainedModel, x) -> np.ndarray:
    """Normalized-scale prediction for one input (vector / window) or a batch."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == (2 if model.config.architecture == "lstm" else 1)
    if single:
        x = x[None]
    _check_input(model, x)
    out = model.kernel.forward(model.params, x)
    return out[0] if single else out


def loss_and_grads(model: TrainedModel, x, y):
    x = np.asarray(x, dtype=float)
    _check_input(model, x)
    return model.kernel.loss_and_grads(model.params, x, np.asarray(y, dtype=float))


def _batched_mse(model: TrainedModel, x: np.ndarray, y: np.ndarray, chunk: int = 4096) -> float:
    sse = 0.0
    for s in range(0, x.shape[0], chunk):
        d = model.kernel.forward(model.params, x[s : s + chunk]) - y[s : s + chunk]
        sse += float(np.sum(d * d))
    return sse / y.size


def training_arrays(cfg: NetworkConfig, train: Dataset, test: Optional[Dataset]):
    """Network-ready (x, y) pairs; LSTM sets become sliding windows."""
    if cfg.architecture == "lstm":
        if test is None:
            from ..dataset import window

            tr = window(train, cfg.window_length)
            return (tr.windows, tr.targets), None
        tr, te = window_split(train, test, cfg.window_length)
        return (tr.windows, tr.targets), (te.windows, te.targets)
    te = (test.inputs, test.targets) if test is not None else None
    return (train.inputs, train.targets), te


def train(
    model: TrainedModel,
    train_set: Dataset,
    test_set: Optional[Dataset] = None,
    cfg: Optional[NetworkConfig] = None,
) -> TrainedModel:
    """Mini-batch Adam on MSE for exactly ``cfg.epochs`` epochs; returns a new model.

    Batches are drawn from a seeded permutation each epoch, so identical seeds
    give identical weights. History holds per-epoch train/test MSE on the
    normalized scale.
    """
    cfg = model.config if cfg is None else cfg
    if not train_set.normalized or (test_set is not None and not test_set.normalized):
        raise ValueError("training expects normalized datasets")
    if train_set.inputs.shape[1] != cfg.input_dim or train_set.targets.shape[1] != cfg.output_dim:
        raise ValueError(
            f"dataset shape ({train_set.inputs.shape[1]} in, {train_set.targets.shape[1]} out) does not match config"
        )
    (xtr, ytr), te = training_arrays(cfg, train_set, test_set)

    out = model.copy()
    out.config = cfg
    out.norm = train_set.norm
    params = out.params
    state = AdamState.zeros_like(params)
    _, shuffle_rng = _rngs(cfg.seed)
    kernel = out.kernel
    n = xtr.shape[0]
    t0 = time.perf_counter()
    for epoch in range(1, cfg.epochs + 1):
        order = shuffle_rng.permutation(n)
        for s in range(0, n, cfg.batch_size):
            idx = order[s : s + cfg.batch_size]
            loss, grads = kernel.loss_and_grads(params, xtr[idx], ytr[idx])
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}")
            adam_update(params, grads, state, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon, cfg.decay)
        tr_mse = _batched_mse(out, xtr, ytr)
        if not np.isfinite(tr_mse):
            raise TrainingError(f"non-finite training MSE at epoch {epoch}")
        out.history["train_mse"].append(tr_mse)
        if te is not None:
            out.history["test_mse"].append(_batched_mse(out, *te))
        if epoch % 50 == 0 or epoch == cfg.epochs:
            log.debug("epoch %d train mse %.6g", epoch, tr_mse)
    out.train_time = time.perf_counter() - t0
    return out


def predict(model: TrainedModel, x: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Batch prediction on network-ready arrays (normalized scale)."""
    x = np.asarray(x, dtype=float)
    _check_input(model, x)
    parts = [model.kernel.forward(model.params, x[s : s + chunk]) for s in range(0, x.shape[0], chunk)]
    return np.concatenate(parts) if parts else np.zeros((0, model.config.output_dim))


def model_to_dict(model: TrainedModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "config": asdict(model.config),
        "norm": model.norm.to_dict() if model.norm is not None else None,
        "params": [
            {"name": name, "shape": list(p.shape), "data": p.ravel().tolist()}
            for name, p in zip(model.param_names, model.params)
        ],
        "history": model.history,
    }


def model_from_dict(obj: dict) -> TrainedModel:
    if obj.get("format") != MODEL_FORMAT:
        raise ValueError("not a motionmap model file")
    if obj.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {obj.get('version')!r}")
    cfg = NetworkConfig.from_dict(obj["config"])
    params = [np.asarray(p["data"], dtype=float).reshape(p["shape"]) for p in obj["params"]]
    ref = init_network(cfg)
    if [p.shape for p in params] != [p.shape for p in ref.params]:
        raise ValueError("weight shapes do not match the stored configuration")
    norm = NormParams.from_dict(obj["norm"]) if obj.get("norm") else None
    history = obj.get("history") or {"train_mse": [], "test_mse": []}
    return TrainedModel(cfg, params, norm, history)


def save_model(model: TrainedModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh)
        fh.write("\n")


def load_model(path) -> TrainedModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))
