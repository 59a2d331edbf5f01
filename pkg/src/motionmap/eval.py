"""Metrics, architecture sweeps and reduced-input retraining experiments."""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .analysis.pca import PcaModel, pca_fit, pca_transform
from .dataset import OUTPUT_NAMES, Dataset, NormParams, pad_history, window, window_split
from .neural.model import NetworkConfig, TrainedModel, init_network, predict, train

log = logging.getLogger(__name__)

DEFAULT_NEURONS = (5, 10, 20, 40, 80)
DEFAULT_LAYERS = (1, 2, 3, 4)


@dataclass(frozen=True)
class SetMetrics:
    mse: float  # normalized scale, mean over all entries
    rmse: np.ndarray  # per channel, degrees
    r2: float  # uniform average over channels
    r2_channels: np.ndarray
    n_samples: int

    def to_dict(self) -> dict:
        return {
            "mse": self.mse,
            "rmse_deg": dict(zip(OUTPUT_NAMES, self.rmse.tolist())),
            "r2": self.r2,
            "r2_channels": dict(zip(OUTPUT_NAMES, self.r2_channels.tolist())),
            "n_samples": self.n_samples,
        }


@dataclass(frozen=True)
class MetricsReport:
    test: SetMetrics
    train: Optional[SetMetrics] = None
    batch_time: float = 0.0  # seconds to predict the whole test set
    sample_time: float = 0.0  # batch_time / n_test

    def to_dict(self, timing: bool = True) -> dict:
        out = {"test": self.test.to_dict(), "train": self.train.to_dict() if self.train else None}
        if timing:
            out["predict_time_batch_s"] = self.batch_time
            out["predict_time_per_sample_s"] = self.sample_time
        return out


def r2_score(y_true: np.ndarray, y_pred: np.ndarray) -> np.ndarray:
    """Per-column 1 - SSE/SST. A constant column scores 1 if matched exactly, else 0."""
    sse = np.sum((y_true - y_pred) ** 2, axis=0)
    sst = np.sum((y_true - y_true.mean(axis=0)) ** 2, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = 1.0 - sse / sst
    return np.where(sst > 0, r2, np.where(sse == 0, 1.0, 0.0))


def set_metrics(pred: np.ndarray, target: np.ndarray, norm: NormParams) -> SetMetrics:
    """Metrics for normalized-scale predictions; RMSE is taken after unscaling."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape or pred.ndim != 2:
        raise ValueError(f"prediction shape {pred.shape} does not match target shape {target.shape}")
    resid = pred - target
    deg = norm.unscale_y(pred) - norm.unscale_y(target)
    r2c = r2_score(target, pred)
    return SetMetrics(
        mse=float(np.mean(resid**2)),
        rmse=np.sqrt(np.mean(deg**2, axis=0)),
        r2=float(r2c.mean()),
        r2_channels=r2c,
        n_samples=target.shape[0],
    )


def _same_norm(a: NormParams, b: NormParams) -> bool:
    return all(
        getattr(a, k).shape == getattr(b, k).shape and np.allclose(getattr(a, k), getattr(b, k), rtol=1e-12, atol=1e-12)
        for k in ("x_min", "x_max", "y_min", "y_max")
    )


def network_inputs(model: TrainedModel, test: Dataset, train: Optional[Dataset] = None):
    """Arrays the model consumes for ``test`` (and ``train``), plus matching targets.

    LSTM test windows take their history from the end of ``train`` when it is
    given, otherwise the first frame is repeated.
    """
    if model.config.architecture != "lstm":
        te = (test.inputs, test.targets)
        tr = (train.inputs, train.targets) if train is not None else None
        return te, tr
    L = model.config.window_length
    if train is not None:
        trw, tew = window_split(train, test, L)
        return (tew.windows, tew.targets), (trw.windows, trw.targets)
    return (pad_history(test.inputs, L), test.targets), None


def metrics(model: TrainedModel, test: Dataset, train: Optional[Dataset] = None) -> MetricsReport:
    """Score ``model`` on normalized datasets that share the model's NormParams."""
    for d in (test, train):
        if d is None:
            continue
        if not d.normalized or d.norm is None:
            raise ValueError("metrics expects normalized datasets")
        if model.norm is not None and not _same_norm(model.norm, d.norm):
            raise ValueError("dataset normalization does not match the model's NormParams")
    norm = test.norm
    (xte, yte), tr = network_inputs(model, test, train)
    t0 = time.perf_counter()
    pte = predict(model, xte)
    batch = time.perf_counter() - t0
    train_m = set_metrics(predict(model, tr[0]), tr[1], norm) if tr is not None else None
    return MetricsReport(set_metrics(pte, yte, norm), train_m, batch, batch / max(len(yte), 1))


def fit_and_score(cfg: NetworkConfig, train_set: Dataset, test_set: Dataset) -> tuple[TrainedModel, MetricsReport]:
    model = train(init_network(cfg), train_set, test_set)
    return model, metrics(model, test_set, train_set)


# --- sweep -----------------------------------------------------------------


@dataclass(frozen=True)
class SweepEntry:
    architecture: str
    neurons: int
    layers: int
    test_mse: Optional[float]
    train_time: Optional[float]
    status: str = "ok"
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass(frozen=True)
class SweepReport:
    entries: tuple
    base: NetworkConfig = field(default_factory=NetworkConfig)

    def get(self, architecture: str, neurons: int, layers: int) -> SweepEntry:
        for e in self.entries:
            if (e.architecture, e.neurons, e.layers) == (architecture, neurons, layers):
                return e
        raise KeyError((architecture, neurons, layers))

    def to_dict(self, timing: bool = True) -> dict:
        rows = []
        for e in self.entries:
            d = asdict(e)
            if not timing:
                d.pop("train_time")
            rows.append(d)
        return {"base_config": asdict(self.base), "entries": rows}

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing))

    def to_csv(self, timing: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ["architecture", "neurons", "layers", "test_mse"] + (["train_time"] if timing else []) + ["status"]
        w.writerow(cols)
        for e in self.entries:
            w.writerow([repr(v) if isinstance(v, float) else ("" if v is None else v) for v in (getattr(e, c) for c in cols)])
        return buf.getvalue()

    def table(self) -> str:
        lines = [f"{'arch':<5} {'n':>4} {'l':>3} {'test_mse':>12} {'time_s':>9}  status"]
        for e in self.entries:
            mse = f"{e.test_mse:12.6g}" if e.test_mse is not None else f"{'-':>12}"
            tt = f"{e.train_time:9.2f}" if e.train_time is not None else f"{'-':>9}"
            lines.append(f"{e.architecture:<5} {e.neurons:>4} {e.layers:>3} {mse} {tt}  {e.status}")
        return "\n".join(lines)


def _sweep_cell(args) -> SweepEntry:
    cfg, train_set, test_set = args
    try:
        model = train(init_network(cfg), train_set, test_set)
        (xte, yte), _ = network_inputs(model, test_set, train_set)
        pred = predict(model, xte)
        mse = float(np.mean((pred - yte) ** 2))
        if not np.isfinite(mse):
            raise FloatingPointError("non-finite test MSE")
        return SweepEntry(cfg.architecture, cfg.neurons, cfg.hidden_layers, mse, model.train_time)
    except Exception as exc:  # a failed cell must not abort the sweep
        log.warning("sweep cell %s n=%d l=%d failed: %s", cfg.architecture, cfg.neurons, cfg.hidden_layers, exc)
        return SweepEntry(cfg.architecture, cfg.neurons, cfg.hidden_layers, None, None, "failed", str(exc))


def sweep(
    train_set: Dataset,
    test_set: Dataset,
    base: NetworkConfig = NetworkConfig(),
    neurons: Sequence[int] = DEFAULT_NEURONS,
    layers: Sequence[int] = DEFAULT_LAYERS,
    architectures: Sequence[str] = ("dfnn",),
    jobs: int = 1,
) -> SweepReport:
    """Train one model per (architecture, n, l) cell with the base seed and data.

    Cells are independent, so ``jobs > 1`` runs them in worker processes; the
    result does not depend on ``jobs``.
    """
    if not neurons or not layers or not architectures:
        raise ValueError("sweep grid is empty")
    cells = []
    for arch in architectures:
        for n in neurons:
            for l in layers:
                cfg = replace(base, architecture=arch, neurons=int(n), hidden_layers=int(l),
                              hidden_activation="tanh" if arch == "lstm" else "relu",
                              input_dim=train_set.inputs.shape[1])
                cells.append((cfg, train_set, test_set))
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            entries = list(ex.map(_sweep_cell, cells))
    else:
        entries = [_sweep_cell(c) for c in cells]
    return SweepReport(tuple(entries), base)


# --- retraining experiments ------------------------------------------------


def _as_arch(cfg: NetworkConfig, arch: str, input_dim: int) -> NetworkConfig:
    return replace(cfg, architecture=arch, input_dim=input_dim,
                   hidden_activation="tanh" if arch == "lstm" else "relu")


def paired_configs(base: NetworkConfig, lstm_layers: int = 1, lstm_neurons: Optional[int] = None):
    """DFNN and LSTM configs sharing everything but the architecture fields."""
    dfnn = _as_arch(base, "dfnn", base.input_dim)
    lstm = replace(_as_arch(base, "lstm", base.input_dim), hidden_layers=lstm_layers,
                   neurons=lstm_neurons or base.neurons)
    return dfnn, lstm


def reduced_input_experiment(
    train_set: Dataset,
    test_set: Dataset,
    top_features: Sequence[int],
    dfnn_cfg: NetworkConfig,
    lstm_cfg: NetworkConfig,
) -> tuple[MetricsReport, MetricsReport]:
    """Retrain both architectures on the selected input columns only."""
    idx = [int(i) for i in top_features]
    if not idx:
        raise ValueError("top_features is empty")
    tr, te = train_set.select_features(idx), test_set.select_features(idx)
    out = []
    for cfg in (dfnn_cfg, lstm_cfg):
        _, rep = fit_and_score(replace(cfg, input_dim=len(idx)), tr, te)
        out.append(rep)
    return out[0], out[1]


def pca_datasets(train_set: Dataset, test_set: Dataset, k: int) -> tuple[Dataset, Dataset, PcaModel]:
    """Project both sets onto the training-set principal components.

    Scores are used as network inputs unscaled (inputs are already normalized
    before projection), so the attached NormParams carry an identity x-map.
    """
    if not train_set.normalized or not test_set.normalized:
        raise ValueError("PCA experiment expects normalized datasets")
    model = pca_fit(train_set.inputs, k)
    norm = NormParams(np.zeros(k), np.ones(k), train_set.norm.y_min, train_set.norm.y_max)
    names = tuple(f"pc{i + 1}" for i in range(k))

    def proj(d: Dataset) -> Dataset:
        return replace(d, inputs=pca_transform(model, d.inputs), norm=norm, feature_names=names)

    return proj(train_set), proj(test_set), model


def pca_experiment(
    train_set: Dataset,
    test_set: Dataset,
    k: int,
    dfnn_cfg: NetworkConfig,
    lstm_cfg: NetworkConfig,
) -> tuple[MetricsReport, MetricsReport]:
    tr, te, _ = pca_datasets(train_set, test_set, k)
    out = []
    for cfg in (dfnn_cfg, lstm_cfg):
        _, rep = fit_and_score(replace(cfg, input_dim=k), tr, te)
        out.append(rep)
    return out[0], out[1]


__all__ = [
    "MetricsReport",
    "SetMetrics",
    "SweepEntry",
    "SweepReport",
    "fit_and_score",
    "metrics",
    "network_inputs",
    "paired_configs",
    "pca_datasets",
    "pca_experiment",
    "r2_score",
    "reduced_input_experiment",
    "set_metrics",
    "sweep",
]
