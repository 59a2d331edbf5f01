"""Supervised datasets: 15 joint angles in, 4 tool-state channels out."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .quat import JOINT_NAMES
from .sensor_io import AlignedRecord, read_records, write_records

OUTPUT_NAMES = ("phi", "theta", "psi", "jaw")
DEFAULT_WINDOW = 16


@dataclass(frozen=True)
class NormParams:
    """Per-column min/max used for [0, 1] scaling of inputs and targets."""

    x_min: np.ndarray
    x_max: np.ndarray
    y_min: np.ndarray
    y_max: np.ndarray

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("x_min", "x_max", "y_min", "y_max")}

    @classmethod
    def from_dict(cls, obj: dict) -> "NormParams":
        return cls(*(np.asarray(obj[k], dtype=float) for k in ("x_min", "x_max", "y_min", "y_max")))

    def select_inputs(self, idx: Sequence[int]) -> "NormParams":
        idx = list(idx)
        return replace(self, x_min=self.x_min[idx], x_max=self.x_max[idx])

    def scale_x(self, x):
        return (np.asarray(x, dtype=float) - self.x_min) / (self.x_max - self.x_min)

    def scale_y(self, y):
        return (np.asarray(y, dtype=float) - self.y_min) / (self.y_max - self.y_min)

    def unscale_x(self, x):
        return np.asarray(x, dtype=float) * (self.x_max - self.x_min) + self.x_min

    def unscale_y(self, y):
        return np.asarray(y, dtype=float) * (self.y_max - self.y_min) + self.y_min


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray  # (N, n_features)
    targets: np.ndarray  # (N, 4)
    normalized: bool = False
    norm: Optional[NormParams] = None
    timestamps: Optional[np.ndarray] = None
    feature_names: tuple = JOINT_NAMES

    def __post_init__(self):
        if self.inputs.ndim != 2 or self.targets.ndim != 2:
            raise ValueError("inputs and targets must be 2-D")
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError(f"row count mismatch: {self.inputs.shape[0]} inputs vs {self.targets.shape[0]} targets")
        if len(self.feature_names) != self.inputs.shape[1]:
            raise ValueError("feature_names length must match the input width")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def select_features(self, idx: Sequence[int]) -> "Dataset":
        idx = list(idx)
        if not idx:
            raise ValueError("feature index list is empty")
        norm = self.norm.select_inputs(idx) if self.norm is not None else None
        return replace(
            self,
            inputs=self.inputs[:, idx],
            norm=norm,
            feature_names=tuple(self.feature_names[i] for i in idx),
        )

    def rows(self, sl) -> "Dataset":
        ts = self.timestamps[sl] if self.timestamps is not None else None
        return replace(self, inputs=self.inputs[sl], targets=self.targets[sl], timestamps=ts)


@dataclass(frozen=True)
class SequenceSet:
    windows: np.ndarray  # (M, L, n_features)
    targets: np.ndarray  # (M, 4)
    length: int


def build_dataset(records: Sequence[AlignedRecord]) -> Dataset:
    if not records:
        raise ValueError("cannot build a dataset from zero records")
    x = np.stack([r.joint_angles for r in records]).astype(float)
    y = np.stack([r.tool_state for r in records]).astype(float)
    ts = np.array([r.timestamp for r in records])
    return Dataset(x, y, timestamps=ts)


def fit_norm(d: Dataset) -> NormParams:
    x_min, x_max = d.inputs.min(axis=0), d.inputs.max(axis=0)
    y_min, y_max = d.targets.min(axis=0), d.targets.max(axis=0)
    for names, lo, hi in ((d.feature_names, x_min, x_max), (OUTPUT_NAMES, y_min, y_max)):
        flat = np.flatnonzero(hi <= lo)
        if flat.size:
            raise ValueError(f"column {names[flat[0]]!r} is constant; min-max scaling is degenerate")
    return NormParams(x_min, x_max, y_min, y_max)


def normalize(d: Dataset, params: Optional[NormParams] = None) -> tuple[Dataset, NormParams]:
    """Min-max scale every column; fits the parameters unless ``params`` is given.

    With fitted parameters every entry lands in [0, 1]. Reusing parameters from
    another dataset can leave values slightly outside that range.
    """
    if d.normalized:
        raise ValueError("dataset is already normalized")
    params = fit_norm(d) if params is None else params
    _check_shapes(d, params)
    scaled = replace(
        d, inputs=params.scale_x(d.inputs), targets=params.scale_y(d.targets), normalized=True, norm=params
    )
    return scaled, params


def denormalize(d: Dataset, params: Optional[NormParams] = None) -> Dataset:
    params = d.norm if params is None else params
    if params is None:
        raise ValueError("no normalization parameters available")
    _check_shapes(d, params)
    return replace(
        d, inputs=params.unscale_x(d.inputs), targets=params.unscale_y(d.targets), normalized=False, norm=None
    )


def _check_shapes(d: Dataset, params: NormParams) -> None:
    if params.x_min.shape != (d.inputs.shape[1],) or params.y_min.shape != (d.targets.shape[1],):
        raise ValueError(
            f"normalization parameters ({params.x_min.size} inputs, {params.y_min.size} targets) do not match "
            f"dataset ({d.inputs.shape[1]} inputs, {d.targets.shape[1]} targets)"
        )


def split(d: Dataset, train_fraction: float = 0.8) -> tuple[Dataset, Dataset]:
    """Contiguous split: the first ``ceil(N * f)`` rows train, the rest test."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    n_train = math.ceil(len(d) * train_fraction)
    if n_train == 0 or n_train == len(d):
        raise ValueError(f"split of {len(d)} rows at {train_fraction} leaves an empty partition")
    return d.rows(slice(0, n_train)), d.rows(slice(n_train, None))


def window(d: Dataset, length: int = DEFAULT_WINDOW) -> SequenceSet:
    """Stride-1 sliding windows; each window's target is its last row's target."""
    n = len(d)
    if length < 1:
        raise ValueError("window length must be at least 1")
    if length > n:
        raise ValueError(f"window length {length} exceeds dataset length {n}")
    idx = np.arange(n - length + 1)[:, None] + np.arange(length)[None, :]
    return SequenceSet(d.inputs[idx], d.targets[length - 1 :], length)


def window_split(train: Dataset, test: Dataset, length: int = DEFAULT_WINDOW) -> tuple[SequenceSet, SequenceSet]:
    """Windows for a contiguous train/test pair.

    Test windows borrow the last ``length - 1`` training inputs as history so
    every test row gets a prediction; no training target enters the test set.
    """
    tr = window(train, length)
    ctx = train.inputs[len(train) - (length - 1) :] if length > 1 else train.inputs[:0]
    joined = np.concatenate([ctx, test.inputs])
    idx = np.arange(len(test))[:, None] + np.arange(length)[None, :]
    return tr, SequenceSet(joined[idx], test.targets, length)


def pad_history(x: np.ndarray, length: int) -> np.ndarray:
    """Windows for every row of a standalone sequence, edge-padding the start."""
    if length == 1:
        return x[:, None, :]
    padded = np.concatenate([np.repeat(x[:1], length - 1, axis=0), x])
    idx = np.arange(x.shape[0])[:, None] + np.arange(length)[None, :]
    return padded[idx]


def norm_sidecar(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".norm.json")


def save_dataset(d: Dataset, path, params: Optional[NormParams] = None) -> None:
    """Write degree-scale rows as aligned-record lines plus a NormParams sidecar."""
    if d.normalized:
        d = denormalize(d)
    ts = d.timestamps if d.timestamps is not None else np.arange(len(d), dtype=float)
    write_records((AlignedRecord(float(t), x, y) for t, x, y in zip(ts, d.inputs, d.targets)), path)
    params = params if params is not None else fit_norm(d)
    with open(norm_sidecar(path), "w") as fh:
        json.dump(params.to_dict(), fh)
        fh.write("\n")


def load_dataset(path) -> tuple[Dataset, Optional[NormParams]]:
    d = build_dataset(read_records(path))
    side = norm_sidecar(path)
    params = None
    if side.exists():
        with open(side) as fh:
            params = NormParams.from_dict(json.load(fh))
    return d, params
