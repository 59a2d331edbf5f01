from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray  # (D,)
    components: np.ndarray  # (k, D), orthonormal rows
    explained_variance: np.ndarray  # (k,) eigenvalues, descending
    explained_variance_ratio: np.ndarray  # (k,)

    @property
    def k(self) -> int:
        return self.components.shape[0]

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "explained_variance": self.explained_variance.tolist(),
            "explained_variance_ratio": self.explained_variance_ratio.tolist(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "PcaModel":
        return cls(*(np.asarray(obj[k], dtype=float) for k in
                     ("mean", "components", "explained_variance", "explained_variance_ratio")))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)
            fh.write("\n")


def pca_fit(x, k: int) -> PcaModel:
    """Top-``k`` eigenvectors of the sample covariance (divisor N - 1).

    Each component is signed so that its largest-magnitude entry is positive.
    """
    x = np.asarray(x, dtype=float)
    n, d = x.shape
    if n <= 1:
        raise ValueError("PCA needs at least two samples")
    if not 1 <= k <= d:
        raise ValueError(f"k must be in [1, {d}]")
    if n <= k:
        raise ValueError("PCA needs more samples than components")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / (n - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    comps = evecs[:, order].T
    pivot = np.argmax(np.abs(comps), axis=1)
    comps *= np.sign(comps[np.arange(d), pivot])[:, None]
    total = evals.sum()
    ratio = evals / total if total > 0 else np.zeros_like(evals)
    return PcaModel(mean, comps[:k].copy(), evals[:k].copy(), ratio[:k].copy())


def pca_transform(model: PcaModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.mean.size:
        raise ValueError(f"input has {x.shape[-1]} features, PCA model expects {model.mean.size}")
    return (x - model.mean) @ model.components.T


def pca_inverse(model: PcaModel, z) -> np.ndarray:
    return np.asarray(z, dtype=float) @ model.components + model.mean
