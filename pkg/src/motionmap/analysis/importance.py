from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from ..dataset import OUTPUT_NAMES, Dataset
from .tree import TreeParams, fit_forest, fit_tree, forest_importance, mdi_importance


@dataclass(frozen=True)
class ImportanceReport:
    """``importances[k]`` is the MDI vector over inputs for output channel ``k``."""

    importances: np.ndarray  # (n_outputs, n_features)
    feature_names: tuple
    output_names: tuple = OUTPUT_NAMES

    def for_output(self, name: str) -> np.ndarray:
        return self.importances[self.output_names.index(name)]

    def ranking(self, output: str) -> list[str]:
        imp = self.for_output(output)
        order = np.argsort(-imp, kind="stable")
        return [self.feature_names[i] for i in order]

    def to_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "output_names": list(self.output_names),
            "importances": {o: self.importances[k].tolist() for k, o in enumerate(self.output_names)},
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ImportanceReport":
        outs = tuple(obj["output_names"])
        imp = np.array([obj["importances"][o] for o in outs])
        return cls(imp, tuple(obj["feature_names"]), outs)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["feature", "output", "importance"])
        for k, out in enumerate(self.output_names):
            for j, feat in enumerate(self.feature_names):
                w.writerow([feat, out, repr(float(self.importances[k, j]))])
        return buf.getvalue()


def importance_report(
    train: Dataset,
    params: TreeParams = TreeParams(),
    forest: bool = False,
    n_trees: int = 25,
    seed: int = 0,
) -> ImportanceReport:
    """One tree (or bagged forest) per output channel, MDI per input feature."""
    if len(train) == 0:
        raise ValueError("empty training set")
    rows = []
    for k in range(train.targets.shape[1]):
        y = train.targets[:, k]
        if forest:
            rows.append(forest_importance(fit_forest(train.inputs, y, n_trees, params, seed + k)))
        else:
            rows.append(mdi_importance(fit_tree(train.inputs, y, params)))
    return ImportanceReport(np.array(rows), tuple(train.feature_names))


def fit_output_tree(train: Dataset, output_index: int, params: TreeParams = TreeParams()):
    if not 0 <= output_index < train.targets.shape[1]:
        raise ValueError(f"output_index {output_index} out of range")
    return fit_tree(train.inputs, train.targets[:, output_index], params)


def top_k_features(report: ImportanceReport, k: int) -> list[int]:
    """Indices of the ``k`` features with the highest mean importance over outputs.

    Equal means are ordered by lower feature index.
    """
    n = report.importances.shape[1]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}]")
    mean = report.importances.mean(axis=0)
    return [int(i) for i in np.argsort(-mean, kind="stable")[:k]]
