"""CART regression tree with variance impurity and Mean Decrease in Impurity."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LEAF = -1
MAX_DEPTH = 12
MIN_SAMPLES_LEAF = 5
# relative gain tolerance used to call two candidate splits a tie
TIE_RTOL = 1e-9


@dataclass(frozen=True)
class TreeParams:
    max_depth: int = MAX_DEPTH
    min_samples_leaf: int = MIN_SAMPLES_LEAF

    def __post_init__(self):
        if self.max_depth < 0 or self.min_samples_leaf < 1:
            raise ValueError("max_depth must be >= 0 and min_samples_leaf >= 1")


@dataclass
class RegressionTree:
    """Flat node arrays; ``feature[i] == LEAF`` marks a leaf.

    ``impurity_decrease[i]`` is the drop in summed squared error produced by
    the split at node ``i`` (zero at leaves). Dividing by ``n_samples[0]`` gives
    the sample-weighted variance decrease.
    """

    n_features: int
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    impurity: np.ndarray  # node variance
    impurity_decrease: np.ndarray
    params: TreeParams = field(default_factory=TreeParams)

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    @property
    def is_leaf_only(self) -> bool:
        return self.n_nodes == 1

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row of ``x``."""
        x = np.asarray(x, dtype=float)
        node = np.zeros(x.shape[0], dtype=np.int64)
        active = self.feature[node] != LEAF
        while np.any(active):
            rows = np.flatnonzero(active)
            nd = node[rows]
            go_left = x[rows, self.feature[nd]] <= self.threshold[nd]
            node[rows] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] != LEAF
        return node

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.value[self.apply(x)]

    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):
            if self.feature[i] != LEAF:
                depths[self.left[i]] = depths[self.right[i]] = depths[i] + 1
        return int(depths.max())


def best_split(x: np.ndarray, y: np.ndarray, min_leaf: int):
    """Best (feature, threshold, gain) by summed-squared-error reduction, or None.

    Thresholds are midpoints between consecutive distinct values. Ties within
    ``TIE_RTOL`` go to the lowest feature index, then the lowest threshold.
    """
    n, d = x.shape
    if n < 2 * min_leaf:
        return None
    yc = y - y.mean()
    sse = float(yc @ yc)
    if sse <= 0.0:
        return None
    tol = TIE_RTOL * sse
    best = None
    sizes = np.arange(1, n)
    valid_size = (sizes >= min_leaf) & (n - sizes >= min_leaf)
    for f in range(d):
        order = np.lexsort((yc, x[:, f]))
        xs = x[order, f]
        ys = yc[order]
        cs = np.cumsum(ys)[:-1]
        cq = np.cumsum(ys * ys)[:-1]
        tot, totq = cs[-1] + ys[-1], cq[-1] + ys[-1] ** 2
        sse_l = cq - cs * cs / sizes
        rs = tot - cs
        sse_r = (totq - cq) - rs * rs / (n - sizes)
        gain = sse - sse_l - sse_r
        ok = valid_size & (xs[1:] > xs[:-1])
        if not np.any(ok):
            continue
        g = np.where(ok, gain, -np.inf)
        gmax = g.max()
        pos = int(np.flatnonzero(g >= gmax - tol)[0])
        if best is None or g[pos] > best[2] + tol:
            thr = 0.5 * (xs[pos] + xs[pos + 1])
            # guard against the midpoint rounding onto the upper value
            if not thr < xs[pos + 1]:
                thr = xs[pos]
            best = (f, float(thr), float(g[pos]))
    if best is None or best[2] <= tol:
        return None
    return best


def fit_tree(x, y, params: TreeParams = TreeParams()) -> RegressionTree:
    """Greedy CART on a single target column."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
        raise ValueError("fit_tree expects x (N, D) and y (N,)")
    if x.shape[0] == 0:
        raise ValueError("cannot fit a tree on zero samples")
    feature, threshold, left, right, value, count, imp, dec = [], [], [], [], [], [], [], []

    def new_node(idx):
        yi = y[idx]
        feature.append(LEAF)
        threshold.append(np.nan)
        left.append(LEAF)
        right.append(LEAF)
        value.append(float(yi.mean()))
        count.append(idx.size)
        imp.append(float(yi.var()))
        dec.append(0.0)
        return len(feature) - 1

    root = new_node(np.arange(x.shape[0]))
    stack = [(root, np.arange(x.shape[0]), 0)]
    while stack:
        node, idx, depth = stack.pop()
        if depth >= params.max_depth:
            continue
        split = best_split(x[idx], y[idx], params.min_samples_leaf)
        if split is None:
            continue
        f, thr, gain = split
        mask = x[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[node], threshold[node], dec[node] = f, thr, gain
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))

    return RegressionTree(
        x.shape[1],
        np.array(feature, dtype=np.int64),
        np.array(threshold),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value),
        np.array(count, dtype=np.int64),
        np.array(imp),
        np.array(dec),
        params,
    )


def mdi_importance(tree: RegressionTree) -> np.ndarray:
    """Per-feature share of the total impurity decrease; all zero for a single leaf."""
    out = np.zeros(tree.n_features)
    internal = tree.feature != LEAF
    np.add.at(out, tree.feature[internal], tree.impurity_decrease[internal] / tree.n_samples[0])
    total = out.sum()
    return out / total if total > 0 else out


def fit_forest(x, y, n_trees: int = 25, params: TreeParams = TreeParams(), seed: int = 0) -> list[RegressionTree]:
    """Bootstrap-bagged trees; a variance-reducing alternative to the single tree."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    rng = np.random.default_rng(seed)
    trees = []
    for _ in range(n_trees):
        idx = rng.integers(0, x.shape[0], size=x.shape[0])
        trees.append(fit_tree(x[idx], y[idx], params))
    return trees


def forest_importance(trees: list[RegressionTree]) -> np.ndarray:
    imps = np.mean([mdi_importance(t) for t in trees], axis=0)
    total = imps.sum()
    return imps / total if total > 0 else imps
