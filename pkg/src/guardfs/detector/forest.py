"""Random forest of CART trees (Gini impurity, bootstrap, sqrt feature sampling)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from guardfs.detector.dataset import require_both_classes

LEAF = -1


@dataclass
class Tree:
    """Flat binary tree. Leaves have feature == LEAF; `value` is P(malicious)."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of X."""
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature[node] != LEAF
        while active.any():
            rows = np.flatnonzero(active)
            n = node[rows]
            go_left = X[rows, self.feature[n]] <= self.threshold[n]
            node[rows] = np.where(go_left, self.left[n], self.right[n])
            active[rows] = self.feature[node[rows]] != LEAF
        return node

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def walk(self, x) -> float:
        """Single-row traversal, kept deliberately simple."""
        i = 0
        while self.feature[i] != LEAF:
            i = self.left[i] if x[self.feature[i]] <= self.threshold[i] else self.right[i]
        return float(self.value[i])


def _best_split(x: np.ndarray, y: np.ndarray) -> tuple[float, float] | None:
    """(weighted child gini, threshold) of the best cut on one feature."""
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    n = len(xs)
    cut = np.flatnonzero(xs[:-1] < xs[1:])  # last index of the left side
    if len(cut) == 0:
        return None
    pos = np.cumsum(ys)
    total_pos = pos[-1]
    n_left = cut + 1.0
    n_right = n - n_left
    p_left = pos[cut] / n_left
    p_right = (total_pos - pos[cut]) / n_right
    gini = n_left * 2 * p_left * (1 - p_left) + n_right * 2 * p_right * (1 - p_right)
    best = int(np.argmin(gini))
    i = cut[best]
    thr = (xs[i] + xs[i + 1]) / 2.0
    if not xs[i] <= thr < xs[i + 1]:  # midpoint rounded onto the right value
        thr = xs[i]
    return float(gini[best]) / n, float(thr)


def grow_tree(X: np.ndarray, y: np.ndarray, max_features: int, rng: np.random.Generator,
              max_depth: int | None = None, min_samples_split: int = 2) -> Tree:
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node() -> int:
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(0.0)
        return len(feature) - 1

    d = X.shape[1]
    root = new_node()
    stack = [(root, np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        yy = y[idx]
        p = float(yy.mean())
        value[node] = p
        if p in (0.0, 1.0) or len(idx) < min_samples_split or (max_depth is not None and depth >= max_depth):
            continue
        best = None
        tried = 0
        for f in rng.permutation(d):
            if tried >= max_features:
                break
            res = _best_split(X[idx, f], yy)
            if res is None:
                continue  # constant here; does not count against the budget
            tried += 1
            if best is None or res[0] < best[0]:
                best = (res[0], int(f), res[1])
        # A cut that does not lower impurity is still taken: XOR-like
        # structure only pays off one level further down.
        if best is None:
            continue
        _, f, thr = best
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        if len(li) == 0 or len(ri) == 0:
            continue
        feature[node] = f
        threshold[node] = thr
        left[node] = new_node()
        right[node] = new_node()
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))
    return Tree(np.array(feature, dtype=np.int64), np.array(threshold, dtype=float),
                np.array(left, dtype=np.int64), np.array(right, dtype=np.int64), np.array(value, dtype=float))


@dataclass
class ForestModel:
    trees: list[Tree]
    n_features: int
    max_features: int
    seed: int

    kind = "forest"

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def predict_proba(self, X) -> np.ndarray:
        X = _check(X, self.n_features)
        return np.mean([t.predict_proba(X) for t in self.trees], axis=0)

    def predict(self, x) -> tuple[str, float]:
        score = float(self.predict_proba(np.asarray(x, dtype=float).reshape(1, -1))[0])
        return ("malicious" if score >= 0.5 else "benign"), score


def _check(X, d: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != d:
        raise ValueError(f"expected {d} features, got {X.shape[1]}")
    return X


def train_forest(X, y, n_trees: int = 100, max_features: int | str = "sqrt", max_depth: int | None = None,
                 bootstrap: bool = True, seed: int = 0) -> ForestModel:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    require_both_classes(y)
    d = X.shape[1]
    mf = math.ceil(math.sqrt(d)) if max_features == "sqrt" else int(max_features)
    mf = max(1, min(d, mf))
    rng = np.random.default_rng(seed)
    trees = []
    n = len(y)
    for _ in range(n_trees):
        idx = rng.integers(0, n, n) if bootstrap else np.arange(n)
        trees.append(grow_tree(X[idx], y[idx], mf, rng, max_depth))
    return ForestModel(trees, d, mf, seed)
