"""CART trees and the two ensembles built on them.

Trees are stored as nested lists ready for JSON round-trips:
``["leaf", payload]`` or ``["split", feature, threshold, left, right]``
with payload ``[n_class0, n_class1]`` for classifiers and a float mean
for regressors. Rows with feature < threshold go left.

Everything is deterministic given (seed, row order): per-tree generators
are spawned from one seed sequence, and split ties resolve to the lowest
threshold of the earliest-drawn feature.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

Node = list  # nested ["leaf", ...] / ["split", ...] structure


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 200
    max_depth: int | None = None
    min_leaf: int = 1
    mtry: int = 4
    bootstrap: bool = True

    def to_json(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_leaf": self.min_leaf,
            "mtry": self.mtry,
            "bootstrap": self.bootstrap,
        }


@dataclass(frozen=True)
class BoostingConfig:
    n_estimators: int = 100
    learning_rate: float = 0.1
    max_depth: int = 3
    min_leaf: int = 2
    subsample: float = 1.0

    def to_json(self) -> dict:
        return {
            "n_estimators": self.n_estimators,
            "learning_rate": self.learning_rate,
            "max_depth": self.max_depth,
            "min_leaf": self.min_leaf,
            "subsample": self.subsample,
        }


def _midpoint(lo: float, hi: float) -> float:
    """Midpoint that provably separates two distinct floats.

    For adjacent representable values the arithmetic mean rounds onto an
    endpoint; falling back to ``hi`` keeps the left side ("< threshold")
    nonempty.
    """
    mid = (lo + hi) / 2.0
    return float(hi) if mid <= lo else float(mid)


def _best_split_gini(col: np.ndarray, y: np.ndarray, min_leaf: int):
    """Lowest weighted Gini cut on one column, or None."""
    order = np.argsort(col, kind="mergesort")
    xs, ys = col[order], y[order]
    n = ys.size
    left_n = np.arange(1, n, dtype=float)
    right_n = n - left_n
    left_1 = np.cumsum(ys)[:-1].astype(float)
    right_1 = float(ys.sum()) - left_1
    valid = (xs[1:] > xs[:-1]) & (left_n >= min_leaf) & (right_n >= min_leaf)
    if not valid.any():
        return None
    gini_l = 1.0 - (left_1 / left_n) ** 2 - ((left_n - left_1) / left_n) ** 2
    gini_r = 1.0 - (right_1 / right_n) ** 2 - ((right_n - right_1) / right_n) ** 2
    cost = (left_n * gini_l + right_n * gini_r) / n
    cost = np.where(valid, cost, np.inf)
    i = int(np.argmin(cost))
    return float(cost[i]), _midpoint(xs[i], xs[i + 1])


def _best_split_sse(col: np.ndarray, y: np.ndarray, min_leaf: int):
    """Lowest summed squared error cut on one column, or None."""
    order = np.argsort(col, kind="mergesort")
    xs, ys = col[order], y[order]
    n = ys.size
    left_n = np.arange(1, n, dtype=float)
    right_n = n - left_n
    cum = np.cumsum(ys)
    cum2 = np.cumsum(ys * ys)
    left_sse = cum2[:-1] - cum[:-1] ** 2 / left_n
    right_sse = (cum2[-1] - cum2[:-1]) - (cum[-1] - cum[:-1]) ** 2 / right_n
    valid = (xs[1:] > xs[:-1]) & (left_n >= min_leaf) & (right_n >= min_leaf)
    if not valid.any():
        return None
    cost = np.where(valid, left_sse + right_sse, np.inf)
    i = int(np.argmin(cost))
    return float(cost[i]), _midpoint(xs[i], xs[i + 1])


def _grow(
    x: np.ndarray,
    y: np.ndarray,
    depth: int,
    max_depth: int | None,
    min_leaf: int,
    mtry: int | None,
    rng: np.random.Generator | None,
    classification: bool,
) -> Node:
    n, p = x.shape

    def leaf() -> Node:
        if classification:
            ones = int(y.sum())
            return ["leaf", [n - ones, ones]]
        return ["leaf", float(y.mean())]

    if (max_depth is not None and depth >= max_depth) or n < 2 * min_leaf:
        return leaf()
    if classification:
        if y.min() == y.max():
            return leaf()
    elif float(y.min()) == float(y.max()):
        return leaf()

    if mtry is not None and mtry < p:
        assert rng is not None
        candidates = rng.permutation(p)[:mtry]
    else:
        candidates = np.arange(p)

    splitter = _best_split_gini if classification else _best_split_sse
    best = None
    for feat in candidates:
        found = splitter(x[:, feat], y, min_leaf)
        if found is not None and (best is None or found[0] < best[0]):
            best = (found[0], int(feat), found[1])
    if best is None:
        return leaf()

    _, feat, threshold = best
    mask = x[:, feat] < threshold
    left = _grow(x[mask], y[mask], depth + 1, max_depth, min_leaf, mtry, rng, classification)
    right = _grow(x[~mask], y[~mask], depth + 1, max_depth, min_leaf, mtry, rng, classification)
    return ["split", feat, threshold, left, right]


def tree_apply(node: Node, x: np.ndarray) -> np.ndarray:
    """Leaf payloads for every row (vectorized descent)."""
    out = np.empty(x.shape[0], dtype=object)

    def _walk(sub: Node, idx: np.ndarray) -> None:
        if sub[0] == "leaf":
            for i in idx:
                out[i] = sub[1]
            return
        _, feat, threshold, left, right = sub
        mask = x[idx, feat] < threshold
        _walk(left, idx[mask])
        _walk(right, idx[~mask])

    _walk(node, np.arange(x.shape[0]))
    return out


@dataclass
class RandomForestClassifier:
    """Gini CART forest over bootstrap samples; binary labels {0, 1}."""

    config: ForestConfig
    seed: int
    trees: list[Node] = field(default_factory=list)

    def fit(self, x: np.ndarray, y: np.ndarray) -> "RandomForestClassifier":
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=int)
        n = x.shape[0]
        self.trees = []
        for child in np.random.SeedSequence(self.seed).spawn(self.config.n_trees):
            rng = np.random.default_rng(child)
            idx = rng.integers(0, n, size=n) if self.config.bootstrap else np.arange(n)
            self.trees.append(
                _grow(
                    x[idx],
                    y[idx],
                    depth=0,
                    max_depth=self.config.max_depth,
                    min_leaf=self.config.min_leaf,
                    mtry=self.config.mtry,
                    rng=rng,
                    classification=True,
                )
            )
        return self

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        """Fraction of trees whose leaf majority votes class 1."""
        x = np.asarray(x, dtype=float)
        votes = np.zeros(x.shape[0])
        for tree in self.trees:
            payloads = tree_apply(tree, x)
            votes += np.array([1.0 if counts[1] > counts[0] else 0.0 for counts in payloads])
        return votes / len(self.trees)


@dataclass
class GradientBoostingRegressor:
    """Squared-loss boosting of shallow regression trees."""

    config: BoostingConfig
    seed: int
    base_prediction: float = 0.0
    trees: list[Node] = field(default_factory=list)

    def fit(self, x: np.ndarray, y: np.ndarray) -> "GradientBoostingRegressor":
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        n = x.shape[0]
        rng = np.random.default_rng(self.seed)
        self.base_prediction = float(y.mean())
        current = np.full(n, self.base_prediction)
        self.trees = []
        for _ in range(self.config.n_estimators):
            residual = y - current
            if self.config.subsample < 1.0:
                size = max(1, int(round(self.config.subsample * n)))
                idx = rng.choice(n, size=size, replace=False)
            else:
                idx = np.arange(n)
            tree = _grow(
                x[idx],
                residual[idx],
                depth=0,
                max_depth=self.config.max_depth,
                min_leaf=self.config.min_leaf,
                mtry=None,
                rng=rng,
                classification=False,
            )
            self.trees.append(tree)
            step = np.array([float(v) for v in tree_apply(tree, x)])
            current = current + self.config.learning_rate * step
        return self

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape[0], self.base_prediction)
        for tree in self.trees:
            out = out + self.config.learning_rate * np.array(
                [float(v) for v in tree_apply(tree, x)]
            )
        return out
