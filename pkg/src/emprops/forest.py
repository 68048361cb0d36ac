"""Single-task random forest regressor.

Bagged CART trees with variance-reduction splits: candidate thresholds
are midpoints between consecutive distinct sorted feature values, the
winner maximizes the total squared-error reduction, and ties break to the
lowest feature index then the lowest threshold. Bootstraps and per-split
feature subsets are drawn from splitmix64 streams, so a seed pins the
whole forest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from emprops.errors import DimensionMismatch, EmptyData, InvalidConfig
from emprops.rng import SplitMix64, derive_seed


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int = 12
    min_samples_leaf: int = 1
    max_features: int | None = None  # None resolves to ceil(d / 3)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_trees < 1 or self.max_depth < 1 or self.min_samples_leaf < 1:
            raise InvalidConfig("n_trees, max_depth, min_samples_leaf must be positive")
        if self.max_features is not None and self.max_features < 1:
            raise InvalidConfig("max_features must be positive")

    def resolve_max_features(self, n_features: int) -> int:
        if self.max_features is None:
            return max(1, math.ceil(n_features / 3))
        if self.max_features > n_features:
            raise InvalidConfig(
                f"max_features {self.max_features} exceeds feature dim {n_features}"
            )
        return self.max_features


@dataclass
class TreeNode:
    feature: int = -1          # -1 marks a leaf
    threshold: float = 0.0
    value: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0


@dataclass
class DecisionTree:
    root: TreeNode
    n_features: int

    def predict_one(self, x: np.ndarray) -> float:
        node = self.root
        while not node.is_leaf:
            node = node.left if x[node.feature] <= node.threshold else node.right
        return node.value


@dataclass
class RandomForest:
    config: ForestConfig
    trees: list[DecisionTree]
    n_features: int


def _sse(total: float, total_sq: float, count: int) -> float:
    return total_sq - total * total / count


def best_split(x: np.ndarray, y: np.ndarray, feature_indices: list[int],
               min_samples_leaf: int = 1) -> tuple[int, float, float] | None:
    """Best (feature, threshold, sse_reduction) over the candidate features.

    Thresholds are midpoints between consecutive distinct sorted values.
    Candidates are scanned in ascending (feature, threshold) order and a
    later candidate must beat the incumbent by more than a noise margin,
    so mathematically tied splits (same partition reachable through
    different features) resolve to the lowest feature index, then the
    lowest threshold, regardless of floating-point summation order.
    Returns None when no split reduces the SSE or every candidate violates
    min_samples_leaf.
    """
    n = len(y)
    if n < 2:
        return None
    parent_sse = _sse(float(y.sum()), float((y * y).sum()), n)
    margin = 1e-12 * max(parent_sse, 1.0)

    best: tuple[int, float, float] | None = None
    for feature in sorted(feature_indices):
        column = x[:, feature]
        order = np.argsort(column, kind="stable")
        sorted_x = column[order]
        sorted_y = y[order]
        cum = np.cumsum(sorted_y)
        cum_sq = np.cumsum(sorted_y * sorted_y)
        total, total_sq = float(cum[-1]), float(cum_sq[-1])
        for i in range(n - 1):
            if sorted_x[i] == sorted_x[i + 1]:
                continue
            left_n = i + 1
            right_n = n - left_n
            if left_n < min_samples_leaf or right_n < min_samples_leaf:
                continue
            left_sse = _sse(float(cum[i]), float(cum_sq[i]), left_n)
            right_sse = _sse(total - float(cum[i]), total_sq - float(cum_sq[i]), right_n)
            reduction = parent_sse - left_sse - right_sse
            threshold = (float(sorted_x[i]) + float(sorted_x[i + 1])) / 2.0
            if reduction > margin and (best is None or reduction > best[2] + margin):
                best = (feature, threshold, reduction)
    return best


def fit_tree(x: np.ndarray, y: np.ndarray, config: ForestConfig,
             feature_rng: SplitMix64 | None = None) -> DecisionTree:
    """Grow one tree on the given sample (no bootstrap here).

    feature_rng enables per-split feature subsampling; None considers all
    features at every split, which is the configuration the brute-force
    split oracle checks against.
    """
    n_features = x.shape[1]
    max_features = config.resolve_max_features(n_features)

    def grow(rows: np.ndarray, depth: int) -> TreeNode:
        values = y[rows]
        node = TreeNode(value=float(values.mean()))
        if depth >= config.max_depth or len(rows) < 2 * config.min_samples_leaf:
            return node
        if feature_rng is None or max_features >= n_features:
            candidates = list(range(n_features))
        else:
            candidates = feature_rng.sample_indices(n_features, max_features)
        split = best_split(x[rows], values, candidates, config.min_samples_leaf)
        if split is None:
            return node
        feature, threshold, _ = split
        mask = x[rows, feature] <= threshold
        node.feature = feature
        node.threshold = threshold
        node.left = grow(rows[mask], depth + 1)
        node.right = grow(rows[~mask], depth + 1)
        return node

    return DecisionTree(root=grow(np.arange(len(y)), 0), n_features=n_features)


def fit_forest(x: np.ndarray, y: np.ndarray, config: ForestConfig) -> RandomForest:
    """n_trees trees, each on a with-replacement bootstrap of size n drawn
    from splitmix64(seed xor tree index), with per-split feature subsets."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(y) == 0 or x.shape[0] == 0:
        raise EmptyData("cannot fit a forest on empty data")
    if x.shape[0] != len(y):
        raise DimensionMismatch(f"{x.shape[0]} feature rows vs {len(y)} targets")
    if len(y) < config.min_samples_leaf:
        raise EmptyData("fewer samples than min_samples_leaf")

    n = len(y)
    trees = []
    for tree_index in range(config.n_trees):
        rng = SplitMix64(derive_seed(config.seed, tree_index))
        rows = np.array([rng.next_below(n) for _ in range(n)], dtype=np.int64)
        trees.append(fit_tree(x[rows], y[rows], config, feature_rng=rng))
    return RandomForest(config=config, trees=trees, n_features=x.shape[1])


def predict_forest(forest: RandomForest, x: np.ndarray) -> np.ndarray:
    """Unweighted mean of per-tree predictions; accepts one row or a matrix."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != forest.n_features:
        raise DimensionMismatch(
            f"feature dim {x.shape[1]} != fitted dim {forest.n_features}"
        )
    out = np.zeros(x.shape[0])
    for tree in forest.trees:
        out += np.array([tree.predict_one(row) for row in x])
    out /= len(forest.trees)
    return out[0] if single else out


# (de)serialization helpers used by the shared model container

def tree_to_lists(tree: DecisionTree) -> list[list[float]]:
    """Flatten to rows [feature, threshold, value, left, right] with -1 links."""
    rows: list[list[float]] = []

    def walk(node: TreeNode) -> int:
        idx = len(rows)
        rows.append([float(node.feature), node.threshold, node.value, -1.0, -1.0])
        if not node.is_leaf:
            rows[idx][3] = float(walk(node.left))
            rows[idx][4] = float(walk(node.right))
        return idx

    walk(tree.root)
    return rows


def tree_from_lists(rows: list[list[float]], n_features: int) -> DecisionTree:
    def build(idx: int) -> TreeNode:
        feature, threshold, value, left, right = rows[idx]
        node = TreeNode(feature=int(feature), threshold=threshold, value=value)
        if node.feature >= 0:
            node.left = build(int(left))
            node.right = build(int(right))
        return node

    return DecisionTree(root=build(0), n_features=n_features)
