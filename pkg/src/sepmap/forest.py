"""CART decision trees and a bagged random forest with Gini splits and MDI.

Seeding is counter based so results never depend on execution order:

* tree ``t`` of a forest with seed ``s`` draws its bootstrap resample from
  ``SeedSequence(s, spawn_key=(t, 0))`` and uses ``SeedSequence(s,
  spawn_key=(t, 1))`` as its tree seed;
* inside a tree, the candidate features of a node are drawn from
  ``SeedSequence(tree_seed, spawn_key=(path,))`` where ``path`` is the
  heap index of the node (root 1, children ``2p`` and ``2p + 1``).
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import seeding
from .errors import DimensionMismatch, EmptyMatrix, EmptyNode, SingleClassInput

FOREST_FORMAT = "sepmap-forest"
FOREST_FORMAT_VERSION = 1

# Impurity decreases at or below this are treated as "no useful split".
_MIN_DECREASE = 1e-12


def gini(counts) -> float:
    """Gini impurity ``1 - sum(p_i^2)`` of per-class counts."""
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    if total <= 0:
        raise EmptyNode("gini of an empty node")
    p = counts / total
    return float(1.0 - np.dot(p, p))


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    decrease: float


def best_split(X, y, candidates, n_classes=None, min_samples_leaf=1):
    """Best Gini split of the rows of ``X`` over the candidate columns.

    ``y`` holds class codes ``0..n_classes-1``.  Thresholds are midpoints
    between consecutive distinct values.  The decrease is
    ``gini(parent) - n_L/n * gini(left) - n_R/n * gini(right)``; ties go to
    the lower feature index, then the lower threshold.  Returns ``None`` when
    no split improves on the parent.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    m = X.shape[0]
    cand = np.unique(np.asarray(candidates, dtype=np.intp))
    if m < 2 or cand.size == 0 or m < 2 * min_samples_leaf:
        return None
    k = int(y.max()) + 1 if n_classes is None else n_classes

    Xc = X[:, cand]
    order = np.argsort(Xc, axis=0, kind="stable")
    xs = np.take_along_axis(Xc, order, axis=0)
    ys = y[order]
    onehot = (ys[..., None] == np.arange(k)).astype(np.int64)
    total = onehot[:, 0, :].sum(axis=0)
    if np.count_nonzero(total) < 2:
        return None
    left = np.cumsum(onehot, axis=0)[:-1]
    right = total - left
    n_left = np.arange(1, m, dtype=float)[:, None]
    n_right = m - n_left
    score = (left * left).sum(axis=-1) / n_left + (right * right).sum(axis=-1) / n_right
    decrease = (score - np.dot(total, total) / m) / m

    valid = xs[1:] > xs[:-1]
    if min_samples_leaf > 1:
        valid &= (n_left >= min_samples_leaf) & (n_right >= min_samples_leaf)
    if not valid.any():
        return None
    decrease = np.where(valid, decrease, -np.inf)
    # feature-major flattening: first maximum = lowest feature, lowest threshold
    flat = decrease.T.ravel()
    best = int(np.argmax(flat))
    if flat[best] <= _MIN_DECREASE:
        return None
    j, pos = divmod(best, m - 1)
    lo, hi = xs[pos, j], xs[pos + 1, j]
    thr = (lo + hi) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return Split(int(cand[j]), float(thr), float(flat[best]))


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_features: object = "sqrt"
    min_samples_leaf: int = 1
    max_depth: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")

    def n_candidates(self, d: int) -> int:
        mf = self.max_features
        if mf is None or mf == "all":
            return d
        if mf == "sqrt":
            return max(1, math.ceil(math.sqrt(d)))
        if mf == "log2":
            return max(1, math.ceil(math.log2(d))) if d > 1 else 1
        if isinstance(mf, float):
            return min(d, max(1, math.ceil(mf * d)))
        return min(d, max(1, int(mf)))

    def replace(self, **kw) -> "ForestParams":
        return ForestParams(**{**asdict(self), **kw})

    def to_dict(self) -> dict:
        return asdict(self)


class DecisionTree:
    """Fitted tree in flat preorder arrays; node 0 is the root.

    Leaves have ``feature == -1``.  ``value[i]`` is the class distribution
    of node ``i`` and ``decrease[i]`` the weighted impurity decrease of its
    split (0 for leaves).
    """

    def __init__(self, feature, threshold, left, right, impurity, n_samples, decrease, value):
        self.feature = np.asarray(feature, dtype=np.intp)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.intp)
        self.right = np.asarray(right, dtype=np.intp)
        self.impurity = np.asarray(impurity, dtype=float)
        self.n_samples = np.asarray(n_samples, dtype=np.int64)
        self.decrease = np.asarray(decrease, dtype=float)
        self.value = np.asarray(value, dtype=float)

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    @property
    def is_leaf(self) -> np.ndarray:
        return self.feature < 0

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, X) -> np.ndarray:
        """Index of the leaf each row of ``X`` lands in."""
        X = np.asarray(X, dtype=float)
        node = np.zeros(X.shape[0], dtype=np.intp)
        rows = np.flatnonzero(self.feature[node] >= 0)
        while rows.size:
            cur = node[rows]
            go_left = X[rows, self.feature[cur]] <= self.threshold[cur]
            node[rows] = np.where(go_left, self.left[cur], self.right[cur])
            rows = rows[self.feature[node[rows]] >= 0]
        return node

    def predict_proba(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    def importances(self, n_features: int) -> np.ndarray:
        """Unnormalized MDI: sum over splits of (node share of samples) * decrease."""
        out = np.zeros(n_features)
        internal = np.flatnonzero(self.feature >= 0)
        weights = self.n_samples[internal] / self.n_samples[0]
        np.add.at(out, self.feature[internal], weights * self.decrease[internal])
        return out

    def structurally_equal(self, other: "DecisionTree") -> bool:
        return all(
            np.array_equal(getattr(self, a), getattr(other, a))
            for a in ("feature", "threshold", "left", "right", "impurity", "n_samples", "decrease", "value")
        )

    def to_dict(self, node: int = 0) -> dict:
        d = {"samples": int(self.n_samples[node]), "impurity": float(self.impurity[node])}
        if self.feature[node] < 0:
            d["distribution"] = [float(v) for v in self.value[node]]
        else:
            d["feature"] = int(self.feature[node])
            d["threshold"] = float(self.threshold[node])
            d["decrease"] = float(self.decrease[node])
            d["distribution"] = [float(v) for v in self.value[node]]
            d["left"] = self.to_dict(self.left[node])
            d["right"] = self.to_dict(self.right[node])
        return d

    @classmethod
    def from_dict(cls, root: dict) -> "DecisionTree":
        cols = {k: [] for k in ("feature", "threshold", "left", "right", "impurity", "n_samples", "decrease", "value")}

        def visit(d):
            i = len(cols["feature"])
            for k in cols:
                cols[k].append(None)
            cols["impurity"][i] = d["impurity"]
            cols["n_samples"][i] = d["samples"]
            cols["value"][i] = d["distribution"]
            if "feature" in d:
                cols["feature"][i] = d["feature"]
                cols["threshold"][i] = d["threshold"]
                cols["decrease"][i] = d["decrease"]
                cols["left"][i] = visit(d["left"])
                cols["right"][i] = visit(d["right"])
            else:
                cols["feature"][i], cols["threshold"][i], cols["decrease"][i] = -1, 0.0, 0.0
                cols["left"][i] = cols["right"][i] = -1
            return i

        visit(root)
        return cls(**cols)


def _node_candidates(tree_seed: int, path: int, d: int, k: int) -> np.ndarray:
    if k >= d:
        return np.arange(d)
    rng = np.random.default_rng(np.random.SeedSequence(tree_seed, spawn_key=(path,)))
    return np.sort(rng.choice(d, size=k, replace=False))


def fit_tree(X, y, sample_indices, params: ForestParams, seed: int, n_classes=None) -> DecisionTree:
    """Grow one CART tree on the (multi)set ``sample_indices`` of rows.

    ``y`` holds class codes ``0..n_classes-1``.  Growth stops at pure nodes,
    when no candidate split helps, at ``max_depth``, or when a node is too
    small to give both children ``min_samples_leaf`` samples.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.intp)
    idx = np.asarray(sample_indices, dtype=np.intp)
    if idx.size == 0:
        raise EmptyNode("cannot fit a tree on zero samples")
    d = X.shape[1]
    k = int(y.max()) + 1 if n_classes is None else n_classes
    n_cand = params.n_candidates(d)

    feature, threshold, left, right, impurity, n_samples, decrease, value = ([] for _ in range(8))
    # preorder: (node samples, depth, heap path, slot in parent to patch)
    stack = [(idx, 0, 1, None)]
    while stack:
        rows, depth, path, parent = stack.pop()
        node = len(feature)
        if parent is not None:
            parent[0][parent[1]] = node
        counts = np.bincount(y[rows], minlength=k)
        imp = gini(counts)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        impurity.append(imp)
        n_samples.append(rows.size)
        decrease.append(0.0)
        value.append(counts / rows.size)

        if imp == 0.0 or rows.size < 2 * params.min_samples_leaf:
            continue
        if params.max_depth is not None and depth >= params.max_depth:
            continue
        cand = _node_candidates(seed, path, d, n_cand)
        sub = X[np.ix_(rows, cand)]
        split = best_split(sub, y[rows], np.arange(cand.size), n_classes=k, min_samples_leaf=params.min_samples_leaf)
        if split is None:
            continue
        split = Split(int(cand[split.feature]), split.threshold, split.decrease)
        feature[node] = split.feature
        threshold[node] = split.threshold
        decrease[node] = split.decrease
        go_left = X[rows, split.feature] <= split.threshold
        # push right first so the left subtree is numbered first
        stack.append((rows[~go_left], depth + 1, 2 * path + 1, (right, node)))
        stack.append((rows[go_left], depth + 1, 2 * path, (left, node)))
    return DecisionTree(feature, threshold, left, right, impurity, n_samples, decrease, value)


def tree_streams(seed: int, t: int):
    """(bootstrap generator, tree seed) for tree ``t`` of a forest seeded with ``seed``."""
    return seeding.rng(seed, t, 0), seeding.derive_seed(seed, t, 1)


@dataclass
class Forest:
    trees: list
    n_features: int
    classes: np.ndarray
    params: ForestParams

    @property
    def positive_index(self) -> int:
        """Column of the positive class (the largest label), which wins ties."""
        return len(self.classes) - 1

    def predict_proba(self, X) -> np.ndarray:
        """Mean leaf distribution over trees; one row per sample, columns follow ``classes``."""
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        proba = np.zeros((X.shape[0], len(self.classes)))
        for tree in self.trees:
            proba += tree.predict_proba(X)
        proba /= len(self.trees)
        return proba[0] if single else proba

    def predict(self, X) -> np.ndarray:
        proba = np.atleast_2d(self.predict_proba(X))
        # argmax over reversed columns so ties resolve to the larger label
        rev = proba[:, ::-1]
        winner = proba.shape[1] - 1 - np.argmax(rev, axis=1)
        out = self.classes[winner]
        return out[0] if np.asarray(X).ndim == 1 else out

    def to_dict(self) -> dict:
        return {
            "format": FOREST_FORMAT,
            "version": FOREST_FORMAT_VERSION,
            "n_features": self.n_features,
            "classes": [c.item() for c in self.classes],
            "params": self.params.to_dict(),
            "trees": [t.to_dict() for t in self.trees],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "Forest":
        if d.get("format") != FOREST_FORMAT or d.get("version") != FOREST_FORMAT_VERSION:
            raise ValueError("not a supported forest document")
        return cls(
            trees=[DecisionTree.from_dict(t) for t in d["trees"]],
            n_features=d["n_features"],
            classes=np.asarray(d["classes"]),
            params=ForestParams(**d["params"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "Forest":
        return cls.from_dict(json.loads(text))


def fit_forest(X, y, params: ForestParams = ForestParams(), n_jobs: int = 1) -> Forest:
    """Bagged CART ensemble; results are identical for every ``n_jobs``."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] < 2 or X.shape[1] < 1:
        raise EmptyMatrix(f"need at least 2 samples and 1 feature, got shape {X.shape}")
    if y.shape[0] != X.shape[0]:
        raise DimensionMismatch("labels and matrix rows differ")
    classes, codes = np.unique(y, return_inverse=True)
    if classes.size < 2:
        raise SingleClassInput("training labels contain a single class")
    n, k = X.shape[0], classes.size

    def grow(t):
        boot, tree_seed = tree_streams(params.seed, t)
        sample = boot.integers(0, n, size=n)
        return fit_tree(X, codes, sample, params, tree_seed, n_classes=k)

    if n_jobs == 1 or params.n_trees == 1:
        trees = [grow(t) for t in range(params.n_trees)]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs if n_jobs and n_jobs > 0 else None) as pool:
            trees = list(pool.map(grow, range(params.n_trees)))
    return Forest(trees, X.shape[1], classes, params)


def mdi_importance(forest: Forest) -> np.ndarray:
    """Mean decrease in impurity, normalized per tree then across trees.

    Trees without splits contribute a zero vector; a forest without any
    split yields all zeros.
    """
    total = np.zeros(forest.n_features)
    for tree in forest.trees:
        imp = tree.importances(forest.n_features)
        s = imp.sum()
        if s > 0:
            total += imp / s
    total /= len(forest.trees)
    s = total.sum()
    return total / s if s > 0 else total
