"""Extremely randomized trees regression ensemble, built from scratch.

Each tree is grown on the full training set (or a bootstrap resample).
At every internal node one uniformly random threshold is drawn per
candidate feature inside that node's value range, and the (feature,
threshold) pair with the smallest weighted child variance is kept, ties
broken by lowest feature index then lowest threshold. The response is
the average of per-tree leaf means, hence piecewise constant and bounded
by the training target range.

Everything is deterministic for a given seed: per-tree generators are
spawned from the master seed up front, so trees may be built in any
order or in parallel without changing the model.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import Dataset
from .errors import DatasetError
from .features import N_FEATURES, FeatureVector

SERIAL_FORMAT = "alloyopt-extra-trees"
SERIAL_VERSION = 1


@dataclass(frozen=True)
class TreesTrainParams:
    n_trees: int = 40
    max_depth: int = 15
    bootstrap: bool = False
    min_samples_leaf: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1 or self.max_depth < 1 or self.min_samples_leaf < 1:
            raise ValueError("n_trees, max_depth and min_samples_leaf must be >= 1")


class _Tree:
    """Flat-array tree: feature[k] == -1 marks a leaf at node k."""

    __slots__ = ("feature", "threshold", "left", "right", "value", "count", "importance")

    def __init__(self, feature, threshold, left, right, value, count, importance):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=float)
        self.count = np.asarray(count, dtype=np.int64)
        self.importance = np.asarray(importance, dtype=float)

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while np.any(active):
            idx = np.where(active)[0]
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] < self.threshold[nd]
            node[idx[go_left]] = self.left[nd[go_left]]
            node[idx[~go_left]] = self.right[nd[~go_left]]
            active = self.feature[node] >= 0
        return self.value[node]


def _grow_tree(X: np.ndarray, t: np.ndarray, params: TreesTrainParams, rng) -> _Tree:
    n_feat = X.shape[1]
    feature, threshold, left, right, value, count = [], [], [], [], [], []
    importance = np.zeros(n_feat)

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        count.append(0)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(X.shape[0]), 0)]
    while stack:
        node, idx, depth = stack.pop()
        targets = t[idx]
        mean = float(targets.mean())
        var = float(targets.var())
        value[node] = mean
        count[node] = idx.size
        if depth >= params.max_depth or idx.size < 2 * params.min_samples_leaf or var == 0.0:
            continue

        best = None  # (score, feature, threshold, mask)
        for f in range(n_feat):
            col = X[idx, f]
            lo = col.min()
            hi = col.max()
            if hi <= lo:
                continue
            thr = lo + rng.random() * (hi - lo)
            if not lo < thr < hi:
                continue
            mask = col < thr
            n_l = int(mask.sum())
            n_r = idx.size - n_l
            if n_l < params.min_samples_leaf or n_r < params.min_samples_leaf:
                continue
            score = (n_l * targets[mask].var() + n_r * targets[~mask].var()) / idx.size
            if best is None or score < best[0] or (
                score == best[0] and (f, thr) < (best[1], best[2])
            ):
                best = (score, f, thr, mask)
        if best is None:
            continue

        score, f, thr, mask = best
        importance[f] += idx.size * var - idx.size * score
        feature[node] = f
        threshold[node] = thr
        l_node = new_node()
        r_node = new_node()
        left[node] = l_node
        right[node] = r_node
        # push right first so the left child is grown first
        stack.append((r_node, idx[~mask], depth + 1))
        stack.append((l_node, idx[mask], depth + 1))

    return _Tree(feature, threshold, left, right, value, count, importance)


@dataclass(frozen=True)
class ExtraTreesModel:
    trees: tuple[_Tree, ...]
    params: TreesTrainParams
    t_min: float
    t_max: float

    def predict(self, y) -> float:
        return float(self.predict_batch(_as_row(y))[0])

    def predict_batch(self, Y: np.ndarray) -> np.ndarray:
        Y = np.asarray(Y, dtype=float)
        out = np.zeros(Y.shape[0])
        for tree in self.trees:
            out += tree.predict(Y)
        return out / len(self.trees)

    def feature_importance(self) -> np.ndarray:
        """Normalized total variance reduction per feature, tree-averaged."""
        acc = np.zeros(N_FEATURES)
        used = 0
        for tree in self.trees:
            total = tree.importance.sum()
            if total > 0.0:
                acc += tree.importance / total
                used += 1
        if used == 0:
            return np.zeros(N_FEATURES)
        acc /= used
        return acc / acc.sum()


def _as_row(y) -> np.ndarray:
    a = y.as_array() if isinstance(y, FeatureVector) else np.asarray(y, dtype=float)
    return a.reshape(1, -1)


def train_extra_trees(train: Dataset, params: TreesTrainParams) -> ExtraTreesModel:
    X = train.feature_matrix()
    t = train.temperatures()
    if X.shape[0] == 0:
        raise DatasetError("cannot train on an empty dataset")
    seeds = np.random.SeedSequence(params.seed).spawn(params.n_trees)
    trees = []
    for k in range(params.n_trees):
        rng = np.random.default_rng(seeds[k])
        if params.bootstrap:
            pick = rng.integers(0, X.shape[0], X.shape[0])
            trees.append(_grow_tree(X[pick], t[pick], params, rng))
        else:
            trees.append(_grow_tree(X, t, params, rng))
    return ExtraTreesModel(
        trees=tuple(trees), params=params, t_min=float(t.min()), t_max=float(t.max())
    )


def predict_trees(m: ExtraTreesModel, y) -> float:
    return m.predict(y)


@dataclass(frozen=True)
class ScoreResult:
    r_squared: float
    mae: float
    degenerate_reason: str | None = None


def score(model, data: Dataset) -> ScoreResult:
    """R-squared and mean absolute error of ``model`` on ``data``.

    Works for any object with ``predict_batch``. Zero-variance targets
    make R-squared undefined; that case is reported, not raised.
    """
    truth = data.temperatures()
    pred = model.predict_batch(data.feature_matrix())
    mae = float(np.abs(pred - truth).mean())
    ss_tot = float(((truth - truth.mean()) ** 2).sum())
    if ss_tot == 0.0:
        return ScoreResult(r_squared=float("nan"), mae=mae,
                           degenerate_reason="zero-variance targets")
    ss_res = float(((truth - pred) ** 2).sum())
    return ScoreResult(r_squared=1.0 - ss_res / ss_tot, mae=mae)


def save_trees(m: ExtraTreesModel, path) -> None:
    """Versioned JSON dump; float round trip is exact via repr."""
    payload = {
        "format": SERIAL_FORMAT,
        "version": SERIAL_VERSION,
        "params": {
            "n_trees": m.params.n_trees,
            "max_depth": m.params.max_depth,
            "bootstrap": m.params.bootstrap,
            "min_samples_leaf": m.params.min_samples_leaf,
            "seed": m.params.seed,
        },
        "t_min": m.t_min,
        "t_max": m.t_max,
        "trees": [
            {
                "feature": tree.feature.tolist(),
                "threshold": tree.threshold.tolist(),
                "left": tree.left.tolist(),
                "right": tree.right.tolist(),
                "value": tree.value.tolist(),
                "count": tree.count.tolist(),
                "importance": tree.importance.tolist(),
            }
            for tree in m.trees
        ],
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_trees(path) -> ExtraTreesModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != SERIAL_FORMAT:
        raise ValueError(f"not an extra-trees model file: {path}")
    if payload.get("version") != SERIAL_VERSION:
        raise ValueError(f"unsupported model version {payload.get('version')}")
    trees = tuple(
        _Tree(t["feature"], t["threshold"], t["left"], t["right"], t["value"],
              t["count"], t["importance"])
        for t in payload["trees"]
    )
    return ExtraTreesModel(
        trees=trees,
        params=TreesTrainParams(**payload["params"]),
        t_min=payload["t_min"],
        t_max=payload["t_max"],
    )
