"""Regression-tree ensemble and linear baseline for quality prediction.

Both models follow the sklearn estimator protocol (fit/predict/get_params)
so they compose with standard tooling.  The forest is grown from scratch:
its bootstrap and per-node feature draws are keyed by (seed, tree, node)
derived PRNG streams over canonically key-sorted training data, which makes
the trained model independent of input ordering and bit-reproducible.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .features import SCHEMA_VERSION

MODEL_FORMAT = "segalloc-forest-v1"
LINEAR_FORMAT = "segalloc-linear-v1"
PRNG_NAME = "numpy-seedseq-pcg64"

# stream tags keep bootstrap / node / shuffle draws on disjoint PRNG streams
_TAG_BOOTSTRAP = 1
_TAG_NODE = 2


class SchemaMismatchError(ValueError):
    """Feature schema of the query does not match the trained model."""


def _rng(*entropy: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=list(entropy)))


def _grow_tree(X: np.ndarray, y: np.ndarray, sample_idx: np.ndarray,
               min_leaf: int, mtry: int, seed: int, tree_idx: int) -> dict:
    """Grow one variance-reduction regression tree; returns parallel node arrays.

    Nodes are numbered in creation order starting at the root; that number
    keys the per-node PRNG stream.  A node becomes a leaf when it holds
    fewer than 2*min_leaf samples, its labels are constant, or none of the
    mtry drawn features admits a split leaving min_leaf on both sides.
    """
    n_features = X.shape[1]
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    root = new_node()
    stack: list[tuple[int, np.ndarray]] = [(root, sample_idx)]
    while stack:
        node, idx = stack.pop()
        labels = y[idx]
        value[node] = float(labels.mean())
        if len(idx) < 2 * min_leaf or np.all(labels == labels[0]):
            continue

        rng = _rng(seed, _TAG_NODE, tree_idx, node)
        candidates = rng.choice(n_features, size=mtry, replace=False)

        best_sse = math.inf
        best_feat = -1
        best_thr = 0.0
        best_order = None
        best_k = -1
        n = len(idx)
        ks = np.arange(min_leaf, n - min_leaf + 1)
        for f in candidates:
            v = X[idx, f]
            order = np.argsort(v, kind="stable")
            vs = v[order]
            valid = vs[ks - 1] < vs[ks]
            if not valid.any():
                continue
            ys = labels[order]
            c1 = np.cumsum(ys)
            c2 = np.cumsum(ys * ys)
            kv = ks[valid]
            s1 = c1[kv - 1]
            s2 = c2[kv - 1]
            tot1 = c1[-1]
            tot2 = c2[-1]
            nr = n - kv
            sse = (s2 - s1 * s1 / kv) + ((tot2 - s2) - (tot1 - s1) ** 2 / nr)
            j = int(np.argmin(sse))  # first minimum = smallest threshold
            if sse[j] < best_sse:
                best_sse = float(sse[j])
                best_feat = int(f)
                best_k = int(kv[j])
                a, b = float(vs[best_k - 1]), float(vs[best_k])
                thr = (a + b) / 2.0
                if thr >= b:  # midpoint rounded up to b would leak b leftward
                    thr = a
                best_thr = thr
                best_order = order

        if best_feat < 0:
            continue

        ordered = idx[best_order]
        left_idx = ordered[:best_k]
        right_idx = ordered[best_k:]
        feature[node] = best_feat
        threshold[node] = best_thr
        li = new_node()
        ri = new_node()
        left[node] = li
        right[node] = ri
        stack.append((ri, right_idx))
        stack.append((li, left_idx))

    return {
        "feature": np.asarray(feature, dtype=np.int32),
        "threshold": np.asarray(threshold, dtype=np.float64),
        "left": np.asarray(left, dtype=np.int32),
        "right": np.asarray(right, dtype=np.int32),
        "value": np.asarray(value, dtype=np.float64),
    }


def _tree_predict(tree: dict, X: np.ndarray) -> np.ndarray:
    node = np.zeros(len(X), dtype=np.int32)
    feature = tree["feature"]
    threshold = tree["threshold"]
    left = tree["left"]
    right = tree["right"]
    active = feature[node] >= 0
    while active.any():
        idx = np.flatnonzero(active)
        cur = node[idx]
        f = feature[cur]
        go_left = X[idx, f] <= threshold[cur]
        node[idx] = np.where(go_left, left[cur], right[cur])
        active[idx] = feature[node[idx]] >= 0
    return tree["value"][node]


class QualityRegressionForest(BaseEstimator, RegressorMixin):
    """Bagged regression trees predicting a segmentation quality score in [0, 1].

    Defaults: 25 trees, a third of the features drawn per split, minimum of
    five samples per leaf, bootstrap resampling.  Pass per-example string
    `keys` to fit() to make the trained model invariant to input order.
    """

    def __init__(self, n_trees: int = 25, mtry: int | None = None, min_leaf: int = 5,
                 bootstrap: bool = True, seed: int = 0,
                 feature_schema: str = SCHEMA_VERSION):
        self.n_trees = n_trees
        self.mtry = mtry
        self.min_leaf = min_leaf
        self.bootstrap = bootstrap
        self.seed = seed
        self.feature_schema = feature_schema

    def _validate_params(self, n_features: int) -> int:
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        mtry = self.mtry if self.mtry is not None else math.ceil(n_features / 3)
        if not 1 <= mtry <= n_features:
            raise ValueError(f"mtry must be in [1, {n_features}], got {mtry}")
        return mtry

    def fit(self, X, y, keys=None):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError("X must be 2D")
        if len(X) != len(y):
            raise ValueError("X and y length mismatch")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise ValueError("X and y must be finite")
        n, d = X.shape
        if n < 2 * self.min_leaf:
            raise ValueError(f"need at least {2 * self.min_leaf} examples, got {n}")
        mtry = self._validate_params(d)

        if keys is None:
            keys = [f"{i:010d}" for i in range(n)]
        else:
            keys = [str(k) for k in keys]
            if len(keys) != n:
                raise ValueError("keys length mismatch")
            if len(set(keys)) != n:
                raise ValueError("keys must be unique")
        order = sorted(range(n), key=lambda i: keys[i])
        Xs = X[order]
        ys = y[order]

        trees = []
        for t in range(self.n_trees):
            if self.bootstrap:
                idx = _rng(self.seed, _TAG_BOOTSTRAP, t).integers(0, n, size=n)
            else:
                idx = np.arange(n)
            trees.append(_grow_tree(Xs, ys, idx, self.min_leaf, mtry, self.seed, t))
        self.trees_ = trees
        self.n_features_in_ = d
        self.mtry_ = mtry
        return self

    def predict(self, X) -> np.ndarray:
        if not hasattr(self, "trees_"):
            raise ValueError("model is not fitted")
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        if single:
            X = X[None, :]
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"expected {self.n_features_in_} features, got {X.shape[1]}")
        acc = np.zeros(len(X), dtype=np.float64)
        for tree in self.trees_:
            acc += _tree_predict(tree, X)
        out = np.clip(acc / len(self.trees_), 0.0, 1.0)
        return out[0] if single else out


def predict_scores(model: QualityRegressionForest, X, schema: str = SCHEMA_VERSION) -> np.ndarray:
    """Predict with an explicit feature-schema check (the model file contract)."""
    if model.feature_schema != schema:
        raise SchemaMismatchError(
            f"model feature schema {model.feature_schema!r} != query schema {schema!r}")
    return model.predict(X)


class LinearQualityModel(BaseEstimator, RegressorMixin):
    """Ordinary least squares on the feature vector, predictions clamped to [0, 1].

    Normal equations with ridge damping (lambda=1e-6) as the fallback for
    singular designs.
    """

    def __init__(self, ridge: float = 1e-6):
        self.ridge = ridge

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if len(X) != len(y):
            raise ValueError("X and y length mismatch")
        if len(X) < 10:
            raise ValueError(f"need at least 10 examples, got {len(X)}")
        A = np.hstack([X, np.ones((len(X), 1))])
        G = A.T @ A
        b = A.T @ y
        try:
            beta = np.linalg.solve(G, b)
            if not np.all(np.isfinite(beta)):
                raise np.linalg.LinAlgError("non-finite solution")
        except np.linalg.LinAlgError:
            beta = np.linalg.solve(G + self.ridge * np.eye(len(G)), b)
        self.coef_ = beta[:-1]
        self.intercept_ = float(beta[-1])
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X) -> np.ndarray:
        if not hasattr(self, "coef_"):
            raise ValueError("model is not fitted")
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        if single:
            X = X[None, :]
        out = np.clip(X @ self.coef_ + self.intercept_, 0.0, 1.0)
        return float(out[0]) if single else out


# --- persistence -----------------------------------------------------------

def model_to_dict(model: QualityRegressionForest) -> dict:
    if not hasattr(model, "trees_"):
        raise ValueError("model is not fitted")
    return {
        "format": MODEL_FORMAT,
        "prng": PRNG_NAME,
        "params": {
            "n_trees": model.n_trees,
            "mtry": model.mtry,
            "min_leaf": model.min_leaf,
            "bootstrap": model.bootstrap,
            "seed": model.seed,
        },
        "feature_schema": model.feature_schema,
        "n_features": model.n_features_in_,
        "mtry_resolved": model.mtry_,
        "trees": [
            {
                "feature": tree["feature"].tolist(),
                "threshold": tree["threshold"].tolist(),
                "left": tree["left"].tolist(),
                "right": tree["right"].tolist(),
                "value": tree["value"].tolist(),
            }
            for tree in model.trees_
        ],
    }


def model_from_dict(data: dict) -> QualityRegressionForest:
    if data.get("format") != MODEL_FORMAT:
        raise ValueError(f"unsupported model format: {data.get('format')!r}")
    p = data["params"]
    model = QualityRegressionForest(
        n_trees=p["n_trees"], mtry=p["mtry"], min_leaf=p["min_leaf"],
        bootstrap=p["bootstrap"], seed=p["seed"],
        feature_schema=data["feature_schema"])
    model.trees_ = [
        {
            "feature": np.asarray(t["feature"], dtype=np.int32),
            "threshold": np.asarray(t["threshold"], dtype=np.float64),
            "left": np.asarray(t["left"], dtype=np.int32),
            "right": np.asarray(t["right"], dtype=np.int32),
            "value": np.asarray(t["value"], dtype=np.float64),
        }
        for t in data["trees"]
    ]
    model.n_features_in_ = data["n_features"]
    model.mtry_ = data["mtry_resolved"]
    return model


def save_model(model: QualityRegressionForest, path) -> None:
    """Write the model as canonical JSON; identical models produce identical bytes."""
    payload = json.dumps(model_to_dict(model), sort_keys=True, separators=(",", ":"))
    Path(path).write_text(payload + "\n")


def load_model(path) -> QualityRegressionForest:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed model file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ValueError(f"malformed model file {path}")
    return model_from_dict(data)
