"""Regression models for value approximation.

Three interchangeable models, all exposing ``fit(X, y) -> self`` and
``predict(X) -> values``:

* GradientBoostedTrees — the default. Squared-loss boosting over
  histogram-built regression trees, written here rather than taken from a
  library so that fits are bit-deterministic: split ties always resolve to
  the lowest feature index, then the lowest threshold, and no subsampling
  or threading is involved.
* RidgeRegressor — closed-form linear baseline used in tests.
* LookupTableRegressor — exact-match table (mean target per distinct row),
  used by the tabular convergence oracle.
"""

from __future__ import annotations

import math
from typing import Any

import numpy as np

from ._kernels import N_FEATURES, fit_tree, forest_predict_candidates, forest_predict_rows
from .errors import TrainingError

__all__ = [
    "GradientBoostedTrees",
    "RidgeRegressor",
    "LookupTableRegressor",
    "make_regressor",
    "regressor_to_payload",
    "regressor_from_payload",
]


def _validate_training_data(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise TrainingError(f"bad training shapes: X {X.shape}, y {y.shape}")
    if X.shape[0] == 0:
        raise TrainingError("cannot fit on zero samples")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise TrainingError("training data must be finite")
    return X, y


class GradientBoostedTrees:
    """Histogram gradient boosting with complete fixed-depth trees."""

    kind = "gbrt"

    def __init__(
        self,
        rounds: int = 100,
        max_depth: int = 3,
        learning_rate: float = 0.1,
        min_samples_leaf: int = 1,
        max_bins: int = 256,
    ):
        if rounds < 1 or max_depth < 1 or min_samples_leaf < 1:
            raise ValueError("rounds, max_depth and min_samples_leaf must be >= 1")
        if not 2 <= max_bins <= 256:
            raise ValueError("max_bins must be in [2, 256]")
        if not learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        self.rounds = rounds
        self.max_depth = max_depth
        self.learning_rate = learning_rate
        self.min_samples_leaf = min_samples_leaf
        self.max_bins = max_bins
        self.base_: float | None = None
        self.tree_feature_: np.ndarray | None = None
        self.tree_threshold_: np.ndarray | None = None
        self.tree_leaf_: np.ndarray | None = None

    @property
    def is_fitted(self) -> bool:
        return self.base_ is not None

    def _bin_features(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray, list[np.ndarray]]:
        """Quantile-style binning: bin(x) = count of edges strictly below x."""
        n, d = X.shape
        Xb = np.zeros((n, d), dtype=np.uint8)
        n_bins = np.zeros(d, dtype=np.int64)
        edges_per_feature: list[np.ndarray] = []
        max_edges = self.max_bins - 1
        for f in range(d):
            uniq = np.unique(X[:, f])
            if uniq.size <= 1:
                edges = np.empty(0)
            else:
                cuts = uniq[:-1]  # splitting at the max value separates nothing
                if cuts.size > max_edges:
                    idx = np.unique(np.round(np.linspace(0, cuts.size - 1, max_edges)).astype(np.int64))
                    cuts = cuts[idx]
                edges = cuts
            edges_per_feature.append(edges)
            n_bins[f] = edges.size
            if edges.size:
                Xb[:, f] = np.searchsorted(edges, X[:, f], side="left").astype(np.uint8)
        return Xb, n_bins, edges_per_feature

    def fit(self, X: np.ndarray, y: np.ndarray) -> "GradientBoostedTrees":
        X, y = _validate_training_data(X, y)
        if X.shape[1] != N_FEATURES:
            raise TrainingError(f"expected {N_FEATURES} features, got {X.shape[1]}")
        self.base_ = float(y.mean())
        resid = y - self.base_
        Xb, n_bins, edges = self._bin_features(X)
        n_internal = 2**self.max_depth - 1
        n_leaf = 2**self.max_depth
        feats = np.empty((self.rounds, n_internal), dtype=np.int64)
        thrs = np.empty((self.rounds, n_internal), dtype=np.float64)
        leafs = np.empty((self.rounds, n_leaf), dtype=np.float64)
        for m in range(self.rounds):
            feature, bin_thr, is_real, leaf_values, sample_leaf = fit_tree(
                Xb, resid, n_bins, self.min_samples_leaf, self.max_depth
            )
            thr = np.full(n_internal, np.inf)
            for node in range(n_internal):
                if is_real[node]:
                    thr[node] = edges[feature[node]][bin_thr[node]]
            feats[m] = feature
            thrs[m] = thr
            leafs[m] = leaf_values
            resid -= self.learning_rate * sample_leaf
        self.tree_feature_ = feats
        self.tree_threshold_ = thrs
        self.tree_leaf_ = leafs
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        if not self.is_fitted:
            raise RuntimeError("predict called before fit")
        X = np.ascontiguousarray(X, dtype=np.float64)
        return forest_predict_rows(
            X, self.tree_feature_, self.tree_threshold_, self.tree_leaf_,
            self.base_, self.learning_rate, self.max_depth,
        )

    def predict_candidates(
        self,
        u: np.ndarray,
        slot: np.ndarray,
        surv: np.ndarray,
        pcost: np.ndarray,
        cand: np.ndarray,
        sigma_by_id: np.ndarray,
        cost_by_id: np.ndarray,
        cost_floor: float,
    ) -> np.ndarray:
        """Fused featurize + predict over per-row candidate id sets."""
        if not self.is_fitted:
            raise RuntimeError("predict called before fit")
        return forest_predict_candidates(
            u, slot, surv, pcost, cand, sigma_by_id, cost_by_id, cost_floor,
            self.tree_feature_, self.tree_threshold_, self.tree_leaf_,
            self.base_, self.learning_rate, self.max_depth,
        )


class RidgeRegressor:
    """Linear least squares with an L2 penalty on the weights (not the intercept)."""

    kind = "ridge"

    def __init__(self, alpha: float = 1.0):
        if alpha < 0:
            raise ValueError("alpha must be >= 0")
        self.alpha = alpha
        self.coef_: np.ndarray | None = None
        self.intercept_: float | None = None

    @property
    def is_fitted(self) -> bool:
        return self.coef_ is not None

    def fit(self, X: np.ndarray, y: np.ndarray) -> "RidgeRegressor":
        X, y = _validate_training_data(X, y)
        x_mean = X.mean(axis=0)
        y_mean = y.mean()
        Xc = X - x_mean
        gram = Xc.T @ Xc + self.alpha * np.eye(X.shape[1])
        self.coef_ = np.linalg.solve(gram, Xc.T @ (y - y_mean))
        self.intercept_ = float(y_mean - x_mean @ self.coef_)
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        if not self.is_fitted:
            raise RuntimeError("predict called before fit")
        X = np.asarray(X, dtype=np.float64)
        return X @ self.coef_ + self.intercept_


class LookupTableRegressor:
    """Exact-match table: distinct feature row -> mean target.

    Unseen rows predict ``default`` (0 unless configured), which doubles as
    the optimistic-zero initialisation for tabular value iteration tests.
    """

    kind = "lookup"

    def __init__(self, default: float = 0.0):
        self.default = default
        self.table_: dict[bytes, float] | None = None

    @property
    def is_fitted(self) -> bool:
        return self.table_ is not None

    def fit(self, X: np.ndarray, y: np.ndarray) -> "LookupTableRegressor":
        X, y = _validate_training_data(X, y)
        sums: dict[bytes, float] = {}
        counts: dict[bytes, int] = {}
        for i in range(X.shape[0]):
            key = X[i].tobytes()
            sums[key] = sums.get(key, 0.0) + float(y[i])
            counts[key] = counts.get(key, 0) + 1
        self.table_ = {key: sums[key] / counts[key] for key in sums}
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        if not self.is_fitted:
            raise RuntimeError("predict called before fit")
        X = np.ascontiguousarray(X, dtype=np.float64)
        out = np.empty(X.shape[0])
        for i in range(X.shape[0]):
            out[i] = self.table_.get(X[i].tobytes(), self.default)
        return out


def make_regressor(kind: str, **params: Any):
    if kind == "gbrt":
        return GradientBoostedTrees(**params)
    if kind == "ridge":
        return RidgeRegressor(**params)
    if kind == "lookup":
        return LookupTableRegressor(**params)
    raise ValueError(f"unknown regressor kind {kind!r}")


def _encode_floats(arr: np.ndarray) -> list:
    """Lists with None standing in for +inf, so payloads stay strict JSON."""
    return [[None if math.isinf(v) else v for v in row] for row in arr.tolist()]


def _decode_floats(rows: list) -> np.ndarray:
    return np.array([[np.inf if v is None else v for v in row] for row in rows], dtype=np.float64)


def regressor_to_payload(reg: Any) -> dict[str, Any]:
    if isinstance(reg, GradientBoostedTrees):
        if not reg.is_fitted:
            raise RuntimeError("cannot serialize an unfitted regressor")
        return {
            "kind": reg.kind,
            "rounds": reg.rounds,
            "max_depth": reg.max_depth,
            "learning_rate": reg.learning_rate,
            "min_samples_leaf": reg.min_samples_leaf,
            "max_bins": reg.max_bins,
            "base": reg.base_,
            "tree_feature": reg.tree_feature_.tolist(),
            "tree_threshold": _encode_floats(reg.tree_threshold_),
            "tree_leaf": reg.tree_leaf_.tolist(),
        }
    if isinstance(reg, RidgeRegressor):
        if not reg.is_fitted:
            raise RuntimeError("cannot serialize an unfitted regressor")
        return {
            "kind": reg.kind,
            "alpha": reg.alpha,
            "coef": reg.coef_.tolist(),
            "intercept": reg.intercept_,
        }
    if isinstance(reg, LookupTableRegressor):
        if not reg.is_fitted:
            raise RuntimeError("cannot serialize an unfitted regressor")
        return {
            "kind": reg.kind,
            "default": reg.default,
            "rows": [list(np.frombuffer(key, dtype=np.float64)) for key in reg.table_],
            "values": list(reg.table_.values()),
        }
    raise ValueError(f"cannot serialize regressor of type {type(reg)!r}")


def regressor_from_payload(payload: dict[str, Any]):
    kind = payload.get("kind")
    if kind == "gbrt":
        reg = GradientBoostedTrees(
            rounds=payload["rounds"],
            max_depth=payload["max_depth"],
            learning_rate=payload["learning_rate"],
            min_samples_leaf=payload["min_samples_leaf"],
            max_bins=payload["max_bins"],
        )
        reg.base_ = float(payload["base"])
        reg.tree_feature_ = np.array(payload["tree_feature"], dtype=np.int64)
        reg.tree_threshold_ = _decode_floats(payload["tree_threshold"])
        reg.tree_leaf_ = np.array(payload["tree_leaf"], dtype=np.float64)
        return reg
    if kind == "ridge":
        reg = RidgeRegressor(alpha=payload["alpha"])
        reg.coef_ = np.array(payload["coef"], dtype=np.float64)
        reg.intercept_ = float(payload["intercept"])
        return reg
    if kind == "lookup":
        reg = LookupTableRegressor(default=payload["default"])
        rows = np.array(payload["rows"], dtype=np.float64)
        reg.table_ = {
            np.ascontiguousarray(rows[i]).tobytes(): float(v)
            for i, v in enumerate(payload["values"])
        }
        return reg
    raise ValueError(f"unknown regressor payload kind {kind!r}")
