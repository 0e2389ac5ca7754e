"""CART decision trees (gini / entropy) and bagged random forests.

Trees are grown until every leaf is pure or its rows are indistinguishable.
Among equally good splits the lowest feature index wins, then the lowest
threshold.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

GAIN_TIE_EPS = 1e-12
GINI, ENTROPY = 0, 1
_CRITERIA = {"gini": GINI, "entropy": ENTROPY}


def _criterion_code(criterion: str) -> int:
    try:
        return _CRITERIA[criterion]
    except KeyError:
        raise ValueError(f"unknown criterion {criterion!r}") from None


@njit(cache=True)
def _impurity(counts, total, criterion):  # pragma: no cover - compiled
    if total <= 0:
        return 0.0
    acc = 0.0
    for c in range(len(counts)):
        p = counts[c] / total
        if criterion == 0:
            acc += p * p
        elif p > 0:
            acc += p * np.log2(p)
    return 1.0 - acc if criterion == 0 else -acc


@njit(cache=True)
def _node_split(X, y, rows, n_classes, features, criterion):  # pragma: no cover - compiled
    """Best (feature, threshold, gain) for ``rows`` over sorted ``features``; feature -1 if none."""
    n = len(rows)
    total = np.zeros(n_classes)
    for r in rows:
        total[y[r]] += 1.0
    parent = _impurity(total, float(n), criterion)
    nf = len(features)
    gains = np.full((nf, max(n - 1, 1)), -np.inf)
    vals = np.empty((nf, n))
    left = np.zeros(n_classes)
    right = np.zeros(n_classes)
    g_best = -np.inf
    for k in range(nf):
        col = np.empty(n)
        for t in range(n):
            col[t] = X[rows[t], features[k]]
        order = np.argsort(col, kind="mergesort")
        left[:] = 0.0
        for p in range(n):
            vals[k, p] = col[order[p]]
        for p in range(n - 1):
            left[y[rows[order[p]]]] += 1.0
            if vals[k, p] < vals[k, p + 1]:
                nl = p + 1.0
                for c in range(n_classes):
                    right[c] = total[c] - left[c]
                g = parent - (nl * _impurity(left, nl, criterion)
                              + (n - nl) * _impurity(right, n - nl, criterion)) / n
                gains[k, p] = g
                if g > g_best:
                    g_best = g
    if g_best == -np.inf:
        return -1, 0.0, 0.0
    # feature-major scan: lowest feature index, then lowest threshold, among near-ties
    for k in range(nf):
        for p in range(n - 1):
            if gains[k, p] >= g_best - GAIN_TIE_EPS:
                return features[k], (vals[k, p] + vals[k, p + 1]) / 2.0, gains[k, p]
    return -1, 0.0, 0.0


@njit(cache=True)
def _splitmix64(state):  # pragma: no cover - compiled
    state = (state + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = state
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    return state, z ^ (z >> np.uint64(31))


@njit(cache=True)
def _grow(X, y, n_classes, criterion, max_features, seed):  # pragma: no cover - compiled
    n, d = X.shape
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.full(cap, -1, dtype=np.int64)
    state = np.uint64(seed)
    n_nodes = 1
    stack_node = np.empty(cap, dtype=np.int64)
    stack_rows = [np.arange(n)]
    stack_node[0] = 0
    top = 1
    while top > 0:
        top -= 1
        node = stack_node[top]
        rows = stack_rows.pop()
        counts = np.zeros(n_classes, dtype=np.int64)
        for r in rows:
            counts[y[r]] += 1
        value[node] = np.argmax(counts)
        if counts.max() == len(rows):
            continue
        cand = np.empty(d, dtype=np.int64)
        m = 0
        for f in range(d):
            lo = X[rows[0], f]
            hi = lo
            for r in rows:
                v = X[r, f]
                if v < lo:
                    lo = v
                if v > hi:
                    hi = v
            if lo < hi:
                cand[m] = f
                m += 1
        cand = cand[:m]
        if max_features >= 0 and m > max_features:
            # partial Fisher-Yates shuffle drawing max_features distinct candidates
            for t in range(max_features):
                state, z = _splitmix64(state)
                k = t + np.int64(z % np.uint64(m - t))
                tmp = cand[t]
                cand[t] = cand[k]
                cand[k] = tmp
            cand = cand[:max_features]
        cand = np.sort(cand)
        f, thr, _g = _node_split(X, y, rows, n_classes, cand, criterion)
        if f < 0:
            continue
        n_left = 0
        for r in rows:
            if X[r, f] <= thr:
                n_left += 1
        lrows = np.empty(n_left, dtype=np.int64)
        rrows = np.empty(len(rows) - n_left, dtype=np.int64)
        a = 0
        b = 0
        for r in rows:
            if X[r, f] <= thr:
                lrows[a] = r
                a += 1
            else:
                rrows[b] = r
                b += 1
        feature[node] = f
        threshold[node] = thr
        l = n_nodes
        rr = n_nodes + 1
        n_nodes += 2
        left[node] = l
        right[node] = rr
        # push right first so the left subtree gets lower node ids
        stack_node[top] = rr
        stack_rows.append(rrows)
        top += 1
        stack_node[top] = l
        stack_rows.append(lrows)
        top += 1
    return feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes], value[:n_nodes]


def best_split(X: np.ndarray, y: np.ndarray, n_classes: int, features: np.ndarray,
               criterion: str) -> tuple[int, float, float] | None:
    """Best ``(feature, threshold, gain)`` over ``features`` or None if no split separates rows."""
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=np.int64)
    feats = np.sort(np.asarray(features, dtype=np.int64))
    if len(y) < 2 or len(feats) == 0:
        return None
    f, thr, gain = _node_split(X, y, np.arange(len(y)), n_classes, feats, _criterion_code(criterion))
    return None if f < 0 else (int(f), float(thr), float(gain))


class DecisionTree:
    """CART classifier over integer class indices ``0..n_classes-1``."""

    def __init__(self, criterion: str = "gini", max_features: int | None = None, seed: int | None = None):
        _criterion_code(criterion)
        self.criterion = criterion
        self.max_features = max_features
        self.seed = seed

    def fit(self, X: np.ndarray, y: np.ndarray, n_classes: int) -> "DecisionTree":
        X = np.ascontiguousarray(X, dtype=float)
        y = np.ascontiguousarray(y, dtype=np.int64)
        self.n_classes = n_classes
        self.n_features = X.shape[1]
        mf = -1 if self.max_features is None else int(self.max_features)
        seed = 0 if self.seed is None else int(self.seed) % 2**64
        (self.feature_, self.threshold_, self.left_, self.right_,
         self.value_) = _grow(X, y, n_classes, _criterion_code(self.criterion), mf, seed)
        return self

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature_[node] >= 0
        while active.any():
            rows = np.flatnonzero(active)
            cur = node[rows]
            go_left = X[rows, self.feature_[cur]] <= self.threshold_[cur]
            node[rows] = np.where(go_left, self.left_[cur], self.right_[cur])
            active = self.feature_[node] >= 0
        return node

    def predict_index(self, X: np.ndarray) -> np.ndarray:
        return self.value_[self.apply(X)]

    def decision_scores(self, X: np.ndarray) -> np.ndarray:
        """One-hot scores of the predicted class, for a uniform model interface."""
        return np.eye(self.n_classes)[self.predict_index(X)]

    def to_dict(self) -> dict:
        return {"criterion": self.criterion, "n_classes": self.n_classes, "n_features": self.n_features,
                "feature": self.feature_.tolist(), "threshold": self.threshold_.tolist(),
                "left": self.left_.tolist(), "right": self.right_.tolist(), "value": self.value_.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        t = cls(criterion=d["criterion"])
        t.n_classes, t.n_features = d["n_classes"], d["n_features"]
        t.feature_ = np.array(d["feature"], dtype=np.int64)
        t.threshold_ = np.array(d["threshold"], dtype=float)
        t.left_ = np.array(d["left"], dtype=np.int64)
        t.right_ = np.array(d["right"], dtype=np.int64)
        t.value_ = np.array(d["value"], dtype=np.int64)
        return t


class RandomForest:
    def __init__(self, n_estimators: int = 10, criterion: str = "gini", max_features: str | int | None = "sqrt",
                 bootstrap: bool = True, seed: int = 0):
        self.n_estimators = int(n_estimators)
        self.criterion = criterion
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.seed = seed

    def _n_split_features(self, d: int) -> int | None:
        if self.max_features is None:
            return None
        if self.max_features == "sqrt":
            return max(1, int(math.sqrt(d)))
        return int(self.max_features)

    def fit(self, X: np.ndarray, y: np.ndarray, n_classes: int) -> "RandomForest":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=np.int64)
        n, d = X.shape
        self.n_classes = n_classes
        m = self._n_split_features(d)
        self.trees_ = []
        for child in np.random.SeedSequence(self.seed).spawn(self.n_estimators):
            rng = np.random.default_rng(child)
            idx = rng.integers(0, n, n) if self.bootstrap else np.arange(n)
            tree_seed = int(rng.integers(0, 2**32 - 1))
            self.trees_.append(DecisionTree(self.criterion, m, tree_seed).fit(X[idx], y[idx], n_classes))
        return self

    def tree_predictions(self, X: np.ndarray) -> np.ndarray:
        return np.stack([t.predict_index(X) for t in self.trees_])  # (n_trees, n_rows)

    def decision_scores(self, X: np.ndarray) -> np.ndarray:
        """Vote counts per class; argmax with lowest-index tie-break is the forest prediction."""
        votes = self.tree_predictions(X)
        return np.stack([(votes == c).sum(axis=0) for c in range(self.n_classes)], axis=1).astype(float)

    def predict_index(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.decision_scores(X), axis=1)

    def to_dict(self) -> dict:
        return {"n_estimators": self.n_estimators, "criterion": self.criterion, "max_features": self.max_features,
                "bootstrap": self.bootstrap, "seed": self.seed, "n_classes": self.n_classes,
                "trees": [t.to_dict() for t in self.trees_]}

    @classmethod
    def from_dict(cls, d: dict) -> "RandomForest":
        f = cls(d["n_estimators"], d["criterion"], d["max_features"], d["bootstrap"], d["seed"])
        f.n_classes = d["n_classes"]
        f.trees_ = [DecisionTree.from_dict(t) for t in d["trees"]]
        return f
