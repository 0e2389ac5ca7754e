"""Uniform train / predict / grid-search interface over the four classifiers."""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from ..errors import PhenopipeError
from .features import FeatureMatrix
from .logistic import BinaryLogisticRegression
from .svm import BinarySVM
from .tree import DecisionTree, RandomForest

ALGORITHMS = ("LR", "SVM", "DT", "RF")
MODEL_FORMAT = "phenopipe-model"
MODEL_VERSION = 1


class DegenerateLabels(PhenopipeError):
    pass


class ShapeMismatch(PhenopipeError):
    pass


class VocabularyMismatch(PhenopipeError):
    pass


def normalize_algorithm(name: str) -> str:
    algo = name.upper()
    if algo not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {name!r}; expected one of {ALGORITHMS}")
    return algo


@dataclass
class ParamGrid:
    algorithm: str
    params: dict[str, list]

    def __post_init__(self):
        self.algorithm = normalize_algorithm(self.algorithm)

    def combinations(self) -> list[dict[str, Any]]:
        keys = list(self.params)
        return [dict(zip(keys, values)) for values in itertools.product(*(self.params[k] for k in keys))]

    @classmethod
    def default(cls, algorithm: str) -> "ParamGrid":
        algo = normalize_algorithm(algorithm)
        return cls(algo, {k: list(v) for k, v in DEFAULT_GRIDS[algo].items()})


DEFAULT_GRIDS: dict[str, dict[str, list]] = {
    "LR": {"C": [0.01, 0.1, 1, 10, 100]},
    "SVM": {"C": [0.01, 0.1, 1, 10, 100], "kernel": ["linear", "rbf"]},
    "DT": {"criterion": ["gini", "entropy"]},
    "RF": {"n_estimators": [5, 10, 30, 50, 80, 100], "criterion": ["gini", "entropy"]},
}


@dataclass
class Model:
    algorithm: str
    class_labels: list[str]
    params: dict[str, Any]
    rng_seed: int
    vocabulary: list[str]
    estimators: list = field(default_factory=list, repr=False)

    def decision_scores(self, X: np.ndarray) -> np.ndarray:
        """Per-class scores, shape (rows, classes); the prediction is the row argmax."""
        X = np.asarray(X, dtype=float)
        if self.algorithm in ("DT", "RF"):
            return self.estimators[0].decision_scores(X)
        if len(self.class_labels) == 2:
            f = self.estimators[0].decision_function(X)
            return np.stack([-f, f], axis=1)
        return np.stack([e.decision_function(X) for e in self.estimators], axis=1)

    def predict_matrix(self, X: np.ndarray) -> list[str]:
        # np.argmax returns the first maximum: ties go to the lowest class index
        idx = np.argmax(self.decision_scores(X), axis=1)
        return [self.class_labels[i] for i in idx]


def _check_xy(X: FeatureMatrix, y: Sequence[str]) -> list[str]:
    y = list(y)
    if len(y) != X.counts.shape[0]:
        raise ShapeMismatch(f"{len(y)} labels for {X.counts.shape[0]} feature rows")
    if len(y) < 2:
        raise ShapeMismatch("at least two training rows are required")
    if len(set(y)) < 2:
        raise DegenerateLabels(f"training labels contain a single class {y[0]!r}")
    return y


def _binary_estimator(algorithm: str, params: dict):
    if algorithm == "LR":
        return BinaryLogisticRegression(C=params.get("C", 1.0))
    return BinarySVM(C=params.get("C", 1.0), kernel=params.get("kernel", "linear"), gamma=params.get("gamma"))


def train(algorithm: str, X: FeatureMatrix, y: Sequence[str], params: dict | None = None, seed: int = 0) -> Model:
    algo = normalize_algorithm(algorithm)
    y = _check_xy(X, y)
    params = dict(params or {})
    classes = sorted(set(y))
    yi = np.array([classes.index(v) for v in y])
    A = X.counts.astype(float)
    model = Model(algo, classes, params, seed, list(X.vocabulary))
    if algo in ("LR", "SVM"):
        targets = [1] if len(classes) == 2 else range(len(classes))
        for c in targets:
            yb = np.where(yi == c, 1.0, -1.0)
            model.estimators.append(_binary_estimator(algo, params).fit(A, yb))
    elif algo == "DT":
        tree = DecisionTree(params.get("criterion", "gini"), params.get("max_features"), seed)
        model.estimators.append(tree.fit(A, yi, len(classes)))
    else:
        forest = RandomForest(params.get("n_estimators", 10), params.get("criterion", "gini"),
                              params.get("max_features", "sqrt"), params.get("bootstrap", True), seed)
        model.estimators.append(forest.fit(A, yi, len(classes)))
    return model


def predict(model: Model, X: FeatureMatrix) -> list[str]:
    if list(X.vocabulary) != list(model.vocabulary):
        raise VocabularyMismatch("feature vocabulary differs from the model's training vocabulary")
    return model.predict_matrix(X.counts)


# --- cross-validated grid search -----------------------------------------

@dataclass(frozen=True)
class CVResult:
    params: dict
    mean_score: float
    fold_scores: tuple[float, ...]


def stratified_folds(y: Sequence[str], folds: int, seed: int) -> list[np.ndarray]:
    """Test-index arrays for ``folds`` stratified folds, seeded."""
    rng = np.random.default_rng(seed)
    y = np.asarray(list(y))
    buckets: list[list[int]] = [[] for _ in range(folds)]
    slot = 0
    for c in sorted(set(y.tolist())):
        members = np.flatnonzero(y == c)
        rng.shuffle(members)
        for i in members:
            buckets[slot % folds].append(int(i))
            slot += 1
    return [np.array(sorted(b), dtype=np.int64) for b in buckets]


def _fold_accuracy(algorithm, X, y, train_idx, test_idx, params, seed) -> float:
    y_train = [y[i] for i in train_idx]
    Xtr = FeatureMatrix([X.row_ids[i] for i in train_idx], X.vocabulary, X.counts[train_idx])
    if len(set(y_train)) == 1:
        preds = [y_train[0]] * len(test_idx)
    else:
        preds = train(algorithm, Xtr, y_train, params, seed).predict_matrix(X.counts[test_idx])
    return float(np.mean([p == y[i] for p, i in zip(preds, test_idx)]))


def grid_search(algorithm: str, X: FeatureMatrix, y: Sequence[str], grid: ParamGrid | None = None,
                folds: int = 3, seed: int = 0) -> tuple[dict, list[CVResult]]:
    """Pick the first grid combination with the highest mean stratified-CV accuracy."""
    algo = normalize_algorithm(algorithm)
    y = _check_xy(X, y)
    grid = grid if grid is not None else ParamGrid.default(algo)
    min_count = min(y.count(c) for c in set(y))
    if min_count < folds:
        reduced = max(2, min_count)
        warnings.warn(f"smallest class has {min_count} members; using {reduced} folds instead of {folds}",
                      RuntimeWarning)
        folds = reduced
    test_sets = stratified_folds(y, folds, seed)
    all_idx = np.arange(len(y))
    results = []
    for params in grid.combinations():
        scores = tuple(
            _fold_accuracy(algo, X, y, np.setdiff1d(all_idx, test), test, params, seed)
            for test in test_sets if len(test)
        )
        results.append(CVResult(params, float(np.mean(scores)), scores))
    best = max(results, key=lambda r: r.mean_score)  # max() keeps the first maximal element
    return dict(best.params), results


# --- serialization ---------------------------------------------------------

_ESTIMATOR_TYPES = {"LR": BinaryLogisticRegression, "SVM": BinarySVM, "DT": DecisionTree, "RF": RandomForest}


def model_to_dict(model: Model) -> dict:
    return {
        "format": MODEL_FORMAT, "version": MODEL_VERSION, "algorithm": model.algorithm,
        "class_labels": model.class_labels, "params": model.params, "rng_seed": model.rng_seed,
        "vocabulary": model.vocabulary, "estimators": [e.to_dict() for e in model.estimators],
    }


def model_from_dict(d: dict) -> Model:
    if d.get("format") != MODEL_FORMAT:
        raise ValueError("not a phenopipe model file")
    if d.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {d.get('version')}")
    cls = _ESTIMATOR_TYPES[d["algorithm"]]
    return Model(d["algorithm"], list(d["class_labels"]), dict(d["params"]), d["rng_seed"],
                 list(d["vocabulary"]), [cls.from_dict(e) for e in d["estimators"]])


def save_model(model: Model, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)), encoding="utf-8")


def load_model(path: str | Path) -> Model:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
