"""CUI-count features and the LR / SVM / DT / RF classifiers."""

from .features import FeatureMatrix, build_feature_matrix, read_features_csv, write_features_csv
from .models import (
    ALGORITHMS,
    DEFAULT_GRIDS,
    CVResult,
    DegenerateLabels,
    Model,
    ParamGrid,
    ShapeMismatch,
    VocabularyMismatch,
    grid_search,
    load_model,
    predict,
    save_model,
    stratified_folds,
    train,
)

__all__ = [
    "ALGORITHMS", "DEFAULT_GRIDS", "CVResult", "DegenerateLabels", "FeatureMatrix", "Model", "ParamGrid",
    "ShapeMismatch", "VocabularyMismatch", "build_feature_matrix", "grid_search", "load_model", "predict",
    "read_features_csv", "save_model", "stratified_folds", "train", "write_features_csv",
]
