"""Evaluation metrics, the hybrid rule/ML strategy, the experiment protocol, and synthetic corpora."""

from .experiment import ExperimentConfig, ExperimentData, ITERATIONS, run_cell, run_iterations
from .hybrid import MAJOR_CLASSES, MINOR_CLASSES, ConstantModel, MissingRuleLabel, hybrid_classify
from .metrics import INTUITIVE, TEXTUAL, Judgment, KeyMismatch, MetricsReport, micro_macro_prf
from .synth import SynthSpec, generate_synthetic_corpus

__all__ = [
    "ExperimentConfig", "ExperimentData", "ITERATIONS", "run_cell", "run_iterations", "MAJOR_CLASSES",
    "MINOR_CLASSES", "ConstantModel", "MissingRuleLabel", "hybrid_classify", "INTUITIVE", "TEXTUAL",
    "Judgment", "KeyMismatch", "MetricsReport", "micro_macro_prf", "SynthSpec", "generate_synthetic_corpus",
]
