"""Sparse online linear classification via dual averaging.

First- and second-order learners with L1 soft-thresholding, cost-sensitive
variants for imbalanced streams, comparison baselines, and an experiment
harness.
"""
from .sparse_core import DenseWeights, SparseVector, dot, model_sparsity, scaled_add, soft_threshold
from .learners import (
    ConfigError,
    Kind,
    LearnerConfig,
    ModelState,
    RoundOutcome,
    Schedule,
    SparseOnlineLearner,
    make_learner,
)
from .baselines import BaselineConfig, BaselineKind, BaselineLearner
from .data_io import SparseExample, SyntheticSpec, generate_synthetic, load_libsvm, parse_libsvm_line

__version__ = "0.1.0"

__all__ = [
    "BaselineConfig", "BaselineKind", "BaselineLearner", "ConfigError", "DenseWeights",
    "Kind", "LearnerConfig", "ModelState", "RoundOutcome", "Schedule", "SparseExample",
    "SparseOnlineLearner", "SparseVector", "SyntheticSpec", "dot", "generate_synthetic",
    "load_libsvm", "make_learner", "model_sparsity", "parse_libsvm_line", "scaled_add",
    "soft_threshold",
]
