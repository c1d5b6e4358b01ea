"""Data-free black-box model attacks driven by synthetic data.

Build an auxiliary dataset from a (stand-in) generative model, refine it with
boundary probing and inter-class filtering, then run model extraction,
membership inference and model inversion against a queried target.
"""

__version__ = "0.1.0"

from .data import Dataset, ProblemSpec, load_csv, make_problem, save_csv, split
from .generator import ConditionalGaussianGenerator, RandomNoiseGenerator, ShiftKnobs
from .mlp import MLPClassifier, MLPRegressor
from .pipeline import PipelineConfig, augment, inter_class_filter, step1_generate
from .target import (
    DefendedTarget,
    DefenseConfig,
    LocalTarget,
    RemoteTarget,
    wrap_with_defense,
)

__all__ = [
    "ConditionalGaussianGenerator",
    "Dataset",
    "DefendedTarget",
    "DefenseConfig",
    "LocalTarget",
    "MLPClassifier",
    "MLPRegressor",
    "PipelineConfig",
    "ProblemSpec",
    "RandomNoiseGenerator",
    "RemoteTarget",
    "ShiftKnobs",
    "augment",
    "inter_class_filter",
    "load_csv",
    "make_problem",
    "save_csv",
    "split",
    "step1_generate",
    "wrap_with_defense",
]
