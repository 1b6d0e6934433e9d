"""High-dimensional regularized discriminant analysis."""

from .dataset import LabeledDataset
from .estimator import (
    ClassFactor,
    HdrdaModel,
    Parameterization,
    discriminant_scores,
    full_space_scores,
    predict,
)
from .model_selection import CvReport, TuningGrid, cross_validate, default_grid, fit, fit_cv
from .reduction import ReducedSubspace

__all__ = [
    "ClassFactor",
    "CvReport",
    "HdrdaModel",
    "LabeledDataset",
    "Parameterization",
    "ReducedSubspace",
    "TuningGrid",
    "cross_validate",
    "default_grid",
    "discriminant_scores",
    "fit",
    "fit_cv",
    "full_space_scores",
    "predict",
]

__version__ = "0.1.0"
