"""Cross-validated selection of the pooling and shrinkage parameters.

Each fold computes the class means, the compact eigendecomposition and the
projections of its training and held-out rows exactly once; every grid point
then only needs the cheap per-class factors in the ``q``-dimensional subspace.
"""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dataset import LabeledDataset
from .errors import EmptyGrid, InputError
from .estimator import HdrdaModel, Parameterization, class_factors, scores_from_projections
from .reduction import DEFAULT_TOLERANCE, reduce

logger = logging.getLogger(__name__)

DEFAULT_FOLDS = 10
RIDGE_GAMMAS = (1e-1, 1e0, 1e1, 1e2, 1e3, 1e4, 1e5)


def _unit_grid():
    return np.round(np.linspace(0.0, 1.0, 21), 12)


@dataclass(frozen=True, eq=False)
class TuningGrid:
    """Candidate ``(lambda, gamma)`` pairs, as the product of two sorted axes."""

    lambdas: np.ndarray
    gammas: np.ndarray
    parameterization: Parameterization = Parameterization.RIDGE

    def __post_init__(self):
        param = Parameterization(self.parameterization)
        lambdas = np.asarray(self.lambdas, dtype=np.float64).ravel()
        gammas = np.asarray(self.gammas, dtype=np.float64).ravel()
        if lambdas.size == 0 or gammas.size == 0:
            raise EmptyGrid("tuning grid must contain at least one lambda and one gamma")
        for name, axis in (("lambda", lambdas), ("gamma", gammas)):
            if np.any(np.diff(axis) <= 0):
                raise InputError(f"{name} grid must be sorted ascending without duplicates")
        if lambdas[0] < 0 or lambdas[-1] > 1:
            raise InputError("lambda grid must lie within [0, 1]")
        if gammas[0] < 0:
            raise InputError("gamma grid must be nonnegative")
        if param is Parameterization.CONVEX and gammas[-1] > 1:
            raise InputError("convex parameterization requires gammas in [0, 1]")
        object.__setattr__(self, "lambdas", lambdas)
        object.__setattr__(self, "gammas", gammas)
        object.__setattr__(self, "parameterization", param)

    @classmethod
    def from_values(cls, lambdas, gammas, parameterization=Parameterization.RIDGE):
        """Sort and deduplicate arbitrary candidate values."""
        return cls(np.unique(lambdas), np.unique(gammas), parameterization)

    @property
    def shape(self):
        return (self.lambdas.size, self.gammas.size)


def default_grid(param=Parameterization.RIDGE) -> TuningGrid:
    """21 equidistant lambdas on [0, 1]; gammas ``10^-1..10^5`` (ridge) or the
    same 21 values as lambda (convex)."""
    param = Parameterization(param)
    gammas = RIDGE_GAMMAS if param is Parameterization.RIDGE else _unit_grid()
    return TuningGrid(_unit_grid(), np.asarray(gammas, dtype=np.float64), param)


@dataclass(frozen=True, eq=False)
class CvReport:
    grid: TuningGrid
    fold_counts: np.ndarray  # (V, G, H) held-out misclassifications
    n: int
    seed: int
    folds: int
    best: tuple = field(init=False)
    small_classes: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "best", select_best(self))

    @property
    def errors(self) -> np.ndarray:
        return self.fold_counts.sum(axis=0) / self.n

    @property
    def misclassified(self) -> np.ndarray:
        return self.fold_counts.sum(axis=0)


def make_folds(labels, v: int, seed: int = 0) -> np.ndarray:
    """Stratified fold assignment.

    Rows of each class are shuffled and dealt round-robin, with the dealing
    position carried over from one class to the next, so fold sizes differ by
    at most one both overall and within every class. The permutations come
    from ``numpy.random.Generator(PCG64(seed))``.
    """
    labels = np.asarray(labels)
    n = labels.shape[0]
    if not (2 <= v <= n):
        raise InputError(f"number of folds must lie in [2, {n}], got {v}")
    rng = np.random.Generator(np.random.PCG64(seed))
    folds = np.empty(n, dtype=np.intp)
    offset = 0
    for cls in np.unique(labels):
        rows = np.flatnonzero(labels == cls)
        rows = rows[rng.permutation(rows.size)]
        folds[rows] = (offset + np.arange(rows.size)) % v
        offset += rows.size
    return folds


def _fold_tallies(data: LabeledDataset, test_rows, grid: TuningGrid, tolerance: float):
    train = data.subset(~test_rows)
    sub, x_c, means = reduce(train, tolerance)
    z_c = x_c @ sub.u1
    x_test = data.observations[test_rows]
    y_test = data.labels[test_rows]
    z_test = x_test @ sub.u1
    zb_test = x_test @ sub.between
    param = grid.parameterization

    counts = np.zeros(grid.shape, dtype=np.int64)
    for g, lam in enumerate(grid.lambdas):
        for h, gam in enumerate(grid.gammas):
            factors = class_factors(z_c, train.labels, train.class_counts, sub, means, lam, gam, param)
            scores = scores_from_projections(z_test, zb_test, factors, sub, gam)
            counts[g, h] = np.count_nonzero(np.argmin(scores, axis=1) != y_test)
    return counts


def cross_validate(data: LabeledDataset, grid: TuningGrid | None = None, v: int = DEFAULT_FOLDS,
                   seed: int = 0, tolerance: float = DEFAULT_TOLERANCE, threads: int = 1) -> CvReport:
    """V-fold cross-validation error of every grid point.

    Folds are independent and may run on ``threads`` worker threads; the
    result does not depend on the thread count.
    """
    if grid is None:
        grid = default_grid()
    if np.any(data.class_counts < 2):
        small = [data.classes[k] for k in np.flatnonzero(data.class_counts < 2)]
        raise InputError(f"cross-validation needs at least 2 observations per class; {small} have fewer")
    small = tuple(data.classes[k].item() for k in np.flatnonzero(data.class_counts < v))
    if small:
        warnings.warn(f"classes {list(small)} have fewer than {v} observations and "
                      "are missing from some folds", stacklevel=2)

    folds = make_folds(data.labels, v, seed)

    def run(fold):
        logger.debug("fold %d/%d", fold + 1, v)
        return _fold_tallies(data, folds == fold, grid, tolerance)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            tallies = list(pool.map(run, range(v)))
    else:
        tallies = [run(fold) for fold in range(v)]
    return CvReport(grid, np.stack(tallies), data.n, seed, v, small)


def select_best(report: CvReport):
    """Grid point with the fewest misclassifications.

    Ties go to the larger lambda, then the larger gamma.
    """
    total = report.fold_counts.sum(axis=0)
    g, h = np.argwhere(total == total.min())[-1]
    return float(report.grid.lambdas[g]), float(report.grid.gammas[h])


def fit(data: LabeledDataset, lambda_: float, gamma: float, param=Parameterization.RIDGE,
        tolerance: float = DEFAULT_TOLERANCE) -> HdrdaModel:
    """Fit the classifier at fixed tuning parameters."""
    param = Parameterization(param)
    param.check(lambda_, gamma)
    sub, x_c, means = reduce(data, tolerance)
    factors = class_factors(x_c @ sub.u1, data.labels, data.class_counts, sub, means,
                            float(lambda_), float(gamma), param)
    return HdrdaModel(sub, factors, float(lambda_), float(gamma), param, data.classes)


def fit_cv(data: LabeledDataset, param=Parameterization.RIDGE, grid: TuningGrid | None = None,
           v: int = DEFAULT_FOLDS, seed: int = 0, tolerance: float = DEFAULT_TOLERANCE,
           threads: int = 1):
    """Cross-validate over ``grid`` and refit on all of ``data`` at the best point.

    Returns
    -------
    model : HdrdaModel
    report : CvReport
    """
    if grid is None:
        grid = default_grid(param)
    report = cross_validate(data, grid, v, seed, tolerance, threads)
    lam, gam = report.best
    return fit(data, lam, gam, grid.parameterization, tolerance), report
