"""Synthetic three-class populations with block-AR(1) covariances and
contaminated-normal outliers, plus a train/test error harness.

Random streams: every replication gets its own ``Generator(PCG64)`` spawned
from ``SeedSequence(seed)``. Within a replication, classes are drawn in order,
training sets first and then test sets; each draw consumes ``n`` uniforms
(contamination flags) followed by ``n * p`` standard normals.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .dataset import LabeledDataset
from .errors import BadDimension, InputError, NotPD
from .model_selection import DEFAULT_FOLDS, fit_cv
from .estimator import Parameterization, predict


@dataclass(frozen=True)
class SimulationConfig:
    p: int = 100
    block_size: int = 100
    rho: tuple = (0.1, 0.5, 0.9)
    epsilon: float = 0.0
    eta: float = 100.0
    n_train: tuple = (25, 25, 25)
    n_test: int = 2000
    mean_shift: float = 0.5
    replications: int = 50
    seed: int = 1

    def __post_init__(self):
        if self.block_size < 1 or self.p < 1 or self.p % self.block_size:
            raise BadDimension(f"p={self.p} is not a multiple of block_size={self.block_size}")
        if len(self.rho) != len(self.n_train):
            raise InputError("rho and n_train must have one entry per class")
        if len(self.rho) > 3:
            raise InputError("the mean recipe defines at most three classes")
        if any(not (-1.0 < r < 1.0) for r in self.rho):
            raise InputError("every rho must lie in (-1, 1)")
        if not (0.0 <= self.epsilon <= 1.0):
            raise InputError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if not self.eta > 1.0:
            raise InputError(f"eta must exceed 1, got {self.eta}")
        if min(self.n_train) < 1 or self.n_test < 1 or self.replications < 1:
            raise InputError("sample sizes and replications must be positive")

    @property
    def k(self) -> int:
        return len(self.rho)

    def means(self) -> np.ndarray:
        """``mu_1 = 0``, ``mu_2`` = ``mean_shift`` on the first block, ``mu_3 = -mu_2``."""
        mu = np.zeros((3, self.p))
        mu[1, :self.block_size] = self.mean_shift
        mu[2] = -mu[1]
        return mu[:self.k]


def block_covariance(p: int, block_size: int, rho: float) -> np.ndarray:
    """Direct sum of AR(1) blocks ``rho^|i-j|`` with signs alternating
    ``rho, -rho, rho, ...`` (the first block uses ``+rho``)."""
    if block_size < 1 or p % block_size:
        raise BadDimension(f"p={p} is not a multiple of block_size={block_size}")
    if not (-1.0 < rho < 1.0):
        raise InputError(f"rho must lie in (-1, 1), got {rho}")
    lag = np.abs(np.subtract.outer(np.arange(block_size), np.arange(block_size)))
    blocks = [np.power(r, lag) for r in (rho, -rho)]
    return linalg.block_diag(*(blocks[b % 2] for b in range(p // block_size)))


def _factor(sigma):
    """Lower-triangular ``L`` with ``L L^T = sigma``; falls back to an
    eigenvalue-clipped square root for numerically singular input."""
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        evals, vecs = np.linalg.eigh(sigma)
        if evals.min() < -1e-8 * max(evals.max(), 1.0):
            raise NotPD("covariance matrix is not positive semidefinite") from None
        return vecs * np.sqrt(np.clip(evals, 0.0, None))


def sample_contaminated(mu, sigma, n: int, epsilon: float, eta: float, rng,
                        factor=None) -> np.ndarray:
    """Draw ``n`` rows from ``(1 - eps) N(mu, sigma) + eps N(mu, eta * sigma)``.

    Parameters
    ----------
    factor : ndarray, optional
        Precomputed square root of ``sigma`` (saves a Cholesky per call).
    """
    mu = np.asarray(mu, dtype=np.float64)
    if factor is None:
        factor = _factor(np.asarray(sigma, dtype=np.float64))
    contaminated = rng.random(n) < epsilon
    z = rng.standard_normal((n, mu.size)) @ factor.T
    z[contaminated] *= math.sqrt(eta)
    return mu + z


def draw_populations(config: SimulationConfig, rng):
    """One training set and one test set (``n_test`` rows per class)."""
    mus = config.means()
    factors = [_factor(block_covariance(config.p, config.block_size, r)) for r in config.rho]

    def draw(sizes):
        rows = [sample_contaminated(mus[k], None, n, config.epsilon, config.eta, rng, factors[k])
                for k, n in enumerate(sizes)]
        labels = np.repeat(np.arange(config.k), sizes)
        return LabeledDataset(np.vstack(rows), labels, np.arange(1, config.k + 1))

    train = draw(config.n_train)
    test = draw([config.n_test] * config.k)
    return train, test


def hdrda_classifier(param=Parameterization.RIDGE, folds: int = DEFAULT_FOLDS, seed: int = 0):
    """Fit-predict procedure that tunes by cross-validation on the training set."""
    def run(train: LabeledDataset, x_test):
        model, _ = fit_cv(train, param, v=folds, seed=seed)
        return predict(model, x_test)
    return run


@dataclass
class ExperimentResult:
    records: list = field(default_factory=list)  # (replication, classifier, p, epsilon, error)

    def errors(self, classifier) -> np.ndarray:
        return np.array([r[4] for r in self.records if r[1] == classifier])

    def summary(self) -> dict:
        """``{classifier: (mean error, standard error)}``."""
        out = {}
        for name in dict.fromkeys(r[1] for r in self.records):
            e = self.errors(name)
            se = e.std(ddof=1) / math.sqrt(e.size) if e.size > 1 else float("nan")
            out[name] = (float(e.mean()), float(se))
        return out


def run_experiment(config: SimulationConfig, classifiers: dict, threads: int = 1) -> ExperimentResult:
    """Test error of each classifier on ``config.replications`` fresh draws.

    ``classifiers`` maps a name to ``f(train: LabeledDataset, x_test) -> labels``.
    """
    seeds = np.random.SeedSequence(config.seed).spawn(config.replications)

    def replicate(i):
        rng = np.random.Generator(np.random.PCG64(seeds[i]))
        train, test = draw_populations(config, rng)
        truth = test.classes[test.labels]
        rows = []
        for name, clf in classifiers.items():
            pred = np.asarray(clf(train, test.observations))
            rows.append((i, name, config.p, config.epsilon, float(np.mean(pred != truth))))
        return rows

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(replicate, range(config.replications)))
    else:
        chunks = [replicate(i) for i in range(config.replications)]
    return ExperimentResult([row for chunk in chunks for row in chunk])
