"""Class centering, compact eigendecomposition of the pooled covariance, and
projection into the reduced subspace.

When ``p > N`` the eigenvectors of the pooled covariance
``S = N^{-1} X_c^T X_c`` are recovered from the ``N x N`` Gram matrix
``X_c X_c^T = M diag(delta) M^T`` as ``U = X_c^T M diag(delta)^{-1/2}``; the
eigenvalues of ``S`` are ``delta / N``. Otherwise ``S`` is decomposed directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import LabeledDataset
from .errors import DimensionMismatch, InputError, RankZero

DEFAULT_TOLERANCE = 1e-6

# Relative cutoff for mean-difference directions left over after removing the
# span of U1; anything smaller is round-off.
_BETWEEN_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class ReducedSubspace:
    """Column space of the pooled sample covariance, truncated at ``tolerance``.

    Attributes
    ----------
    u1 : ndarray of shape (p, q)
        Orthonormal eigenvectors whose eigenvalues exceed ``tolerance``.
    d_q : ndarray of shape (q,)
        Matching eigenvalues, in descending order.
    tolerance : float
        Absolute cutoff applied to eigenvalues of the pooled covariance.
    between : ndarray of shape (p, r)
        Orthonormal basis of the class-mean differences that fall outside
        ``span(u1)``; ``r <= K - 1``. These directions lie in the null space of
        the pooled covariance, where the regularized covariance equals
        ``gamma * I``. Empty when the subspace was built from centered data
        alone.
    """

    u1: np.ndarray
    d_q: np.ndarray
    tolerance: float = DEFAULT_TOLERANCE
    between: np.ndarray | None = None

    def __post_init__(self):
        if self.between is None:
            object.__setattr__(self, "between", np.zeros((self.u1.shape[0], 0)))

    @property
    def p(self) -> int:
        return self.u1.shape[0]

    @property
    def q(self) -> int:
        return self.u1.shape[1]

    @property
    def r(self) -> int:
        return self.between.shape[1]


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so that each column's largest-magnitude entry is positive."""
    if vectors.size == 0:
        return vectors
    rows = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[rows, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def center_by_class(data: LabeledDataset):
    """Subtract each observation's class mean.

    Rows keep their original order (so ``data.labels`` still applies).

    Returns
    -------
    x_c : ndarray of shape (N, p)
    means : ndarray of shape (K, p)
    """
    x = data.observations
    means = np.zeros((data.k, data.p))
    np.add.at(means, data.labels, x)
    means /= data.class_counts[:, None]
    return x - means[data.labels], means


def compact_svd(x_c, tolerance: float = DEFAULT_TOLERANCE, method: str = "auto") -> ReducedSubspace:
    """Eigenvectors of ``N^{-1} X_c^T X_c`` with eigenvalues above ``tolerance``.

    Parameters
    ----------
    x_c : array-like of shape (N, p)
        Class-centered data.
    tolerance : float
        Absolute eigenvalue cutoff that sets the numerical rank ``q``.
    method : {"auto", "gram", "direct"}
        ``"auto"`` uses the ``N x N`` Gram matrix iff ``p > N``.

    Raises
    ------
    RankZero
        If no eigenvalue exceeds ``tolerance``.
    """
    x_c = np.asarray(x_c, dtype=np.float64)
    if x_c.ndim != 2 or x_c.shape[0] < 1 or x_c.shape[1] < 1:
        raise InputError(f"centered data must be a non-empty 2-D array, got shape {x_c.shape}")
    n, p = x_c.shape
    if method == "auto":
        method = "gram" if p > n else "direct"

    if method == "gram":
        evals, m = np.linalg.eigh(x_c @ x_c.T)
        evals, m = evals[::-1], m[:, ::-1]
        d = evals / n
        keep = d > tolerance
        u1 = (x_c.T @ m[:, keep]) / np.sqrt(evals[keep])
    elif method == "direct":
        evals, u = np.linalg.eigh(x_c.T @ x_c / n)
        d, u = evals[::-1], u[:, ::-1]
        keep = d > tolerance
        u1 = u[:, keep]
    else:
        raise InputError(f"unknown method {method!r}")

    if not np.any(keep):
        raise RankZero(
            f"no eigenvalue of the pooled covariance exceeds tolerance {tolerance:g}"
        )
    return ReducedSubspace(np.ascontiguousarray(_fix_signs(u1)), d[keep].copy(), tolerance)


def between_class_basis(means, u1) -> np.ndarray:
    """Orthonormal basis of ``{mean_k - mean_0}`` after removing ``span(u1)``."""
    means = np.asarray(means, dtype=np.float64)
    p = means.shape[1]
    if means.shape[0] < 2:
        return np.zeros((p, 0))
    diffs = means[1:] - means[0]
    scale = np.max(np.linalg.norm(diffs, axis=1))
    if scale == 0.0:
        return np.zeros((p, 0))
    resid = diffs - (diffs @ u1) @ u1.T
    _, s, vt = np.linalg.svd(resid, full_matrices=False)
    basis = vt[s > _BETWEEN_RTOL * scale].T
    # One more pass keeps the basis orthogonal to u1 at round-off level.
    basis = basis - u1 @ (u1.T @ basis)
    basis, _ = np.linalg.qr(basis)
    return np.ascontiguousarray(_fix_signs(basis))


def reduce(data: LabeledDataset, tolerance: float = DEFAULT_TOLERANCE, method: str = "auto"):
    """Center ``data`` and compute its reduced subspace, including the
    between-class directions.

    Returns
    -------
    subspace : ReducedSubspace
    x_c : ndarray of shape (N, p)
    means : ndarray of shape (K, p)
    """
    x_c, means = center_by_class(data)
    sub = compact_svd(x_c, tolerance, method)
    sub = ReducedSubspace(sub.u1, sub.d_q, tolerance, between_class_basis(means, sub.u1))
    return sub, x_c, means


def project(x, sub: ReducedSubspace) -> np.ndarray:
    """``x @ U1`` for a matrix (or single row) of observations."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != sub.p:
        raise DimensionMismatch(sub.p, x.shape[-1])
    return x @ sub.u1
