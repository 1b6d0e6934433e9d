"""HDRDA covariance estimators and decision rules.

The class-``k`` covariance estimator is

    Sigma_k = alpha_k * ((1 - lam) * S_k + lam * S) + gamma * I_p

where ``S_k`` is the class MLE covariance and ``S`` the pooled MLE covariance.
Classification uses the reduced rule, which works with ``q x q`` matrices

    W_k = alpha_k * ((1 - lam) * U1^T S_k U1 + lam * D_q) + gamma * I_q

and the Woodbury identity, so only ``n_k x n_k`` matrices are ever factorized.
The full ``p x p`` rule (:func:`full_space_scores`) is kept as a reference
implementation for small problems.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import linalg

from .dataset import LabeledDataset
from .errors import Degenerate, DimensionMismatch, InputError, NotPD
from .reduction import ReducedSubspace, center_by_class

# Eigenvalues below PINV_RTOL * (largest eigenvalue) are treated as zero when a
# pseudoinverse or a pseudo-determinant is needed.
PINV_RTOL = 1e-10


class Parameterization(str, Enum):
    """How the class scaling ``alpha_k`` depends on ``gamma``.

    ``RIDGE`` fixes ``alpha_k = 1``; ``CONVEX`` uses ``alpha_k = 1 - gamma``,
    which mirrors Friedman's RDA.
    """

    RIDGE = "ridge"
    CONVEX = "convex"

    def alpha(self, gamma: float) -> float:
        return 1.0 if self is Parameterization.RIDGE else 1.0 - gamma

    def check(self, lambda_: float, gamma: float) -> None:
        if not (0.0 <= lambda_ <= 1.0):
            raise InputError(f"lambda must lie in [0, 1], got {lambda_}")
        if self is Parameterization.RIDGE and not gamma >= 0.0:
            raise InputError(f"gamma must be nonnegative, got {gamma}")
        if self is Parameterization.CONVEX and not (0.0 <= gamma <= 1.0):
            raise InputError(f"gamma must lie in [0, 1] for the convex parameterization, got {gamma}")


@dataclass(frozen=True, eq=False)
class ClassFactor:
    """Per-class quantities needed to score new observations."""

    gamma_diag: np.ndarray
    w_inverse: np.ndarray
    log_det_w: float
    mean_projected: np.ndarray
    mean_full: np.ndarray


@dataclass(frozen=True, eq=False)
class HdrdaModel:
    subspace: ReducedSubspace
    factors: tuple
    lambda_: float
    gamma: float
    parameterization: Parameterization
    classes: np.ndarray

    @property
    def p(self) -> int:
        return self.subspace.p

    @property
    def q(self) -> int:
        return self.subspace.q

    @property
    def k(self) -> int:
        return len(self.factors)


# --------------------------------------------------------------------------
# Covariance building blocks
# --------------------------------------------------------------------------

def class_covariance(data: LabeledDataset, k: int) -> np.ndarray:
    """MLE covariance of class ``k`` (divisor ``n_k``)."""
    rows = data.class_rows(k)
    centered = rows - rows.mean(axis=0)
    return centered.T @ centered / rows.shape[0]


def pooled_covariance(data: LabeledDataset) -> np.ndarray:
    """``N^{-1} sum_k n_k S_k``, the pooled MLE covariance."""
    x_c, _ = center_by_class(data)
    return x_c.T @ x_c / data.n


def hdrda_covariance(data: LabeledDataset, k: int, lambda_: float, gamma: float,
                     param: Parameterization = Parameterization.RIDGE) -> np.ndarray:
    """Full ``p x p`` regularized covariance of class ``k``.

    Only meant for verification on small problems.
    """
    param = Parameterization(param)
    param.check(lambda_, gamma)
    alpha = param.alpha(gamma)
    mixed = (1.0 - lambda_) * class_covariance(data, k) + lambda_ * pooled_covariance(data)
    return alpha * mixed + gamma * np.eye(data.p)


def observation_weights(data: LabeledDataset, k: int, lambda_: float) -> np.ndarray:
    """Weight of each training observation in the class-``k`` estimator.

    ``c_ik = lam / N + (1 - lam) * [y_i == k] / n_k``. Summing
    ``c_ik * x_i x_i^T`` over class-centered ``x_i`` reproduces
    ``(1 - lam) * S_k + lam * S``.
    """
    if not (0.0 <= lambda_ <= 1.0):
        raise InputError(f"lambda must lie in [0, 1], got {lambda_}")
    in_class = (data.labels == k).astype(np.float64)
    return lambda_ / data.n + (1.0 - lambda_) * in_class / data.class_counts[k]


# --------------------------------------------------------------------------
# Reduced-space factors
# --------------------------------------------------------------------------

def gamma_matrix(d_q, lambda_: float, gamma: float, alpha: float) -> np.ndarray:
    """Diagonal of ``alpha * lam * D_q + gamma * I_q``.

    Raises
    ------
    Degenerate
        When every entry is zero, i.e. ``alpha * lam == 0`` and ``gamma == 0``.
    """
    diag = alpha * lambda_ * np.asarray(d_q, dtype=np.float64) + gamma
    if not np.any(diag):
        raise Degenerate("diagonal term is identically zero; use direct_w")
    return diag


def woodbury_factor(xk_proj, d_q, lambda_: float, gamma: float, alpha: float, n_k: int):
    """Inverse and log-determinant of ``W_k`` via Sherman-Woodbury.

    ``W_k = c * A^T A + Gamma`` with ``A = xk_proj`` (class-``k`` rows of the
    centered, projected data), ``c = alpha * (1 - lam) / n_k`` and diagonal
    ``Gamma``. Only ``Gamma`` (diagonal) and the ``n_k x n_k`` matrix
    ``Q = I + c * A Gamma^{-1} A^T`` are inverted.

    Returns
    -------
    w_inverse : ndarray of shape (q, q)
    log_det_w : float
    """
    a = np.asarray(xk_proj, dtype=np.float64)
    g = gamma_matrix(d_q, lambda_, gamma, alpha)
    if np.any(g <= 0.0):
        raise Degenerate("diagonal term is singular; use direct_w")
    g_inv = 1.0 / g
    log_det_gamma = float(np.sum(np.log(g)))
    c = alpha * (1.0 - lambda_) / n_k
    if c == 0.0:
        return np.diag(g_inv), log_det_gamma

    b = a * g_inv  # A Gamma^{-1}
    q_mat = c * (b @ a.T)
    q_mat[np.diag_indices_from(q_mat)] += 1.0
    try:
        chol = linalg.cho_factor(q_mat, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise NotPD(f"Q_k is not positive definite: {exc}") from None
    log_det_q = 2.0 * float(np.sum(np.log(np.diag(chol[0]))))
    correction = b.T @ linalg.cho_solve(chol, b, check_finite=False)
    w_inv = -c * correction
    w_inv[np.diag_indices_from(w_inv)] += g_inv
    w_inv = 0.5 * (w_inv + w_inv.T)
    return w_inv, log_det_gamma + log_det_q


def direct_w(xk_proj, d_q, lambda_: float, gamma: float, alpha: float, n_k: int):
    """Explicitly assemble ``W_k`` and invert it.

    Singular ``W_k`` (only possible at ``lam = gamma = 0``) gets a
    Moore-Penrose pseudoinverse, and its log-determinant is the sum of the
    logs of its positive eigenvalues.
    """
    a = np.asarray(xk_proj, dtype=np.float64)
    g = alpha * lambda_ * np.asarray(d_q, dtype=np.float64) + gamma
    w = (alpha * (1.0 - lambda_) / n_k) * (a.T @ a)
    w[np.diag_indices_from(w)] += g
    if np.all(g > 0.0):
        try:
            chol = linalg.cho_factor(w, lower=True, check_finite=False)
        except linalg.LinAlgError:
            pass
        else:
            w_inv = linalg.cho_solve(chol, np.eye(w.shape[0]), check_finite=False)
            return 0.5 * (w_inv + w_inv.T), 2.0 * float(np.sum(np.log(np.diag(chol[0]))))
    return _pinv_logpdet(w)


def _pinv_logpdet(mat):
    evals, vecs = np.linalg.eigh(mat)
    top = np.max(np.abs(evals)) if evals.size else 0.0
    keep = evals > PINV_RTOL * top
    if not np.any(keep):
        return np.zeros_like(mat), 0.0
    v = vecs[:, keep]
    pinv = (v / evals[keep]) @ v.T
    return 0.5 * (pinv + pinv.T), float(np.sum(np.log(evals[keep])))


def class_factors(z_c, labels, counts, sub: ReducedSubspace, means, lambda_: float,
                  gamma: float, param: Parameterization) -> tuple:
    """Build one :class:`ClassFactor` per class.

    Parameters
    ----------
    z_c : ndarray of shape (N, q)
        Class-centered training data projected onto ``sub.u1``.
    labels : ndarray of shape (N,)
        Class index of every row of ``z_c``.
    counts : ndarray of shape (K,)
    means : ndarray of shape (K, p)
        Class means in the original feature space.
    """
    alpha = param.alpha(gamma)
    means_proj = means @ sub.u1
    factors = []
    for k, n_k in enumerate(counts):
        a = z_c[labels == k]
        try:
            w_inv, log_det = woodbury_factor(a, sub.d_q, lambda_, gamma, alpha, n_k)
        except Degenerate:
            w_inv, log_det = direct_w(a, sub.d_q, lambda_, gamma, alpha, n_k)
        factors.append(ClassFactor(
            gamma_diag=alpha * lambda_ * sub.d_q + gamma,
            w_inverse=w_inv,
            log_det_w=log_det,
            mean_projected=means_proj[k],
            mean_full=means[k],
        ))
    return tuple(factors)


# --------------------------------------------------------------------------
# Decision rules
# --------------------------------------------------------------------------

def _check_columns(x, p):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != p:
        raise DimensionMismatch(p, x.shape[1])
    return x


def scores_from_projections(z, zb, factors, sub: ReducedSubspace, gamma: float) -> np.ndarray:
    """Discriminant scores given test data already projected on ``u1`` (``z``)
    and on ``sub.between`` (``zb``)."""
    out = np.empty((z.shape[0], len(factors)))
    use_between = gamma > 0.0 and sub.r > 0
    for k, f in enumerate(factors):
        d = z - f.mean_projected
        out[:, k] = np.sum((d @ f.w_inverse) * d, axis=1) + f.log_det_w
        if use_between:
            e = zb - f.mean_full @ sub.between
            out[:, k] += np.sum(e * e, axis=1) / gamma
    return out


def discriminant_scores(model: HdrdaModel, x_test) -> np.ndarray:
    """Reduced-space discriminant score of each test row for each class.

    Entry ``(t, k)`` is ``(x_t - m_k)^T U1 W_k^{-1} U1^T (x_t - m_k) + log|W_k|``
    plus, for ``gamma > 0``, ``||B^T (x_t - m_k)||^2 / gamma`` where ``B`` spans
    the class-mean differences outside ``span(U1)``. Terms common to every
    class are dropped, so only differences between columns are meaningful.
    """
    x = _check_columns(x_test, model.p)
    sub = model.subspace
    return scores_from_projections(x @ sub.u1, x @ sub.between, model.factors, sub, model.gamma)


def full_space_scores(data: LabeledDataset, lambda_: float, gamma: float,
                      param: Parameterization, x_test) -> np.ndarray:
    """Reference rule on the full ``p x p`` covariance estimators.

    Uses the pseudoinverse, and the product of positive eigenvalues as the
    determinant, so it is defined for ``gamma == 0``. Cost is ``O(p^3)`` per
    class.
    """
    x = _check_columns(x_test, data.p)
    _, means = center_by_class(data)
    out = np.empty((x.shape[0], data.k))
    for k in range(data.k):
        pinv, log_det = _pinv_logpdet(hdrda_covariance(data, k, lambda_, gamma, param))
        d = x - means[k]
        out[:, k] = np.sum((d @ pinv) * d, axis=1) + log_det
    return out


def predict(model: HdrdaModel, x_test) -> np.ndarray:
    """Class label with the smallest score; ties go to the lower class index."""
    scores = discriminant_scores(model, x_test)
    return model.classes[np.argmin(scores, axis=1)]
