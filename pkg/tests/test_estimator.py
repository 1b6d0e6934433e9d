import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_instance
from hdrda import LabeledDataset, Parameterization, discriminant_scores, fit, full_space_scores, predict
from hdrda.errors import Degenerate, DimensionMismatch
from hdrda.estimator import (
    class_covariance,
    direct_w,
    gamma_matrix,
    hdrda_covariance,
    observation_weights,
    pooled_covariance,
    woodbury_factor,
)
from hdrda.model_selection import default_grid
from hdrda.reduction import center_by_class, reduce

RIDGE, CONVEX = Parameterization.RIDGE, Parameterization.CONVEX


def brute_w(a, d_q, lam, gam, alpha, n_k):
    """W_k assembled from its definition, alpha*((1-lam) A^T A / n_k + lam*D) + gam*I."""
    return alpha * ((1 - lam) * a.T @ a / n_k + lam * np.diag(d_q)) + gam * np.eye(len(d_q))


# -- covariance building blocks ------------------------------------------------

def test_pooled_covariance_hand_example(two_class_2d):
    np.testing.assert_allclose(pooled_covariance(two_class_2d), [[0.5, 0.0], [0.0, 0.5]], atol=1e-15)


def test_pooled_covariance_identical_rows_is_zero():
    data = LabeledDataset.from_labels(np.ones((6, 3)), [0, 0, 0, 1, 1, 1])
    assert not np.any(pooled_covariance(data))


def test_pooled_covariance_single_class_equals_class_covariance(rng):
    data = LabeledDataset.from_labels(rng.normal(size=(7, 4)), [0] * 7)
    np.testing.assert_allclose(pooled_covariance(data), class_covariance(data, 0), atol=1e-15)


def test_class_covariance_hand_example(two_class_2d):
    np.testing.assert_allclose(class_covariance(two_class_2d, 0), [[1.0, 0.0], [0.0, 0.0]], atol=1e-15)


def test_class_covariance_single_row_is_zero(rng):
    data = LabeledDataset.from_labels(rng.normal(size=(4, 3)), [0, 1, 1, 1])
    assert not np.any(class_covariance(data, 0))


def test_class_covariance_rank_bound(rng):
    data = LabeledDataset.from_labels(rng.normal(size=(3, 10)), [0, 0, 0])
    s = class_covariance(data, 0)
    assert np.linalg.matrix_rank(s, tol=1e-10) <= 3
    # Centering removes one more dimension.
    assert np.linalg.matrix_rank(s, tol=1e-10) == 2


def test_hdrda_covariance_hand_example(two_class_2d):
    got = hdrda_covariance(two_class_2d, 0, 0.5, 0.1, RIDGE)
    np.testing.assert_allclose(got, [[0.85, 0.0], [0.0, 0.35]], atol=1e-15)


def test_hdrda_covariance_endpoints(rng):
    data, _ = random_instance(rng, p=8, n=12, k=3)
    for k in range(3):
        np.testing.assert_allclose(hdrda_covariance(data, k, 1.0, 0.0), pooled_covariance(data),
                                   rtol=0, atol=1e-15)
        np.testing.assert_allclose(hdrda_covariance(data, k, 0.0, 0.0), class_covariance(data, k),
                                   rtol=0, atol=1e-15)


def test_hdrda_covariance_convex_at_gamma_one_is_identity(rng):
    data, _ = random_instance(rng, p=6, n=10, k=2)
    np.testing.assert_array_equal(hdrda_covariance(data, 1, 0.3, 1.0, CONVEX), np.eye(6))


@pytest.mark.parametrize("lam, gam", [(-0.1, 1.0), (1.2, 1.0), (0.5, -1.0)])
def test_hdrda_covariance_rejects_out_of_range(two_class_2d, lam, gam):
    with pytest.raises(ValueError):
        hdrda_covariance(two_class_2d, 0, lam, gam)


def test_convex_rejects_gamma_above_one(two_class_2d):
    with pytest.raises(ValueError):
        hdrda_covariance(two_class_2d, 0, 0.5, 1.5, CONVEX)


def test_covariances_are_psd(rng):
    data, _ = random_instance(rng, p=20, n=15, k=3)
    mats = [pooled_covariance(data)] + [class_covariance(data, k) for k in range(3)]
    mats += [hdrda_covariance(data, k, 0.3, 0.0) for k in range(3)]
    for m in mats:
        np.testing.assert_array_equal(m, m.T)
        evals = np.linalg.eigvalsh(m)
        assert evals.min() >= -1e-10 * evals.max()


# -- observation weights ---------------------------------------------------------

def test_weights_at_lambda_one_are_uniform(rng):
    data, _ = random_instance(rng, p=5, n=10, k=2)
    np.testing.assert_allclose(observation_weights(data, 0, 1.0), 1 / 10)


def test_weights_at_lambda_zero_are_class_indicators(rng):
    data, _ = random_instance(rng, p=5, n=10, k=2)
    w = observation_weights(data, 1, 0.0)
    expected = np.where(data.labels == 1, 1 / data.class_counts[1], 0.0)
    np.testing.assert_array_equal(w, expected)


def test_weights_hand_example():
    data = LabeledDataset.from_labels(np.zeros((4, 1)), [0, 0, 1, 1])
    np.testing.assert_allclose(observation_weights(data, 0, 0.5), [0.375, 0.375, 0.125, 0.125])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), lam=st.floats(0.0, 1.0))
def test_weighted_crossproducts_reproduce_convex_combination(seed, lam):
    rng = np.random.default_rng(seed)
    data, _ = random_instance(rng, p=int(rng.integers(2, 12)), n=int(rng.integers(8, 20)), k=3)
    x_c, _ = center_by_class(data)
    for k in range(data.k):
        w = observation_weights(data, k, lam)
        assert np.all(w[data.labels == k] >= w[data.labels != k].max(initial=0.0))
        weighted = (x_c * w[:, None]).T @ x_c
        expected = (1 - lam) * class_covariance(data, k) + lam * pooled_covariance(data)
        np.testing.assert_allclose(weighted, expected, rtol=0, atol=1e-12)


# -- reduced-space factors -------------------------------------------------------

def test_gamma_matrix_values():
    np.testing.assert_allclose(gamma_matrix([2.0, 1.0], 0.5, 0.1, 1.0), [1.1, 0.6])


def test_gamma_matrix_degenerate_at_origin():
    with pytest.raises(Degenerate):
        gamma_matrix([2.0, 1.0], 0.0, 0.0, 1.0)


def test_gamma_matrix_convex_gamma_one():
    np.testing.assert_array_equal(gamma_matrix([5.0, 3.0, 0.2], 0.7, 1.0, CONVEX.alpha(1.0)), 1.0)


def test_gamma_matrix_is_class_constant(rng):
    data, _ = random_instance(rng, p=30, n=20, k=3)
    sub, _, _ = reduce(data)
    for param in (RIDGE, CONVEX):
        for gam in default_grid(param).gammas[:3]:
            model = fit(data, 0.4, gam, param)
            diags = np.stack([f.gamma_diag for f in model.factors])
            np.testing.assert_array_equal(diags, diags[:1].repeat(3, axis=0))


def test_woodbury_lambda_one_reduces_to_diagonal(rng):
    a = rng.normal(size=(3, 4))
    d = np.array([3.0, 2.0, 1.0, 0.5])
    w_inv, log_det = woodbury_factor(a, d, 1.0, 0.2, 1.0, 3)
    np.testing.assert_allclose(w_inv, np.diag(1 / (d + 0.2)))
    assert log_det == pytest.approx(np.sum(np.log(d + 0.2)))


def test_woodbury_convex_gamma_one_is_identity(rng):
    w_inv, log_det = woodbury_factor(rng.normal(size=(3, 4)), np.ones(4), 0.3, 1.0, 0.0, 3)
    np.testing.assert_array_equal(w_inv, np.eye(4))
    assert log_det == 0.0


def test_woodbury_matches_brute_force_inverse(rng):
    a = rng.normal(size=(3, 2))
    a -= a.mean(axis=0)
    d = np.array([2.5, 0.7])
    w_inv, log_det = woodbury_factor(a, d, 0.5, 0.1, 1.0, 3)
    w = brute_w(a, d, 0.5, 0.1, 1.0, 3)
    ref = np.linalg.inv(w)
    assert np.linalg.norm(w_inv - ref) / np.linalg.norm(ref) < 1e-10
    assert abs(log_det - np.linalg.slogdet(w)[1]) < 1e-10 * abs(np.linalg.slogdet(w)[1]) + 1e-12


def test_woodbury_raises_on_degenerate():
    with pytest.raises(Degenerate):
        woodbury_factor(np.ones((2, 2)), np.ones(2), 0.0, 0.0, 1.0, 2)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), lam=st.floats(0.0, 1.0), gam=st.floats(1e-3, 1e3),
       convex=st.booleans())
def test_woodbury_agrees_with_direct(seed, lam, gam, convex):
    rng = np.random.default_rng(seed)
    n_k, q = int(rng.integers(1, 8)), int(rng.integers(1, 15))
    a = rng.normal(size=(n_k, q)) * rng.uniform(0.1, 3.0)
    d = np.sort(rng.uniform(0.01, 5.0, q))[::-1]
    if convex:
        gam = min(gam, 1.0)
    alpha = (CONVEX if convex else RIDGE).alpha(gam)
    w_inv, log_det = woodbury_factor(a, d, lam, gam, alpha, n_k)
    ref_inv, ref_log_det = direct_w(a, d, lam, gam, alpha, n_k)
    assert np.linalg.norm(w_inv - ref_inv) <= 1e-10 * np.linalg.norm(ref_inv)
    assert abs(log_det - ref_log_det) <= 1e-10 * max(1.0, abs(ref_log_det))


def test_direct_w_singular_uses_pseudoinverse(rng):
    a = rng.normal(size=(2, 5))
    a -= a.mean(axis=0)
    d = np.linspace(3, 1, 5)
    w_inv, log_det = direct_w(a, d, 0.0, 0.0, 1.0, 2)
    w = a.T @ a / 2
    np.testing.assert_allclose(w_inv, np.linalg.pinv(w, rcond=1e-10), atol=1e-10)
    evals = np.linalg.eigvalsh(w)
    assert log_det == pytest.approx(np.sum(np.log(evals[evals > 1e-10 * evals.max()])))


def test_direct_w_scalar_case():
    a = np.array([[1.0], [-2.0], [1.0]])
    w = 0.5 * 0.6 * 6.0 / 3 + 0.5 * 0.4 * 2.0 + 0.3  # alpha*(1-lam)*sum(x^2)/n + alpha*lam*d + gamma
    w_inv, log_det = direct_w(a, np.array([2.0]), 0.4, 0.3, 0.5, 3)
    assert w_inv[0, 0] == pytest.approx(1 / w)
    assert log_det == pytest.approx(np.log(w))


def test_direct_w_all_zero_matrix():
    w_inv, log_det = direct_w(np.zeros((1, 3)), np.ones(3), 0.0, 0.0, 1.0, 1)
    assert not np.any(w_inv)
    assert log_det == 0.0


# -- decision rule -------------------------------------------------------------

def test_score_at_class_mean_is_log_det(rng):
    data, _ = random_instance(rng, p=25, n=18, k=3)
    model = fit(data, 0.3, 0.5)
    for k, f in enumerate(model.factors):
        s = discriminant_scores(model, f.mean_full)
        assert s[0, k] == pytest.approx(f.log_det_w, abs=1e-10)


def test_batched_scores_equal_row_by_row(rng):
    data, xt = random_instance(rng, p=40, n=20, k=3, n_test=25)
    model = fit(data, 0.25, 1.0)
    batch = discriminant_scores(model, xt)
    sub = model.subspace
    for t, x in enumerate(xt):
        for k, f in enumerate(model.factors):
            d = (x - f.mean_full) @ sub.u1
            e = (x - f.mean_full) @ sub.between
            s = d @ f.w_inverse @ d + f.log_det_w + e @ e / model.gamma
            assert abs(batch[t, k] - s) <= 1e-12 * max(1.0, abs(s))


def test_reduced_rule_matches_full_space_oracle(rng):
    data, xt = random_instance(rng, p=20, n=15, k=3, n_test=30)
    for param in (RIDGE, CONVEX):
        grid = default_grid(param)
        for lam in grid.lambdas[::5]:
            for gam in grid.gammas[::3]:
                model = fit(data, lam, gam, param)
                s = discriminant_scores(model, xt)
                f = full_space_scores(data, lam, gam, param, xt)
                np.testing.assert_array_equal(np.argmin(s, axis=1), np.argmin(f, axis=1))
                np.testing.assert_allclose(s - s[:, :1], f - f[:, :1], rtol=0, atol=1e-8)


def test_full_space_scores_use_true_inverse_when_gamma_positive(rng):
    data, xt = random_instance(rng, p=6, n=12, k=2, n_test=4)
    f = full_space_scores(data, 0.5, 0.3, RIDGE, xt)
    _, means = center_by_class(data)
    for k in range(2):
        sigma = hdrda_covariance(data, k, 0.5, 0.3)
        d = xt - means[k]
        ref = np.einsum("ij,jk,ik->i", d, np.linalg.inv(sigma), d) + np.linalg.slogdet(sigma)[1]
        np.testing.assert_allclose(f[:, k], ref, rtol=1e-10)


def test_absolute_scores_differ_from_full_space_by_class_constant(rng):
    # At gamma = 0 nothing is dropped, so the scores agree outright.
    data, xt = random_instance(rng, p=30, n=16, k=2)
    model = fit(data, 0.4, 0.0)
    np.testing.assert_allclose(discriminant_scores(model, xt),
                               full_space_scores(data, 0.4, 0.0, RIDGE, xt), rtol=1e-9)


def test_dimension_mismatch(rng):
    data, _ = random_instance(rng, p=10, n=12, k=2)
    model = fit(data, 0.5, 1.0)
    with pytest.raises(DimensionMismatch, match="p=10, data has p=9"):
        discriminant_scores(model, np.zeros((3, 9)))
    with pytest.raises(DimensionMismatch):
        predict(model, np.zeros((3, 11)))


def test_predict_class_mean_gets_its_label(separated):
    model = fit(separated, 0.5, 1.0)
    _, means = center_by_class(separated)
    assert predict(model, means[0])[0] == "a"
    assert predict(model, means[1])[0] == "b"


def test_predict_tie_goes_to_lower_class_index(rng):
    rows = rng.normal(size=(5, 8))
    data = LabeledDataset.from_labels(np.vstack([rows, rows]), ["x"] * 5 + ["y"] * 5)
    model = fit(data, 0.5, 1.0)
    s = discriminant_scores(model, rng.normal(size=(10, 8)))
    np.testing.assert_array_equal(s[:, 0], s[:, 1])
    assert set(predict(model, rng.normal(size=(10, 8)))) == {"x"}


def test_predict_is_deterministic(rng):
    data, xt = random_instance(rng, p=30, n=20, k=4)
    model = fit(data, 0.35, 10.0)
    np.testing.assert_array_equal(predict(model, xt), predict(model, xt.copy()))
