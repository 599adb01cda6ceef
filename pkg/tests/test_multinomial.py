import numpy as np
import pytest
from scipy.special import logsumexp

from pgem.core.exceptions import DimensionMismatchError, DomainError
from pgem.models import PenaltySpec
from pgem.services.multinomial import (
    class_probs,
    conditional_offset,
    fit_ecm,
    fit_partial_irls,
    median_recenter,
    multinomial_gradient,
    multinomial_objective,
    one_vs_rest_objective,
    predict_classes,
)


@pytest.fixture
def random_B(rng):
    return rng.standard_normal((3, 3))


def test_class_probs_rows_sum_to_one_and_shift_invariant(multi_data, random_B):
    theta = class_probs(random_B, multi_data.X)
    np.testing.assert_allclose(theta.sum(axis=1), 1.0)
    shifted = class_probs(random_B + np.array([[2.0], [-1.0], [0.5]]), multi_data.X)
    np.testing.assert_allclose(shifted, theta, atol=1e-12)


def test_class_probs_no_overflow(multi_data):
    B = np.zeros((3, 3))
    B[0, 1] = 800.0
    theta = class_probs(B, multi_data.X)
    assert np.all(np.isfinite(theta))
    np.testing.assert_allclose(theta[:, 1], 1.0)


def test_conditional_offset(multi_data, random_B):
    eta = multi_data.X @ random_B
    expected = logsumexp(eta[:, [0, 2]], axis=1)
    np.testing.assert_allclose(conditional_offset(random_B, 1, multi_data.X), expected)
    with pytest.raises(DomainError):
        conditional_offset(random_B[:, :1], 0, multi_data.X)


def test_dimension_mismatch(multi_data):
    with pytest.raises(DimensionMismatchError):
        class_probs(np.zeros((4, 3)), multi_data.X)


def test_objectives_are_labelled_and_ordered(multi_data, random_B):
    standard = multinomial_objective(multi_data, random_B)
    extra = one_vs_rest_objective(multi_data, random_B)
    # 额外的 (1-Y)log(1-θ) 项非正
    assert extra < standard
    penalty = PenaltySpec(family="lasso", lam=1.0)
    assert multinomial_objective(multi_data, random_B, penalty) == pytest.approx(standard - np.abs(random_B).sum())


def test_median_recenter_keeps_probabilities(multi_data, random_B):
    centered = median_recenter(random_B)
    np.testing.assert_allclose(np.median(centered, axis=1), 0.0, atol=1e-15)
    np.testing.assert_allclose(class_probs(centered, multi_data.X), class_probs(random_B, multi_data.X), atol=1e-12)


class TestEcm:
    def test_reference_block_fixed_and_monotone(self, multi_data):
        report = fit_ecm(multi_data, tol=1e-8)
        assert report.converged
        assert report.algorithm == "ecm"
        assert report.objective_name == "multinomial"
        np.testing.assert_array_equal(report.B[:, 0], 0.0)
        blocks = np.array(report.diagnostics["block_objectives"])
        assert np.all(np.diff(blocks) >= -1e-9 * np.abs(blocks[:-1]))

    def test_reaches_stationary_point(self, multi_data):
        report = fit_ecm(multi_data, tol=1e-9)
        gradient = multinomial_gradient(multi_data, report.B)
        assert np.max(np.abs(gradient[:, 1:])) < 1e-5

    def test_cd_and_cg_agree(self, multi_data):
        cg = fit_ecm(multi_data, tol=1e-9, solver="cg")
        cd = fit_ecm(multi_data, tol=1e-9, solver="cd")
        np.testing.assert_allclose(cd.B, cg.B, atol=1e-6)

    def test_penalty_shrinks(self, multi_data):
        free = fit_ecm(multi_data, tol=1e-8)
        penalty = PenaltySpec(family="lasso", lam=5.0, exempt=np.array([True, False, False]))
        shrunk = fit_ecm(multi_data, penalty, tol=1e-8)
        assert np.abs(shrunk.B[1:, 1:]).sum() < np.abs(free.B[1:, 1:]).sum()
        assert shrunk.diagnostics["one_vs_rest_objective"] == pytest.approx(
            one_vs_rest_objective(multi_data, shrunk.B, penalty)
        )

    def test_rejects_bridge_penalty(self, multi_data):
        with pytest.raises(DomainError):
            fit_ecm(multi_data, PenaltySpec(family="bridge", lam=1.0))


class TestPartialIrls:
    def test_unpenalized_matches_ecm(self, multi_data):
        ecm = fit_ecm(multi_data, tol=1e-9)
        irls = fit_partial_irls(multi_data, tol=1e-9)
        assert irls.converged and not irls.diverged
        np.testing.assert_allclose(class_probs(irls.B, multi_data.X), class_probs(ecm.B, multi_data.X), atol=1e-6)
        np.testing.assert_allclose(np.median(irls.B, axis=1), 0.0, atol=1e-12)

    def test_penalized_objective_comparable(self, multi_data):
        penalty = PenaltySpec(family="lasso", lam=2.0, exempt=np.array([True, False, False]))
        ecm = multinomial_objective(multi_data, fit_ecm(multi_data, penalty, tol=1e-8).B, penalty)
        irls = multinomial_objective(multi_data, fit_partial_irls(multi_data, penalty, tol=1e-8).B, penalty)
        assert irls >= ecm - 0.01 * abs(ecm)


def test_predict_classes(multi_data):
    report = fit_ecm(multi_data, tol=1e-8)
    labels = predict_classes(report.B, multi_data.X)
    assert set(np.unique(labels)) <= {1, 2, 3}
    # 拟合模型的训练准确率应高于多数类基线
    majority = np.max(np.bincount(multi_data.labels)) / multi_data.n
    assert np.mean(labels == multi_data.labels) >= majority - 0.05
