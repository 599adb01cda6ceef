import numpy as np
import pytest

from pgem.core.exceptions import DomainError, NotPositiveDefiniteError
from pgem.models import CgConfig, Dataset, FitReport, GaussianPrior, negative_binomial_dataset
from pgem.services.em_batch import (
    approx_stddev,
    complete_data_cov,
    e_step,
    fit_em,
    fit_qnem,
    fixed_point_residual,
    m_step,
)
from pgem.services.objective import log_posterior, oracle_mode


def assert_ascent(report: FitReport) -> None:
    objectives = report.objectives
    slack = 1e-10 * np.maximum(np.abs(objectives[:-1]), 1.0)
    assert np.all(np.diff(objectives) >= -slack)


def random_instance(rng: np.random.Generator, index: int) -> Dataset:
    d = int(rng.integers(2, 9))
    n = int(rng.integers(20 * d, 300))
    X = np.column_stack([np.ones(n), rng.standard_normal((n, d - 1))])
    beta = 0.5 * rng.standard_normal(d)
    psi = X @ beta
    if index % 2 == 0:
        m = rng.integers(1, 6, size=n).astype(float)
        y = rng.binomial(m.astype(int), 1.0 / (1.0 + np.exp(-psi))).astype(float)
        return Dataset(y=y, m=m, X=X)
    r = 2.5
    # 负二项：成功概率 σ(ψ) 对应均值 r·exp(ψ)
    y = rng.negative_binomial(r, 1.0 / (1.0 + np.exp(psi))).astype(float)
    return negative_binomial_dataset(y, X, r)


class TestEStep:
    def test_zero_beta_gives_quarter_trials(self, binomial_dataset):
        omega = e_step(binomial_dataset, np.zeros(binomial_dataset.d))
        np.testing.assert_allclose(omega, binomial_dataset.m / 4)

    def test_known_value(self):
        data = Dataset(y=[1], m=[1], X=[[2.0]])
        assert e_step(data, np.array([1.0]))[0] == pytest.approx(np.tanh(1.0) / 4, rel=1e-12)
        assert e_step(data, np.array([1.0]))[0] == pytest.approx(0.1903985, rel=1e-6)

    def test_even_in_psi(self, small_dataset, rng):
        beta = rng.standard_normal(small_dataset.d)
        np.testing.assert_allclose(e_step(small_dataset, beta), e_step(small_dataset, -beta))


class TestMStep:
    def test_prior_only(self):
        prior = GaussianPrior(mu=np.array([0.3, -0.7]), precision=np.diag([1.0, 2.0]))
        data = Dataset(y=np.zeros(0), m=np.zeros(0), X=np.zeros((0, 2)))
        np.testing.assert_allclose(m_step(data, prior, np.zeros(0)), prior.mu)

    def test_single_observation(self):
        data = Dataset(y=[1], m=[1], X=[[1.0]])
        beta = m_step(data, GaussianPrior.isotropic(1), np.array([0.25]))
        assert beta[0] == pytest.approx(0.5 / (0.25 + 1e-5))
        assert beta[0] == pytest.approx(2.0, abs=1e-3)

    def test_direct_matches_cg(self, binomial_dataset, rng):
        prior = GaussianPrior.isotropic(binomial_dataset.d, precision=0.1)
        omega = e_step(binomial_dataset, rng.standard_normal(binomial_dataset.d))
        direct = m_step(binomial_dataset, prior, omega)
        cg = m_step(binomial_dataset, prior, omega, mode="cg", cg_config=CgConfig(eps=1e-10))
        np.testing.assert_allclose(cg, direct, atol=1e-8)

    def test_rejects_non_positive_weights(self, small_dataset):
        prior = GaussianPrior.isotropic(small_dataset.d)
        with pytest.raises(DomainError):
            m_step(small_dataset, prior, np.zeros(small_dataset.n))


class TestFitEm:
    def test_prior_only_lands_on_prior_mean(self):
        prior = GaussianPrior(mu=np.array([1.0, 2.0]), precision=np.eye(2))
        data = Dataset(y=np.zeros(0), m=np.zeros(0), X=np.zeros((0, 2)))
        report = fit_em(data, prior)
        assert report.converged
        # 第一步即到达 mu，第二步确认收敛
        assert report.iterations == 2
        np.testing.assert_allclose(report.beta_hat, prior.mu)
        np.testing.assert_allclose(approx_stddev(report), [1.0, 1.0])

    def test_matches_oracle_on_random_instances(self, rng):
        for index in range(20):
            data = random_instance(rng, index)
            prior = GaussianPrior.isotropic(data.d, precision=1e-3)
            oracle = oracle_mode(data, prior)
            em = fit_em(data, prior)
            qn = fit_qnem(data, prior)
            assert em.converged and qn.converged
            assert np.max(np.abs(em.beta_hat - oracle)) <= 1e-5
            assert np.max(np.abs(qn.beta_hat - oracle)) <= 1e-5
            assert_ascent(em)
            assert_ascent(qn)

    def test_gradient_and_fixed_point_at_exit(self, small_dataset):
        prior = GaussianPrior.isotropic(small_dataset.d)
        tol = 1e-8
        report = fit_em(small_dataset, prior, tol=tol)
        gradient = log_posterior(small_dataset, prior, report.beta_hat).gradient
        assert np.max(np.abs(gradient)) <= 10 * tol
        np.testing.assert_allclose(fixed_point_residual(small_dataset, prior, report.beta_hat), gradient, atol=1e-10)

    def test_independent_of_initialization(self, small_dataset, rng):
        prior = GaussianPrior.isotropic(small_dataset.d)
        a = fit_em(small_dataset, prior)
        b = fit_em(small_dataset, prior, beta0=rng.standard_normal(small_dataset.d))
        np.testing.assert_allclose(a.beta_hat, b.beta_hat, atol=1e-4)

    def test_partial_m_step_reaches_same_mode(self, small_dataset):
        prior = GaussianPrior.isotropic(small_dataset.d)
        exact = fit_em(small_dataset, prior, tol=1e-7)
        partial = fit_em(small_dataset, prior, tol=1e-7, mode="cg", cg_config=CgConfig(eps=0.1, max_iter=1))
        assert partial.converged
        assert_ascent(partial)
        np.testing.assert_allclose(partial.beta_hat, exact.beta_hat, atol=1e-5)

    def test_max_iter_reports_unconverged(self, small_dataset):
        report = fit_em(small_dataset, GaussianPrior.isotropic(small_dataset.d), max_iter=2)
        assert not report.converged
        assert report.iterations == 2

    def test_covariance_matches_independent_assembly(self, small_dataset):
        prior = GaussianPrior.isotropic(small_dataset.d)
        report = fit_em(small_dataset, prior)
        expected = complete_data_cov(small_dataset, prior, report.beta_hat)
        np.testing.assert_allclose(approx_stddev(report), np.sqrt(np.diag(expected)), rtol=1e-8)

    def test_appendix_a_design_ascends(self, appendix_a):
        data, _ = appendix_a
        report = fit_em(data, GaussianPrior.isotropic(data.d))
        assert report.converged
        assert_ascent(report)


class TestFitQnem:
    def test_strong_prior_converges_quickly(self, small_dataset):
        mu = np.array([0.5, -0.5, 1.0])
        prior = GaussianPrior(mu=mu, precision=1e8 * np.eye(3))
        report = fit_qnem(small_dataset, prior, tol=1e-6)
        assert report.converged
        assert report.iterations <= 2
        np.testing.assert_allclose(report.beta_hat, mu, atol=1e-3)

    def test_strong_prior_not_slower_than_em(self, small_dataset):
        prior = GaussianPrior(mu=np.array([0.5, -0.5, 1.0]), precision=1e6 * np.eye(3))
        em = fit_em(small_dataset, prior, tol=1e-6)
        qn = fit_qnem(small_dataset, prior, tol=1e-6)
        assert em.converged and qn.converged
        assert qn.iterations <= em.iterations
        assert qn.diagnostics["grad_norm"] <= 1e-5
        assert_ascent(qn)

    def test_fewer_iterations_than_em_on_appendix_a(self, appendix_a):
        data, _ = appendix_a
        prior = GaussianPrior.isotropic(data.d)
        em = fit_em(data, prior)
        qn = fit_qnem(data, prior)
        assert qn.converged
        assert qn.iterations < em.iterations
        np.testing.assert_allclose(qn.beta_hat, em.beta_hat, atol=1e-5)

    def test_stddevs_not_smaller_than_em(self, appendix_a):
        data, _ = appendix_a
        prior = GaussianPrior.isotropic(data.d)
        em = approx_stddev(fit_em(data, prior))
        qn = approx_stddev(fit_qnem(data, prior))
        assert np.all(qn >= em * (1 - 1e-10))

    def test_reports_remainder_hessian(self, small_dataset):
        report = fit_qnem(small_dataset, GaussianPrior.isotropic(small_dataset.d))
        M = report.diagnostics["remainder_hessian"]
        assert M.shape == (small_dataset.d, small_dataset.d)
        np.testing.assert_allclose(M, M.T)


def test_approx_stddev_requires_covariance():
    with pytest.raises(NotPositiveDefiniteError):
        approx_stddev(FitReport(beta_hat=np.zeros(2), cov=None))
