import numpy as np
import pytest

from pgem.core.exceptions import DomainError
from pgem.services.pg_math import (
    pg_laplace,
    pg_laplace_product,
    pg_mean,
    pg_sample_truncated,
)


class TestPgMean:
    def test_limit_at_zero(self):
        assert pg_mean(1, 0) == pytest.approx(0.25, rel=1e-15)

    def test_known_value(self):
        assert pg_mean(2, 2) == pytest.approx(np.tanh(1.0) / 2.0, rel=1e-12)
        assert pg_mean(2, 2) == pytest.approx(0.3807970779, rel=1e-9)

    def test_even_in_c(self):
        assert pg_mean(1, 3) == pytest.approx(pg_mean(1, -3), rel=1e-15)

    def test_taylor_branch_is_continuous(self):
        c = np.array([0.99e-4, 1.01e-4])
        values = pg_mean(np.ones(2), c)
        assert values[0] == pytest.approx(values[1], rel=1e-8)

    def test_bounded_and_strictly_decreasing(self):
        grid = np.arange(0.0, 10.5, 0.5)
        values = pg_mean(np.full(grid.size, 3.0), grid)
        assert np.all(values > 0)
        assert np.all(values <= 0.75)
        assert values[0] == pytest.approx(0.75)
        assert np.all(np.diff(values) < 0)

    def test_vectorized(self):
        b = np.array([1.0, 2.0, 5.0])
        c = np.array([0.0, 1.0, 4.0])
        expected = [pg_mean(bi, ci) for bi, ci in zip(b, c)]
        np.testing.assert_allclose(pg_mean(b, c), expected)

    @pytest.mark.parametrize("b", [0.0, -1.0])
    def test_rejects_non_positive_shape(self, b):
        with pytest.raises(DomainError):
            pg_mean(b, 1.0)


class TestPgLaplace:
    def test_equals_one_at_zero(self):
        assert pg_laplace(2.5, 1.7, 0.0) == pytest.approx(1.0, abs=1e-15)

    def test_known_value(self):
        assert pg_laplace(1, 0, 2) == pytest.approx(1.0 / np.cosh(1.0), rel=1e-12)
        assert pg_laplace(1, 0, 2) == pytest.approx(0.6480542737, rel=1e-9)

    def test_power_in_b(self):
        assert pg_laplace(2, 0, 2) == pytest.approx(pg_laplace(1, 0, 2) ** 2, rel=1e-12)

    def test_non_increasing_in_t(self):
        t = np.linspace(0.0, 50.0, 101)
        values = pg_laplace(np.full(t.size, 2.0), np.full(t.size, 1.5), t)
        assert np.all(np.diff(values) <= 0)

    def test_no_overflow_for_large_arguments(self):
        value = pg_laplace(3.0, 2000.0, 1e5)
        assert np.isfinite(value)
        assert 0.0 < value <= 1.0

    @pytest.mark.parametrize("b,c", [(1.0, 0.0), (2.0, 1.0), (5.0, 4.0), (0.5, -3.0)])
    def test_derivative_at_zero_is_mean(self, b, c):
        # t >= 0，用单侧二阶差分
        h = 1e-4
        f0, f1, f2 = (pg_laplace(b, c, t) for t in (0.0, h, 2 * h))
        derivative = (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h)
        assert -derivative == pytest.approx(pg_mean(b, c), rel=1e-6)

    def test_rejects_negative_t(self):
        with pytest.raises(DomainError):
            pg_laplace(1.0, 0.0, -1.0)


class TestPgLaplaceProduct:
    @pytest.mark.parametrize("b,c,t", [(1.0, 0.0, 2.0), (2.0, 1.0, 0.5), (3.0, 4.0, 5.0)])
    def test_matches_closed_form(self, b, c, t):
        assert pg_laplace_product(b, c, t, terms=10_000) == pytest.approx(pg_laplace(b, c, t), abs=1e-6)

    def test_tail_correction_improves_accuracy(self):
        exact = pg_laplace(1.0, 0.0, 2.0)
        raw = pg_laplace_product(1.0, 0.0, 2.0, terms=100, tail_correction=False)
        corrected = pg_laplace_product(1.0, 0.0, 2.0, terms=100)
        assert abs(corrected - exact) < abs(raw - exact)

    def test_rejects_zero_terms(self):
        with pytest.raises(DomainError):
            pg_laplace_product(1.0, 0.0, 1.0, terms=0)


class TestTruncatedSampler:
    def test_rejects_zero_terms(self):
        with pytest.raises(DomainError):
            pg_sample_truncated(1.0, 0.0, terms=0)

    def test_deterministic_given_seed(self):
        a = pg_sample_truncated(1.0, 2.0, rng_seed=3, size=10)
        b = pg_sample_truncated(1.0, 2.0, rng_seed=3, size=10)
        np.testing.assert_array_equal(a, b)
        assert isinstance(pg_sample_truncated(1.0, 2.0, rng_seed=3), float)

    def test_tilting_shrinks_mean(self):
        flat = pg_sample_truncated(1.0, 0.0, terms=200, rng_seed=1, size=20_000)
        tilted = pg_sample_truncated(1.0, 4.0, terms=200, rng_seed=1, size=20_000)
        assert tilted.mean() < flat.mean()

    @pytest.mark.slow
    @pytest.mark.parametrize("b", [1.0, 2.0, 5.0])
    @pytest.mark.parametrize("c", [0.0, 1.0, 4.0])
    def test_monte_carlo_mean_matches_pg_mean(self, b, c):
        terms = 200
        draws = pg_sample_truncated(b, c, terms=terms, rng_seed=int(10 * b + c), size=100_000)
        standard_error = draws.std(ddof=1) / np.sqrt(draws.size)
        # 截断级数丢掉的尾部均值约为 b/(2π²(terms - 1/2))
        truncation_bias = b / (2.0 * np.pi ** 2 * (terms - 0.5))
        assert abs(draws.mean() - pg_mean(b, c)) <= 3.0 * standard_error + truncation_bias
