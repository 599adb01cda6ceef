import numpy as np
import pytest

from pgem.core.exceptions import DimensionMismatchError, DomainError, NotPositiveDefiniteError
from pgem.models import CgConfig, SpdSystem
from pgem.services.linsolve import solve_cg, solve_direct, spd_inverse


def random_spd(rng: np.random.Generator, d: int) -> np.ndarray:
    A = rng.standard_normal((d, d))
    return A @ A.T + np.eye(d)


class TestSolveDirect:
    def test_identity(self):
        d_vec = np.array([1.0, -2.0, 3.5])
        np.testing.assert_array_equal(solve_direct(SpdSystem(S=np.eye(3), d_vec=d_vec)), d_vec)

    def test_random_system(self, rng):
        S = random_spd(rng, 10)
        beta = rng.standard_normal(10)
        solution = solve_direct(SpdSystem(S=S, d_vec=S @ beta))
        np.testing.assert_allclose(solution, beta, rtol=1e-10, atol=1e-10)
        assert np.linalg.norm(S @ solution - S @ beta) <= 1e-10 * np.linalg.norm(S @ beta)

    def test_singular_reports_min_eigenvalue(self):
        S = np.array([[1.0, 1.0], [1.0, 1.0]])
        with pytest.raises(NotPositiveDefiniteError) as info:
            solve_direct(SpdSystem(S=S, d_vec=np.ones(2)))
        assert info.value.error_details["min_eigenvalue"] == pytest.approx(0.0, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            solve_direct(SpdSystem(S=np.eye(3), d_vec=np.ones(2)))


class TestSpdInverse:
    def test_inverse_is_c_ordered_and_symmetric(self, rng):
        S = random_spd(rng, 6)
        inverse = spd_inverse(S)
        assert inverse.flags["C_CONTIGUOUS"]
        np.testing.assert_array_equal(inverse, inverse.T)
        np.testing.assert_allclose(inverse @ S, np.eye(6), atol=1e-10)

    def test_rejects_indefinite(self):
        with pytest.raises(NotPositiveDefiniteError):
            spd_inverse(np.diag([1.0, -1.0]))


class TestSolveCg:
    def test_identity_converges_in_one_iteration(self):
        result = solve_cg(SpdSystem(S=np.eye(4), d_vec=np.arange(4.0)))
        assert result.iterations == 1
        assert not result.truncated
        np.testing.assert_allclose(result.x, np.arange(4.0))

    def test_exact_warm_start_needs_no_iterations(self):
        S = np.diag([2.0, 4.0])
        result = solve_cg(SpdSystem(S=S, d_vec=np.array([2.0, 4.0])), CgConfig(warm_start=np.ones(2)))
        assert result.iterations == 0
        np.testing.assert_array_equal(result.x, np.ones(2))

    def test_matches_direct_solve(self, rng):
        S = random_spd(rng, 50)
        d_vec = rng.standard_normal(50)
        system = SpdSystem(S=S, d_vec=d_vec)
        result = solve_cg(system, CgConfig(eps=1e-10))
        assert not result.truncated
        assert np.max(np.abs(result.x - solve_direct(system))) <= 1e-8

    def test_truncation_is_flagged(self, rng):
        S = random_spd(rng, 20)
        result = solve_cg(SpdSystem(S=S, d_vec=rng.standard_normal(20)), CgConfig(eps=1e-12, max_iter=2))
        assert result.iterations == 2
        assert result.truncated

    def test_error_energy_is_monotone(self, rng):
        S = random_spd(rng, 30)
        d_vec = rng.standard_normal(30)
        result = solve_cg(SpdSystem(S=S, d_vec=d_vec), CgConfig(eps=1e-12))
        energies = np.array(result.energies)
        assert len(energies) == result.iterations + 1
        assert np.all(np.diff(energies) <= 1e-10 * np.abs(energies[:-1]).max())

    def test_partial_step_decreases_quadratic(self, rng):
        S = random_spd(rng, 8)
        d_vec = rng.standard_normal(8)
        start = rng.standard_normal(8)
        result = solve_cg(SpdSystem(S=S, d_vec=d_vec), CgConfig(max_iter=1, warm_start=start))
        assert result.energies[-1] < result.energies[0]

    def test_indefinite_breaks_down(self):
        S = np.diag([1.0, -1.0])
        with pytest.raises(NotPositiveDefiniteError):
            solve_cg(SpdSystem(S=S, d_vec=np.array([0.0, 1.0])))

    @pytest.mark.parametrize("eps", [0.0, 1.0])
    def test_config_rejects_eps_outside_unit_interval(self, eps):
        with pytest.raises(DomainError):
            CgConfig(eps=eps)
