import numpy as np
import pytest
from scipy import stats

from pfbi.errors import DimensionMismatch, FactorizationFailure, InvalidParameter
from pfbi.kernel import KernelParams, TimeGrid, build_covariance
from pfbi.mvn import (RngState, as_generator, cholesky_jitter, condition, jitter_schedule,
                      sample_mvn, standard_normal)

E = np.exp
CLOSED_FORM_MEAN = 2 * E(-0.5) / (1 + E(-1))
CLOSED_FORM_VAR = 1 - 2 * E(-1) / (1 + E(-1))


class TestRngState:
    def test_same_state_same_draws(self):
        a = RngState(7, 3).generator().random(5)
        b = RngState(7, 3).generator().random(5)
        np.testing.assert_array_equal(a, b)

    def test_streams_and_substreams_differ(self):
        base = RngState(7).generator().random(5)
        assert not np.array_equal(base, RngState(7, 1).generator().random(5))
        assert not np.array_equal(base, RngState(7).substream(0).generator().random(5))
        assert not np.array_equal(RngState(7).substream(1).generator().random(5),
                                  RngState(7).substream(2).generator().random(5))

    def test_substream_keys_accumulate(self):
        assert RngState(1).substream(2).substream(3) == RngState(1).substream(2, 3)

    def test_as_generator_passes_generators_through(self):
        gen = np.random.default_rng(0)
        assert as_generator(gen) is gen
        with pytest.raises(TypeError):
            as_generator(5)

    @pytest.mark.parametrize("state", [(-1,), (0, -2), (0, 0, (3, -1))])
    def test_rejects_negative_seeds(self, state):
        with pytest.raises(InvalidParameter):
            RngState(*state)
        with pytest.raises(InvalidParameter):
            RngState(1).substream(-4)


class TestStandardNormal:
    def test_finite_and_normal(self):
        x = standard_normal(RngState(0).generator(), 200_000)
        assert np.all(np.isfinite(x))
        assert stats.kstest(x, 'norm').pvalue > 0.01


class TestCholeskyJitter:
    def test_schedule(self):
        np.testing.assert_allclose(jitter_schedule(1e-8), [0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2])
        np.testing.assert_array_equal(jitter_schedule(0.0), [0.0])

    def test_identity(self):
        np.testing.assert_array_equal(cholesky_jitter(np.eye(3), 0.0), np.eye(3))

    def test_rank_deficient_needs_jitter(self):
        M = np.array([[1.0, 1.0], [1.0, 1.0]])
        with pytest.raises(FactorizationFailure):
            cholesky_jitter(M, 0.0)
        L = cholesky_jitter(M, 1e-8)
        np.testing.assert_allclose(L @ L.T, M, atol=1e-7)

    def test_lines_covariance_within_default_jitter(self):
        S = build_covariance(KernelParams(2.0, 5.0), TimeGrid.equidistant(1.0, 16))
        L = cholesky_jitter(S, 1e-8)
        np.testing.assert_allclose(L @ L.T, S, rtol=0, atol=2e-8)
        np.testing.assert_array_equal(L, np.tril(L))

    def test_indefinite_fails(self):
        with pytest.raises(FactorizationFailure):
            cholesky_jitter(np.array([[1.0, 0.0], [0.0, -1.0]]))

    def test_not_square(self):
        with pytest.raises(DimensionMismatch):
            cholesky_jitter(np.ones((2, 3)))


class TestCondition:
    def test_closed_form_three_times(self):
        S = build_covariance(KernelParams(1.0, 1.0), TimeGrid([0.0, 0.5, 1.0]))
        c = condition(S, free=[1], given=[0, 2])
        assert c.mean(np.array([1.0, 1.0]))[0] == pytest.approx(CLOSED_FORM_MEAN, abs=1e-9)
        assert c.cond_var[0, 0] == pytest.approx(CLOSED_FORM_VAR, abs=1e-9)
        assert CLOSED_FORM_MEAN == pytest.approx(0.886852, abs=1e-6)
        assert CLOSED_FORM_VAR == pytest.approx(0.462117, abs=1e-6)

    def test_agrees_with_direct_solve(self):
        S = build_covariance(KernelParams(1.5, 2.0), TimeGrid([0.0, 0.2, 0.5, 0.9, 1.4]))
        free, given = [1, 3], [0, 2, 4]
        c = condition(S, free, given)
        direct = np.linalg.solve(S[np.ix_(given, given)], S[np.ix_(given, free)]).T
        np.testing.assert_allclose(c.mean_map, direct, atol=1e-10)
        np.testing.assert_allclose(c.cond_var, S[np.ix_(free, free)] - direct @ S[np.ix_(given, free)],
                                   atol=1e-10)

    def test_empty_given(self):
        S = build_covariance(KernelParams(1.0, 1.0), TimeGrid([0.0, 0.5, 1.0]))
        c = condition(S, free=[0, 1], given=[])
        assert c.mean_map.shape == (2, 0)
        np.testing.assert_array_equal(c.cond_var, S[:2, :2])
        np.testing.assert_array_equal(c.mean(np.zeros((0, 3))), np.zeros((2, 3)))

    def test_perfect_correlation_drives_variance_to_zero(self):
        S = np.array([[1.0, 1.0 - 1e-12], [1.0 - 1e-12, 1.0]])
        c = condition(S, free=[0], given=[1])
        assert abs(c.cond_var[0, 0]) < 1e-6

    def test_overlapping_indices(self):
        with pytest.raises(ValueError):
            condition(np.eye(3), free=[0, 1], given=[1, 2])

    def test_tower_property_restores_the_free_block(self):
        S = build_covariance(KernelParams(1.5, 2.0), TimeGrid([0.0, 0.2, 0.5, 0.9, 1.4]))
        free, given = [1, 3], [0, 2, 4]
        c = condition(S, free, given)
        gen = RngState(21).generator()
        n = 50_000
        g = cholesky_jitter(S[np.ix_(given, given)]) @ standard_normal(gen, (len(given), n))
        x = c.mean(g) + cholesky_jitter(c.cond_var) @ standard_normal(gen, (len(free), n))
        np.testing.assert_allclose(np.cov(x), S[np.ix_(free, free)], atol=0.03)

    @pytest.mark.parametrize("alpha, beta, T", [(2.0, 5.0, 1.0), (1.0, 1.0, 1.0), (2.0, 5.0, 0.7), (0.5, 3.0, 2.0)])
    def test_conditional_variance_is_numerically_psd(self, alpha, beta, T):
        grid = TimeGrid.equidistant(T, 16)
        S = build_covariance(KernelParams(alpha, beta), grid)
        m = grid.steps
        for k in range(1, m):
            c = condition(S, free=list(range(k, m)), given=list(range(k)) + [m])
            np.testing.assert_allclose(c.cond_var, c.cond_var.T, atol=0)
            assert np.linalg.eigvalsh(c.cond_var).min() >= -10 * 1e-8


class TestSampleMvn:
    def test_zero_chol_returns_mean(self):
        mean = np.array([0.3, -1.2])
        np.testing.assert_array_equal(sample_mvn(mean, np.zeros((2, 2)), RngState(1)), mean)

    def test_deterministic(self):
        L = np.array([[1.0, 0.0], [0.5, 0.8]])
        a = sample_mvn(np.zeros(2), L, RngState(4, 2))
        b = sample_mvn(np.zeros(2), L, RngState(4, 2))
        np.testing.assert_array_equal(a, b)

    def test_moments(self):
        gen = RngState(11).generator()
        x = np.array([sample_mvn(np.zeros(2), np.eye(2), gen) for _ in range(100_000)])
        np.testing.assert_allclose(x.mean(axis=0), 0.0, atol=0.02)
        np.testing.assert_allclose(np.cov(x.T), np.eye(2), atol=0.02)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            sample_mvn(np.zeros(3), np.eye(2), RngState(0))
