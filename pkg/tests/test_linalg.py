import numpy as np
import pytest

from airfed.errors import (
    DimensionMismatch,
    NegativeVariance,
    NotPositiveDefinite,
    NotSymmetric,
)
from airfed.linalg import complex_gaussian, extreme_eigs, spd_solve

from _oracles import charpoly_eigs


def random_spd(rng, dim, lo=0.5, hi=5.0):
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    lams = rng.uniform(lo, hi, size=dim)
    return (q * lams) @ q.T


class TestSpdSolve:
    def test_identity(self):
        x = spd_solve(np.eye(2), np.array([3.0, -1.0]))
        assert np.array_equal(x, np.array([3.0, -1.0]))

    def test_diagonal(self):
        x = spd_solve(np.diag([2.0, 4.0]), np.array([2.0, 4.0]))
        np.testing.assert_allclose(x, [1.0, 1.0], rtol=0, atol=1e-15)

    def test_random_residual(self):
        rng = np.random.default_rng(7)
        a = random_spd(rng, 6)
        b = rng.standard_normal(6)
        x = spd_solve(a, b)
        assert np.linalg.norm(a @ x - b) <= 1e-10 * np.linalg.norm(b)

    @pytest.mark.parametrize("dim", [2, 5, 13, 27, 50])
    def test_roundtrip_recovers_x(self, dim):
        rng = np.random.default_rng(100 + dim)
        a = random_spd(rng, dim)
        x = rng.standard_normal(dim)
        x_hat = spd_solve(a, a @ x)
        assert np.linalg.norm(x_hat - x) <= 1e-9 * np.linalg.norm(x)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            spd_solve(np.eye(3), np.ones(2))
        with pytest.raises(DimensionMismatch):
            spd_solve(np.ones((2, 3)), np.ones(2))

    def test_not_symmetric(self):
        a = np.array([[1.0, 0.5], [0.0, 1.0]])
        with pytest.raises(NotSymmetric):
            spd_solve(a, np.ones(2))

    def test_not_positive_definite(self):
        with pytest.raises(NotPositiveDefinite):
            spd_solve(np.diag([1.0, -2.0]), np.ones(2))


class TestExtremeEigs:
    def test_diagonal(self):
        assert extreme_eigs(np.diag([1.0, 5.0, 3.0])) == (1.0, 5.0)

    def test_identity(self):
        assert extreme_eigs(np.eye(4)) == (1.0, 1.0)

    def test_matches_charpoly_oracle(self):
        rng = np.random.default_rng(42)
        x = rng.standard_normal((40, 6))
        gram = x.T @ x
        lo, hi = extreme_eigs(gram)
        oracle = charpoly_eigs(gram)
        assert abs(lo - oracle[0]) <= 1e-8 * abs(oracle[0])
        assert abs(hi - oracle[-1]) <= 1e-8 * abs(oracle[-1])

    def test_invariant_under_orthogonal_row_mixing(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((20, 5))
        q, _ = np.linalg.qr(rng.standard_normal((20, 20)))
        lo1, hi1 = extreme_eigs(x.T @ x)
        lo2, hi2 = extreme_eigs((q @ x).T @ (q @ x))
        assert abs(lo1 - lo2) <= 1e-9 * abs(hi1)
        assert abs(hi1 - hi2) <= 1e-9 * abs(hi1)

    def test_rejects_nonsquare(self):
        with pytest.raises(DimensionMismatch):
            extreme_eigs(np.ones((2, 3)))


class TestComplexGaussian:
    def test_zero_variance_gives_exact_zeros(self):
        rng = np.random.default_rng(0)
        w = complex_gaussian(0.0, rng, 10)
        assert np.all(w == 0.0 + 0.0j)

    def test_unit_variance_power(self):
        rng = np.random.default_rng(11)
        w = complex_gaussian(1.0, rng, 1_000_000)
        mean_power = np.mean(np.abs(w) ** 2)
        assert 0.995 <= mean_power <= 1.005

    def test_component_variance(self):
        rng = np.random.default_rng(12)
        w = complex_gaussian(4.0, rng, 1_000_000)
        var_re = np.var(w.real)
        assert 1.99 <= var_re <= 2.01

    def test_mean_shrinks_at_sqrt_rate(self):
        rng = np.random.default_rng(13)
        for n in (10_000, 1_000_000):
            w = complex_gaussian(1.0, rng, n)
            assert abs(np.mean(w)) <= 4.0 / np.sqrt(n)

    def test_deterministic_given_seed(self):
        a = complex_gaussian(2.0, np.random.default_rng(5), 64)
        b = complex_gaussian(2.0, np.random.default_rng(5), 64)
        assert np.array_equal(a, b)

    def test_negative_variance(self):
        with pytest.raises(NegativeVariance):
            complex_gaussian(-0.1, np.random.default_rng(0), 4)
