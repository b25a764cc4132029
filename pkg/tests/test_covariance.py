import math

import numpy as np
import pytest

from stdegrade.covariance import (
    CovFamily,
    SpatialCovModel,
    build_cov_matrix,
    cov_value,
    sample_field,
)
from stdegrade.errors import ArgumentError
from stdegrade.grid import SpatialGrid


class TestCovValue:
    def test_exponential_at_zero_is_sill(self):
        m = SpatialCovModel(CovFamily.EXPONENTIAL, (0.010, 11.564))
        assert cov_value(m, 0.0) == pytest.approx(0.010)

    def test_gaussian_unit_case(self):
        m = SpatialCovModel(CovFamily.GAUSSIAN, (1.0, 1.0))
        assert cov_value(m, 1.0) == pytest.approx(math.exp(-1.0), abs=1e-12)

    def test_matern_half_smoothness_equals_exponential(self):
        for d in (0.5, 1.0, 3.0):
            mat = SpatialCovModel(CovFamily.MATERN, (0.7, 2.0, 0.5))
            exp = SpatialCovModel(CovFamily.EXPONENTIAL, (0.7, 2.0))
            assert cov_value(mat, d) == pytest.approx(cov_value(exp, d), abs=1e-9)

    def test_matern_continuity_at_zero(self):
        m = SpatialCovModel(CovFamily.MATERN, (2.0, 3.0, 1.4))
        assert cov_value(m, 0.0) == pytest.approx(2.0)
        assert cov_value(m, 1e-9) == pytest.approx(2.0, rel=1e-6)

    def test_rejects_negative_distance(self):
        m = SpatialCovModel(CovFamily.GAUSSIAN, (1.0, 1.0))
        with pytest.raises(ArgumentError):
            cov_value(m, -0.1)

    @pytest.mark.parametrize(
        "model",
        [
            SpatialCovModel(CovFamily.EXPONENTIAL, (1.0, 2.0)),
            SpatialCovModel(CovFamily.GAUSSIAN, (1.0, 4.0)),
            SpatialCovModel(CovFamily.MATERN, (1.0, 2.0, 0.8)),
            SpatialCovModel(CovFamily.MATERN, (1.0, 2.0, 5.0)),
        ],
    )
    def test_non_increasing_in_distance(self, model):
        d = np.linspace(0.0, 20.0, 400)
        c = cov_value(model, d)
        assert np.all(np.diff(c) <= 1e-12)

    def test_vectorized_matches_scalar(self):
        m = SpatialCovModel(CovFamily.MATERN, (1.3, 2.5, 1.7))
        d = np.array([0.0, 0.3, 1.0, 4.0])
        vec = cov_value(m, d)
        for k, dk in enumerate(d):
            assert vec[k] == pytest.approx(cov_value(m, float(dk)), rel=1e-12)

    def test_parameter_validation(self):
        with pytest.raises(ArgumentError):
            SpatialCovModel(CovFamily.GAUSSIAN, (0.0, 1.0))
        with pytest.raises(ArgumentError):
            SpatialCovModel(CovFamily.MATERN, (1.0, 1.0))
        with pytest.raises(ArgumentError):
            SpatialCovModel("nonsense", (1.0, 1.0))


class TestBuildCovMatrix:
    def test_single_site(self):
        cm = build_cov_matrix(SpatialCovModel(CovFamily.EXPONENTIAL, (2.0, 1.0)), SpatialGrid(1, 1), 1.0)
        assert cm.matrix.shape == (1, 1)
        assert cm.matrix[0, 0] == pytest.approx(2.0 + cm.nugget)

    def test_two_site_off_diagonal(self):
        grid = SpatialGrid(2, 1)
        cm = build_cov_matrix(SpatialCovModel(CovFamily.GAUSSIAN, (1.0, 1.0)), grid, 1.0)
        assert cm.matrix[0, 1] == pytest.approx(math.exp(-1.0), abs=1e-12)

    def test_scale_multiplies(self):
        grid = SpatialGrid(3, 2)
        m = SpatialCovModel(CovFamily.EXPONENTIAL, (1.5, 2.0))
        one = build_cov_matrix(m, grid, 1.0)
        two = build_cov_matrix(m, grid, 2.0)
        np.testing.assert_allclose(two.matrix[0, 1], 2.0 * one.matrix[0, 1], rtol=1e-12)

    def test_paper_scale_gaussian_is_positive_definite(self):
        grid = SpatialGrid(21, 21)
        cm = build_cov_matrix(SpatialCovModel(CovFamily.GAUSSIAN, (0.010, 11.564)), grid, 1.0)
        assert np.all(np.diag(cm.factor) > 0)

    @pytest.mark.parametrize(
        "model",
        [
            SpatialCovModel(CovFamily.EXPONENTIAL, (0.019, 12.883)),
            SpatialCovModel(CovFamily.GAUSSIAN, (0.010, 11.564)),
            SpatialCovModel(CovFamily.MATERN, (0.071, 81.560, 0.434)),
        ],
    )
    def test_fitted_table_values_factorize(self, model):
        grid = SpatialGrid(10, 10)
        cm = build_cov_matrix(model, grid, 1.0)
        eigs = np.linalg.eigvalsh(cm.matrix)
        assert eigs[0] > 0


class TestSampleField:
    def test_near_zero_variance(self):
        grid = SpatialGrid(21, 21)
        cm = build_cov_matrix(SpatialCovModel(CovFamily.GAUSSIAN, (1e-10, 5.0)), grid, 1.0)
        field = sample_field(cm, np.random.default_rng(0))
        assert np.max(np.abs(field)) < 1e-4

    def test_seed_determinism(self):
        grid = SpatialGrid(5, 4)
        cm = build_cov_matrix(SpatialCovModel(CovFamily.EXPONENTIAL, (1.0, 2.0)), grid, 1.0)
        a = sample_field(cm, np.random.default_rng(123))
        b = sample_field(cm, np.random.default_rng(123))
        np.testing.assert_array_equal(a, b)
        assert a.shape == (4, 5)

    def test_empirical_covariance_three_sites(self):
        grid = SpatialGrid(3, 1, spacing=1.0)
        m = SpatialCovModel(CovFamily.EXPONENTIAL, (1.0, 1.5))
        cm = build_cov_matrix(m, grid, 1.0)
        rng = np.random.default_rng(42)
        n = 10_000
        draws = np.array([sample_field(cm, rng).ravel() for _ in range(n)])
        emp = np.cov(draws.T, bias=False)
        # Monte Carlo s.e. of a covariance entry of a bivariate normal
        for i in range(3):
            for j in range(3):
                se = math.sqrt((cm.matrix[i, i] * cm.matrix[j, j] + cm.matrix[i, j] ** 2) / n)
                assert abs(emp[i, j] - cm.matrix[i, j]) < 3 * se

    def test_mean_is_zero(self):
        grid = SpatialGrid(2, 2)
        cm = build_cov_matrix(SpatialCovModel(CovFamily.GAUSSIAN, (1.0, 2.0)), grid, 1.0)
        rng = np.random.default_rng(9)
        draws = np.array([sample_field(cm, rng).ravel() for _ in range(4000)])
        assert np.max(np.abs(draws.mean(axis=0))) < 3 * math.sqrt(1.0 / 4000) * 1.5
