import math

import numpy as np
import pytest

from stdegrade.covariance import CovFamily, SpatialCovModel, build_cov_matrix
from stdegrade.errors import ArgumentError, DomainError
from stdegrade.forward import ModelParams
from stdegrade.grid import SpatialGrid, TimeAxis
from stdegrade.kernel import PropagationParams, convolve, discretize, kernel_spec
from stdegrade.spacetime import (
    StCovQuery,
    assemble_st_cov_matrix,
    default_n_terms,
    st_cov_surface,
    st_covariance,
    st_covariance_grid,
)


def make_params(lam=0.1, v=(0.0, 0.5), rho=(1.0, 0.25), family=CovFamily.GAUSSIAN,
                theta=(0.01, 5.0)):
    return ModelParams(
        prop=PropagationParams(lam=lam, v=v, rho1=rho[0], rho2=rho[1]),
        spat=SpatialCovModel(family, theta),
        beta=np.array([0.0]),
    )


class TestStCovariance:
    def test_only_indicator_survives_strong_decay(self):
        params = make_params(lam=40.0, theta=(0.7, 5.0))
        val = st_covariance(params, StCovQuery((0.0, 0.0), 0, delta=1.0))
        assert val == pytest.approx(0.7, rel=1e-10)

    def test_spatial_symmetry_at_lag_zero(self):
        params = make_params(lam=0.2, v=(0.7, -0.3), rho=(1.5, 0.5))
        rng = np.random.default_rng(2)
        for _ in range(5):
            d = tuple(rng.normal(size=2) * 2)
            plus = st_covariance(params, StCovQuery(d, 0, 1.0))
            minus = st_covariance(params, StCovQuery((-d[0], -d[1]), 0, 1.0))
            assert plus == pytest.approx(minus, abs=1e-10)

    def test_dirac_limit_lag_ratio(self):
        # near-Dirac kernels: covariance at lags j >= 1 decays by exp(-lam*delta)
        params = make_params(lam=0.3, v=(0.0, 0.0), rho=(1e-12, 1e-12), theta=(1.0, 2.0))
        vals = [st_covariance(params, StCovQuery((0.0, 1.0), j, 1.0)) for j in (1, 2, 3)]
        assert vals[1] / vals[0] == pytest.approx(math.exp(-0.3), rel=1e-6)
        assert vals[2] / vals[1] == pytest.approx(math.exp(-0.3), rel=1e-6)

    def test_dirac_limit_geometric_sum_at_lag_zero(self):
        lam, theta1 = 0.4, 0.8
        params = make_params(lam=lam, v=(0.0, 0.0), rho=(1e-12, 1e-12), theta=(theta1, 2.0))
        var = st_covariance(params, StCovQuery((0.0, 0.0), 0, 1.0))
        expected = theta1 / (1.0 - math.exp(-2 * lam))  # AR(1) stationary variance
        assert var == pytest.approx(expected, rel=1e-6)

    def test_series_truncation_bounded(self):
        params = make_params(lam=0.15)
        q_lo = StCovQuery((0.5, 0.5), 1, 1.0)
        deep = StCovQuery((0.5, 0.5), 1, 1.0, n_terms=3 * default_n_terms(0.15, 1.0))
        a = st_covariance(params, q_lo)
        b = st_covariance(params, deep)
        assert abs(a - b) < 1e-8 * params.spat.sill * 1.0

    def test_requires_positive_decay(self):
        params = make_params(lam=0.0)
        with pytest.raises(DomainError):
            st_covariance(params, StCovQuery((0.0, 0.0), 0, 1.0))

    def test_rejects_non_integer_or_negative_lag(self):
        with pytest.raises(ArgumentError):
            StCovQuery((0.0, 0.0), -1, 1.0)
        with pytest.raises(ArgumentError):
            StCovQuery((0.0, 0.0), 1.5, 1.0)  # type: ignore[arg-type]

    def test_quadrature_matches_closed_form_on_gaussian_family(self):
        from stdegrade.spacetime import _smoothed_cov_quadrature
        from stdegrade.kernel import kernel_spec as kspec

        params = make_params(lam=0.5, rho=(1.0, 0.5))
        lag, delta = 1, 1.0
        base = kspec(params.prop, delta)
        counts = np.array([1, 3, 5])
        weights = np.exp(-counts * params.prop.lam * delta)
        d = np.array([0.6, -0.4])
        via_quad = _smoothed_cov_quadrature(
            params, d, lag * base.mean, base.cov, counts, weights, delta
        )
        closed = 0.0
        theta1, theta2 = params.spat.theta
        sigc2 = theta2 / 2.0
        from stdegrade.kernel import gaussian_pdf2

        for m, w in zip(counts, weights):
            closed += w * delta * theta1 * 2 * math.pi * sigc2 * float(
                gaussian_pdf2(d, lag * base.mean, m * base.cov + sigc2 * np.eye(2))
            )
        assert via_quad == pytest.approx(closed, rel=1e-7)

    def test_exponential_family_symmetry_via_quadrature(self):
        params = make_params(lam=0.6, v=(0.4, 0.2), rho=(0.8, 0.5),
                             family=CovFamily.EXPONENTIAL, theta=(0.5, 2.0))
        a = st_covariance(params, StCovQuery((1.0, 0.5), 0, 1.0, n_terms=6))
        b = st_covariance(params, StCovQuery((-1.0, -0.5), 0, 1.0, n_terms=6))
        assert a == pytest.approx(b, abs=1e-9)
        assert a > 0


class TestAgainstDiscreteFixedPoint:
    """Exact stationary covariance of the discrete model as an independent oracle."""

    def test_matches_on_resolved_grid(self):
        lam, delta = 0.4, 1.0
        params = make_params(lam=lam, v=(0.0, 0.5), rho=(2.0, 1.0), theta=(0.01, 5.0))
        n = 25
        grid = SpatialGrid(n, n)
        kern = discretize(kernel_spec(params.prop, delta), 1.0, 5.0)
        ns = grid.n_sites
        K = np.zeros((ns, ns))
        for s in range(ns):
            e = np.zeros((n, n))
            e[divmod(s, n)] = 1.0
            K[:, s] = convolve(e, kern).ravel()
        S = build_cov_matrix(params.spat, grid, delta).matrix
        z2 = math.exp(-2 * lam * delta)
        C = S.copy()
        A = S.copy()
        for m in range(1, 30):
            A = K @ A @ K.T
            C += z2**m * A
        lag1 = math.exp(-lam * delta) * (K @ C)
        mid = grid.site_index(n // 2, n // 2)
        checks = [((0, 0), 0), ((1, 0), 0), ((0, 2), 0), ((0, 0), 1), ((0, 1), 1)]
        for (dx, dy), lag in checks:
            s2 = grid.site_index(n // 2 + dy, n // 2 + dx)
            got = C[s2, mid] if lag == 0 else lag1[s2, mid]
            want = st_covariance(params, StCovQuery((dx, dy), lag, delta))
            assert got == pytest.approx(want, rel=2e-2), ((dx, dy), lag)


class TestSurface:
    def test_lag_zero_peaks_at_origin(self):
        params = make_params(lam=0.2)
        surf = st_cov_surface(params, lag=0, delta=1.0, half_width=5)
        peak = np.unravel_index(np.argmax(surf.values), surf.values.shape)
        assert peak == (5, 5)

    def test_surface_decreases_with_lag(self):
        params = make_params(lam=0.2)
        s0 = st_cov_surface(params, lag=0, delta=1.0, half_width=4)
        s2 = st_cov_surface(params, lag=2, delta=1.0, half_width=4)
        assert s2.values.max() < s0.values.max()

    def test_lag_two_peak_displaced_north(self):
        params = make_params(lam=0.2, v=(0.0, 0.5))
        surf = st_cov_surface(params, lag=2, delta=1.0, half_width=5)
        peak = np.unravel_index(np.argmax(surf.values), surf.values.shape)
        # drift 2 * v2 * delta = 1.0 along +y
        assert surf.dy_values[peak[0]] == pytest.approx(1.0)
        assert surf.dx_values[peak[1]] == pytest.approx(0.0)

    def test_rows_cover_window(self):
        params = make_params(lam=0.3)
        surf = st_cov_surface(params, lag=1, delta=1.0, half_width=2)
        rows = list(surf.to_rows())
        assert len(rows) == 25
        assert all(len(r) == 4 and r[2] == 1 for r in rows)


class TestAssembledMatrix:
    def test_entries_match_scalar_evaluations(self):
        params = make_params(lam=0.3, v=(0.2, 0.4), rho=(1.0, 0.5))
        grid = SpatialGrid(3, 2)
        times = TimeAxis(3, delta=0.5)
        mat = assemble_st_cov_matrix(params, grid, times)
        ns = grid.n_sites
        for a in range(times.n_times):
            for b in range(times.n_times):
                for i in range(ns):
                    for j in range(ns):
                        if b >= a:
                            dx, dy = (
                                grid.site_xy(j)[0] - grid.site_xy(i)[0],
                                grid.site_xy(j)[1] - grid.site_xy(i)[1],
                            )
                            want = st_covariance(
                                params, StCovQuery((dx, dy), b - a, times.delta)
                            )
                        else:
                            dx, dy = (
                                grid.site_xy(i)[0] - grid.site_xy(j)[0],
                                grid.site_xy(i)[1] - grid.site_xy(j)[1],
                            )
                            want = st_covariance(
                                params, StCovQuery((dx, dy), a - b, times.delta)
                            )
                        got = mat[a * ns + i, b * ns + j]
                        assert got == pytest.approx(want, rel=1e-10), (a, b, i, j)

    def test_symmetric_positive_semidefinite(self):
        params = make_params(lam=0.25)
        grid = SpatialGrid(4, 4)
        times = TimeAxis(3)
        mat = assemble_st_cov_matrix(params, grid, times)
        assert mat.shape == (48, 48)
        np.testing.assert_allclose(mat, mat.T, atol=1e-14)
        eigs = np.linalg.eigvalsh(mat)
        assert eigs[0] > -1e-10 * eigs[-1]


def test_vectorized_grid_matches_scalar():
    params = make_params(lam=0.2)
    disp = np.array([[0.0, 0.0], [1.0, 0.5], [-2.0, 1.0]])
    vec = st_covariance_grid(params, disp, lag=1, delta=1.0)
    for row, d in enumerate(disp):
        scalar = st_covariance(params, StCovQuery((d[0], d[1]), 1, 1.0))
        assert vec[row] == pytest.approx(scalar, rel=1e-12)
