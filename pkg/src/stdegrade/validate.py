"""Model validation: robust semi-variograms, chi-square QQ data, family choice.

After whitening and mean removal, the residual slices should look like
independent draws of the spatial noise field.  The robust fourth-root
semi-variogram estimator of those residuals is compared with the fitted
family's theoretical curve, and slice Mahalanobis statistics are compared
with chi-square quantiles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.stats import chi2

from .covariance import CovMatrix, SpatialCovModel, build_cov_matrix, cov_value
from .errors import ArgumentError
from .fit import FitResult, ResidualSeries, mle_fit, residual_series
from .forward import CovariateSeries
from .grid import FieldSeries, SpatialGrid
from .kernel import BoundaryMode

# fourth-root estimator bias correction, from the robust variogram literature:
# gamma_hat = mean(|increment|^(1/2))^4 / (0.914 + 0.988/m), m = increment count
CH_BIAS_A = 0.914
CH_BIAS_B = 0.988

DEFAULT_BIN_WIDTH = 0.5


@dataclass(frozen=True)
class Variogram:
    """Semi-variogram values per distance bin.

    ``pairs`` counts the distinct site pairs per bin for empirical estimates
    and is None for theoretical curves.
    """

    distances: np.ndarray
    values: np.ndarray
    pairs: np.ndarray | None = None
    bin_width: float | None = None

    def __post_init__(self):
        if np.any(np.asarray(self.values) < 0):
            raise ArgumentError("semi-variogram values must be >= 0")
        if self.pairs is not None and np.any(np.asarray(self.pairs) < 1):
            raise ArgumentError("reported bins must contain at least one pair")

    def to_rows(self):
        for i, d in enumerate(self.distances):
            n = 0 if self.pairs is None else int(self.pairs[i])
            yield (float(d), float(self.values[i]), n)


def empirical_semivariogram(
    residuals: ResidualSeries,
    grid: SpatialGrid,
    bin_width: float = DEFAULT_BIN_WIDTH,
    max_distance: float | None = None,
) -> Variogram:
    """Robust semi-variogram of the residual slices.

    Site pairs are grouped into distance bins of the given width (bin-center
    distances reported); the average of |increment|^(1/2) runs over all pairs
    and all time slices, and the fourth power is divided by the finite-sample
    bias factor.  Empty bins are omitted.
    """
    if grid.n_sites < 2:
        raise ArgumentError("need at least two sites")
    from .covariance import _cached_distances

    dist = _cached_distances(grid)
    iu = np.triu_indices(grid.n_sites, k=1)
    d = dist[iu]
    if max_distance is not None:
        keep = d <= max_distance
    else:
        keep = np.ones(len(d), dtype=bool)
    bins = np.round(d / bin_width).astype(int)
    flat = residuals.values.reshape(residuals.n_slices, -1)
    roots = np.sqrt(np.abs(flat[:, iu[0]] - flat[:, iu[1]]))  # (T, n_pairs)
    root_sums = roots.sum(axis=0)
    n_slices = residuals.n_slices
    out_d, out_g, out_n = [], [], []
    for b in np.unique(bins[keep]):
        sel = keep & (bins == b)
        n_pairs = int(np.count_nonzero(sel))
        if n_pairs == 0 or b == 0:
            continue
        m = n_pairs * n_slices
        mean_root = float(root_sums[sel].sum()) / m
        gamma = mean_root**4 / (CH_BIAS_A + CH_BIAS_B / m)
        out_d.append(b * bin_width)
        out_g.append(gamma)
        out_n.append(n_pairs)
    return Variogram(
        distances=np.asarray(out_d),
        values=np.asarray(out_g),
        pairs=np.asarray(out_n),
        bin_width=bin_width,
    )


def theoretical_semivariogram(
    m: SpatialCovModel, scale: float, d_values
) -> Variogram:
    """gamma(d) = scale * (c(0) - c(d)) for the stationary noise field."""
    d = np.asarray(d_values, dtype=float)
    gamma = scale * (m.sill - cov_value(m, d))
    return Variogram(distances=d, values=np.asarray(gamma))


def chisq_qq_data(residuals: ResidualSeries, sigma_eps: CovMatrix) -> np.ndarray:
    """Per-slice Mahalanobis statistics against chi-square quantiles.

    Returns (n_slices, 2) rows of (theoretical quantile, sorted statistic),
    with plotting positions (k - 0.5) / n_slices and Ns degrees of freedom.
    """
    flat = residuals.values.reshape(residuals.n_slices, -1)
    white = solve_triangular(sigma_eps.factor, flat.T, lower=True)
    stats = np.sort(np.sum(white * white, axis=0))
    n = len(stats)
    positions = (np.arange(1, n + 1) - 0.5) / n
    theo = chi2.ppf(positions, df=sigma_eps.n)
    return np.column_stack([theo, stats])


def qq_bootstrap_envelope(
    sigma_eps: CovMatrix,
    n_slices: int,
    n_boot: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Min/max envelope of sorted Mahalanobis statistics under the model.

    Statistics of exact draws are chi-square with Ns degrees of freedom up to
    the nugget, so the envelope is sampled directly from that distribution.
    """
    draws = chi2.rvs(df=sigma_eps.n, size=(n_boot, n_slices), random_state=rng)
    draws.sort(axis=1)
    return draws.min(axis=0), draws.max(axis=0)


@dataclass
class FamilyEntry:
    family: str
    fit: FitResult | None
    discrepancy: float
    qq_violations: int
    error: str = ""


@dataclass
class SelectionReport:
    entries: list[FamilyEntry] = field(default_factory=list)
    bin_width: float = DEFAULT_BIN_WIDTH

    def ranked(self) -> list[FamilyEntry]:
        ok = [e for e in self.entries if e.error == ""]
        bad = [e for e in self.entries if e.error != ""]
        return sorted(ok, key=lambda e: e.discrepancy) + bad

    def best(self) -> FamilyEntry:
        return self.ranked()[0]

    def to_text(self) -> str:
        lines = [
            f"covariance family ranking (variogram bins of width {self.bin_width})",
            f"{'rank':<5} {'family':<12} {'variogram discrepancy':>22} {'qq violations':>14}",
            "-" * 57,
        ]
        for rank, e in enumerate(self.ranked(), start=1):
            if e.error:
                lines.append(f"{rank:<5} {e.family:<12} {'fit failed: ' + e.error}")
            else:
                lines.append(
                    f"{rank:<5} {e.family:<12} {e.discrepancy:>22.6g} {e.qq_violations:>14d}"
                )
        return "\n".join(lines)


def family_selection_report(
    y: FieldSeries,
    cov: CovariateSeries,
    families,
    fit_opts: dict | None = None,
    bin_width: float = DEFAULT_BIN_WIDTH,
    max_distance: float | None = None,
    n_boot: int = 200,
    seed: int = 0,
    boundary: BoundaryMode | str = BoundaryMode.ZERO,
) -> SelectionReport:
    """Fit each family, compare variograms, and rank by discrepancy.

    The discrepancy is the pair-count-weighted sum of squared differences
    between the empirical and fitted theoretical semi-variograms at the bin
    centers.  Families whose fit raises are kept in the report with the error
    noted and ranked last.
    """
    families = list(families)
    if not families:
        raise ArgumentError("need at least one candidate family")
    report = SelectionReport(bin_width=bin_width)
    delta = y.times.delta
    if max_distance is None:
        max_distance = 0.6 * max(y.grid.nx, y.grid.ny) * y.grid.spacing
    for fam in families:
        name = getattr(fam, "value", str(fam))
        try:
            fit = mle_fit(y, cov, fam, opts=fit_opts)
            resid = residual_series(y, cov, fit.params, boundary)
            emp = empirical_semivariogram(resid, y.grid, bin_width, max_distance)
            theo = theoretical_semivariogram(fit.params.spat, delta, emp.distances)
            disc = float(np.sum(emp.pairs * (emp.values - theo.values) ** 2))
            sigma = build_cov_matrix(fit.params.spat, y.grid, delta)
            qq = chisq_qq_data(resid, sigma)
            lo, hi = qq_bootstrap_envelope(
                sigma, resid.n_slices, n_boot, np.random.default_rng(seed)
            )
            violations = int(np.sum((qq[:, 1] < lo) | (qq[:, 1] > hi)))
            report.entries.append(FamilyEntry(name, fit, disc, violations))
        except Exception as exc:  # a failed family is reported, not fatal
            report.entries.append(
                FamilyEntry(name, None, float("inf"), -1, error=str(exc))
            )
    return report


def write_variogram_csv(v: Variogram, path, header_note: str = "") -> None:
    with open(path, "w") as fh:
        if v.bin_width is not None:
            fh.write(f"# distance bins of width {v.bin_width:g}, bin centers reported\n")
        if header_note:
            fh.write(f"# {header_note}\n")
        fh.write("d,gamma_hat,pairs\n")
        for d, g, n in v.to_rows():
            fh.write(f"{d:.17g},{g:.17g},{n}\n")


def write_qq_csv(qq: np.ndarray, path) -> None:
    with open(path, "w") as fh:
        fh.write("theoretical,sample\n")
        for theo, sample in qq:
            fh.write(f"{theo:.17g},{sample:.17g}\n")
