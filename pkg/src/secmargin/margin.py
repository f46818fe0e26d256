"""Security margin for discrete and continuous sources.

For discrete sources the margin is the EMD between the two pmfs. For
continuous sources on the line the optimal coupling is the comonotone one,
so the margin reduces to a one-dimensional quantile integral.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .pmf import Pmf, cdf
from .transport import CostSpec, TransportMap, linf_cost, nwc_map, optimal_map

AFFINE_FAMILIES = ("gaussian", "laplacian")
DEFAULT_GRID = 100_000
MIN_GRID = 1_000
TAB_TOL = 1e-6


class NonInvertibleCdfWarning(UserWarning):
    """A tabulated CDF has flat stretches; the generalized inverse is used."""


@dataclass(frozen=True)
class ContinuousSource:
    """A univariate continuous source.

    ``family`` is ``"gaussian"``, ``"laplacian"`` or ``"tabulated"``. For the
    parametric families ``sigma`` is the standard deviation (the Laplacian
    scale is ``sigma / sqrt(2)``). Tabulated sources carry a density sampled
    on an increasing grid; ``mu`` and ``sigma`` are then computed from it.
    """

    family: str
    mu: float
    sigma: float
    grid: np.ndarray | None = field(default=None, repr=False)
    density: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.family not in AFFINE_FAMILIES + ("tabulated",):
            raise ValueError(f"unknown family {self.family!r}")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.family == "tabulated" and (self.grid is None or self.density is None):
            raise ValueError("tabulated source needs grid and density")

    @classmethod
    def gaussian(cls, mu: float = 0.0, sigma: float = 1.0) -> ContinuousSource:
        return cls("gaussian", float(mu), float(sigma))

    @classmethod
    def laplacian(cls, mu: float = 0.0, sigma: float = 1.0) -> ContinuousSource:
        return cls("laplacian", float(mu), float(sigma))

    @classmethod
    def tabulated(cls, grid, density) -> ContinuousSource:
        x = np.asarray(grid, dtype=float)
        f = np.asarray(density, dtype=float)
        if x.ndim != 1 or x.shape != f.shape or x.size < 2:
            raise ValueError("grid and density must be 1-D arrays of equal length >= 2")
        if np.any(np.diff(x) <= 0):
            raise ValueError("grid must be strictly increasing")
        if np.any(f < 0) or not np.all(np.isfinite(f)):
            raise ValueError("density must be finite and nonnegative")
        mass = np.trapezoid(f, x)
        if abs(mass - 1.0) > TAB_TOL:
            raise ValueError(f"density integrates to {mass:.9g}, not 1")
        f = f / mass
        mu = np.trapezoid(x * f, x)
        var = np.trapezoid((x - mu) ** 2 * f, x)
        x.flags.writeable = False
        f.flags.writeable = False
        return cls("tabulated", float(mu), float(np.sqrt(var)), x, f)

    def _scipy(self):
        if self.family == "gaussian":
            return stats.norm(loc=self.mu, scale=self.sigma)
        return stats.laplace(loc=self.mu, scale=self.sigma / np.sqrt(2.0))

    def _tab_cdf(self) -> np.ndarray:
        steps = 0.5 * (self.density[1:] + self.density[:-1]) * np.diff(self.grid)
        c = np.concatenate([[0.0], np.cumsum(steps)])
        return c / c[-1]

    def cdf(self, x) -> np.ndarray:
        if self.family != "tabulated":
            return self._scipy().cdf(x)
        return np.interp(x, self.grid, self._tab_cdf(), left=0.0, right=1.0)

    def ppf(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.family != "tabulated":
            return self._scipy().ppf(u)
        c = self._tab_cdf()
        rising = np.nonzero(np.diff(c) > 0)[0]
        if np.any(np.diff(c)[rising[0]:rising[-1] + 1] <= 0):
            warnings.warn("tabulated CDF has flat regions; using the left-endpoint inverse",
                          NonInvertibleCdfWarning, stacklevel=2)
        # smallest k with c[k] >= u, then interpolate on the rising segment
        k = np.clip(np.searchsorted(c, u, side="left"), 1, c.size - 1)
        lo, hi = c[k - 1], c[k]
        frac = np.where(hi > lo, (u - lo) / np.where(hi > lo, hi - lo, 1.0), 0.0)
        return self.grid[k - 1] + frac * (self.grid[k] - self.grid[k - 1])


def load_tabulated_source(path) -> ContinuousSource:
    """Read a CSV of ``grid_point,density`` rows (a header line is allowed)."""
    xs, fs = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or not row[0].strip():
                continue
            try:
                x, f = float(row[0]), float(row[1])
            except ValueError:
                if xs:
                    raise
                continue
            xs.append(x)
            fs.append(f)
    return ContinuousSource.tabulated(xs, fs)


@dataclass(frozen=True)
class MomentStats:
    mu_x: float
    mu_y: float
    sigma_x: float
    sigma_y: float
    cov_xy: float

    def __post_init__(self):
        if self.sigma_x < 0 or self.sigma_y < 0:
            raise ValueError("standard deviations must be nonnegative")
        bound = self.sigma_x * self.sigma_y
        if abs(self.cov_xy) > bound * (1 + 1e-12) + 1e-15:
            raise ValueError(f"|cov| = {abs(self.cov_xy)} exceeds sigma_x*sigma_y = {bound}")

    @classmethod
    def from_samples(cls, xs, ys) -> MomentStats:
        """Population moments of paired samples (equal weights)."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        mx, my = xs.mean(), ys.mean()
        sx, sy = xs.std(), ys.std()
        cov = np.mean((xs - mx) * (ys - my))
        cov = float(np.clip(cov, -sx * sy, sx * sy))
        return cls(float(mx), float(my), float(sx), float(sy), cov)


@dataclass
class SecurityMarginReport:
    value: float
    metric: CostSpec | str
    method: str
    witness_map: TransportMap | None = None

    def to_dict(self, emit_map: bool = True) -> dict:
        out = {
            "value": self.value,
            "metric": self.metric if isinstance(self.metric, str) else self.metric.describe(),
            "method": self.method,
        }
        if emit_map and self.witness_map is not None:
            out["map"] = self.witness_map.to_dict()
        return out


def security_margin(p: Pmf, q: Pmf, cost: CostSpec) -> SecurityMarginReport:
    value, tmap, method = optimal_map(p, q, cost)
    return SecurityMarginReport(max(value, 0.0), cost, method, tmap)


def security_margin_linf(p: Pmf, q: Pmf) -> SecurityMarginReport:
    """Largest symbol displacement the NWC plan needs; no plan does better."""
    tmap = nwc_map(p, q)
    return SecurityMarginReport(linf_cost(tmap), "linf", "nwc", tmap)


def _midpoints(grid: int) -> np.ndarray:
    return (np.arange(grid) + 0.5) / grid


def _ppf(source, u):
    if isinstance(source, Pmf):
        source = cdf(source)
    return np.asarray(source.ppf(u), dtype=float)


def hoeffding_coupling(cx, cy, grid: int = DEFAULT_GRID) -> tuple[np.ndarray, np.ndarray]:
    """Comonotone coupling sampled at the quantile midpoints.

    ``cx`` and ``cy`` may be continuous sources, :class:`Cdf` objects or
    pmfs. Returns paired arrays ``(xs, ys)``, each pair carrying weight
    ``1/grid``.
    """
    if grid < 1:
        raise ValueError("grid must be positive")
    u = _midpoints(grid)
    return _ppf(cx, u), _ppf(cy, u)


def coupling_cdf(xs, ys, x, y) -> np.ndarray:
    """Joint CDF of equally weighted sample pairs, evaluated at the points (x, y)."""
    xs = np.sort(np.asarray(xs, dtype=float))
    ys = np.sort(np.asarray(ys, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    # comonotone samples are sorted jointly, so the count is a min of counts
    nx = np.searchsorted(xs, x, side="right")
    ny = np.searchsorted(ys, y, side="right")
    return np.minimum(nx, ny) / xs.size


def sm_continuous(x, y, p_exp: float = 2.0, grid: int = DEFAULT_GRID) -> SecurityMarginReport:
    """Margin between two continuous sources under the cost |x - y|**p_exp."""
    if grid < MIN_GRID:
        raise ValueError(f"grid must be at least {MIN_GRID}")
    if p_exp < 1:
        raise ValueError("p_exp must be >= 1 for the quantile coupling to be optimal")
    xs, ys = hoeffding_coupling(x, y, grid)
    value = float(np.mean(np.abs(xs - ys) ** p_exp))
    return SecurityMarginReport(value, CostSpec.lp(p_exp), "quantile")


def sm_same_class(mu_x: float, sigma_x: float, mu_y: float, sigma_y: float) -> float:
    """Closed-form squared-distance margin for two members of one location-scale family."""
    if sigma_x <= 0 or sigma_y <= 0:
        raise ValueError("sigmas must be positive")
    return (mu_x - mu_y) ** 2 + (sigma_x - sigma_y) ** 2


def sm_same_class_sources(x: ContinuousSource, y: ContinuousSource) -> SecurityMarginReport:
    if x.family != y.family or x.family not in AFFINE_FAMILIES:
        raise ValueError(
            f"closed form needs two sources of one affine-closed family "
            f"{AFFINE_FAMILIES}, got {x.family!r} and {y.family!r}"
        )
    return SecurityMarginReport(
        sm_same_class(x.mu, x.sigma, y.mu, y.sigma), CostSpec.lp(2), "closed_form"
    )


def sm_upper_bound(mu_x: float, sigma_x: float, mu_y: float, sigma_y: float) -> float:
    """Squared-distance margin bound from the independent coupling."""
    if sigma_x < 0 or sigma_y < 0:
        raise ValueError("sigmas must be nonnegative")
    return (mu_x - mu_y) ** 2 + sigma_x**2 + sigma_y**2


def mallows_decomposition(s: MomentStats) -> tuple[float, float, float]:
    """Split E[(X - Y)^2] into location, spread and shape terms."""
    location = (s.mu_x - s.mu_y) ** 2
    spread = (s.sigma_x - s.sigma_y) ** 2
    shape = max(2.0 * (s.sigma_x * s.sigma_y - s.cov_xy), 0.0)
    return location, spread, shape


def quantize_pair(
    x: ContinuousSource, y: ContinuousSource, bins: int = 600, width: float = 6.0
) -> tuple[Pmf, Pmf, float, float]:
    """Quantize two sources onto one uniform grid.

    The grid spans the union of ``mu +- width*sigma`` windows with ``bins``
    cells; mass outside is folded into the edge cells. Returns the pmfs, the
    cell width and the left edge, so that symbol ``k`` stands for the cell
    centre ``left + (k + 0.5) * h``.
    """
    lo = min(x.mu - width * x.sigma, y.mu - width * y.sigma)
    hi = max(x.mu + width * x.sigma, y.mu + width * y.sigma)
    edges = np.linspace(lo, hi, bins + 1)
    h = edges[1] - edges[0]

    def cells(s):
        c = s.cdf(edges)
        c[0], c[-1] = 0.0, 1.0
        w = np.clip(np.diff(c), 0.0, None)
        return Pmf(0, w / w.sum())

    return cells(x), cells(y), float(h), float(lo)
