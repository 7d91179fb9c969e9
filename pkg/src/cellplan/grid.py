"""Discrete planning grid, site configurations, coverage maps and per-point features.

Points are flattened row-major with the origin at the top-left corner, so
``index = row * n + col``. Physical coordinates are ``(row, col) * cell_size_m``.
Azimuths are compass bearings: 0 deg points "up" (decreasing row), 90 deg points
towards increasing column.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Sequence

import numpy as np

if TYPE_CHECKING:
    from cellplan.scenario import Scenario

CLUTTER_CLASSES = ("urban", "suburban", "rural", "water")
ANTENNA_KINDS = ("omni", "sector")

FEATURE_NAMES = (
    "dist_nearest_site_m",
    "log10_dist_nearest_site",
    "elevation_m",
    "clutter_onehot_urban",
    "clutter_onehot_suburban",
    "clutter_onehot_rural",
    "clutter_onehot_water",
    "pop_density_norm",
    "nearest_site_frequency_mhz_norm",
    "nearest_site_eirp_dbm_norm",
    "boresight_alignment",
)
N_FEATURES = len(FEATURE_NAMES)

DEFAULT_EIRP_DBM = 43.0
DEFAULT_FREQUENCY_MHZ = 1800.0


class GridMismatchError(ValueError):
    """Two objects that must share a grid do not."""


@dataclass(frozen=True)
class GridSpec:
    n: int
    cell_size_m: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"grid side n must be an integer >= 2, got {self.n!r}")
        if not self.cell_size_m > 0:
            raise ValueError(f"cell_size_m must be positive, got {self.cell_size_m!r}")

    @property
    def size(self) -> int:
        return self.n * self.n

    def coords(self) -> np.ndarray:
        """(n*n, 2) integer array of (row, col) for every point index."""
        idx = np.arange(self.size)
        return np.stack([idx // self.n, idx % self.n], axis=1)


def point_index(row: int, col: int, grid: GridSpec) -> int:
    if not 0 <= row < grid.n:
        raise IndexError(f"row {row} out of range [0, {grid.n})")
    if not 0 <= col < grid.n:
        raise IndexError(f"col {col} out of range [0, {grid.n})")
    return int(row) * grid.n + int(col)


def index_to_coords(index: int, grid: GridSpec) -> tuple[int, int]:
    if not 0 <= index < grid.size:
        raise IndexError(f"index {index} out of range [0, {grid.size})")
    return int(index) // grid.n, int(index) % grid.n


@dataclass(frozen=True)
class Site:
    index: int
    eirp_dbm: float = DEFAULT_EIRP_DBM
    frequency_mhz: float = DEFAULT_FREQUENCY_MHZ
    azimuth_deg: float = 0.0
    antenna_kind: str = "omni"

    def __post_init__(self):
        if self.antenna_kind not in ANTENNA_KINDS:
            raise ValueError(f"unknown antenna kind {self.antenna_kind!r}")
        if not self.frequency_mhz > 0:
            raise ValueError("frequency_mhz must be positive")
        if self.index < 0:
            raise ValueError("site index must be non-negative")
        az = 0.0 if self.antenna_kind == "omni" else float(self.azimuth_deg) % 360.0
        object.__setattr__(self, "azimuth_deg", az)


@dataclass(frozen=True)
class SiteConfiguration:
    """A set of sites on a grid. New sites added via :meth:`with_site` use the
    configuration's default radio attributes (omni antenna)."""

    grid: GridSpec
    sites: tuple[Site, ...] = ()
    default_eirp_dbm: float = DEFAULT_EIRP_DBM
    default_frequency_mhz: float = DEFAULT_FREQUENCY_MHZ

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(self.sites))
        seen = set()
        for s in self.sites:
            if s.index >= self.grid.size:
                raise IndexError(f"site index {s.index} outside grid of {self.grid.size} points")
            if s.index in seen:
                raise ValueError(f"duplicate site at index {s.index}")
            seen.add(s.index)

    @property
    def cell_vector(self) -> np.ndarray:
        x = np.zeros(self.grid.size, dtype=np.int8)
        x[[s.index for s in self.sites]] = 1
        return x

    @property
    def occupied(self) -> frozenset[int]:
        return frozenset(s.index for s in self.sites)

    def default_site(self, index: int) -> Site:
        return Site(index, self.default_eirp_dbm, self.default_frequency_mhz)

    def with_site(self, site: Site | int) -> "SiteConfiguration":
        if not isinstance(site, Site):
            site = self.default_site(int(site))
        return replace(self, sites=self.sites + (site,))

    def __len__(self):
        return len(self.sites)


@dataclass(frozen=True)
class CoverageMap:
    grid: GridSpec
    values_dbm: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values_dbm, dtype=float)
        if v.shape != (self.grid.size,):
            raise GridMismatchError(f"coverage vector has shape {v.shape}, expected ({self.grid.size},)")
        object.__setattr__(self, "values_dbm", v)

    def covered_count(self, tau_dbm: float) -> int:
        return int(np.count_nonzero(self.values_dbm >= tau_dbm))

    def covered_fraction(self, tau_dbm: float) -> float:
        return self.covered_count(tau_dbm) / self.grid.size

    def as_image(self) -> np.ndarray:
        return self.values_dbm.reshape(self.grid.n, self.grid.n)


@dataclass(frozen=True)
class FeatureScales:
    """Min/max ranges used to normalize features, fixed per scenario."""

    cell_size_m: float
    elevation_range: tuple[float, float]
    pop_density_range: tuple[float, float]
    frequency_range: tuple[float, float] = (700.0, 3500.0)
    eirp_range: tuple[float, float] = (30.0, 60.0)


def _minmax(v, lo_hi):
    lo, hi = lo_hi
    if hi <= lo:
        return np.zeros_like(np.asarray(v, dtype=float))
    return (np.asarray(v, dtype=float) - lo) / (hi - lo)


def assemble_features(dist_m, elevation_m, clutter, pop_density, frequency_mhz, eirp_dbm,
                      alignment, scales: FeatureScales) -> np.ndarray:
    """Build the (k, 11) feature matrix from raw per-point quantities.

    ``clutter`` holds class codes (index into CLUTTER_CLASSES). All other
    arguments are broadcastable 1-d arrays.
    """
    dist_m = np.atleast_1d(np.asarray(dist_m, dtype=float))
    k = dist_m.shape[0]
    out = np.zeros((k, N_FEATURES))
    out[:, 0] = dist_m
    out[:, 1] = np.log10(np.maximum(dist_m, scales.cell_size_m / 10.0))
    out[:, 2] = elevation_m
    out[np.arange(k), 3 + np.broadcast_to(np.asarray(clutter, dtype=int), (k,))] = 1.0
    out[:, 7] = _minmax(pop_density, scales.pop_density_range)
    out[:, 8] = _minmax(frequency_mhz, scales.frequency_range)
    out[:, 9] = _minmax(eirp_dbm, scales.eirp_range)
    out[:, 10] = alignment
    return out


def _site_arrays(config: SiteConfiguration):
    if not config.sites:
        raise ValueError("no sites in configuration")
    idx = np.array([s.index for s in config.sites])
    rc = np.stack([idx // config.grid.n, idx % config.grid.n], axis=1).astype(float)
    return idx, rc


def site_geometry(config: SiteConfiguration, points: np.ndarray | None = None):
    """Distances (m) and boresight alignments between every site and point.

    Returns two ``(n_sites, n_points)`` arrays. Alignment is the cosine of the
    angle between a site's azimuth and the bearing from the site to the point;
    it is 1.0 for omni sites and for the site's own point.
    """
    grid = config.grid
    _, site_rc = _site_arrays(config)
    pts = grid.coords() if points is None else grid.coords()[np.asarray(points)]
    d_row = pts[None, :, 0] - site_rc[:, 0:1]
    d_col = pts[None, :, 1] - site_rc[:, 1:2]
    dist = np.hypot(d_row, d_col) * grid.cell_size_m
    bearing = np.arctan2(d_col, -d_row)
    az = np.radians([s.azimuth_deg for s in config.sites])[:, None]
    align = np.cos(bearing - az)
    omni = np.array([s.antenna_kind == "omni" for s in config.sites])
    align[omni, :] = 1.0
    align[dist == 0] = 1.0
    return dist, align


def nearest_site(dist: np.ndarray, config: SiteConfiguration) -> np.ndarray:
    """Position in ``config.sites`` of the nearest site for each column of ``dist``.

    Ties go to the site with the lowest point index.
    """
    order = np.argsort([s.index for s in config.sites], kind="stable")
    return order[np.argmin(dist[order], axis=0)]


def distance_to_nearest_site(index: int, config: SiteConfiguration) -> float:
    if not config.sites:
        raise ValueError("no sites in configuration")
    index_to_coords(index, config.grid)
    dist, _ = site_geometry(config, [index])
    return float(dist[:, 0].min())


def _check_grid(config: SiteConfiguration, scenario: "Scenario"):
    if config.grid != scenario.grid:
        raise GridMismatchError(f"configuration grid {config.grid} does not match scenario grid {scenario.grid}")


def build_feature_matrix(config: SiteConfiguration, scenario: "Scenario",
                         points: Sequence[int] | np.ndarray | None = None) -> np.ndarray:
    """Feature rows for ``points`` (default: every grid point, in index order)."""
    _check_grid(config, scenario)
    pts = np.arange(config.grid.size) if points is None else np.asarray(points, dtype=int)
    dist, align = site_geometry(config, pts)
    near = nearest_site(dist, config)
    cols = np.arange(pts.size)
    freq = np.array([s.frequency_mhz for s in config.sites])[near]
    eirp = np.array([s.eirp_dbm for s in config.sites])[near]
    return assemble_features(
        dist[near, cols], scenario.elevation_m[pts], scenario.clutter[pts],
        scenario.pop_density[pts], freq, eirp, align[near, cols], scenario.norm_stats,
    )


def build_feature_vector(index: int, config: SiteConfiguration, scenario: "Scenario") -> np.ndarray:
    index_to_coords(index, config.grid)
    return build_feature_matrix(config, scenario, [index])[0]
