"""Seeded synthetic worlds and the ground-truth propagation oracle.

A :class:`Scenario` holds elevation, land-cover clutter and population density
for every grid point. Coverage ground truth comes from a log-distance path-loss
model with a clutter-dependent exponent and additive clutter loss, evaluated at
the receiving point's clutter class.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from cellplan.grid import (
    CLUTTER_CLASSES,
    CoverageMap,
    FeatureScales,
    GridMismatchError,
    GridSpec,
    SiteConfiguration,
    nearest_site,
    site_geometry,
)

WATER = CLUTTER_CLASSES.index("water")
SECTOR_PENALTY_DB = 12.0


@dataclass(frozen=True)
class TerrainParams:
    """Knobs for :func:`generate_scenario`.

    Each noise field sums ``octaves`` layers of bilinearly interpolated lattice
    noise (smoothstep-faded); layer ``o`` has ``base_cells * 2**o`` lattice cells
    per axis and amplitude ``persistence**o``. The sum is divided by the total
    amplitude and passed through a 3x3 box filter with edge replication.
    """

    octaves: int = 4
    base_cells: int = 2
    persistence: float = 0.5
    elevation_min_m: float = 0.0
    elevation_max_m: float = 300.0
    water_fraction: float = 0.08
    suburban_fraction: float = 0.25
    urban_fraction: float = 0.15
    density_per_km2: tuple = (8000.0, 2000.0, 150.0, 0.0)  # urban, suburban, rural, water


@dataclass(eq=False)
class Scenario:
    grid: GridSpec
    seed: int
    elevation_m: np.ndarray = field(repr=False)
    clutter: np.ndarray = field(repr=False)  # int8 codes into CLUTTER_CLASSES
    pop_density: np.ndarray = field(repr=False)
    norm_stats: FeatureScales = field(repr=False)

    def __post_init__(self):
        self.elevation_m = np.asarray(self.elevation_m, dtype=float)
        self.clutter = np.asarray(self.clutter, dtype=np.int8)
        self.pop_density = np.asarray(self.pop_density, dtype=float)
        for name in ("elevation_m", "clutter", "pop_density"):
            if getattr(self, name).shape != (self.grid.size,):
                raise GridMismatchError(f"{name} must have length {self.grid.size}")
        if np.any(self.pop_density < 0):
            raise ValueError("pop_density must be non-negative")
        if np.any(self.pop_density[self.clutter == WATER] != 0):
            raise ValueError("pop_density must be zero over water")

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return dump_scenario(self) == dump_scenario(other)

    def clutter_names(self) -> list[str]:
        return [CLUTTER_CLASSES[c] for c in self.clutter]


def _fade(t):
    return t * t * (3.0 - 2.0 * t)


def value_noise(rng: np.random.Generator, n: int, tp: TerrainParams) -> np.ndarray:
    """One smoothed multi-octave value-noise field of shape (n, n), values in [0, 1]."""
    total = np.zeros((n, n))
    amp, amp_sum = 1.0, 0.0
    for o in range(tp.octaves):
        cells = tp.base_cells * 2 ** o
        lattice = rng.random((cells + 1, cells + 1))
        t = np.arange(n) * cells / (n - 1)
        i0 = np.minimum(np.floor(t).astype(int), cells - 1)
        f = _fade(t - i0)
        top = lattice[i0][:, i0] * (1 - f)[None, :] + lattice[i0][:, i0 + 1] * f[None, :]
        bot = lattice[i0 + 1][:, i0] * (1 - f)[None, :] + lattice[i0 + 1][:, i0 + 1] * f[None, :]
        total += amp * (top * (1 - f)[:, None] + bot * f[:, None])
        amp_sum += amp
        amp *= tp.persistence
    total /= amp_sum
    padded = np.pad(total, 1, mode="edge")
    smooth = np.zeros_like(total)
    for dr in range(3):
        for dc in range(3):
            smooth += padded[dr:dr + n, dc:dc + n]
    return smooth / 9.0


def classify_clutter(field_values: np.ndarray, tp: TerrainParams) -> np.ndarray:
    """Rank-threshold a noise field: lowest band water, then rural, suburban, urban on top."""
    v = field_values.ravel()
    size = v.size
    order = np.argsort(v, kind="stable")
    n_water = int(np.floor(tp.water_fraction * size))
    n_urban = int(np.floor(tp.urban_fraction * size))
    n_sub = int(np.floor(tp.suburban_fraction * size))
    codes = np.full(size, CLUTTER_CLASSES.index("rural"), dtype=np.int8)
    codes[order[:n_water]] = WATER
    codes[order[size - n_urban:]] = CLUTTER_CLASSES.index("urban")
    codes[order[size - n_urban - n_sub:size - n_urban]] = CLUTTER_CLASSES.index("suburban")
    return codes


def generate_scenario(seed: int, grid: GridSpec, params: TerrainParams | None = None) -> Scenario:
    """Elevation, clutter and population noise fields are drawn in that order
    from ``numpy.random.default_rng(seed)``."""
    tp = params or TerrainParams()
    rng = np.random.default_rng(seed)
    n = grid.n
    elev_field = value_noise(rng, n, tp).ravel()
    clutter_field = value_noise(rng, n, tp)
    pop_field = value_noise(rng, n, tp).ravel()

    elevation = tp.elevation_min_m + (tp.elevation_max_m - tp.elevation_min_m) * elev_field
    clutter = classify_clutter(clutter_field, tp)
    base = np.asarray(tp.density_per_km2, dtype=float)[clutter]
    pop = base * (0.5 + pop_field)
    pop[clutter == WATER] = 0.0

    scales = FeatureScales(
        cell_size_m=grid.cell_size_m,
        elevation_range=(float(elevation.min()), float(elevation.max())),
        pop_density_range=(float(pop.min()), float(pop.max())),
    )
    return Scenario(grid, int(seed), elevation, clutter, pop, scales)


def dump_scenario(scenario: Scenario) -> str:
    """Text dump: header lines, then one ``index,elevation_m,clutter,pop_density`` record per point."""
    s = scenario.norm_stats
    buf = io.StringIO()
    buf.write("SCENARIO 1\n")
    buf.write(f"n {scenario.grid.n}\ncell_size_m {scenario.grid.cell_size_m!r}\nseed {scenario.seed}\n")
    for name, (lo, hi) in (("elevation", s.elevation_range), ("pop_density", s.pop_density_range),
                           ("frequency", s.frequency_range), ("eirp", s.eirp_range)):
        buf.write(f"norm {name} {lo:.17g} {hi:.17g}\n")
    buf.write("index,elevation_m,clutter,pop_density\n")
    for i in range(scenario.grid.size):
        buf.write(f"{i},{scenario.elevation_m[i]:.17g},{CLUTTER_CLASSES[scenario.clutter[i]]},"
                  f"{scenario.pop_density[i]:.17g}\n")
    return buf.getvalue()


def save_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(dump_scenario(scenario))


def load_scenario(path) -> Scenario:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != "SCENARIO 1":
        raise ValueError(f"{path}: not a scenario dump")
    try:
        n = int(lines[1].split()[1])
        cell = float(lines[2].split()[1])
        seed = int(lines[3].split()[1])
        ranges = {}
        for line in lines[4:8]:
            _, name, lo, hi = line.split()
            ranges[name] = (float(lo), float(hi))
        grid = GridSpec(n, cell)
        body = lines[9:]
        if len(body) != grid.size:
            raise ValueError(f"expected {grid.size} point records, found {len(body)}")
        elev = np.empty(grid.size)
        clutter = np.empty(grid.size, dtype=np.int8)
        pop = np.empty(grid.size)
        for k, line in enumerate(body):
            i, e, c, p = line.split(",")
            if int(i) != k:
                raise ValueError(f"line {k + 10}: record index {i} out of order")
            elev[k], clutter[k], pop[k] = float(e), CLUTTER_CLASSES.index(c), float(p)
    except (IndexError, KeyError) as exc:
        raise ValueError(f"{path}: malformed scenario dump ({exc})") from exc
    scales = FeatureScales(cell, ranges["elevation"], ranges["pop_density"],
                           ranges["frequency"], ranges["eirp"])
    return Scenario(grid, seed, elev, clutter, pop, scales)


def _per_class(mapping, name):
    missing = [c for c in CLUTTER_CLASSES if c not in mapping]
    if missing:
        raise ValueError(f"{name} missing clutter classes {missing}")
    return np.array([float(mapping[c]) for c in CLUTTER_CLASSES])


@dataclass(frozen=True)
class RadioParams:
    pl0_db: float = 40.0
    d0_m: float = 1.0
    exponent: dict = field(default_factory=lambda: {"urban": 3.5, "suburban": 3.0, "rural": 2.5, "water": 2.0})
    clutter_loss_db: dict = field(default_factory=lambda: {"urban": 15.0, "suburban": 8.0, "rural": 0.0, "water": 0.0})
    noise_sigma_db: float = 2.0
    rssi_floor_dbm: float = -150.0

    def __post_init__(self):
        if not self.d0_m > 0:
            raise ValueError("d0_m must be positive")
        if np.any(_per_class(self.exponent, "exponent") <= 0):
            raise ValueError("path-loss exponents must be positive")
        if np.any(_per_class(self.clutter_loss_db, "clutter_loss_db") < 0):
            raise ValueError("clutter losses must be non-negative")
        if self.noise_sigma_db < 0:
            raise ValueError("noise_sigma_db must be non-negative")

    def exponent_array(self) -> np.ndarray:
        return _per_class(self.exponent, "exponent")

    def loss_array(self) -> np.ndarray:
        return _per_class(self.clutter_loss_db, "clutter_loss_db")


def _clutter_code(clutter):
    if isinstance(clutter, str):
        return CLUTTER_CLASSES.index(clutter)
    return np.asarray(clutter, dtype=int)


def path_loss_db(distance_m, params: RadioParams, clutter):
    """Log-distance path loss. Distances below ``d0_m`` (including zero or
    negative values) are clamped to ``d0_m``."""
    code = _clutter_code(clutter)
    d = np.maximum(np.asarray(distance_m, dtype=float), params.d0_m)
    pl = (params.pl0_db + 10.0 * params.exponent_array()[code] * np.log10(d / params.d0_m)
          + params.loss_array()[code])
    return float(pl) if np.ndim(pl) == 0 else pl


def received_power(config: SiteConfiguration, scenario: Scenario, params: RadioParams) -> np.ndarray:
    """(n_sites, n_points) received power before the floor clamp."""
    dist, align = site_geometry(config)
    pl = path_loss_db(dist, params, scenario.clutter[None, :])
    eirp = np.array([s.eirp_dbm for s in config.sites])[:, None]
    sector = np.array([s.antenna_kind == "sector" for s in config.sites])[:, None]
    penalty = np.where(sector, SECTOR_PENALTY_DB * (1.0 - align) / 2.0, 0.0)
    return eirp - pl - penalty


def oracle_coverage(config: SiteConfiguration, scenario: Scenario, params: RadioParams) -> CoverageMap:
    if config.grid != scenario.grid:
        raise GridMismatchError(f"configuration grid {config.grid} does not match scenario grid {scenario.grid}")
    if not config.sites:
        return CoverageMap(config.grid, np.full(config.grid.size, params.rssi_floor_dbm))
    rssi = received_power(config, scenario, params).max(axis=0)
    return CoverageMap(config.grid, np.maximum(rssi, params.rssi_floor_dbm))


def serving_sites(config: SiteConfiguration, scenario: Scenario, params: RadioParams) -> np.ndarray:
    """Point index of the max-power site for every grid point (ties: lowest site index)."""
    power = received_power(config, scenario, params)
    order = np.argsort([s.index for s in config.sites], kind="stable")
    best = order[np.argmax(power[order], axis=0)]
    return np.array([s.index for s in config.sites])[best]


def oracle_evaluator(scenario: Scenario, params: RadioParams):
    """Coverage function ``config -> CoverageMap`` backed by the oracle."""
    return lambda config: oracle_coverage(config, scenario, params)


@dataclass(frozen=True)
class MissingSpec:
    """Per-record blanking probabilities. A record selected for feature
    blanking loses one uniformly chosen feature field."""

    features: float = 0.0
    rssi: float = 0.0


def synthesize_measurements(config: SiteConfiguration, scenario: Scenario, params: RadioParams,
                            sample_count: int, seed: int, missing: MissingSpec | None = None):
    """Drive-test stand-in: uniformly sampled points labelled with oracle RSSI plus noise."""
    from cellplan.data import FEATURE_FIELDS, Measurement, MeasurementSet

    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    missing = missing or MissingSpec()
    rng = np.random.default_rng(seed)
    grid = scenario.grid
    points = rng.integers(0, grid.size, size=sample_count)
    noise = rng.normal(0.0, params.noise_sigma_db, size=sample_count) if params.noise_sigma_db > 0 \
        else np.zeros(sample_count)
    blank_feature = rng.random(sample_count) < missing.features
    which_feature = rng.integers(0, len(FEATURE_FIELDS), size=sample_count)
    blank_rssi = rng.random(sample_count) < missing.rssi

    truth = oracle_coverage(config, scenario, params).values_dbm
    serving = serving_sites(config, scenario, params)
    dist, align = site_geometry(config)
    nearest = nearest_site(dist, config)
    cols = np.arange(grid.size)
    near_dist, near_align = dist[nearest, cols], align[nearest, cols]
    freq = np.array([s.frequency_mhz for s in config.sites])[nearest]
    eirp = np.array([s.eirp_dbm for s in config.sites])[nearest]

    records = []
    for k, i in enumerate(points):
        i = int(i)
        values = dict(
            row=i // grid.n,
            col=i % grid.n,
            cell_id=str(int(serving[i])),
            dist_nearest_m=float(near_dist[i]),
            elevation_m=float(scenario.elevation_m[i]),
            clutter=CLUTTER_CLASSES[scenario.clutter[i]],
            pop_density=float(scenario.pop_density[i]),
            freq_mhz=float(freq[i]),
            eirp_dbm=float(eirp[i]),
            alignment=float(near_align[i]),
            rssi_dbm=float(truth[i] + noise[k]),
        )
        if blank_feature[k]:
            values[FEATURE_FIELDS[which_feature[k]]] = None
        if blank_rssi[k]:
            values["rssi_dbm"] = None
        records.append(Measurement(**values))
    return MeasurementSet(records, scenario.norm_stats, f"synthetic(seed={seed})")
