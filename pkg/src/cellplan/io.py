"""Run configuration and file exports: site lists, plan CSV, PGM coverage rasters."""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from cellplan.grid import CoverageMap, GridSpec, Site, SiteConfiguration, index_to_coords, point_index
from cellplan.planner import IterationRecord, PlanPolicy, PlanResult
from cellplan.predictor import Hyperparams
from cellplan.recommender import Budget, CandidateSite
from cellplan.scenario import MissingSpec, RadioParams, TerrainParams

CLUTTER = ("urban", "suburban", "rural", "water")

DEFAULTS = {
    "grid.n": 64,
    "grid.cell_size_m": 100.0,
    "scenario.seed": 7,
    "scenario.initial_sites": 3,
    "scenario.initial_antenna": "mixed",
    "scenario.measurements": 5000,
    "scenario.missing_features": 0.0,
    "scenario.missing_rssi": 0.0,
    "scenario.octaves": 4,
    "scenario.base_cells": 2,
    "scenario.persistence": 0.5,
    "scenario.elevation_min_m": 0.0,
    "scenario.elevation_max_m": 300.0,
    "scenario.water_fraction": 0.08,
    "scenario.suburban_fraction": 0.25,
    "scenario.urban_fraction": 0.15,
    "site.eirp_dbm": 43.0,
    "site.frequency_mhz": 1800.0,
    "radio.pl0_db": 40.0,
    "radio.d0_m": 1.0,
    "radio.exponent.urban": 3.5,
    "radio.exponent.suburban": 3.0,
    "radio.exponent.rural": 2.5,
    "radio.exponent.water": 2.0,
    "radio.clutter_loss_db.urban": 15.0,
    "radio.clutter_loss_db.suburban": 8.0,
    "radio.clutter_loss_db.rural": 0.0,
    "radio.clutter_loss_db.water": 0.0,
    "radio.noise_sigma_db": 2.0,
    "radio.rssi_floor_dbm": -150.0,
    "train.hidden_dims": "32,16",
    "train.learning_rate": 0.01,
    "train.epochs": 500,
    "train.seed": 0,
    "train.test_fraction": 0.2,
    "plan.tau_dbm": -100.0,
    "plan.budget_total": 5.0,
    "plan.cost_per_site": 1.0,
    "plan.target_covered_fraction": 0.95,
    "plan.max_iterations": 50,
    "plan.cluster_method": "dbscan",
    "plan.eps": 2.5,
    "plan.min_pts": 4,
    "plan.k": 3,
    "plan.placement_strategy": "centroid",
    "plan.sites_per_iteration": 1,
    "render.lo_dbm": -150.0,
    "render.hi_dbm": -50.0,
    "paths.scenario": "scenario.txt",
    "paths.sites": "sites.csv",
    "paths.measurements": "measurements.csv",
    "paths.model": "model.txt",
    "paths.plan": "plan.csv",
    "paths.final_sites": "final_sites.csv",
    "paths.metrics": "metrics.json",
    "paths.raster": "coverage.pgm",
}


class ConfigError(ValueError):
    pass


class RunConfig(dict):
    """Flat ``dotted.key = value`` settings; every key has a typed default."""

    def __init__(self, overrides=None):
        super().__init__(DEFAULTS)
        for k, v in (overrides or {}).items():
            self.set(k, v)

    def set(self, key, value):
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        kind = type(DEFAULTS[key])
        try:
            self[key] = kind(value) if not isinstance(value, str) or kind is str else _coerce(kind, value)
        except ValueError:
            raise ConfigError(f"config key {key!r}: cannot read {value!r} as {kind.__name__}") from None

    @classmethod
    def load(cls, path) -> "RunConfig":
        cfg = cls()
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (t.strip() for t in line.split("=", 1))
            try:
                cfg.set(key, value)
            except ConfigError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from None
        return cfg

    def dump(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.items())

    def grid(self) -> GridSpec:
        return GridSpec(self["grid.n"], self["grid.cell_size_m"])

    def terrain(self) -> TerrainParams:
        return TerrainParams(
            octaves=self["scenario.octaves"], base_cells=self["scenario.base_cells"],
            persistence=self["scenario.persistence"], elevation_min_m=self["scenario.elevation_min_m"],
            elevation_max_m=self["scenario.elevation_max_m"], water_fraction=self["scenario.water_fraction"],
            suburban_fraction=self["scenario.suburban_fraction"], urban_fraction=self["scenario.urban_fraction"],
        )

    def radio(self) -> RadioParams:
        return RadioParams(
            pl0_db=self["radio.pl0_db"], d0_m=self["radio.d0_m"],
            exponent={c: self[f"radio.exponent.{c}"] for c in CLUTTER},
            clutter_loss_db={c: self[f"radio.clutter_loss_db.{c}"] for c in CLUTTER},
            noise_sigma_db=self["radio.noise_sigma_db"], rssi_floor_dbm=self["radio.rssi_floor_dbm"],
        )

    def missing(self) -> MissingSpec:
        return MissingSpec(self["scenario.missing_features"], self["scenario.missing_rssi"])

    def hyperparams(self) -> Hyperparams:
        dims = tuple(int(t) for t in self["train.hidden_dims"].split(",") if t.strip())
        return Hyperparams(dims, self["train.learning_rate"], self["train.epochs"], self["train.seed"])

    def policy(self) -> PlanPolicy:
        if self["plan.cluster_method"] == "kmeans":
            params = {"k": self["plan.k"]}
        else:
            params = {"eps": self["plan.eps"], "min_pts": self["plan.min_pts"]}
        return PlanPolicy(
            tau_dbm=self["plan.tau_dbm"],
            budget=Budget(self["plan.budget_total"], self["plan.cost_per_site"]),
            target_covered_fraction=self["plan.target_covered_fraction"],
            max_iterations=self["plan.max_iterations"],
            cluster_method=self["plan.cluster_method"],
            cluster_params=params,
            placement_strategy=self["plan.placement_strategy"],
            sites_per_iteration=self["plan.sites_per_iteration"],
        )


def _coerce(kind, text):
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    return text


def initial_sites(cfg: RunConfig) -> SiteConfiguration:
    """Seeded initial network: distinct random points; ``mixed`` alternates
    sector (even positions) and omni antennas."""
    grid = cfg.grid()
    rng = np.random.default_rng(cfg["scenario.seed"] + 2)
    k = cfg["scenario.initial_sites"]
    idx = rng.choice(grid.size, size=k, replace=False)
    az = rng.uniform(0.0, 360.0, size=k)
    mode = cfg["scenario.initial_antenna"]
    if mode not in ("omni", "sector", "mixed"):
        raise ConfigError(f"scenario.initial_antenna must be omni, sector or mixed, got {mode!r}")
    sites = []
    for j, (i, a) in enumerate(zip(idx, az)):
        kind = mode if mode != "mixed" else ("sector" if j % 2 == 0 else "omni")
        sites.append(Site(int(i), cfg["site.eirp_dbm"], cfg["site.frequency_mhz"], float(a), kind))
    return SiteConfiguration(grid, sites, cfg["site.eirp_dbm"], cfg["site.frequency_mhz"])


SITE_COLUMNS = ("index", "row", "col", "eirp_dbm", "frequency_mhz", "azimuth_deg", "antenna_kind")


def write_sites(config: SiteConfiguration, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SITE_COLUMNS)
        for s in config.sites:
            r, c = index_to_coords(s.index, config.grid)
            w.writerow([s.index, r, c, repr(float(s.eirp_dbm)), repr(float(s.frequency_mhz)),
                        repr(float(s.azimuth_deg)), s.antenna_kind])


def read_sites(path, grid: GridSpec, default_eirp_dbm=43.0, default_frequency_mhz=1800.0) -> SiteConfiguration:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != SITE_COLUMNS:
            raise ValueError(f"{path}:1: expected header {','.join(SITE_COLUMNS)}")
        sites = []
        for row in reader:
            try:
                sites.append(Site(int(row["index"]), float(row["eirp_dbm"]), float(row["frequency_mhz"]),
                                  float(row["azimuth_deg"]), row["antenna_kind"]))
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{reader.line_num}: {exc}") from None
    return SiteConfiguration(grid, sites, default_eirp_dbm, default_frequency_mhz)


PLAN_COLUMNS = ("iteration", "row", "col", "cluster_id", "strategy", "predicted_gain",
                "covered_fraction_after", "spend_after")


def export_plan(result: PlanResult, path) -> None:
    """One row per selected site in pick order, then a summary row with
    ``iteration = -1`` whose ``strategy`` column carries the stop reason."""
    grid = result.initial.grid
    cost = result.policy.budget.cost_per_site
    picks = 0
    total_gain = 0.0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PLAN_COLUMNS)
        for rec in result.iterations:
            for c in rec.selected:
                picks += 1
                total_gain += c.predicted_gain
                r, col = index_to_coords(c.index, grid)
                w.writerow([rec.iteration, r, col, c.cluster_id, c.strategy, repr(float(c.predicted_gain)),
                            repr(float(rec.covered_fraction_after)), repr(float(picks * cost))])
        w.writerow([-1, "", "", "", result.stop_reason, repr(float(total_gain)),
                    repr(float(result.final_covered_fraction)), repr(float(result.spend))])


def read_plan(path):
    """Parse a plan CSV into ``(rows, summary)``; numeric fields converted."""
    rows, summary = [], None
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != PLAN_COLUMNS:
            raise ValueError(f"{path}:1: expected header {','.join(PLAN_COLUMNS)}")
        for rec in reader:
            try:
                it = int(rec["iteration"])
                if it == -1:
                    summary = {"stop_reason": rec["strategy"], "total_gain": float(rec["predicted_gain"]),
                               "covered_fraction_after": float(rec["covered_fraction_after"]),
                               "spend_after": float(rec["spend_after"])}
                    continue
                rows.append({"iteration": it, "row": int(rec["row"]), "col": int(rec["col"]),
                             "cluster_id": int(rec["cluster_id"]), "strategy": rec["strategy"],
                             "predicted_gain": float(rec["predicted_gain"]),
                             "covered_fraction_after": float(rec["covered_fraction_after"]),
                             "spend_after": float(rec["spend_after"])})
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{reader.line_num}: {exc}") from None
    if summary is None:
        raise ValueError(f"{path}: missing summary row (iteration = -1)")
    return rows, summary


def plan_from_csv(path, initial: SiteConfiguration, policy: PlanPolicy) -> PlanResult:
    """Rebuild a :class:`PlanResult` from an exported plan and its initial sites."""
    rows, summary = read_plan(path)
    grid = initial.grid
    records: dict[int, IterationRecord] = {}
    config = initial
    for r in rows:
        idx = point_index(r["row"], r["col"], grid)
        rec = records.setdefault(r["iteration"], IterationRecord(
            r["iteration"], 0, 0, 0, [], math.nan, r["covered_fraction_after"], r["spend_after"]))
        rec.selected.append(CandidateSite(idx, r["cluster_id"], r["strategy"], r["predicted_gain"]))
        rec.spend_after = r["spend_after"]
        config = config.with_site(idx)
    return PlanResult(initial, config, list(records.values()), summary["stop_reason"], policy,
                      math.nan, summary["covered_fraction_after"])


def render_coverage(cov: CoverageMap, path, lo_dbm: float = -150.0, hi_dbm: float = -50.0) -> None:
    """Binary 8-bit PGM; pixel = round-half-up(255 * clamp((v - lo) / (hi - lo), 0, 1))."""
    if not lo_dbm < hi_dbm:
        raise ValueError("render range needs lo < hi")
    scaled = np.clip((cov.values_dbm - lo_dbm) / (hi_dbm - lo_dbm), 0.0, 1.0)
    pixels = np.floor(255.0 * scaled + 0.5).astype(np.uint8)
    n = cov.grid.n
    with open(path, "wb") as fh:
        fh.write(f"P5\n{n} {n}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if len(parts) < 4 or parts[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    width, height, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    header_len = len(b" ".join(parts[:4])) + 1
    payload = data[header_len:]
    if maxval != 255 or len(payload) != width * height:
        raise ValueError(f"{path}: expected {width * height} payload bytes, found {len(payload)}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
