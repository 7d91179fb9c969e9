"""Measurement ingestion, missing-data cleaning and train/test splitting.

Measurement CSV schema (header required, empty field = missing)::

    row,col,cell_id,dist_nearest_m,elevation_m,clutter,pop_density,freq_mhz,eirp_dbm,alignment,rssi_dbm
"""
from __future__ import annotations

import csv
import statistics
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from cellplan.grid import CLUTTER_CLASSES, FeatureScales, assemble_features

CSV_COLUMNS = ("row", "col", "cell_id", "dist_nearest_m", "elevation_m", "clutter", "pop_density",
               "freq_mhz", "eirp_dbm", "alignment", "rssi_dbm")
FEATURE_FIELDS = ("dist_nearest_m", "elevation_m", "clutter", "pop_density", "freq_mhz",
                  "eirp_dbm", "alignment")
_INT_FIELDS = ("row", "col")
_FLOAT_FIELDS = ("dist_nearest_m", "elevation_m", "pop_density", "freq_mhz", "eirp_dbm",
                 "alignment", "rssi_dbm")


class ParseError(ValueError):
    pass


class EmptyDatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Measurement:
    """One drive-test style sample. ``None`` marks a missing field."""

    row: Optional[int]
    col: Optional[int]
    cell_id: Optional[str]
    dist_nearest_m: Optional[float]
    elevation_m: Optional[float]
    clutter: Optional[str]
    pop_density: Optional[float]
    freq_mhz: Optional[float]
    eirp_dbm: Optional[float]
    alignment: Optional[float]
    rssi_dbm: Optional[float]

    def missing_features(self) -> bool:
        return any(getattr(self, f) is None for f in FEATURE_FIELDS)


@dataclass
class MeasurementSet:
    records: list[Measurement] = field(default_factory=list)
    scales: Optional[FeatureScales] = None
    source: str = ""

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


@dataclass
class TrainingDataset:
    features: np.ndarray
    targets: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.targets)

    def rows(self):
        return list(zip(self.features, self.targets))


def _fmt(v):
    return "" if v is None else (repr(v) if isinstance(v, float) else str(v))


def write_measurements(ms: MeasurementSet, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for m in ms:
            w.writerow([_fmt(getattr(m, c)) for c in CSV_COLUMNS])


def ingest_measurements(source, scales: FeatureScales | None = None) -> MeasurementSet:
    path = Path(source)
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_COLUMNS:
            raise ParseError(f"{path}:1: expected header {','.join(CSV_COLUMNS)}")
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(CSV_COLUMNS):
                raise ParseError(f"{path}:{line}: expected {len(CSV_COLUMNS)} columns, found {len(row)}")
            values = {}
            for col_no, (name, raw) in enumerate(zip(CSV_COLUMNS, row), start=1):
                raw = raw.strip()
                if raw == "":
                    values[name] = None
                    continue
                try:
                    if name in _INT_FIELDS:
                        values[name] = int(raw)
                    elif name in _FLOAT_FIELDS:
                        values[name] = float(raw)
                    elif name == "clutter":
                        if raw not in CLUTTER_CLASSES:
                            raise ValueError(raw)
                        values[name] = raw
                    else:
                        values[name] = raw
                except ValueError:
                    raise ParseError(f"{path}:{line}: column {col_no} ({name}): bad value {raw!r}") from None
            records.append(Measurement(**values))
    return MeasurementSet(records, scales, str(path))


def clean_dataset(measurements: MeasurementSet, scales: FeatureScales | None = None) -> TrainingDataset:
    """Apply the missing-data policy and build feature rows.

    1. Records missing any feature field are dropped.
    2. Missing ``rssi_dbm`` is imputed with the mean label of non-missing
       records sharing the same ``cell_id`` (computed after rule 1).
    3. Records missing ``rssi_dbm`` with no such peer group are dropped.

    Output order follows input order.
    """
    scales = scales or measurements.scales
    if scales is None:
        raise ValueError("feature scales required to build features (pass scales or attach them to the set)")

    kept = [m for m in measurements if not m.missing_features()]
    dropped_features = len(measurements) - len(kept)

    groups = defaultdict(list)
    for m in kept:
        if m.rssi_dbm is not None and m.cell_id is not None:
            groups[m.cell_id].append(m.rssi_dbm)
    cell_mean = {cid: statistics.mean(v) for cid, v in groups.items()}

    final, targets = [], []
    imputed = dropped_label = 0
    for m in kept:
        y = m.rssi_dbm
        if y is None:
            if m.cell_id is None or m.cell_id not in cell_mean:
                dropped_label += 1
                continue
            y = cell_mean[m.cell_id]
            imputed += 1
        final.append(m)
        targets.append(y)

    report = {
        "source": measurements.source,
        "input_records": len(measurements),
        "dropped_missing_feature": dropped_features,
        "imputed_label": imputed,
        "dropped_unimputable_label": dropped_label,
        "policy": "drop missing features; impute label by cell_id mean; drop unimputable labels",
    }
    if not final:
        raise EmptyDatasetError(
            f"empty dataset after cleaning (dropped {dropped_features} for missing features, "
            f"{dropped_label} for unimputable labels)")

    X = assemble_features(
        [m.dist_nearest_m for m in final],
        [m.elevation_m for m in final],
        [CLUTTER_CLASSES.index(m.clutter) for m in final],
        [m.pop_density for m in final],
        [m.freq_mhz for m in final],
        [m.eirp_dbm for m in final],
        [m.alignment for m in final],
        scales,
    )
    return TrainingDataset(X, np.asarray(targets, dtype=float), report)


def split_dataset(dataset: TrainingDataset, test_fraction: float, seed: int):
    if not 0 < test_fraction < 1:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n = len(dataset)
    if n < 2:
        raise ValueError("need at least 2 rows to split")
    n_test = min(max(int(round(test_fraction * n)), 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    test_idx, train_idx = perm[:n_test], perm[n_test:]

    def subset(idx):
        return TrainingDataset(dataset.features[idx], dataset.targets[idx], dict(dataset.provenance))

    return subset(train_idx), subset(test_idx)
