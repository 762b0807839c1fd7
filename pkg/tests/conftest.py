"""Shared test helpers: synthetic blobs, incident CSVs, and matrix builders."""

from __future__ import annotations

from datetime import datetime
from pathlib import Path

import numpy as np
import pytest

from crimepred.features import FeatureMatrix, FeatureSchema
from crimepred.ingest import CrimeRecord
from crimepred.labels import CLASS_NAMES

BLOB_GRID = ((0, 0), (2, 0), (4, 0), (0, 2), (2, 2), (4, 2), (0, 4), (2, 4), (4, 4))


def make_blobs(n_blobs: int, n_total: int, sigma: float, seed: int) -> np.ndarray:
    """Well-separated isotropic Gaussian blobs on a unit-spaced grid."""
    rng = np.random.default_rng(seed)
    centers = np.asarray(BLOB_GRID[:n_blobs], dtype=float)
    per = n_total // n_blobs
    return np.concatenate([c + sigma * rng.standard_normal((per, 2)) for c in centers])


def make_matrix(values, labels, names=None) -> FeatureMatrix:
    """FeatureMatrix over a generic PC1..PCF schema (or the given names)."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if names is None:
        names = tuple(f"PC{i + 1}" for i in range(values.shape[1]))
    return FeatureMatrix(
        schema=FeatureSchema(tuple(names)),
        values=values,
        labels=np.asarray(labels, dtype=np.int64),
    )


def make_record(x=-75.16, y=39.95, ts="4/3/2009 8:46", label=19, address=None, district=None):
    return CrimeRecord(
        x=x,
        y=y,
        timestamp=datetime.strptime(ts, "%m/%d/%Y %H:%M"),
        label=label,
        address=address,
        district=district,
    )


STREETS = (
    "MARKET ST", "CHESTNUT ST", "BROAD ST", "15TH ST", "GIRARD AVE",
    "PASSYUNK AVE", "RIDGE PIKE", "9TH ST", "WALNUT ST", "LEHIGH AVE",
)


def write_incident_csv(path: Path, n: int, seed: int, n_labels: int = 33) -> Path:
    """Synthetic incident CSV with a planted spatio-temporal signal.

    Each label prefers its own spatial blob and hour band inside the default
    bounding box; years span 2006-2015 so per-year clustering always has
    enough records."""
    rng = np.random.default_rng(seed)
    cx = rng.uniform(-75.25, -75.00, n_labels)
    cy = rng.uniform(39.90, 40.10, n_labels)
    hour_pref = rng.integers(0, 24, n_labels)
    rows = ["X,Y,Date,Description,Address,PdDistrict"]
    for _ in range(n):
        lab = int(rng.integers(0, n_labels))
        x = float(np.clip(cx[lab] + 0.01 * rng.standard_normal(), -75.299, -74.951))
        y = float(np.clip(cy[lab] + 0.01 * rng.standard_normal(), 39.851, 40.149))
        hour = int((hour_pref[lab] + rng.integers(-2, 3)) % 24)
        year = int(rng.integers(2006, 2016))
        month = int(rng.integers(1, 13))
        day = int(rng.integers(1, 29))
        minute = int(rng.integers(0, 60))
        if rng.random() < 0.5:
            addr = f"{int(rng.integers(1, 40)) * 100} BLOCK {STREETS[int(rng.integers(0, len(STREETS)))]}"
        else:
            a, b = rng.choice(len(STREETS), 2, replace=False)
            addr = f"{STREETS[a]} / {STREETS[b]}"
        district = int(rng.integers(1, 26))
        rows.append(
            f'{x},{y},{month}/{day}/{year} {hour}:{minute:02d},'
            f'"{CLASS_NAMES[lab % len(CLASS_NAMES)]}","{addr}",{district}'
        )
    path = Path(path)
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
