"""Temporal, spatial, and address feature derivation, plus scaling and PCA.

Feature definitions:
- HourZone: four 6-hour day parts, floor(Hour / 6).
- Season: meteorological quarters, DJF=0 MAM=1 JJA=2 SON=3.
- DayOfWeekNum: Monday=0; IsWeekend: Saturday/Sunday.
- WeekOfYear: ISO-8601 week number.
- Radius/Angle and the 30/45/60-degree rotations are computed on
  centroid-centered coordinates (dx, dy), so RotX^2 + RotY^2 == Radius^2.
- Street1/Street2 come from a vocabulary fitted on training records;
  unseen or absent values map to the sentinel -1.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (
    ConfigurationError,
    DataError,
    ParameterError,
    SchemaError,
    StateError,
)
from .ingest import CrimeRecord

TEMPORAL_FEATURES = (
    "HourZone",
    "Hour",
    "Minute",
    "Day",
    "Month",
    "Year",
    "DayOfWeekNum",
    "WeekOfYear",
    "IsWeekend",
    "Season",
)
SPATIAL_FEATURES = (
    "X",
    "Y",
    "Radius",
    "Angle",
    "Rot30X",
    "Rot30Y",
    "Rot45X",
    "Rot45Y",
    "Rot60X",
    "Rot60Y",
)
ADDRESS_FEATURES = (
    "Street1",
    "Street2",
    "IsIntersection",
    "IsBlock",
    "StreetType",
    "PdDistrictNum",
)
DISTANCE_FEATURE = "NearestClusterDistance"

ALL_FEATURES = TEMPORAL_FEATURES + SPATIAL_FEATURES + ADDRESS_FEATURES + (DISTANCE_FEATURE,)

_GENERATED_NAME = re.compile(r"^(PC|CenterDistance)\d+$")

FORMAT_VERSION = 1


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered, immutable list of feature column names."""

    names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        if len(set(self.names)) != len(self.names):
            raise SchemaError("feature names must be unique")
        for name in self.names:
            if name not in ALL_FEATURES and not _GENERATED_NAME.match(name):
                raise SchemaError(f"unknown feature name: {name}")

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, name: str) -> bool:
        return name in self.names

    def index(self, name: str) -> int:
        return self.names.index(name)

    @property
    def fingerprint(self) -> str:
        return hashlib.sha256("\x1f".join(self.names).encode("utf-8")).hexdigest()

    @staticmethod
    def default(
        include_address: bool = True,
        include_distance: bool = True,
    ) -> "FeatureSchema":
        names = TEMPORAL_FEATURES + SPATIAL_FEATURES
        if include_address:
            names = names + ADDRESS_FEATURES
        if include_distance:
            names = names + (DISTANCE_FEATURE,)
        return FeatureSchema(names)

    def with_center_distances(self, n_centers: int) -> "FeatureSchema":
        """Extend with one CenterDistance<i> column per cluster center."""
        extra = tuple(
            name
            for i in range(n_centers)
            if (name := f"CenterDistance{i}") not in self.names
        )
        return FeatureSchema(self.names + extra)


DEFAULT_SCHEMA = FeatureSchema.default()


@dataclass(frozen=True, slots=True)
class SpatialReference:
    """Anchor point (training-set coordinate means) for polar/rotated features."""

    centroid_x: float
    centroid_y: float

    @classmethod
    def fit(cls, records: Sequence[CrimeRecord]) -> "SpatialReference":
        if not records:
            raise StateError("cannot fit a spatial reference on zero records")
        xs = np.array([r.x for r in records], dtype=np.float64)
        ys = np.array([r.y for r in records], dtype=np.float64)
        return cls(float(xs.mean()), float(ys.mean()))

    def to_json_dict(self) -> dict:
        return {"centroid_x": self.centroid_x, "centroid_y": self.centroid_y}

    @classmethod
    def from_json_dict(cls, data: dict) -> "SpatialReference":
        return cls(float(data["centroid_x"]), float(data["centroid_y"]))


def temporal_features(record: CrimeRecord) -> dict[str, float]:
    ts = record.timestamp
    weekday = ts.weekday()
    return {
        "HourZone": ts.hour // 6,
        "Hour": ts.hour,
        "Minute": ts.minute,
        "Day": ts.day,
        "Month": ts.month,
        "Year": ts.year,
        "DayOfWeekNum": weekday,
        "WeekOfYear": ts.isocalendar()[1],
        "IsWeekend": 1 if weekday >= 5 else 0,
        "Season": (ts.month % 12) // 3,
    }


_ROTATIONS = tuple(
    (name, math.cos(math.radians(deg)), math.sin(math.radians(deg)))
    for name, deg in (("Rot30", 30.0), ("Rot45", 45.0), ("Rot60", 60.0))
)


def spatial_features(record: CrimeRecord, ref: SpatialReference) -> dict[str, float]:
    dx = record.x - ref.centroid_x
    dy = record.y - ref.centroid_y
    out = {
        "X": record.x,
        "Y": record.y,
        "Radius": math.hypot(dx, dy),
        "Angle": math.atan2(dy, dx),
    }
    for name, cos_t, sin_t in _ROTATIONS:
        out[name + "X"] = dx * cos_t + dy * sin_t
        out[name + "Y"] = dy * cos_t - dx * sin_t
    return out


# Recognized trailing street-suffix tokens; codes are the sorted positions.
STREET_SUFFIXES = tuple(
    sorted(
        (
            "AVE", "BLV", "BLVD", "CIR", "CT", "DR", "EXPY", "HWY", "LN",
            "PIKE", "PKWY", "PL", "RD", "ROW", "SQ", "ST", "TER", "WALK", "WAY",
        )
    )
)
_SUFFIX_CODES = {s: i for i, s in enumerate(STREET_SUFFIXES)}

_BLOCK_PATTERN = re.compile(r"^\d+\s+BLOCK\b\s*(?P<rest>.*)$")


def _normalize_address(text: str) -> str:
    return " ".join(text.upper().split())


def parse_address(text: Optional[str]):
    """Split an address into (is_intersection, is_block, street1, street2)."""
    if not text:
        return 0, 0, None, None
    norm = _normalize_address(text)
    if "/" in norm:
        left, _, right = norm.partition("/")
        left = left.strip()
        right = right.strip()
        if left and right:
            return 1, 0, left, right
    match = _BLOCK_PATTERN.match(norm)
    if match:
        rest = match.group("rest").strip()
        return 0, 1, rest or None, None
    return 0, 0, norm or None, None


def street_type_code(street: Optional[str]) -> int:
    """Code of the trailing suffix token of a street name, or -1."""
    if not street:
        return -1
    token = street.rsplit(" ", 1)[-1].rstrip(".")
    return _SUFFIX_CODES.get(token, -1)


@dataclass(frozen=True)
class AddressVocabulary:
    """Street-name token codes fitted on training records only.

    Unseen street names at transform time map to the sentinel -1.
    """

    street_codes: dict[str, int]

    @classmethod
    def fit(cls, records: Sequence[CrimeRecord]) -> "AddressVocabulary":
        streets: set[str] = set()
        for r in records:
            _, _, s1, s2 = parse_address(r.address)
            if s1:
                streets.add(s1)
            if s2:
                streets.add(s2)
        return cls({name: i for i, name in enumerate(sorted(streets))})

    def encode(self, street: Optional[str]) -> int:
        if not street:
            return -1
        return self.street_codes.get(street, -1)

    def to_json_dict(self) -> dict:
        return {"street_codes": self.street_codes}

    @classmethod
    def from_json_dict(cls, data: dict) -> "AddressVocabulary":
        return cls({str(k): int(v) for k, v in data["street_codes"].items()})


def address_features(record: CrimeRecord, vocab: AddressVocabulary) -> dict[str, float]:
    is_intersection, is_block, s1, s2 = parse_address(record.address)
    return {
        "Street1": vocab.encode(s1),
        "Street2": vocab.encode(s2) if is_intersection else -1,
        "IsIntersection": is_intersection,
        "IsBlock": is_block,
        "StreetType": street_type_code(s1),
        "PdDistrictNum": record.district if record.district is not None else -1,
    }


@dataclass(frozen=True, slots=True)
class Standardization:
    """Per-column z-score parameters (population stddev), fitted on train.

    Zero-variance columns keep scale 1, so constant training columns map to
    all zeros and transforms never produce non-finite values.
    """

    means: np.ndarray
    stds: np.ndarray

    @classmethod
    def fit(cls, matrix: "FeatureMatrix") -> "Standardization":
        if matrix.values.shape[0] == 0:
            raise StateError("cannot fit standardization on an empty matrix")
        means = matrix.values.mean(axis=0)
        stds = matrix.values.std(axis=0)
        return cls(means=means, stds=stds)

    def transform(self, matrix: "FeatureMatrix") -> "FeatureMatrix":
        scale = np.where(self.stds > 0.0, self.stds, 1.0)
        values = (matrix.values - self.means) / scale
        return FeatureMatrix(
            schema=matrix.schema,
            values=values,
            labels=matrix.labels,
            standardization=self,
        )

    def to_json_dict(self) -> dict:
        return {"means": self.means.tolist(), "stds": self.stds.tolist()}

    @classmethod
    def from_json_dict(cls, data: dict) -> "Standardization":
        return cls(
            means=np.asarray(data["means"], dtype=np.float64),
            stds=np.asarray(data["stds"], dtype=np.float64),
        )


@dataclass(frozen=True)
class FeatureMatrix:
    """Named numeric columns over records, with labels carried alongside."""

    schema: FeatureSchema
    values: np.ndarray
    labels: np.ndarray
    standardization: Optional[Standardization] = None

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if values.ndim != 2 or values.shape[1] != len(self.schema):
            raise SchemaError(
                f"matrix has {values.shape} values for {len(self.schema)} schema columns"
            )
        if labels.shape != (values.shape[0],):
            raise SchemaError("labels length must match the number of rows")
        if values.size and not np.all(np.isfinite(values)):
            raise DataError("feature matrix contains non-finite values")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def fingerprint(self) -> str:
        return self.schema.fingerprint

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.schema.index(name)]


def standardize(matrix: FeatureMatrix) -> FeatureMatrix:
    """Fit z-score parameters on `matrix` and apply them to it."""
    return Standardization.fit(matrix).transform(matrix)


def build_feature_matrix(
    records: Sequence[CrimeRecord],
    schema: FeatureSchema = DEFAULT_SCHEMA,
    ref: Optional[SpatialReference] = None,
    vocab: Optional[AddressVocabulary] = None,
    centers=None,
) -> FeatureMatrix:
    """Assemble the feature matrix for `records` in schema column order.

    `ref` is required for spatial features, `vocab` for street codes, and
    `centers` (a StackedCenters or (k, 2) array) for NearestClusterDistance.
    Fitted inputs must come from training records only.
    """
    names = schema.names
    needs_spatial = any(n in SPATIAL_FEATURES for n in names)
    needs_address = any(n in ADDRESS_FEATURES for n in names)
    needs_distance = DISTANCE_FEATURE in names
    center_columns = [
        (int(name[len("CenterDistance"):]), name)
        for name in names
        if name.startswith("CenterDistance")
    ]
    if needs_spatial and ref is None:
        raise StateError("schema includes spatial features but no spatial reference was given")
    if needs_address and vocab is None:
        raise StateError("schema includes address features but the vocabulary is not fitted")
    if (needs_distance or center_columns) and centers is None:
        raise ConfigurationError(
            "schema includes cluster-distance features but no cluster centers were given"
        )

    n = len(records)
    values = np.empty((n, len(names)), dtype=np.float64)
    labels = np.empty(n, dtype=np.int64)
    col_index = {name: i for i, name in enumerate(names)}
    per_record = [
        name for name in names
        if name != DISTANCE_FEATURE and not name.startswith("CenterDistance")
    ]

    for i, record in enumerate(records):
        if record.label is None or record.timestamp is None:
            raise DataError(f"record {i} is not cleaned (missing label or timestamp)")
        labels[i] = record.label
        row: dict[str, float] = temporal_features(record)
        if needs_spatial:
            row.update(spatial_features(record, ref))
        if needs_address:
            row.update(address_features(record, vocab))
        for name in per_record:
            values[i, col_index[name]] = row[name]

    if needs_distance or center_columns:
        from .clustering import nearest_center_distances, center_coordinates

        points = np.column_stack(
            [np.array([r.x for r in records]), np.array([r.y for r in records])]
        ) if n else np.zeros((0, 2))
        if needs_distance:
            values[:, col_index[DISTANCE_FEATURE]] = nearest_center_distances(points, centers)
        if center_columns:
            coords = center_coordinates(centers)
            for idx, name in center_columns:
                if idx >= coords.shape[0]:
                    raise ConfigurationError(
                        f"schema column {name} exceeds the {coords.shape[0]} available centers"
                    )
                dx = points[:, 0] - coords[idx, 0]
                dy = points[:, 1] - coords[idx, 1]
                values[:, col_index[name]] = np.sqrt(dx * dx + dy * dy)

    return FeatureMatrix(schema=schema, values=values, labels=labels)


@dataclass(frozen=True)
class PcaModel:
    """Principal components of a standardized feature matrix.

    `components` holds one unit-norm component per row, ordered by
    decreasing explained variance; the sign convention makes each
    component's largest-magnitude entry positive.
    """

    components: np.ndarray
    explained_variance_ratio: np.ndarray
    column_means: np.ndarray
    schema: FeatureSchema


def pca_fit(matrix: FeatureMatrix) -> PcaModel:
    """Eigendecompose the population covariance of the matrix columns."""
    x = matrix.values
    n, f = x.shape
    if n < 2:
        raise ParameterError("PCA needs at least 2 rows")
    means = x.mean(axis=0)
    xc = x - means
    cov = np.einsum("ni,nj->ij", xc, xc) / n
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals, kind="stable")[::-1]
    eigvals = np.maximum(eigvals[order], 0.0)
    components = eigvecs[:, order].T.copy()
    total = float(eigvals.sum())
    if total <= 0.0:
        raise DataError("covariance is identically zero; PCA is undefined")
    for i in range(f):
        pivot = int(np.argmax(np.abs(components[i])))
        if components[i, pivot] < 0:
            components[i] = -components[i]
    return PcaModel(
        components=components,
        explained_variance_ratio=eigvals / total,
        column_means=means,
        schema=matrix.schema,
    )


def pca_transform(model: PcaModel, matrix: FeatureMatrix, n_components: int) -> FeatureMatrix:
    """Project onto the first `n_components` principal components."""
    f = model.components.shape[0]
    if not 1 <= n_components <= f:
        raise ParameterError(f"n_components must be in [1, {f}], got {n_components}")
    xc = matrix.values - model.column_means
    projected = np.einsum("nf,cf->nc", xc, model.components[:n_components])
    schema = FeatureSchema(tuple(f"PC{i + 1}" for i in range(n_components)))
    return FeatureMatrix(schema=schema, values=projected, labels=matrix.labels)


def pca_inverse_transform(model: PcaModel, matrix: FeatureMatrix) -> FeatureMatrix:
    """Map projected rows back into the original feature space."""
    k = matrix.values.shape[1]
    restored = np.einsum("nc,cf->nf", matrix.values, model.components[:k]) + model.column_means
    return FeatureMatrix(schema=model.schema, values=restored, labels=matrix.labels)


def save_feature_matrix(matrix: FeatureMatrix, csv_path, meta_path=None,
                        ref: Optional[SpatialReference] = None,
                        vocab: Optional[AddressVocabulary] = None):
    """Write the matrix as CSV (header = schema order, plus a label column)
    and optionally a JSON sidecar with the fitted state."""
    import csv as _csv

    with open(csv_path, "w", encoding="utf-8", newline="") as handle:
        writer = _csv.writer(handle)
        writer.writerow(list(matrix.schema.names) + ["label"])
        for i in range(matrix.n_rows):
            writer.writerow([repr(float(v)) for v in matrix.values[i]] + [int(matrix.labels[i])])
    if meta_path is not None:
        meta = feature_meta_dict(matrix.schema, ref, vocab, matrix.standardization)
        with open(meta_path, "w", encoding="utf-8") as handle:
            json.dump(meta, handle, indent=2, sort_keys=True)
            handle.write("\n")


def feature_meta_dict(schema: FeatureSchema,
                      ref: Optional[SpatialReference],
                      vocab: Optional[AddressVocabulary],
                      standardization: Optional[Standardization]) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "schema": list(schema.names),
        "spatial_reference": ref.to_json_dict() if ref else None,
        "vocabulary": vocab.to_json_dict() if vocab else None,
        "standardization": standardization.to_json_dict() if standardization else None,
    }


def load_feature_meta(meta_path):
    """Load the sidecar; returns (schema, ref, vocab, standardization)."""
    with open(meta_path, "r", encoding="utf-8") as handle:
        meta = json.load(handle)
    if meta.get("format_version") != FORMAT_VERSION:
        raise SchemaError(f"unsupported feature meta format: {meta.get('format_version')}")
    schema = FeatureSchema(tuple(meta["schema"]))
    ref = SpatialReference.from_json_dict(meta["spatial_reference"]) if meta.get("spatial_reference") else None
    vocab = AddressVocabulary.from_json_dict(meta["vocabulary"]) if meta.get("vocabulary") else None
    std = Standardization.from_json_dict(meta["standardization"]) if meta.get("standardization") else None
    return schema, ref, vocab, std


def load_feature_matrix(csv_path, standardization: Optional[Standardization] = None) -> FeatureMatrix:
    """Read a feature CSV written by save_feature_matrix."""
    import csv as _csv

    with open(csv_path, "r", encoding="utf-8", newline="") as handle:
        reader = _csv.reader(handle)
        header = next(reader)
        if not header or header[-1] != "label":
            raise SchemaError("feature CSV must end with a label column")
        schema = FeatureSchema(tuple(header[:-1]))
        rows = []
        labels = []
        for row in reader:
            if not row:
                continue
            rows.append([float(v) for v in row[:-1]])
            labels.append(int(row[-1]))
    values = np.asarray(rows, dtype=np.float64) if rows else np.zeros((0, len(schema)))
    return FeatureMatrix(
        schema=schema,
        values=values,
        labels=np.asarray(labels, dtype=np.int64),
        standardization=standardization,
    )
