"""Parse, validate, clean, split, and aggregate raw incident CSVs.

CSV contract: UTF-8, comma-delimited, RFC 4180 quoting, header row.
Default columns are X, Y, Date, Description, with optional Address and
PdDistrict. Dates are M/D/YYYY H:MM on a 24-hour clock, naive local time,
minute precision.

parse_csv never drops rows: malformed values become None fields on the
candidate record, and clean_records drops them with per-cause counts.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass
from datetime import datetime
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .errors import (
    DataError,
    InsufficientDataError,
    ParameterError,
    SchemaError,
    UnknownLabelError,
)
from .labels import ClassLabel, decode_label, encode_label

DATE_FORMAT = "%m/%d/%Y %H:%M"


@dataclass(frozen=True, slots=True)
class CrimeRecord:
    """One incident. Fields are None when the source row was malformed;
    records coming out of clean_records always have x, y, timestamp, and
    label populated."""

    x: Optional[float]
    y: Optional[float]
    timestamp: Optional[datetime]
    label: Optional[int]
    address: Optional[str] = None
    district: Optional[int] = None


@dataclass(frozen=True, slots=True)
class CsvSchema:
    """Column-name mapping for incident CSVs."""

    x: str = "X"
    y: str = "Y"
    date: str = "Date"
    label: str = "Description"
    address: str = "Address"
    district: str = "PdDistrict"

    def required_columns(self) -> tuple[str, ...]:
        return (self.x, self.y, self.date, self.label)


DEFAULT_SCHEMA = CsvSchema()


@dataclass(frozen=True, slots=True)
class BoundingBox:
    """Axis-aligned coordinate filter, defaulting to greater Philadelphia."""

    x_min: float = -75.30
    x_max: float = -74.95
    y_min: float = 39.85
    y_max: float = 40.15

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max


DEFAULT_BOUNDING_BOX = BoundingBox()


@dataclass(frozen=True, slots=True)
class SplitDataset:
    train: tuple[CrimeRecord, ...]
    test: tuple[CrimeRecord, ...]
    split_timestamp: datetime


@dataclass(frozen=True, slots=True)
class CountAggregate:
    granularity: str
    label_filter: Optional[int]
    bins: dict[int, int]

    def total(self) -> int:
        return sum(self.bins.values())

    def to_json_dict(self) -> dict:
        return {
            "granularity": self.granularity,
            "label_filter": self.label_filter,
            "bins": {str(k): v for k, v in sorted(self.bins.items())},
        }

    def to_csv_rows(self) -> list[tuple[int, int]]:
        return sorted(self.bins.items())


def _parse_float(text: Optional[str]) -> Optional[float]:
    if text is None:
        return None
    text = text.strip()
    if not text:
        return None
    try:
        value = float(text)
    except ValueError:
        return None
    return value


def _parse_timestamp(text: Optional[str]) -> Optional[datetime]:
    if text is None:
        return None
    text = text.strip()
    if not text:
        return None
    try:
        return datetime.strptime(text, DATE_FORMAT)
    except ValueError:
        return None


def _parse_label(text: Optional[str]) -> Optional[int]:
    if text is None or not text.strip():
        return None
    try:
        return encode_label(text).index
    except UnknownLabelError:
        return None


def _parse_district(text: Optional[str]) -> Optional[int]:
    if text is None:
        return None
    text = text.strip()
    if not text:
        return None
    try:
        return int(float(text))
    except ValueError:
        return None


def parse_csv(path, schema: CsvSchema = DEFAULT_SCHEMA):
    """Read an incident CSV into candidate records.

    Returns (records, report) with report = {"rows_read": n}. Row order is
    preserved. Missing required columns raise SchemaError; unreadable files
    raise DataError. Malformed field values are flagged as None on the
    record for clean_records to count and drop.
    """
    try:
        handle = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    records: list[CrimeRecord] = []
    with handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            return [], {"rows_read": 0}
        header = set(reader.fieldnames)
        for column in schema.required_columns():
            if column not in header:
                raise SchemaError(f"missing required column: {column}")
        has_address = schema.address in header
        has_district = schema.district in header
        for row in reader:
            address = row.get(schema.address) if has_address else None
            if address is not None:
                address = address.strip() or None
            records.append(
                CrimeRecord(
                    x=_parse_float(row.get(schema.x)),
                    y=_parse_float(row.get(schema.y)),
                    timestamp=_parse_timestamp(row.get(schema.date)),
                    label=_parse_label(row.get(schema.label)),
                    address=address,
                    district=_parse_district(row.get(schema.district)) if has_district else None,
                )
            )
    return records, {"rows_read": len(records)}


def format_timestamp(ts: datetime) -> str:
    """Canonical M/D/YYYY H:MM rendering (no zero padding on date/hour)."""
    return f"{ts.month}/{ts.day}/{ts.year} {ts.hour}:{ts.minute:02d}"


def write_records_csv(records: Iterable[CrimeRecord], path, schema: CsvSchema = DEFAULT_SCHEMA):
    """Serialize records back to CSV; inverse of parse_csv on retained fields."""
    records = list(records)
    include_optional = any(r.address is not None or r.district is not None for r in records)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        header = [schema.x, schema.y, schema.date, schema.label]
        if include_optional:
            header += [schema.address, schema.district]
        writer.writerow(header)
        for r in records:
            row = [
                repr(r.x) if r.x is not None else "",
                repr(r.y) if r.y is not None else "",
                format_timestamp(r.timestamp) if r.timestamp is not None else "",
                decode_label(r.label).name if r.label is not None else "",
            ]
            if include_optional:
                row += [r.address or "", "" if r.district is None else str(r.district)]
            writer.writerow(row)


def clean_records(
    records: Sequence[CrimeRecord],
    bounding_box: BoundingBox = DEFAULT_BOUNDING_BOX,
):
    """Drop unusable candidate records; total (never raises).

    Returns (kept, report) with report =
    {"rows_read", "rows_kept", "drops": {cause: count}}. Causes, checked in
    order: missing_coordinate, missing_timestamp, missing_label,
    out_of_bounds. Idempotent.
    """
    kept: list[CrimeRecord] = []
    drops: Counter[str] = Counter()
    for r in records:
        if r.x is None or r.y is None or not (math.isfinite(r.x) and math.isfinite(r.y)):
            drops["missing_coordinate"] += 1
        elif r.timestamp is None:
            drops["missing_timestamp"] += 1
        elif r.label is None:
            drops["missing_label"] += 1
        elif not bounding_box.contains(r.x, r.y):
            drops["out_of_bounds"] += 1
        else:
            kept.append(r)
    report = {
        "rows_read": len(records),
        "rows_kept": len(kept),
        "drops": dict(sorted(drops.items())),
    }
    return kept, report


def chronological_split(records: Sequence[CrimeRecord], ratio: float = 0.8) -> SplitDataset:
    """Sort by timestamp (stable) and put the first ceil(ratio*N) in train.

    The ratio is interpreted at the decimal precision of its repr, so e.g.
    0.8 of 1,048,575 records yields exactly 838,860 despite float rounding.
    """
    if not 0.0 < ratio < 1.0:
        raise ParameterError(f"split ratio must be in (0, 1), got {ratio}")
    if len(records) < 2:
        raise InsufficientDataError("chronological split needs at least 2 records")
    ordered = sorted(records, key=lambda r: r.timestamp)
    n_train = math.ceil(Fraction(str(ratio)) * len(ordered))
    train = tuple(ordered[:n_train])
    test = tuple(ordered[n_train:])
    return SplitDataset(train=train, test=test, split_timestamp=train[-1].timestamp)


def split_by_year(records: Sequence[CrimeRecord], year: int) -> SplitDataset:
    """Calendar-year split: train strictly before Jan 1 of `year`."""
    ordered = sorted(records, key=lambda r: r.timestamp)
    boundary = datetime(year, 1, 1)
    train = tuple(r for r in ordered if r.timestamp < boundary)
    test = tuple(r for r in ordered if r.timestamp >= boundary)
    if not train or not test:
        raise InsufficientDataError(f"split year {year} leaves an empty partition")
    return SplitDataset(train=train, test=test, split_timestamp=boundary)


_GRANULARITIES = ("hour", "month", "year")


def aggregate_counts(
    records: Iterable[CrimeRecord],
    granularity: str,
    label_filter: Optional[int | ClassLabel] = None,
) -> CountAggregate:
    """Count records per hour-of-day, month-of-year, or calendar year.

    Bins are sparse: only observed bin indices appear. Emitting this per
    label reproduces the data behind the hourly/monthly/yearly count plots.
    """
    if granularity not in _GRANULARITIES:
        raise ParameterError(f"granularity must be one of {_GRANULARITIES}, got {granularity!r}")
    wanted = label_filter.index if isinstance(label_filter, ClassLabel) else label_filter
    bins: Counter[int] = Counter()
    for r in records:
        if wanted is not None and r.label != wanted:
            continue
        ts = r.timestamp
        if granularity == "hour":
            bins[ts.hour] += 1
        elif granularity == "month":
            bins[ts.month] += 1
        else:
            bins[ts.year] += 1
    return CountAggregate(granularity=granularity, label_filter=wanted, bins=dict(bins))
