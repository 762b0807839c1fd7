"""K-Means, cluster-count selection, yearly center stacking, and KDE grids.

Clustering runs on raw (x, y) coordinates in decimal degrees. All fits are
deterministic given (points, k, seed, n_init): restart r uses the sub-seed
derived from (seed, "kmeans-init", r), and the best restart by inertia wins
(ties keep the earliest restart).
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .errors import (
    DataError,
    InsufficientDataError,
    ParameterError,
    SchemaError,
    StateError,
)
from .ingest import CrimeRecord
from .seeding import derive_seed, generator

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1

DEFAULT_N_INIT = 10
DEFAULT_MAX_ITER = 300
DEFAULT_TOL = 1e-6
DEFAULT_KMAX = 16
DEFAULT_B = 10
LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class ClusterModel:
    """A fitted K-Means model: centers, assignments, and inertia (W_k)."""

    k: int
    centers: np.ndarray
    inertia: float
    assignments: np.ndarray
    iterations_run: int
    seed: int
    inertia_history: tuple[float, ...]

    def to_json_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "k": self.k,
            "centers": self.centers.tolist(),
            "inertia": self.inertia,
            "assignments": self.assignments.tolist(),
            "iterations_run": self.iterations_run,
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "ClusterModel":
        if data.get("format_version") != FORMAT_VERSION:
            raise SchemaError(f"unsupported cluster model format: {data.get('format_version')}")
        return cls(
            k=int(data["k"]),
            centers=np.asarray(data["centers"], dtype=np.float64),
            inertia=float(data["inertia"]),
            assignments=np.asarray(data["assignments"], dtype=np.int64),
            iterations_run=int(data["iterations_run"]),
            seed=int(data["seed"]),
            inertia_history=(),
        )


def _as_points(points) -> np.ndarray:
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ParameterError(f"points must be a 2-D array, got shape {pts.shape}")
    if pts.size and not np.all(np.isfinite(pts)):
        raise DataError("points contain non-finite coordinates")
    return pts


def _point_dist2(points: np.ndarray, center: np.ndarray) -> np.ndarray:
    d = np.zeros(points.shape[0])
    for c in range(points.shape[1]):
        diff = points[:, c] - center[c]
        d += diff * diff
    return d


def _kmeans_pp_indices(points: np.ndarray, k: int, rng: np.random.Generator) -> tuple[int, ...]:
    """k-means++ seeding: row indices of the chosen centers.

    The first center is uniform; each subsequent one is drawn with
    probability proportional to the squared distance to the nearest chosen
    center."""
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    d = _point_dist2(points, points[chosen[0]])
    for _ in range(1, k):
        total = float(d.sum())
        if total <= 0.0:
            # all remaining points coincide with chosen centers
            chosen.append(int(np.argmax(d)))
            continue
        r = float(rng.random()) * total
        idx = min(int(np.searchsorted(np.cumsum(d), r, side="right")), n - 1)
        chosen.append(idx)
        np.minimum(d, _point_dist2(points, points[idx]), out=d)
    return tuple(chosen)


_INIT_RETRIES = 8


def _draw_init_sets(points: np.ndarray, k: int, seed: int, n_init: int) -> list[tuple[int, ...]]:
    """n_init k-means++ initializations, resampled (up to a retry budget) so
    restarts do not repeat an already-drawn center set. Restart r draws from
    the sub-seed (seed, "kmeans-init", r); the dedup retries keep small
    instances from wasting restarts on identical inits."""
    inits: list[tuple[int, ...]] = []
    seen: set[frozenset[int]] = set()
    for restart in range(n_init):
        rng = generator(seed, "kmeans-init", restart)
        chosen = _kmeans_pp_indices(points, k, rng)
        for _ in range(_INIT_RETRIES):
            if frozenset(chosen) not in seen:
                break
            chosen = _kmeans_pp_indices(points, k, rng)
        seen.add(frozenset(chosen))
        inits.append(chosen)
    return inits


def kmeans_fit(
    points,
    k: int,
    seed: int = 0,
    n_init: int = DEFAULT_N_INIT,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> ClusterModel:
    """Lloyd's algorithm with k-means++ initialization, best of n_init runs.

    Convergence: the assignment stabilizes exactly, the summed squared
    center shift drops to <= tol, or max_iter is reached.
    """
    pts = _as_points(points)
    n = pts.shape[0]
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    if n_init < 1:
        raise ParameterError(f"n_init must be >= 1, got {n_init}")
    if k > n:
        raise ParameterError(f"k={k} exceeds the number of points ({n})")
    # distinct rows in a prefix lower-bound the total, so the full (slow)
    # unique scan only runs when the cheap bound cannot rule the error out
    if np.unique(pts[: max(k, 4096)], axis=0).shape[0] < k:
        n_distinct = np.unique(pts, axis=0).shape[0]
        if k > n_distinct:
            raise ParameterError(
                f"k={k} exceeds the number of distinct points ({n_distinct})"
            )

    best = None
    for chosen in _draw_init_sets(pts, k, seed, n_init):
        centers0 = pts[list(chosen)]
        centers, assign, inertia, n_iter, history = kernels.lloyd(pts, centers0, max_iter, tol)
        if best is None or inertia < best[2]:
            best = (centers, assign, inertia, n_iter, history)
    centers, assign, inertia, n_iter, history = best
    return ClusterModel(
        k=k,
        centers=centers,
        inertia=float(inertia),
        assignments=assign,
        iterations_run=int(n_iter),
        seed=seed,
        inertia_history=tuple(float(h) for h in history),
    )


_CHUNK_ROWS = 65536


def _min_dist2(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Squared distance to the nearest center, chunked to bound memory."""
    out = np.empty(points.shape[0])
    for start in range(0, points.shape[0], _CHUNK_ROWS):
        block = points[start : start + _CHUNK_ROWS]
        d2 = ((block[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        out[start : start + _CHUNK_ROWS] = d2.min(axis=1)
    return out


def cluster_inertia(points, centers) -> float:
    """Standalone inertia scorer: sum of squared distances to the nearest
    center. Independent of the Lloyd kernel (plain NumPy broadcasting)."""
    pts = _as_points(points)
    ctr = np.asarray(centers, dtype=np.float64)
    if ctr.ndim != 2 or ctr.shape[0] == 0:
        raise StateError("at least one center is required")
    return float(_min_dist2(pts, ctr).sum())


@dataclass(frozen=True)
class ElbowReport:
    k_elbow: int
    ks: tuple[int, ...]
    inertias: tuple[float, ...]
    chord_distances: tuple[float, ...]
    seed: int

    def to_json_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "k_elbow": self.k_elbow,
            "ks": list(self.ks),
            "inertias": list(self.inertias),
            "chord_distances": list(self.chord_distances),
            "seed": self.seed,
        }


def select_elbow_from_curve(ks: Sequence[int], inertias: Sequence[float]):
    """Pick the k whose (k, inertia) point lies farthest from the chord
    joining the curve endpoints, after min-max normalizing both axes.

    Distances within 1e-12 of the maximum count as tied and the smallest k
    wins, so an exactly linear curve selects the first k.
    """
    ks = list(ks)
    iner = np.asarray(inertias, dtype=np.float64)
    if len(ks) < 3:
        raise ParameterError("elbow selection needs at least 3 curve points")
    x = np.asarray(ks, dtype=np.float64)
    x = (x - x[0]) / (x[-1] - x[0])
    span = iner.max() - iner.min()
    y = (iner - iner.min()) / span if span > 0 else np.zeros_like(iner)
    ex, ey = x[-1] - x[0], y[-1] - y[0]
    norm = math.hypot(ex, ey)
    cross = np.abs(ex * (y - y[0]) - ey * (x - x[0]))
    distances = cross / norm if norm > 0 else cross
    best = float(distances.max())
    tied = np.flatnonzero(distances >= best - 1e-12)
    return ks[int(tied[0])], distances


def elbow_select(
    points,
    kmax: int,
    seed: int = 0,
    n_init: int = DEFAULT_N_INIT,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> ElbowReport:
    """Fit k = 1..kmax and select the elbow of the inertia curve."""
    if kmax < 3:
        raise ParameterError(f"kmax must be >= 3 for the elbow method, got {kmax}")
    pts = _as_points(points)
    ks = list(range(1, kmax + 1))
    inertias = [
        kmeans_fit(pts, k, seed=seed, n_init=n_init, max_iter=max_iter, tol=tol).inertia
        for k in ks
    ]
    k_elbow, distances = select_elbow_from_curve(ks, inertias)
    return ElbowReport(
        k_elbow=int(k_elbow),
        ks=tuple(ks),
        inertias=tuple(inertias),
        chord_distances=tuple(float(d) for d in distances),
        seed=seed,
    )


@dataclass(frozen=True)
class GapReport:
    """Gap statistic over k = 1..kmax with both published selection rules.

    gap[k-1] = mean_b log(W_kb) - log(W_k); s[k-1] = sd_k * sqrt(1 + 1/B).
    chosen_k_onesd is the smallest k with gap(k) >= gap(k+1) - s(k+1);
    chosen_k_max is argmax gap (smallest k on ties).
    """

    ks: tuple[int, ...]
    log_wk: tuple[float, ...]
    log_wkb_mean: tuple[float, ...]
    gap: tuple[float, ...]
    sd: tuple[float, ...]
    s: tuple[float, ...]
    chosen_k_onesd: int
    chosen_k_max: int
    B: int
    seed: int
    floored_ks: tuple[int, ...]

    def to_json_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "ks": list(self.ks),
            "log_wk": list(self.log_wk),
            "log_wkb_mean": list(self.log_wkb_mean),
            "gap": list(self.gap),
            "sd": list(self.sd),
            "s": list(self.s),
            "chosen_k_onesd": self.chosen_k_onesd,
            "chosen_k_max": self.chosen_k_max,
            "B": self.B,
            "seed": self.seed,
            "floored_ks": list(self.floored_ks),
        }


def _floored_log(w: float, floored: set[int], k: int) -> float:
    if w < LOG_FLOOR:
        floored.add(k)
        return math.log(LOG_FLOOR)
    return math.log(w)


def gap_statistic(
    points,
    kmax: int,
    B: int = DEFAULT_B,
    seed: int = 0,
    n_init: int = DEFAULT_N_INIT,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> GapReport:
    """Gap statistic with B uniform reference sets over the bounding box.

    Reference set b is drawn with the sub-seed (seed, "gap-ref", b) and
    clustered with the same n_init as the observed data. Zero inertias are
    floored at 1e-12 before the log and flagged in the report.
    """
    if kmax < 2:
        raise ParameterError(f"kmax must be >= 2 for the gap statistic, got {kmax}")
    if B < 1:
        raise ParameterError(f"B must be >= 1, got {B}")
    pts = _as_points(points)
    lows = pts.min(axis=0)
    highs = pts.max(axis=0)
    refs = []
    for b in range(B):
        rng = generator(seed, "gap-ref", b)
        refs.append(lows + rng.random(pts.shape) * (highs - lows))

    floored: set[int] = set()
    ks = list(range(1, kmax + 1))
    log_wk = []
    log_wkb_mean = []
    sd = []
    gap = []
    for k in ks:
        wk = kmeans_fit(pts, k, seed=seed, n_init=n_init, max_iter=max_iter, tol=tol).inertia
        lw = _floored_log(wk, floored, k)
        log_wk.append(lw)
        ref_logs = np.array(
            [
                _floored_log(
                    kmeans_fit(
                        refs[b],
                        k,
                        seed=derive_seed(seed, "gap-ref-fit", b),
                        n_init=n_init,
                        max_iter=max_iter,
                        tol=tol,
                    ).inertia,
                    floored,
                    k,
                )
                for b in range(B)
            ]
        )
        mean = float(ref_logs.mean())
        log_wkb_mean.append(mean)
        sd.append(float(np.sqrt(np.mean((ref_logs - mean) ** 2))))
        gap.append(mean - lw)

    s = [sd_k * math.sqrt(1.0 + 1.0 / B) for sd_k in sd]
    chosen_k_max = ks[int(np.argmax(gap))]
    chosen_k_onesd = ks[-1]
    for i in range(len(ks) - 1):
        if gap[i] >= gap[i + 1] - s[i + 1]:
            chosen_k_onesd = ks[i]
            break
    return GapReport(
        ks=tuple(ks),
        log_wk=tuple(log_wk),
        log_wkb_mean=tuple(log_wkb_mean),
        gap=tuple(gap),
        sd=tuple(sd),
        s=tuple(s),
        chosen_k_onesd=chosen_k_onesd,
        chosen_k_max=chosen_k_max,
        B=B,
        seed=seed,
        floored_ks=tuple(sorted(floored)),
    )


@dataclass(frozen=True)
class StackedCenters:
    """Per-year K-Means centers concatenated into one center list."""

    per_year: tuple[tuple[int, np.ndarray], ...]
    k: int
    seed: int

    @property
    def flattened(self) -> np.ndarray:
        if not self.per_year:
            return np.zeros((0, 2))
        return np.concatenate([centers for _, centers in self.per_year], axis=0)

    @property
    def years(self) -> tuple[int, ...]:
        return tuple(year for year, _ in self.per_year)

    def to_json_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "k": self.k,
            "seed": self.seed,
            "per_year": [
                {"year": year, "centers": centers.tolist()} for year, centers in self.per_year
            ],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "StackedCenters":
        if data.get("format_version") != FORMAT_VERSION:
            raise SchemaError(f"unsupported stacked centers format: {data.get('format_version')}")
        per_year = tuple(
            (int(item["year"]), np.asarray(item["centers"], dtype=np.float64))
            for item in data["per_year"]
        )
        return cls(per_year=per_year, k=int(data["k"]), seed=int(data["seed"]))


def stack_yearly_centers(
    records: Sequence[CrimeRecord],
    k: int,
    seed: int = 0,
    n_init: int = DEFAULT_N_INIT,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    on_undersized_year: str = "error",
) -> StackedCenters:
    """Fit K-Means per calendar year on (x, y) and concatenate the centers.

    Every year's fit uses the same seed, so two years with identical point
    sets produce identical centers. A year with fewer than k records raises
    by default; on_undersized_year="skip" drops it with a warning instead.
    """
    if on_undersized_year not in ("error", "skip"):
        raise ParameterError(f"on_undersized_year must be 'error' or 'skip', got {on_undersized_year!r}")
    by_year: dict[int, list[CrimeRecord]] = {}
    for r in records:
        by_year.setdefault(r.timestamp.year, []).append(r)
    per_year = []
    for year in sorted(by_year):
        rows = by_year[year]
        if len(rows) < k:
            if on_undersized_year == "skip":
                logger.warning("skipping year %d: %d records < k=%d", year, len(rows), k)
                continue
            raise InsufficientDataError(f"year {year} has {len(rows)} records but k={k}")
        pts = np.column_stack(
            [np.array([r.x for r in rows]), np.array([r.y for r in rows])]
        )
        model = kmeans_fit(pts, k, seed=seed, n_init=n_init, max_iter=max_iter, tol=tol)
        per_year.append((year, model.centers))
    return StackedCenters(per_year=tuple(per_year), k=k, seed=seed)


def center_coordinates(centers) -> np.ndarray:
    """Normalize a StackedCenters or raw array into a (K, 2) center array."""
    if isinstance(centers, StackedCenters):
        arr = centers.flattened
    else:
        arr = np.asarray(centers, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise StateError("at least one cluster center is required")
    return arr


def nearest_center_distance(point, centers) -> float:
    """Euclidean distance from one point to its closest center."""
    x, y = float(point[0]), float(point[1])
    arr = center_coordinates(centers)
    d2 = (arr[:, 0] - x) ** 2 + (arr[:, 1] - y) ** 2
    return float(np.sqrt(d2.min()))


def nearest_center_distances(points, centers) -> np.ndarray:
    """Vectorized nearest-center distances for an (N, 2) point array."""
    pts = _as_points(points)
    arr = center_coordinates(centers)
    if pts.shape[0] == 0:
        return np.zeros(0)
    return np.sqrt(_min_dist2(pts, arr))


@dataclass(frozen=True)
class DensityGrid:
    """Gaussian KDE evaluated on a regular grid over the padded bounding box.

    values[j, i] is the density at cell center (xs[i], ys[j]); the grid
    integral (sum * cell area) is ~1 when the padding captures the kernel
    mass."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    nx: int
    ny: int
    bandwidth: float
    values: np.ndarray

    @property
    def cell_area(self) -> float:
        return ((self.x_max - self.x_min) / self.nx) * ((self.y_max - self.y_min) / self.ny)

    @property
    def x_centers(self) -> np.ndarray:
        dx = (self.x_max - self.x_min) / self.nx
        return self.x_min + (np.arange(self.nx) + 0.5) * dx

    @property
    def y_centers(self) -> np.ndarray:
        dy = (self.y_max - self.y_min) / self.ny
        return self.y_min + (np.arange(self.ny) + 0.5) * dy

    def integral(self) -> float:
        return float(self.values.sum() * self.cell_area)

    def write_csv(self, path):
        import csv as _csv

        xs = self.x_centers
        ys = self.y_centers
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = _csv.writer(handle)
            writer.writerow(["x", "y", "density"])
            for j in range(self.ny):
                for i in range(self.nx):
                    writer.writerow([repr(float(xs[i])), repr(float(ys[j])), repr(float(self.values[j, i]))])


def scott_bandwidth(points: np.ndarray) -> float:
    """Scott's rule for an isotropic 2-D kernel: rms stddev * N^(-1/6)."""
    n = points.shape[0]
    var = points.var(axis=0)
    return float(math.sqrt(float(var.mean())) * n ** (-1.0 / 6.0))


def kde_density_grid(
    points,
    bandwidth: Optional[float] = None,
    resolution: int | tuple[int, int] = 100,
    padding: Optional[float] = None,
) -> DensityGrid:
    """Evaluate an isotropic Gaussian KDE on a regular grid.

    The grid covers the point bounding box padded by 4 bandwidths per side
    (override with `padding`), which keeps the normalization invariant
    within 1e-3. With bandwidth=None, Scott's rule is used; degenerate
    inputs (all points identical) then require an explicit bandwidth.
    """
    pts = _as_points(points)
    if pts.shape[0] < 1:
        raise InsufficientDataError("KDE needs at least one point")
    if pts.shape[1] != 2:
        raise ParameterError("KDE operates on (N, 2) coordinates")
    if bandwidth is None:
        bandwidth = scott_bandwidth(pts)
    if not bandwidth > 0.0:
        raise ParameterError(f"bandwidth must be positive, got {bandwidth}")
    if isinstance(resolution, int):
        nx = ny = resolution
    else:
        nx, ny = resolution
    if nx < 1 or ny < 1:
        raise ParameterError(f"resolution must be positive, got {(nx, ny)}")
    pad = 4.0 * bandwidth if padding is None else float(padding)
    x_min = float(pts[:, 0].min()) - pad
    x_max = float(pts[:, 0].max()) + pad
    y_min = float(pts[:, 1].min()) - pad
    y_max = float(pts[:, 1].max()) + pad
    dx = (x_max - x_min) / nx
    dy = (y_max - y_min) / ny
    xs = x_min + (np.arange(nx) + 0.5) * dx
    ys = y_min + (np.arange(ny) + 0.5) * dy
    values = kernels.kde_grid(pts, xs, ys, float(bandwidth))
    return DensityGrid(
        x_min=x_min,
        x_max=x_max,
        y_min=y_min,
        y_max=y_max,
        nx=nx,
        ny=ny,
        bandwidth=float(bandwidth),
        values=values,
    )


def write_json_report(report, path):
    """Write any report object exposing to_json_dict() as pretty JSON."""
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(report.to_json_dict(), handle, indent=2, sort_keys=True)
        handle.write("\n")
