"""Pure-NumPy implementations of the hot numeric kernels.

Functionally equivalent to the compiled ``_ckernels`` extension; selected at
import time when the extension is unavailable or CRIMEPRED_PURE_PYTHON=1.
Tie rules are identical in both backends:

- lloyd: a point ties to the lowest center index; the empty-cluster repair
  re-seeds at the point farthest from its assigned center (ties: lowest row).
- best_split: split scores are built from exact integer class counts, so
  both backends produce bit-identical scores; ties resolve to the lowest
  column, then the lowest threshold.
- knn_votes: distance ties resolve to the lowest training-row index.
"""

from __future__ import annotations

import numpy as np


def assign_points(points: np.ndarray, centers: np.ndarray):
    """Nearest-center assignment. Returns (assign, inertia, point_dist2).

    Distances accumulate feature by feature in index order, matching the
    compiled kernel bit for bit."""
    n, f = points.shape
    k = centers.shape[0]
    dmat = np.zeros((k, n))
    for j in range(k):
        for c in range(f):
            diff = points[:, c] - centers[j, c]
            dmat[j] += diff * diff
    assign = np.argmin(dmat, axis=0).astype(np.int64)
    point_d = dmat[assign, np.arange(n)]
    return assign, float(point_d.sum()), point_d


def lloyd(points: np.ndarray, centers0: np.ndarray, max_iter: int, tol: float):
    """Lloyd iterations from given initial centers.

    Returns (centers, assign, inertia, n_iter, inertia_history). The history
    holds the inertia after every assignment pass and is non-increasing.
    Convergence: the assignment stops changing (exact) or the summed squared
    center shift drops to <= tol.
    """
    n, f = points.shape
    k = centers0.shape[0]
    centers = np.array(centers0, dtype=np.float64, copy=True)
    assign, inertia, point_d = assign_points(points, centers)
    history = [inertia]
    n_iter = 0
    for _ in range(max_iter):
        counts = np.bincount(assign, minlength=k)
        new_centers = np.empty_like(centers)
        for c in range(f):
            sums = np.bincount(assign, weights=points[:, c], minlength=k)
            new_centers[:, c] = sums / np.maximum(counts, 1)
        empties = np.flatnonzero(counts == 0)
        if empties.size:
            avail = point_d.copy()
            for j in empties:
                far = int(np.argmax(avail))
                new_centers[j] = points[far]
                avail[far] = -1.0
        shift = float(((new_centers - centers) ** 2).sum())
        centers = new_centers
        new_assign, inertia, point_d = assign_points(points, centers)
        history.append(inertia)
        n_iter += 1
        unchanged = bool(np.array_equal(new_assign, assign))
        assign = new_assign
        if unchanged or shift <= tol:
            break
    return centers, assign, float(inertia), n_iter, np.asarray(history)


def best_split(x: np.ndarray, y: np.ndarray, n_classes: int, min_leaf: int):
    """Best Gini split over the given candidate columns.

    x is the (n, m) slice of candidate feature columns for one tree node,
    y the (n,) class indices. Returns (col, threshold, decrease); col is -1
    when no valid split exists. Candidate thresholds are midpoints of
    adjacent distinct sorted values; a midpoint that does not fall strictly
    between its neighbours (adjacent floats) is skipped.
    """
    n, m = x.shape
    total = np.bincount(y, minlength=n_classes).astype(np.int64)
    sq_total = int(np.sum(total * total))
    best_col = -1
    best_thr = 0.0
    best_score = -np.inf
    for col in range(m):
        v = x[:, col]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        ys = y[order]
        boundary = np.flatnonzero(vs[1:] != vs[:-1])
        if boundary.size == 0:
            continue
        onehot = np.zeros((n, n_classes), dtype=np.int64)
        onehot[np.arange(n), ys] = 1
        cum = np.cumsum(onehot, axis=0)
        left = cum[boundary]
        n_left = boundary + 1
        n_right = n - n_left
        thresholds = (vs[boundary] + vs[boundary + 1]) / 2.0
        valid = (
            (n_left >= min_leaf)
            & (n_right >= min_leaf)
            & (thresholds > vs[boundary])
            & (thresholds < vs[boundary + 1])
        )
        if not valid.any():
            continue
        right = total[None, :] - left
        score = (
            np.sum(left * left, axis=1) / n_left
            + np.sum(right * right, axis=1) / n_right
        )
        score[~valid] = -np.inf
        pos = int(np.argmax(score))
        if score[pos] > best_score:
            best_score = float(score[pos])
            best_col = col
            best_thr = float(thresholds[pos])
    if best_col < 0:
        return -1, 0.0, 0.0
    decrease = best_score / n - sq_total / (float(n) * float(n))
    return best_col, best_thr, float(decrease)


def knn_votes(
    train_x: np.ndarray,
    train_y: np.ndarray,
    queries: np.ndarray,
    k: int,
    n_classes: int,
) -> np.ndarray:
    """(M, n_classes) neighbour vote counts among the k nearest rows."""
    n, f = train_x.shape
    m = queries.shape[0]
    votes = np.zeros((m, n_classes))
    block = max(1, min(m, 8_388_608 // max(n, 1)))
    for start in range(0, m, block):
        q = queries[start : start + block]
        d = np.zeros((q.shape[0], n))
        for c in range(f):
            diff = q[:, c : c + 1] - train_x[None, :, c]
            d += diff * diff
        for i in range(q.shape[0]):
            order = np.argsort(d[i], kind="stable")[:k]
            votes[start + i] = np.bincount(train_y[order], minlength=n_classes)
    return votes


def kde_grid(
    points: np.ndarray, xs: np.ndarray, ys: np.ndarray, bandwidth: float
) -> np.ndarray:
    """Isotropic Gaussian KDE evaluated on the grid; shape (len(ys), len(xs)).

    The separable kernel exp(-dx^2/2h^2) * exp(-dy^2/2h^2) is accumulated
    point by point, matching the compiled backend's evaluation order.
    """
    n = points.shape[0]
    inv = 1.0 / (2.0 * bandwidth * bandwidth)
    grid = np.zeros((ys.shape[0], xs.shape[0]))
    for p in range(n):
        gx = np.exp(-((xs - points[p, 0]) ** 2) * inv)
        gy = np.exp(-((ys - points[p, 1]) ** 2) * inv)
        grid += gy[:, None] * gx[None, :]
    grid *= 1.0 / (n * 2.0 * np.pi * bandwidth * bandwidth)
    return grid
