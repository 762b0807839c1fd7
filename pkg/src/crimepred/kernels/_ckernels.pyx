# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled implementations of the hot numeric kernels.

Same contracts and tie rules as crimepred.kernels._pykernels; see that
module's docstring. Split scores are computed from exact integer class
counts so both backends return bit-identical split decisions.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, INFINITY, M_PI

cnp.import_array()


def assign_points(double[:, ::1] points, double[:, ::1] centers):
    """Nearest-center assignment. Returns (assign, inertia, point_dist2)."""
    cdef Py_ssize_t n = points.shape[0]
    cdef Py_ssize_t f = points.shape[1]
    cdef Py_ssize_t k = centers.shape[0]
    assign_arr = np.empty(n, dtype=np.int64)
    dist_arr = np.empty(n, dtype=np.float64)
    cdef long long[::1] assign = assign_arr
    cdef double[::1] dist = dist_arr
    cdef Py_ssize_t i, j, c
    cdef double d, diff, best
    cdef Py_ssize_t best_j
    cdef double inertia = 0.0
    for i in range(n):
        best = INFINITY
        best_j = 0
        for j in range(k):
            d = 0.0
            for c in range(f):
                diff = points[i, c] - centers[j, c]
                d += diff * diff
            if d < best:
                best = d
                best_j = j
        assign[i] = best_j
        dist[i] = best
        inertia += best
    return assign_arr, inertia, dist_arr


def lloyd(points, centers0, int max_iter, double tol):
    """Lloyd iterations from given initial centers.

    Returns (centers, assign, inertia, n_iter, inertia_history).
    """
    pts = np.ascontiguousarray(points, dtype=np.float64)
    centers_arr = np.array(centers0, dtype=np.float64, order="C", copy=True)
    cdef double[:, ::1] p = pts
    cdef double[:, ::1] centers = centers_arr
    cdef Py_ssize_t n = p.shape[0]
    cdef Py_ssize_t f = p.shape[1]
    cdef Py_ssize_t k = centers.shape[0]

    new_arr = np.empty_like(centers_arr)
    counts_arr = np.empty(k, dtype=np.int64)
    cdef double[:, ::1] new = new_arr
    cdef long long[::1] counts = counts_arr

    assign_arr, inertia, dist_arr = assign_points(pts, centers_arr)
    cdef long long[::1] assign = assign_arr
    cdef double[::1] dist = dist_arr
    history = [inertia]

    cdef Py_ssize_t it, i, j, c, far
    cdef double shift, diff, top
    cdef int n_iter = 0
    cdef bint changed
    cdef long long[::1] new_assign
    for it in range(max_iter):
        for j in range(k):
            counts[j] = 0
            for c in range(f):
                new[j, c] = 0.0
        for i in range(n):
            j = assign[i]
            counts[j] += 1
            for c in range(f):
                new[j, c] += p[i, c]
        for j in range(k):
            if counts[j] > 0:
                for c in range(f):
                    new[j, c] /= counts[j]
        # re-seed each empty center at the point farthest from its center
        for j in range(k):
            if counts[j] == 0:
                far = 0
                top = -INFINITY
                for i in range(n):
                    if dist[i] > top:
                        top = dist[i]
                        far = i
                for c in range(f):
                    new[j, c] = p[far, c]
                dist[far] = -1.0
        shift = 0.0
        for j in range(k):
            for c in range(f):
                diff = new[j, c] - centers[j, c]
                shift += diff * diff
                centers[j, c] = new[j, c]
        new_assign_arr, inertia, dist_arr = assign_points(pts, centers_arr)
        dist = dist_arr
        history.append(inertia)
        n_iter += 1
        changed = False
        new_assign = new_assign_arr
        for i in range(n):
            if new_assign[i] != assign[i]:
                changed = True
                break
        assign_arr = new_assign_arr
        assign = new_assign
        if not changed or shift <= tol:
            break
    return centers_arr, assign_arr, inertia, n_iter, np.asarray(history)


def best_split(x, y, int n_classes, int min_leaf):
    """Best Gini split over candidate columns; see _pykernels.best_split."""
    xc = np.ascontiguousarray(x, dtype=np.float64)
    yc = np.ascontiguousarray(y, dtype=np.int64)
    cdef double[:, ::1] xv = xc
    cdef long long[::1] yv = yc
    cdef Py_ssize_t n = xv.shape[0]
    cdef Py_ssize_t m = xv.shape[1]

    total_arr = np.bincount(yc, minlength=n_classes).astype(np.int64)
    cdef long long[::1] total = total_arr
    cdef long long sq_total = 0
    cdef Py_ssize_t c
    for c in range(n_classes):
        sq_total += total[c] * total[c]

    left_arr = np.empty(n_classes, dtype=np.int64)
    right_arr = np.empty(n_classes, dtype=np.int64)
    cdef long long[::1] left = left_arr
    cdef long long[::1] right = right_arr

    cdef Py_ssize_t col, i, pos, cls
    cdef long long n_left, n_right, sq_left, sq_right
    cdef double best_score = -INFINITY
    cdef double score, thr, lo, hi
    cdef Py_ssize_t best_col = -1
    cdef double best_thr = 0.0
    cdef double[::1] vs
    cdef long long[::1] ys
    cdef long long[::1] order

    col_vals = np.empty(n, dtype=np.float64)
    col_y = np.empty(n, dtype=np.int64)
    for col in range(m):
        order_arr = np.argsort(xc[:, col], kind="stable")
        order = order_arr
        for i in range(n):
            col_vals[i] = xv[order[i], col]
            col_y[i] = yv[order[i]]
        vs = col_vals
        ys = col_y
        for c in range(n_classes):
            left[c] = 0
            right[c] = total[c]
        n_left = 0
        n_right = n
        sq_left = 0
        sq_right = sq_total
        for pos in range(n - 1):
            cls = ys[pos]
            sq_left += 2 * left[cls] + 1
            left[cls] += 1
            sq_right -= 2 * right[cls] - 1
            right[cls] -= 1
            n_left += 1
            n_right -= 1
            lo = vs[pos]
            hi = vs[pos + 1]
            if lo == hi:
                continue
            if n_left < min_leaf or n_right < min_leaf:
                continue
            thr = (lo + hi) / 2.0
            if not (thr > lo and thr < hi):
                continue
            score = (<double> sq_left) / n_left + (<double> sq_right) / n_right
            if score > best_score:
                best_score = score
                best_col = col
                best_thr = thr
    if best_col < 0:
        return -1, 0.0, 0.0
    cdef double decrease = best_score / n - sq_total / ((<double> n) * (<double> n))
    return best_col, best_thr, decrease


def knn_votes(train_x, train_y, queries, int k, int n_classes):
    """(M, n_classes) neighbour vote counts among the k nearest rows."""
    tx = np.ascontiguousarray(train_x, dtype=np.float64)
    ty = np.ascontiguousarray(train_y, dtype=np.int64)
    q = np.ascontiguousarray(queries, dtype=np.float64)
    cdef double[:, ::1] xv = tx
    cdef long long[::1] yv = ty
    cdef double[:, ::1] qv = q
    cdef Py_ssize_t n = xv.shape[0]
    cdef Py_ssize_t f = xv.shape[1]
    cdef Py_ssize_t m = qv.shape[0]

    votes_arr = np.zeros((m, n_classes), dtype=np.float64)
    cdef double[:, ::1] votes = votes_arr
    dist_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] dist = dist_arr

    cdef Py_ssize_t i, j, c, t, best_j
    cdef double d, diff, best
    for i in range(m):
        for j in range(n):
            d = 0.0
            for c in range(f):
                diff = qv[i, c] - xv[j, c]
                d += diff * diff
            dist[j] = d
        for t in range(k):
            best = INFINITY
            best_j = -1
            for j in range(n):
                if dist[j] < best:
                    best = dist[j]
                    best_j = j
            votes[i, yv[best_j]] += 1.0
            dist[best_j] = INFINITY
    return votes_arr


def kde_grid(points, xs, ys, double bandwidth):
    """Isotropic Gaussian KDE on a grid; shape (len(ys), len(xs))."""
    pts = np.ascontiguousarray(points, dtype=np.float64)
    xs_c = np.ascontiguousarray(xs, dtype=np.float64)
    ys_c = np.ascontiguousarray(ys, dtype=np.float64)
    cdef double[:, ::1] p = pts
    cdef double[::1] gx_axis = xs_c
    cdef double[::1] gy_axis = ys_c
    cdef Py_ssize_t n = p.shape[0]
    cdef Py_ssize_t nx = gx_axis.shape[0]
    cdef Py_ssize_t ny = gy_axis.shape[0]

    grid_arr = np.zeros((ny, nx), dtype=np.float64)
    gx_arr = np.empty(nx, dtype=np.float64)
    gy_arr = np.empty(ny, dtype=np.float64)
    cdef double[:, ::1] grid = grid_arr
    cdef double[::1] gx = gx_arr
    cdef double[::1] gy = gy_arr

    cdef double inv = 1.0 / (2.0 * bandwidth * bandwidth)
    cdef Py_ssize_t i, j, t
    cdef double dx, dy
    for t in range(n):
        for i in range(nx):
            dx = gx_axis[i] - p[t, 0]
            gx[i] = exp(-(dx * dx) * inv)
        for j in range(ny):
            dy = gy_axis[j] - p[t, 1]
            gy[j] = exp(-(dy * dy) * inv)
        for j in range(ny):
            for i in range(nx):
                grid[j, i] += gy[j] * gx[i]
    cdef double norm = 1.0 / (n * 2.0 * M_PI * bandwidth * bandwidth)
    for j in range(ny):
        for i in range(nx):
            grid[j, i] *= norm
    return grid_arr
