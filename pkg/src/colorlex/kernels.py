"""Hot numeric kernels with numba-accelerated and pure-numpy backends.

The numba path is used by default whenever numba imports cleanly.  Set the
environment variable ``COLORLEX_NO_NUMBA=1`` (before import) to force the
pure-numpy fallback; both backends compute the same quantities and agree to
floating-point noise.  ``benchmarks/bench_kernels.py`` times one against the
other on realistic workloads.
"""

from __future__ import annotations

import os

import numpy as np

USE_NUMBA = os.environ.get("COLORLEX_NO_NUMBA", "").strip() not in ("1", "true", "yes")

if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a hard dep, belt and braces
        USE_NUMBA = False


# ---------------------------------------------------------------------------
# pure-numpy reference implementations
# ---------------------------------------------------------------------------

def _pairwise_mean_distance_np(pts: np.ndarray) -> float:
    n = pts.shape[0]
    if n < 2:
        return 0.0
    total = 0.0
    # chunked to bound the n^2 broadcast at ~8M floats
    chunk = max(1, int(8_000_000 // max(n, 1)))
    for start in range(0, n, chunk):
        block = pts[start:start + chunk]
        d = np.sqrt(((block[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2))
        total += d.sum()
    return total / (n * (n - 1))


def _points_in_halfspaces_np(points: np.ndarray, normals: np.ndarray,
                             offsets: np.ndarray, eps: float) -> np.ndarray:
    # inside iff n.x <= d + eps for every facet
    proj = points @ normals.T
    return np.all(proj <= offsets[None, :] + eps, axis=1)


def _min_cross_distances_np(targets: np.ndarray, d1: np.ndarray,
                            d2: np.ndarray) -> np.ndarray:
    e1 = np.sqrt(((targets - d1) ** 2).sum(axis=1))
    e2 = np.sqrt(((targets - d2) ** 2).sum(axis=1))
    return np.minimum(e1, e2)


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------

if USE_NUMBA:

    @njit(cache=True)
    def _pairwise_mean_distance_nb(pts):  # pragma: no cover - exercised via wrapper
        n = pts.shape[0]
        if n < 2:
            return 0.0
        total = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                s = 0.0
                for k in range(pts.shape[1]):
                    diff = pts[i, k] - pts[j, k]
                    s += diff * diff
                total += np.sqrt(s)
        return 2.0 * total / (n * (n - 1))

    @njit(cache=True)
    def _points_in_halfspaces_nb(points, normals, offsets, eps):  # pragma: no cover
        m = points.shape[0]
        f = normals.shape[0]
        out = np.ones(m, dtype=np.bool_)
        for i in range(m):
            for j in range(f):
                proj = 0.0
                for k in range(points.shape[1]):
                    proj += points[i, k] * normals[j, k]
                if proj > offsets[j] + eps:
                    out[i] = False
                    break
        return out

    @njit(cache=True)
    def _min_cross_distances_nb(targets, d1, d2):  # pragma: no cover
        n = targets.shape[0]
        out = np.empty(n)
        for i in range(n):
            s1 = 0.0
            s2 = 0.0
            for k in range(targets.shape[1]):
                a = targets[i, k] - d1[i, k]
                b = targets[i, k] - d2[i, k]
                s1 += a * a
                s2 += b * b
            e1 = np.sqrt(s1)
            e2 = np.sqrt(s2)
            out[i] = e1 if e1 < e2 else e2
        return out


# ---------------------------------------------------------------------------
# public dispatchers
# ---------------------------------------------------------------------------

def pairwise_mean_distance(pts: np.ndarray) -> float:
    """Mean Euclidean distance over all unordered point pairs.

    Returns 0.0 for fewer than two points (callers treat that case as
    undefined and should not rely on the value).
    """
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    if USE_NUMBA:
        return float(_pairwise_mean_distance_nb(pts))
    return float(_pairwise_mean_distance_np(pts))


def points_in_halfspaces(points: np.ndarray, normals: np.ndarray,
                         offsets: np.ndarray, eps: float) -> np.ndarray:
    """Boolean mask of points satisfying every halfspace n.x <= d + eps."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    normals = np.ascontiguousarray(normals, dtype=np.float64)
    offsets = np.ascontiguousarray(offsets, dtype=np.float64)
    if normals.shape[0] == 0:
        return np.ones(points.shape[0], dtype=bool)
    if USE_NUMBA:
        return np.asarray(_points_in_halfspaces_nb(points, normals, offsets, eps))
    return _points_in_halfspaces_np(points, normals, offsets, eps)


def min_cross_distances(targets: np.ndarray, d1: np.ndarray,
                        d2: np.ndarray) -> np.ndarray:
    """Per-row min of the two target→distractor Euclidean distances."""
    targets = np.ascontiguousarray(targets, dtype=np.float64)
    d1 = np.ascontiguousarray(d1, dtype=np.float64)
    d2 = np.ascontiguousarray(d2, dtype=np.float64)
    if USE_NUMBA:
        return np.asarray(_min_cross_distances_nb(targets, d1, d2))
    return _min_cross_distances_np(targets, d1, d2)


def numpy_backend_functions():
    """The fallback implementations, exposed for benchmarking and tests."""
    return {
        "pairwise_mean_distance": _pairwise_mean_distance_np,
        "points_in_halfspaces": _points_in_halfspaces_np,
        "min_cross_distances": _min_cross_distances_np,
    }
