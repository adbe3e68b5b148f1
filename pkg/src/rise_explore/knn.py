"""Exact k-th nearest-neighbour distances (Euclidean).

The returned quantity for point i is the k-th smallest distance from x_i to the
*other* points of the set. That value does not depend on how equal distances
are ordered, so the brute-force and k-d tree backends agree exactly up to
floating-point evaluation of the same distances.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .errors import ValidationError

BRUTE_FORCE_LIMIT = 2000


def _as_points(points) -> np.ndarray:
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[1] < 1:
        raise ValidationError("points must be an (N, m) array")
    return x


def _brute(x: np.ndarray, k: int) -> np.ndarray:
    n, m = x.shape
    chunk = max(1, min(n, 2_000_000 // max(1, n * m)))
    out = np.empty(n)
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        d2 = ((x[lo:hi, None, :] - x[None, :, :]) ** 2).sum(axis=2)
        d2[np.arange(hi - lo), np.arange(lo, hi)] = np.inf
        out[lo:hi] = np.partition(d2, k - 1, axis=1)[:, k - 1]
    return np.sqrt(out)


def _kdtree(x: np.ndarray, k: int) -> np.ndarray:
    tree = cKDTree(x)
    # self is among the k+1 returned at distance 0, so column k is the k-th
    # nearest *other* point even when duplicates exist
    d, _ = tree.query(x, k=k + 1)
    return np.asarray(d)[:, k] if k > 0 else np.zeros(len(x))


def knn_distances(points, k: int, backend: str = "auto") -> np.ndarray:
    """Distance from each point to its k-th nearest other point."""
    x = _as_points(points)
    n = len(x)
    if k < 1:
        raise ValidationError("k must be at least 1")
    if n < k + 1:
        raise ValidationError(f"need at least k+1={k + 1} points, got {n}")
    if backend == "auto":
        backend = "brute" if n < BRUTE_FORCE_LIMIT else "kdtree"
    if backend == "brute":
        return _brute(x, k)
    if backend == "kdtree":
        return _kdtree(x, k)
    raise ValidationError(f"unknown backend {backend!r}")


def knn_distance_table(points, k_max: int) -> np.ndarray:
    """(N, k_max) table whose column j holds the (j+1)-th neighbour distance."""
    x = _as_points(points)
    if k_max < 1 or len(x) < k_max + 1:
        raise ValidationError(f"need at least k_max+1={k_max + 1} points, got {len(x)}")
    d, _ = cKDTree(x).query(x, k=k_max + 1)
    return np.asarray(d).reshape(len(x), -1)[:, 1:]


def kth_neighbor_distance(query, neighbors, k: int) -> float:
    """k-th smallest distance from ``query`` to the rows of ``neighbors``."""
    y = np.asarray(query, dtype=float).ravel()
    nb = _as_points(neighbors)
    if nb.shape[1] != y.shape[0]:
        raise ValidationError("query and neighbours differ in dimension")
    if k < 1 or len(nb) < k:
        raise ValidationError(f"need at least k={k} neighbours, got {len(nb)}")
    d = np.sqrt(((nb - y) ** 2).sum(axis=1))
    return float(np.partition(d, k - 1)[k - 1])
