"""Exact nearest-neighbour and closed-ball queries over a dataset.

Distances are Euclidean. Ties in distance are broken by the smaller stream
index. In one dimension the index is a sorted array with prefix sums; in
higher dimensions a k-d tree proposes candidates whose exact distances are
then recomputed, so answers match a linear scan.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .core import Dataset, as_point, as_points, validate_dataset

# relative slack for k-d tree candidate radii; far above rounding, far below any real gap
_SLACK = 1e-9
_TINY = 1e-300


def unit_ball_volume(d: int) -> float:
    """Volume of the unit ball in R^d."""
    if int(d) != d or d < 1:
        raise ValueError(f"dimension must be a positive integer, got {d!r}")
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def knn_radius(n: int, k: int, f_x: float, d: int) -> float:
    """Radius of the ball expected to hold k of n points where the density is f_x."""
    if f_x <= 0:
        raise ValueError("density value must be positive")
    if n < 1 or k < 1:
        raise ValueError("need n >= 1 and k >= 1")
    return (k / (unit_ball_volume(d) * n * f_x)) ** (1 / d)


def distances(points: np.ndarray, x: np.ndarray) -> np.ndarray:
    diff = points - x
    if diff.shape[1] == 1:
        return np.abs(diff[:, 0])
    return np.sqrt(np.sum(diff * diff, axis=1))


@dataclass(frozen=True)
class BallCounts:
    n_tot: int
    n_one: int = 0
    n_zero: int = 0
    y_sum: float = 0.0


def _first_true(pred, m: int, q: int) -> np.ndarray:
    """Vectorised bisection: smallest p in [0, m] with pred(p) true, pred monotone in p."""
    lo = np.zeros(q, dtype=np.int64)
    hi = np.full(q, m, dtype=np.int64)
    active = lo < hi
    while active.any():
        mid = np.minimum((lo + hi) // 2, max(m - 1, 0))
        t = pred(mid)
        lo = np.where(active & ~t, mid + 1, lo)
        hi = np.where(active & t, mid, hi)
        active = lo < hi
    return lo


class SpatialIndex:
    """Immutable search structure over the points of a dataset."""

    def __init__(self, ds: Dataset, *, _order: np.ndarray | None = None):
        if ds.n == 0:
            raise ValueError("cannot index an empty dataset")
        self.kind = ds.kind
        self._x = ds.x
        self._y = ds.y
        self._pos = ds.index
        self._shift = float(ds.y[0])
        self.n, self.dim = ds.x.shape
        if self.dim == 1:
            self._order = np.argsort(ds.x[:, 0], kind="stable") if _order is None else _order
            self._a = ds.x[self._order, 0]
            # labels are summed relative to the first one so that constant labels give exact means
            self._shift = float(ds.y[0])
            ys = ds.y[self._order] - self._shift
            self._ycum = np.concatenate(([0.0], np.cumsum(ys)))
        else:
            self._tree = cKDTree(ds.x, balanced_tree=False, compact_nodes=False)
        self._source = ds

    def prefix(self, m: int) -> "SpatialIndex":
        """Index over the first m stream positions, reusing the sort in one dimension."""
        if not 1 <= m <= self.n:
            raise ValueError(f"prefix length must lie in [1, {self.n}]")
        if m == self.n:
            return self
        ds = self._source.prefix(m)
        if self.dim == 1:
            return SpatialIndex(ds, _order=self._order[self._order < m])
        return SpatialIndex(ds)

    @property
    def dataset(self) -> Dataset:
        return self._source

    # single-query exact paths

    def _rows_within(self, x: np.ndarray, r: float) -> np.ndarray:
        """Rows (0-based) with distance <= r, in stream order."""
        if self.dim == 1:
            lo, hi = self._ball_bounds(x.reshape(1, 1), r)
            rows = self._order[lo[0]:hi[0]]
        else:
            rows = np.asarray(self._tree.query_ball_point(x, r * (1 + _SLACK) + _TINY), dtype=np.int64)
            rows = rows[distances(self._x[rows], x) <= r]
        return np.sort(rows)

    def k_nearest_rows(self, x, k: int) -> np.ndarray:
        x = as_point(x)
        if k < 1:
            raise ValueError("k must be at least 1")
        k = min(k, self.n)
        if k == self.n:
            rows = np.arange(self.n)
        else:
            kth = self._kth_distance(x, k)
            rows = self._rows_within(x, kth * (1 + _SLACK) + _TINY)
        d = distances(self._x[rows], x)
        return rows[np.lexsort((rows, d))][:k]

    def _kth_distance(self, x: np.ndarray, k: int) -> float:
        if self.dim == 1:
            lo = self._knn_windows(x.reshape(1, 1), k)[0]
            ends = self._a[[lo, lo + k - 1]]
            return float(np.max(np.abs(ends - x[0])))
        dist, _ = self._tree.query(x, k=[k])
        return float(dist[-1])

    def k_nearest(self, x, k: int) -> np.ndarray:
        """Stream indices of the k nearest points, nearest first."""
        return self._pos[self.k_nearest_rows(x, k)]

    def ball_counts(self, x, r: float) -> BallCounts:
        if r < 0:
            raise ValueError("radius must be non-negative")
        rows = self._rows_within(as_point(x), r)
        if self.kind == "classification":
            ones = int(np.count_nonzero(self._y[rows] == 1))
            return BallCounts(len(rows), ones, len(rows) - ones, float(ones))
        return BallCounts(len(rows), y_sum=math.fsum(self._y[rows]))

    def labels(self, rows: np.ndarray) -> np.ndarray:
        return self._y[rows]

    # batch paths used by the Monte Carlo harness

    def _knn_windows(self, q: np.ndarray, k: int) -> np.ndarray:
        """Left end, in sorted order, of the k-window nearest each 1-d query."""
        a, x = self._a, q[:, 0]
        lo = np.zeros(len(x), dtype=np.int64)
        hi = np.full(len(x), self.n - k, dtype=np.int64)
        active = lo < hi
        while active.any():
            mid = (lo + hi) // 2
            mid = np.where(active, mid, 0)
            right = (x - a[mid]) > (a[np.minimum(mid + k, self.n - 1)] - x)
            lo = np.where(active & right, mid + 1, lo)
            hi = np.where(active & ~right, mid, hi)
            active = lo < hi
        return lo

    def _ball_bounds(self, q: np.ndarray, r):
        a, x = self._a, q[:, 0]
        lo = _first_true(lambda p: (a[p] >= x) | (x - a[p] <= r), self.n, len(x))
        hi = _first_true(lambda p: (a[p] > x) & (a[p] - x > r), self.n, len(x))
        return lo, hi

    def _knn_centred_sums(self, queries, k: int):
        """Sums of (label - shift) over the k nearest points of each query row."""
        q = as_points(queries, self.dim)
        k = min(k, self.n)
        exact = lambda j: np.sum(self._y[self.k_nearest_rows(q[j], k)] - self._shift)  # noqa: E731
        if self.dim == 1:
            lo = self._knn_windows(q, k)
            sums = self._ycum[lo + k] - self._ycum[lo]
            if k < self.n:
                a, x = self._a, q[:, 0]
                kth = np.maximum(np.abs(a[lo] - x), np.abs(a[lo + k - 1] - x))
                tie_left = (lo > 0) & (np.abs(a[np.maximum(lo - 1, 0)] - x) == kth)
                tie_right = (lo + k < self.n) & (np.abs(a[np.minimum(lo + k, self.n - 1)] - x) == kth)
                for j in np.flatnonzero(tie_left | tie_right):
                    sums[j] = exact(j)
            return sums, k
        kk = min(k + 1, self.n)
        dist, rows = self._tree.query(q, k=kk)
        dist, rows = dist.reshape(len(q), kk), rows.reshape(len(q), kk)
        sums = (self._y[rows[:, :k]] - self._shift).sum(axis=1)
        if kk > k:
            near_tie = dist[:, k] <= dist[:, k - 1] * (1 + _SLACK) + _TINY
            for j in np.flatnonzero(near_tie):
                sums[j] = exact(j)
        return sums, k

    def knn_label_sums(self, queries, k: int) -> np.ndarray:
        """Sum of the labels of the k nearest points for each query row.

        Label sums for 0/1 labels are exact; real labels may differ from an
        ordered summation in the last bits.
        """
        sums, k = self._knn_centred_sums(queries, k)
        return sums + k * self._shift

    def knn_label_means(self, queries, k: int) -> np.ndarray:
        """Mean label of the k nearest points; exact when those labels are all equal."""
        sums, k = self._knn_centred_sums(queries, k)
        return self._shift + sums / k

    def ball_label_stats(self, queries, r):
        """Per query: number of points in the closed ball and the sum of their labels.

        ``r`` is a scalar radius or one radius per query.
        """
        q = as_points(queries, self.dim)
        r = np.broadcast_to(np.asarray(r, dtype=float), (len(q),))
        if self.dim == 1:
            lo, hi = self._ball_bounds(q, r)
            n_tot = hi - lo
            return n_tot, self._ycum[hi] - self._ycum[lo] + n_tot * self._shift
        lists = self._tree.query_ball_point(q, r * (1 + _SLACK) + _TINY)
        n_tot = np.zeros(len(q), dtype=np.int64)
        y_sum = np.zeros(len(q))
        for j, cand in enumerate(lists):
            if not cand:
                continue
            cand = np.asarray(cand, dtype=np.int64)
            cand = cand[distances(self._x[cand], q[j]) <= r[j]]
            n_tot[j] = len(cand)
            y_sum[j] = self._y[cand].sum()
        return n_tot, y_sum


def build_index(ds: Dataset) -> SpatialIndex:
    if ds.n == 0:
        raise ValueError("cannot index an empty dataset")
    problems = validate_dataset(ds)
    if problems:
        raise ValueError("invalid dataset: " + "; ".join(problems))
    return SpatialIndex(ds)


def k_nearest(idx: SpatialIndex, x, k: int) -> np.ndarray:
    return idx.k_nearest(x, k)


def ball_counts(idx: SpatialIndex, x, r: float) -> BallCounts:
    return idx.ball_counts(x, r)
