"""k-nearest-neighbour regression and the fixed-ball estimate it is compared with."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import as_point
from .neighbors import SpatialIndex


@dataclass(frozen=True)
class RegressionEstimate:
    value: float
    k_used: int
    fallback: bool = False


@dataclass(frozen=True)
class RateBound:
    k: int
    epsilon: float
    bound: float
    coef: float


def _require_regression(idx: SpatialIndex):
    if idx.kind != "regression":
        raise ValueError("regression estimates need a regression dataset")


def knn_regress(idx: SpatialIndex, x, k: int) -> RegressionEstimate:
    """Mean label of the k nearest points (all points when k exceeds n)."""
    _require_regression(idx)
    rows = idx.k_nearest_rows(as_point(x), k)
    return RegressionEstimate(math.fsum(idx.labels(rows)) / len(rows), len(rows))


def ball_regress(idx: SpatialIndex, x, r: float, global_mean: float) -> RegressionEstimate:
    """Mean label inside the closed ball of radius r; ``global_mean`` when the ball is empty."""
    _require_regression(idx)
    if r <= 0:
        raise ValueError("radius must be positive")
    counts = idx.ball_counts(x, r)
    if counts.n_tot == 0:
        return RegressionEstimate(float(global_mean), 0, True)
    return RegressionEstimate(counts.y_sum / counts.n_tot, counts.n_tot)


def rate_bound(k: int, coef: float = 1.0) -> RateBound:
    """coef * (log k)^2 / k together with the deviation scale log k / sqrt k."""
    if k < 2:
        raise ValueError("rate bound needs k >= 2")
    if coef <= 0:
        raise ValueError("coefficient must be positive")
    lk = math.log(k)
    return RateBound(k, lk / math.sqrt(k), coef * lk * lk / k, coef)
