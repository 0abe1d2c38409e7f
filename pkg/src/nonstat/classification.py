"""Binary classifiers: k-NN vote, zeta-majority with a coin toss, plain majority, Bayes."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .core import Field, SeedSpec, as_point, as_points, make_rng
from .neighbors import BallCounts, SpatialIndex


@dataclass(frozen=True)
class KnnRule:
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")


@dataclass(frozen=True)
class ZetaMajority:
    r: float
    zeta: float = 0.1

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError("radius must be positive")
        if not 0 < self.zeta < 0.25:
            raise ValueError("zeta must lie in (0, 1/4)")


@dataclass(frozen=True)
class PlainMajority:
    r: float

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError("radius must be positive")


@dataclass(frozen=True)
class Bayes:
    h: Field


ClassifierKind = Union[KnnRule, ZetaMajority, PlainMajority, Bayes]


def _require_classification(idx: SpatialIndex):
    if idx.kind != "classification":
        raise ValueError("classifiers need a classification dataset")


def knn_classify(idx: SpatialIndex, x, k: int) -> int:
    """1 when more than half of the k nearest labels are 1 (all n labels when k > n)."""
    _require_classification(idx)
    rows = idx.k_nearest_rows(as_point(x), k)
    n_one = int(np.count_nonzero(idx.labels(rows) == 1))
    return 0 if 2 * n_one <= len(rows) else 1


def zeta_majority_classify(counts: BallCounts, zeta: float, coin: int) -> int:
    """Clear majority wins; a near tie returns the coin; anything else returns 0.

    Cases are tried in order: N1 - N0 > zeta N, then |N1 - N0| <= 2 zeta^2 N.
    An empty ball returns the coin.
    """
    if not 0 < zeta < 0.25:
        raise ValueError("zeta must lie in (0, 1/4)")
    if counts.n_tot == 0:
        return int(coin)
    diff = counts.n_one - counts.n_zero
    if diff > zeta * counts.n_tot:
        return 1
    if abs(diff) <= 2 * zeta * zeta * counts.n_tot:
        return int(coin)
    return 0


def plain_majority_classify(counts: BallCounts) -> int:
    return 0 if 2 * counts.n_one <= counts.n_tot else 1


def bayes_classify(h: Field, x) -> int:
    return int(h(as_points(x).reshape(1, -1))[0] > 0.5)


def classify(kind: ClassifierKind, idx: SpatialIndex, x, coin_seed: SeedSpec) -> int:
    x = as_point(x)
    if isinstance(kind, KnnRule):
        return knn_classify(idx, x, kind.k)
    if isinstance(kind, PlainMajority):
        _require_classification(idx)
        return plain_majority_classify(idx.ball_counts(x, kind.r))
    if isinstance(kind, ZetaMajority):
        _require_classification(idx)
        coin = int(make_rng(coin_seed.with_stream("coin")).integers(0, 2))
        return zeta_majority_classify(idx.ball_counts(x, kind.r), kind.zeta, coin)
    if isinstance(kind, Bayes):
        return bayes_classify(kind.h, x)
    raise TypeError(f"unknown classifier kind {kind!r}")


def predict_batch(kind: ClassifierKind, idx: SpatialIndex, queries, coins=None) -> np.ndarray:
    """Vectorised :func:`classify` over query rows; ``coins`` supplies one bit per query."""
    q = as_points(queries, idx.dim)
    if isinstance(kind, Bayes):
        return (np.asarray(kind.h(q)) > 0.5).astype(np.int8)
    _require_classification(idx)
    if isinstance(kind, KnnRule):
        k = min(kind.k, idx.n)
        n_one = idx.knn_label_sums(q, k)
        return (2 * n_one > k).astype(np.int8)
    n_tot, n_one = idx.ball_label_stats(q, kind.r)
    if isinstance(kind, PlainMajority):
        return (2 * n_one > n_tot).astype(np.int8)
    if isinstance(kind, ZetaMajority):
        if coins is None:
            raise ValueError("the zeta-majority rule needs one coin per query")
        coins = np.asarray(coins, dtype=np.int8)
        diff = 2 * n_one - n_tot
        out = np.zeros(len(q), dtype=np.int8)
        near_tie = np.abs(diff) <= 2 * kind.zeta**2 * n_tot
        out[near_tie] = coins[near_tie]
        out[diff > kind.zeta * n_tot] = 1
        out[n_tot == 0] = coins[n_tot == 0]
        return out
    raise TypeError(f"unknown classifier kind {kind!r}")
