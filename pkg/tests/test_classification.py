import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_instance, scan_ball, scan_knn
from nonstat.classification import (
    Bayes,
    KnnRule,
    PlainMajority,
    ZetaMajority,
    bayes_classify,
    classify,
    knn_classify,
    plain_majority_classify,
    predict_batch,
    zeta_majority_classify,
)
from nonstat.core import Dataset, SeedSpec
from nonstat.neighbors import BallCounts, build_index


def _cls(x, y):
    return build_index(Dataset(np.asarray(x, dtype=float).reshape(len(y), -1), y, "classification"))


def test_knn_rule_examples():
    idx = _cls([0.0, 0.1, 0.2, 0.3], [1, 1, 0, 0])
    assert knn_classify(idx, [0.0], 3) == 1
    assert knn_classify(idx, [0.0], 4) == 0
    assert knn_classify(idx, [0.29], 1) == 0
    assert knn_classify(idx, [0.01], 1) == 1


@pytest.mark.parametrize("n1,n0,coin,expected", [(60, 20, 0, 1), (41, 39, 0, 0), (41, 39, 1, 1), (20, 60, 1, 0)])
def test_zeta_majority_examples(n1, n0, coin, expected):
    assert zeta_majority_classify(BallCounts(n1 + n0, n1, n0), 0.2, coin) == expected


def test_zeta_majority_fall_through_band():
    # 2 zeta^2 N < N1 - N0 <= zeta N: neither the 1 case nor the coin case, so 0
    assert zeta_majority_classify(BallCounts(100, 54, 46), 0.1, 1) == 0


def test_zeta_majority_empty_ball_returns_coin():
    assert zeta_majority_classify(BallCounts(0), 0.1, 1) == 1
    assert zeta_majority_classify(BallCounts(0), 0.1, 0) == 0
    with pytest.raises(ValueError):
        zeta_majority_classify(BallCounts(0), 0.25, 0)


@pytest.mark.parametrize("n1,n_tot,expected", [(5, 8, 1), (4, 8, 0), (0, 0, 0)])
def test_plain_majority_examples(n1, n_tot, expected):
    assert plain_majority_classify(BallCounts(n_tot, n1, n_tot - n1)) == expected


@pytest.mark.parametrize("hx,expected", [(0.7, 1), (0.5, 0), (0.2, 0)])
def test_bayes_examples(hx, expected):
    assert bayes_classify(lambda x: np.full(len(x), hx), [0.3]) == expected


def test_classify_dispatch():
    idx = _cls([0.0, 1.0], [1, 1])
    seed = SeedSpec(3, 0)
    assert classify(Bayes(lambda x: np.full(len(x), 0.9)), idx, [0.5], seed) == 1
    assert classify(PlainMajority(0.1), idx, [0.5], seed) == 0
    z = ZetaMajority(0.1, 0.1)
    bits = {classify(z, idx, [0.5], seed) for _ in range(5)}
    assert len(bits) == 1
    assert classify(KnnRule(1), idx, [0.1], seed) == 1


def test_kind_validation():
    for bad in (lambda: KnnRule(0), lambda: ZetaMajority(0.0), lambda: ZetaMajority(0.1, 0.3),
                lambda: PlainMajority(-1.0)):
        with pytest.raises(ValueError):
            bad()


def test_regression_dataset_rejected():
    idx = build_index(Dataset([[0.0]], [0.3], "regression"))
    with pytest.raises(ValueError):
        knn_classify(idx, [0.0], 1)


def _scan_counts(ds, x, r):
    inside = scan_ball(ds.x.tolist(), x, r)
    ones = int(sum(ds.y[j] for j in inside))
    return BallCounts(len(inside), ones, len(inside) - ones, float(ones))


def test_batch_predictions_match_scan_rules():
    rng = np.random.default_rng(21)
    for _ in range(60):
        ds = random_instance(rng, "classification", lattice=bool(rng.integers(0, 2)))
        idx = build_index(ds)
        q = rng.uniform(-1, 1, (15, ds.dim))
        coins = rng.integers(0, 2, 15)
        k = int(rng.integers(1, ds.n + 1))
        r = float(rng.uniform(0.05, 1.0))
        knn = predict_batch(KnnRule(k), idx, q)
        plain = predict_batch(PlainMajority(r), idx, q)
        zeta = predict_batch(ZetaMajority(r, 0.1), idx, q, coins)
        for j, x in enumerate(q):
            n1 = sum(ds.y[i - 1] for i in scan_knn(ds.x.tolist(), x, k))
            assert knn[j] == (0 if n1 <= k / 2 else 1)
            c = _scan_counts(ds, x, r)
            assert plain[j] == plain_majority_classify(c)
            assert zeta[j] == zeta_majority_classify(c, 0.1, int(coins[j]))


def test_zeta_batch_needs_coins():
    with pytest.raises(ValueError):
        predict_batch(ZetaMajority(0.1), _cls([0.0], [1]), [[0.0]])


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 200), st.integers(0, 200), st.floats(0.01, 0.2499), st.integers(0, 1))
def test_zeta_rule_cases(n1, n0, zeta, coin):
    n = n1 + n0
    out = zeta_majority_classify(BallCounts(n, n1, n0), zeta, coin)
    diff = n1 - n0
    if n and diff <= -zeta * n:
        assert out == 0
    if diff > zeta * n:
        assert out == 1


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 100), st.integers(0, 100))
def test_label_flip_symmetry(n1, n0):
    n = n1 + n0
    a = plain_majority_classify(BallCounts(n, n1, n0))
    b = plain_majority_classify(BallCounts(n, n0, n1))
    if 2 * n1 != n:
        assert a != b


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 1))
def test_unanimous_neighbourhood_agreement(seed, label):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 50))
    idx = _cls(rng.uniform(0, 1, n), [label] * n)
    x = [float(rng.uniform(0, 1))]
    k = int(rng.integers(1, n + 1))
    assert knn_classify(idx, x, k) == label
    counts = idx.ball_counts(x, 2.0)
    assert plain_majority_classify(counts) == label
    assert zeta_majority_classify(counts, 0.1, 1 - label) == label


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_knn_label_flip(seed):
    rng = np.random.default_rng(seed)
    ds = random_instance(rng, "classification", n=int(rng.integers(1, 60)), d=1)
    flipped = Dataset(ds.x, 1 - ds.y, "classification")
    x = rng.uniform(-1, 1, 1)
    k = int(rng.integers(1, ds.n + 1))
    n1 = sum(ds.y[i - 1] for i in scan_knn(ds.x.tolist(), x, k))
    if 2 * n1 != k:
        assert knn_classify(build_index(ds), x, k) != knn_classify(build_index(flipped), x, k)
