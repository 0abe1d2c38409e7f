"""Brute-force linear-scan references shared by the neighbour and rule tests."""

import math


from nonstat.core import Dataset


def scan_dist(p, x):
    return math.sqrt(math.fsum((a - b) ** 2 for a, b in zip(p, x)))


def scan_knn(points, x, k):
    order = sorted(range(len(points)), key=lambda j: (scan_dist(points[j], x), j))
    return [j + 1 for j in order[:k]]


def scan_ball(points, x, r):
    return [j for j in range(len(points)) if scan_dist(points[j], x) <= r]


def random_instance(rng, kind="regression", n=None, d=None, lattice=False):
    """Random dataset, sometimes on an integer lattice so that distance ties really occur."""
    n = n or int(rng.integers(1, 501))
    d = d or int(rng.integers(1, 4))
    if lattice:
        x = rng.integers(0, 6, size=(n, d)).astype(float)
    else:
        x = rng.uniform(-1, 1, size=(n, d))
    y = rng.integers(0, 2, n).astype(float) if kind == "classification" else rng.normal(size=n)
    return Dataset(x, y, kind)
