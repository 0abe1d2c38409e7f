"""Shared domain types: points, datasets, generative families, schedules, seeds."""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass
from typing import Callable, Literal, Sequence

import numpy as np

Kind = Literal["regression", "classification"]
KINDS = ("regression", "classification")
STREAMS = ("features", "labels", "noise", "coin", "query")

Field = Callable[[np.ndarray], np.ndarray]


def as_point(coords) -> np.ndarray:
    """Return ``coords`` as a finite 1-d float vector."""
    p = np.atleast_1d(np.asarray(coords, dtype=float))
    if p.ndim != 1 or p.size < 1:
        raise ValueError(f"point must be a non-empty vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError("point coordinates must be finite")
    return p


def as_points(x, dim: int | None = None) -> np.ndarray:
    """Coerce to an (m, d) float array. A flat vector is read as m points when ``dim`` is 1."""
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(-1, 1) if dim == 1 else a.reshape(1, -1)
    if dim is not None and a.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got {a.shape[1]}")
    return a


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Sample:
    x: np.ndarray
    y: float
    index: int


@dataclass(frozen=True, eq=False)
class Dataset:
    """An ordered stream of samples stored column-wise.

    ``index`` holds the 1-based stream positions; it defaults to 1..n.
    Construction does not validate; see :func:`validate_dataset`.
    """

    x: np.ndarray
    y: np.ndarray
    kind: Kind
    index: np.ndarray | None = None

    def __post_init__(self):
        x = self.x
        if not (isinstance(x, np.ndarray) and x.dtype == object):
            x = np.asarray(x, dtype=float)
            if x.ndim == 1:
                x = x.reshape(-1, 1)
        y = np.asarray(self.y, dtype=float).reshape(-1)
        idx = np.arange(1, len(y) + 1) if self.index is None else np.asarray(self.index).reshape(-1)
        object.__setattr__(self, "x", _readonly(x))
        object.__setattr__(self, "y", _readonly(y))
        object.__setattr__(self, "index", _readonly(idx.astype(np.int64)))

    @classmethod
    def from_samples(cls, samples: Sequence[Sample], kind: Kind) -> "Dataset":
        if not samples:
            return cls(np.empty((0, 1)), np.empty(0), kind)
        rows = [as_point(s.x) for s in samples]
        if len({r.size for r in rows}) == 1:
            x = np.vstack(rows)
        else:
            x = np.empty(len(rows), dtype=object)
            x[:] = rows
        return cls(x, [s.y for s in samples], kind, [s.index for s in samples])

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def dim(self) -> int:
        return self.x.shape[1] if self.x.ndim == 2 and self.x.dtype != object else 0

    def __len__(self):
        return self.n

    def __getitem__(self, j: int) -> Sample:
        return Sample(self.x[j], float(self.y[j]), int(self.index[j]))

    def prefix(self, m: int) -> "Dataset":
        return Dataset(self.x[:m], self.y[:m], self.kind, self.index[:m])


def validate_dataset(ds: Dataset) -> list[str]:
    """List every invariant violation; an empty list means the dataset is valid."""
    problems = []
    if ds.kind not in KINDS:
        problems.append(f"unknown kind {ds.kind!r}")
    if ds.x.dtype == object or ds.x.ndim != 2:
        problems.append("dimension mismatch between samples")
    elif ds.x.shape[1] < 1:
        problems.append("dimension must be at least 1")
    if ds.x.shape[0] != ds.n or len(ds.index) != ds.n:
        problems.append("feature, label and index lengths differ")
        return problems
    if ds.x.dtype != object and not np.all(np.isfinite(ds.x)):
        bad = int(ds.index[np.flatnonzero(~np.isfinite(ds.x).all(axis=1))[0]])
        problems.append(f"index {bad}: non-finite feature")
    for pos, idx in enumerate(ds.index, start=1):
        if idx != pos:
            problems.append(f"non-consecutive index at position {pos}")
            break
    for j, y in enumerate(ds.y):
        if not math.isfinite(y):
            problems.append(f"index {ds.index[j]}: non-finite label")
        elif ds.kind == "classification" and y not in (0.0, 1.0):
            problems.append(f"index {ds.index[j]}: label out of range")
    return problems


@dataclass(frozen=True)
class Box:
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        lo, hi = tuple(map(float, np.atleast_1d(self.lo))), tuple(map(float, np.atleast_1d(self.hi)))
        if len(lo) != len(hi) or not lo:
            raise ValueError("box bounds must have equal positive length")
        if any(b <= a for a, b in zip(lo, hi)):
            raise ValueError("box must have positive extent on every axis")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def volume(self) -> float:
        return float(np.prod(np.subtract(self.hi, self.lo)))

    @property
    def center(self) -> np.ndarray:
        return (np.array(self.lo) + np.array(self.hi)) / 2

    def contains(self, x: np.ndarray) -> np.ndarray:
        x = as_points(x, self.dim)
        return np.all((x >= self.lo) & (x <= self.hi), axis=1)

    def uniform(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=(size, self.dim))


@dataclass(frozen=True)
class Density:
    """An evaluable density on a box; ``upper`` bounds it from above, ``lower`` from below on its support."""

    fn: Field
    support: Box
    upper: float
    lower: float = 0.0
    name: str = ""

    def __call__(self, x) -> np.ndarray:
        x = as_points(x, self.support.dim)
        out = np.asarray(self.fn(x), dtype=float).reshape(-1)
        return np.where(self.support.contains(x), out, 0.0)


def uniform_density(support: Box) -> Density:
    c = 1.0 / support.volume
    return Density(lambda x: np.full(len(x), c), support, c, c, "uniform")


Drift = Literal["none", "mixture_decay", "mixture_constant"]


@dataclass(frozen=True)
class DensityFamily:
    """Indexed densities f_i = (1 - beta_i) f + beta_i q around a limit f."""

    base: Density
    drift: Drift = "none"
    alt: Density | None = None
    beta: float = 0.0

    def __post_init__(self):
        if self.drift not in ("none", "mixture_decay", "mixture_constant"):
            raise ValueError(f"unknown drift {self.drift!r}")
        if self.drift != "none":
            if self.alt is None:
                raise ValueError("mixture drift needs an alternative density")
            if self.alt.support != self.base.support:
                raise ValueError("base and alternative densities have mismatched supports")
        if self.drift == "mixture_constant" and not 0 <= self.beta <= 1:
            raise ValueError("mixture weight must lie in [0, 1]")

    @property
    def support(self) -> Box:
        return self.base.support

    @property
    def c1(self) -> float:
        return self.base.lower

    @property
    def c2(self) -> float:
        return self.base.upper

    @property
    def envelope(self) -> float:
        """Upper bound on every member, used for rejection sampling."""
        if self.alt is None or self.drift == "none":
            return self.base.upper
        return max(self.base.upper, self.alt.upper)

    def weight(self, i) -> np.ndarray:
        i = np.asarray(i, dtype=float)
        if self.drift == "mixture_decay":
            return i ** -0.5
        if self.drift == "mixture_constant":
            return np.full(i.shape, self.beta)
        return np.zeros(i.shape)

    def mean_weight(self, n: int) -> float:
        return float(np.mean(self.weight(np.arange(1, n + 1))))

    def evaluate(self, i, x) -> np.ndarray:
        """f_{i_j}(x_j) for paired member indices and points."""
        f = self.base(x)
        if self.drift == "none":
            return f
        w = np.broadcast_to(self.weight(i), f.shape)
        return (1 - w) * f + w * self.alt(x)

    def member(self, i: int) -> Field:
        return lambda x: self.evaluate(np.full(len(as_points(x, self.support.dim)), i), x)

    def cesaro_average(self, n: int, x) -> np.ndarray:
        """(1/n) sum_{i<=n} f_i(x), using the linearity of the mixture."""
        f = self.base(x)
        if self.drift == "none":
            return f
        w = self.mean_weight(n)
        return (1 - w) * f + w * self.alt(x)


@dataclass(frozen=True)
class Bump:
    """Raised-cosine bump of the given height on a sub-box; sup |bump| = |height|."""

    center: tuple[float, ...]
    half_width: tuple[float, ...]
    height: float = 1.0

    def __post_init__(self):
        c, w = tuple(map(float, np.atleast_1d(self.center))), tuple(map(float, np.atleast_1d(self.half_width)))
        if len(c) != len(w) or any(v <= 0 for v in w):
            raise ValueError("bump needs matching center and positive half widths")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "half_width", w)

    @property
    def sup(self) -> float:
        return abs(self.height)

    def __call__(self, x) -> np.ndarray:
        t = (as_points(x, len(self.center)) - self.center) / np.asarray(self.half_width)
        inside = np.all(np.abs(t) <= 1, axis=1)
        shape = np.prod((1 + np.cos(np.pi * np.clip(t, -1, 1))) / 2, axis=1)
        return self.height * np.where(inside, shape, 0.0)


Pattern = Literal["none", "alternating", "decaying", "constant"]
Mode = Literal["absolute_cesaro", "signed_cesaro", "none"]
_PATTERN_MODE = {"none": "absolute_cesaro", "decaying": "absolute_cesaro",
                 "alternating": "signed_cesaro", "constant": "none"}


@dataclass(frozen=True)
class LabelField:
    """Indexed fields h_i = h + s_i * bump around a limit h.

    ``s_i`` is 0, (-1)^i, i^{-1/2} or 1 for the patterns none, alternating,
    decaying and constant. ``bounds`` is the admissible range of every h_i.
    """

    limit: Field
    bounds: tuple[float, float] = (0.0, 1.0)
    bump: Bump | None = None
    pattern: Pattern = "none"

    def __post_init__(self):
        if self.pattern not in _PATTERN_MODE:
            raise ValueError(f"unknown perturbation pattern {self.pattern!r}")
        if self.pattern != "none" and self.bump is None:
            raise ValueError("a perturbation pattern needs a bump")

    @property
    def mode(self) -> Mode:
        return _PATTERN_MODE[self.pattern]

    def coefficient(self, i) -> np.ndarray:
        i = np.asarray(i)
        if self.pattern == "alternating":
            return np.where(i % 2 == 0, 1.0, -1.0)
        if self.pattern == "decaying":
            return np.asarray(i, dtype=float) ** -0.5
        if self.pattern == "constant":
            return np.ones(i.shape)
        return np.zeros(i.shape)

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.limit(np.asarray(x, dtype=float)), dtype=float).reshape(-1)

    def evaluate(self, i, x) -> np.ndarray:
        """h_{i_j}(x_j) for paired member indices and points."""
        h = self(x)
        if self.pattern == "none":
            return h
        return h + np.broadcast_to(self.coefficient(i), h.shape) * self.bump(x)

    def member(self, i: int) -> Field:
        return lambda x: self.evaluate(np.full(len(self(x)), i), x)


NoiseKind = Literal["uniform_symmetric", "scaled_rademacher", "truncated_centered"]

# truncated_centered: normal with sd bound/2, cut at +-bound
_TRUNC_A = 2.0
_TRUNC_VAR = 1 - 2 * _TRUNC_A * math.exp(-_TRUNC_A**2 / 2) / math.sqrt(2 * math.pi) / math.erf(_TRUNC_A / math.sqrt(2))


@dataclass(frozen=True)
class NoiseModel:
    kind: NoiseKind = "uniform_symmetric"
    bound: float = 0.3

    def __post_init__(self):
        if self.kind not in ("uniform_symmetric", "scaled_rademacher", "truncated_centered"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.bound < 0:
            raise ValueError("noise bound must be non-negative")

    @property
    def variance(self) -> float:
        c = self.bound
        if self.kind == "uniform_symmetric":
            return c * c / 3
        if self.kind == "scaled_rademacher":
            return c * c
        return (c / _TRUNC_A) ** 2 * _TRUNC_VAR

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        c = self.bound
        if c == 0:
            return np.zeros(size)
        if self.kind == "uniform_symmetric":
            return rng.uniform(-c, c, size)
        if self.kind == "scaled_rademacher":
            return c * (2.0 * rng.integers(0, 2, size) - 1)
        out = rng.normal(0, c / _TRUNC_A, size)
        bad = np.abs(out) > c
        while bad.any():
            out[bad] = rng.normal(0, c / _TRUNC_A, int(bad.sum()))
            bad = np.abs(out) > c
        return out


def _ceil(v: float) -> int:
    # n**0.7 lands a hair above an integer for perfect powers
    return int(math.ceil(v - 1e-9))


@dataclass(frozen=True)
class Schedules:
    """k(n) = ceil(n^k_exponent), r_n = radius_scale * n^(-radius_exponent/d), margin zeta."""

    k_exponent: float = 0.7
    radius_exponent: float = 0.5
    radius_scale: float = 1.0
    zeta: float = 0.1

    def __post_init__(self):
        problems = self.check()
        if problems:
            raise ValueError("; ".join(problems))

    def k_of_n(self, n: int) -> int:
        return max(1, _ceil(n ** self.k_exponent))

    def r_of_n(self, n: int, d: int) -> float:
        return self.radius_scale * n ** (-self.radius_exponent / d)

    def check(self, grid: Sequence[int] = (10, 100, 1000, 10**4, 10**5, 10**6), dims=(1, 2, 3)) -> list[str]:
        problems = []
        if not 0 < self.zeta < 0.25:
            problems.append("zeta must lie in (0, 1/4)")
        if self.radius_scale <= 0:
            problems.append("radius scale must be positive")
        if problems:
            return problems
        for n in grid:
            if not (self.k_of_n(4 * n) > self.k_of_n(n) and self.k_of_n(4 * n) / (4 * n) < self.k_of_n(n) / n):
                problems.append(f"k schedule fails k->inf, k/n->0 at n={n}")
                break
        for d in dims:
            for n in grid:
                r1, r4 = self.r_of_n(n, d), self.r_of_n(4 * n, d)
                if not (r4 < r1 and 4 * n * r4**d / math.log(4 * n) > n * r1**d / math.log(n)):
                    problems.append(f"radius schedule fails r->0, n r^d/log n->inf at n={n}, d={d}")
                    break
        return problems


@dataclass(frozen=True)
class SeedSpec:
    master: int
    replication: int = 0
    stream: str = "features"
    index: int = 0

    def __post_init__(self):
        if self.stream not in STREAMS:
            raise ValueError(f"unknown stream {self.stream!r}")

    def with_stream(self, stream: str, index: int | None = None) -> "SeedSpec":
        return SeedSpec(self.master, self.replication, stream, self.index if index is None else index)


def derive_seed(spec: SeedSpec) -> int:
    """Mix (master, replication, stream, index) into a 64-bit seed."""
    payload = struct.pack(
        "<QqBq",
        spec.master & 0xFFFFFFFFFFFFFFFF,
        spec.replication,
        STREAMS.index(spec.stream),
        spec.index,
    )
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8, person=b"nonstat-seed").digest(), "little")


def make_rng(spec: SeedSpec) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(spec)))
