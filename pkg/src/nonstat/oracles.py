"""Ground-truth targets and condition verifiers evaluated on a midpoint grid."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, NamedTuple

import numpy as np
from scipy.special import gammaln, logsumexp

from .core import Box, Density, DensityFamily, Field, LabelField

DEFAULT_POINTS = {1: 4096, 2: 128, 3: 32}


@dataclass(frozen=True)
class GridSpec:
    support: Box
    points_per_axis: int | None = None

    def __post_init__(self):
        m = self.points_per_axis or DEFAULT_POINTS.get(self.support.dim, 16)
        if m < 1 or m ** self.support.dim < 2:
            raise ValueError("grid needs at least two points")
        object.__setattr__(self, "points_per_axis", int(m))

    @property
    def cell_volume(self) -> float:
        return self.support.volume / self.points_per_axis ** self.support.dim

    def points(self) -> np.ndarray:
        m = self.points_per_axis
        axes = [lo + (np.arange(m) + 0.5) * (hi - lo) / m for lo, hi in zip(self.support.lo, self.support.hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.reshape(-1) for g in mesh], axis=1)

    def refined(self) -> "GridSpec":
        return GridSpec(self.support, 2 * self.points_per_axis)


class Estimate(NamedTuple):
    """A grid value and how much it moved over the last two coarsenings."""

    value: float
    delta: float


def _with_delta(compute: Callable[[GridSpec], float], grid: GridSpec) -> Estimate:
    fine = compute(grid)
    values = [fine]
    for factor in (2, 4):
        m = grid.points_per_axis // factor
        if m ** grid.support.dim < 2:
            break
        values.append(compute(GridSpec(grid.support, m)))
    delta = max((abs(a - b) for a, b in zip(values, values[1:])), default=0.0)
    return Estimate(float(fine), float(delta))


def _integrate(values: np.ndarray, grid: GridSpec) -> float:
    return float(np.sum(values) * grid.cell_volume)


def _bayes_integrand(h: np.ndarray) -> np.ndarray:
    return np.minimum(h, 1 - h)


def bayes_error(h: Field, density: Density, grid: GridSpec) -> Estimate:
    """Integral of min(h, 1 - h) against the density."""

    def compute(g: GridSpec) -> float:
        x = g.points()
        return _integrate(_bayes_integrand(np.asarray(h(x))) * density(x), g)

    return _with_delta(compute, grid)


def _member_bayes_errors(labels: LabelField, coefs: np.ndarray, density: Density, g: GridSpec) -> np.ndarray:
    x = g.points()
    f = density(x)
    h = labels(x)
    base = np.sum(_bayes_integrand(h) * f)
    if labels.pattern == "none":
        return np.full(len(coefs), base * g.cell_volume)
    bump = labels.bump(x)
    on = np.flatnonzero(bump != 0)
    h_on, b_on, f_on = h[on], bump[on], f[on]
    base_on = _bayes_integrand(h_on) * f_on
    out = np.empty(len(coefs))
    step = max(1, 2**22 // max(len(on), 1))
    for s in range(0, len(coefs), step):
        c = coefs[s:s + step, None]
        vals = _bayes_integrand(h_on + c * b_on) * f_on - base_on
        out[s:s + step] = base + vals.sum(axis=1)
    return out * g.cell_volume


def m_star_finite(labels: LabelField, n: int, density: Density, grid: GridSpec) -> Estimate:
    """Average over i <= n of the Bayes error of h_i; a floor for any classifier's average error."""
    if n < 1:
        raise ValueError("n must be at least 1")
    coefs, counts = np.unique(labels.coefficient(np.arange(1, n + 1)), return_counts=True)

    def compute(g: GridSpec) -> float:
        return float(np.dot(_member_bayes_errors(labels, coefs, density, g), counts) / n)

    return _with_delta(compute, grid)


def margin_mass(h: Field, density: Density, zeta: float, grid: GridSpec) -> Estimate:
    """Probability that h(X) lies within zeta of 1/2 without equalling 1/2."""
    if not 0 < zeta < 0.25:
        raise ValueError("zeta must lie in (0, 1/4)")

    def compute(g: GridSpec) -> float:
        x = g.points()
        v = np.asarray(h(x))
        near = (v >= 0.5 - zeta) & (v <= 0.5 + zeta) & (v != 0.5)
        return _integrate(np.where(near, density(x), 0.0), g)

    return _with_delta(compute, grid)


def cesaro_density_gap(family: DensityFamily, n: int, grid: GridSpec) -> Estimate:
    """sup_x |(1/n) sum f_i(x) - f(x)| over the grid."""
    if n < 1:
        raise ValueError("n must be at least 1")

    def compute(g: GridSpec) -> float:
        x = g.points()
        return float(np.max(np.abs(family.cesaro_average(n, x) - family.base(x))))

    return _with_delta(compute, grid)


def cesaro_label_gap(labels: LabelField, n: int, grid: GridSpec, mode: str = "absolute") -> Estimate:
    """sup_x (1/n) sum |h_i - h| (absolute) or sup_x |(1/n) sum h_i - h| (signed)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if mode not in ("absolute", "signed"):
        raise ValueError(f"unknown gap mode {mode!r}")
    if labels.pattern == "none":
        return Estimate(0.0, 0.0)
    s = labels.coefficient(np.arange(1, n + 1))
    weight = float(np.mean(np.abs(s))) if mode == "absolute" else abs(float(np.sum(s)) / n)

    def compute(g: GridSpec) -> float:
        return weight * float(np.max(np.abs(labels.bump(g.points()))))

    return _with_delta(compute, grid)


@dataclass(frozen=True)
class TailCheckResult:
    p: float
    r: int
    gamma: float
    exact_tail: float
    bound: float
    holds: bool


def _log_binom_pmf(j: np.ndarray, r: int, p: float) -> np.ndarray:
    return (gammaln(r + 1) - gammaln(j + 1) - gammaln(r - j + 1)
            + j * math.log(p) + (r - j) * math.log1p(-p))


def chernoff_tail_check(p: float, r: int, gamma: float) -> TailCheckResult:
    """Exact P(|U - pr| >= pr gamma) for U ~ Bin(r, p) against 2 exp(-gamma^2 p r / 4)."""
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    if r < 1:
        raise ValueError("r must be at least 1")
    if not 0 < gamma <= 0.5:
        raise ValueError("gamma must lie in (0, 1/2]")
    theta = Fraction(p) * r
    dev = theta * Fraction(gamma)
    # region boundaries decided in exact rational arithmetic
    lo = math.floor(theta - dev)
    hi = math.ceil(theta + dev)
    j = np.arange(r + 1)
    in_tail = (j <= lo) | (j >= hi)
    tail = float(np.exp(logsumexp(_log_binom_pmf(j[in_tail], r, p)))) if in_tail.any() else 0.0
    tail = min(tail, 1.0)
    bound = 2 * math.exp(-gamma * gamma * p * r / 4)
    return TailCheckResult(p, r, gamma, tail, bound, tail <= bound)


def truncated_variance_target(h: Field, family: DensityFamily, zeta: float, grid: GridSpec,
                              noise_variance: float) -> Estimate:
    """Noise variance plus the f-mass outside {zeta < f < 1/zeta} and {zeta < h < 1/zeta}."""
    if not 0 < zeta < 1:
        raise ValueError("truncation level must lie in (0, 1)")

    def compute(g: GridSpec) -> float:
        x = g.points()
        f = family.base(x)
        v = np.asarray(h(x))
        good = (f > zeta) & (f < 1 / zeta) & (v > zeta) & (v < 1 / zeta)
        return noise_variance + _integrate(np.where(good, 0.0, f), g)

    return _with_delta(compute, grid)
