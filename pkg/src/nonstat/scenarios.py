"""Generative scenario presets and the seeded stream sampler."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .core import (
    Box,
    Bump,
    Dataset,
    Density,
    DensityFamily,
    Field,
    LabelField,
    NoiseModel,
    Schedules,
    SeedSpec,
    as_points,
    make_rng,
    uniform_density,
)

ATTEMPT_BUDGET = 10**6
LABELS = ("theorem-satisfying", "lemma-only", "violating")


class SamplingError(RuntimeError):
    """Rejection sampling exhausted its attempt budget."""


def make_density_family(base: Density, drift: str = "none", q: Density | None = None,
                        beta: float = 0.0) -> DensityFamily:
    """Wrap ``base`` as the limit of f_i = (1 - beta_i) base + beta_i q.

    ``mixture_decay`` uses beta_i = i^{-1/2}; ``mixture_constant`` a fixed beta.
    """
    return DensityFamily(base, drift, q, beta)


def _check_range(values: np.ndarray, bounds: tuple[float, float], closed: bool):
    lo, hi = bounds
    ok = (values >= lo) & (values <= hi) if closed else (values > lo) & (values < hi)
    if not np.all(ok):
        raise ValueError(f"label field leaves its admissible range {bounds}: "
                         f"min {values.min():.6g}, max {values.max():.6g}")


def make_label_family(limit: Field, support: Box, perturbation: str = "none", bump: Bump | None = None,
                      bounds: tuple[float, float] = (0.0, 1.0), check_points: int = 257) -> LabelField:
    """Build h_i = h + s_i * bump and check every member stays inside ``bounds``.

    ``bounds`` of (0, 1) are checked as a closed interval, anything else as an
    open one. The bump height plays the role of the perturbation amplitude.
    """
    labels = LabelField(limit, tuple(bounds), bump, perturbation)
    m = check_points if support.dim == 1 else max(9, int(round(check_points ** (1 / support.dim))) * 2)
    axes = [np.linspace(lo, hi, m) for lo, hi in zip(support.lo, support.hi)]
    x = np.stack([g.reshape(-1) for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    closed = tuple(bounds) == (0.0, 1.0)
    h = labels(x)
    _check_range(h, bounds, closed)
    if bump is not None and perturbation != "none":
        g = bump(x)
        extremes = {"alternating": (1, -1), "decaying": (1,), "constant": (1,)}[perturbation]
        for s in extremes:
            _check_range(h + s * g, bounds, closed)
    return labels


@dataclass(frozen=True)
class PathLossParams:
    delta: float = 3.0
    r0: float = 1.0
    R: float = 2.0
    p_max: float = 1.0

    def __post_init__(self):
        if self.delta <= 2:
            raise ValueError("path-loss exponent must exceed 2")
        if not 0 < self.r0 < self.R:
            raise ValueError("need 0 < r0 < R")
        if self.p_max <= 0:
            raise ValueError("power cap must be positive")


def wireless_power_target(params: PathLossParams) -> Field:
    """Received power min(p_max, |x|^-delta) as a function of node position."""

    def h(x):
        dist = np.linalg.norm(as_points(x, 2), axis=1)
        with np.errstate(divide="ignore"):
            return np.minimum(params.p_max, dist ** -params.delta)

    return h


def annulus_density(params: PathLossParams) -> Density:
    support = Box((-params.R, -params.R), (params.R, params.R))
    c = 1.0 / (np.pi * (params.R**2 - params.r0**2))

    def fn(x):
        dist = np.linalg.norm(x, axis=1)
        return np.where((dist >= params.r0) & (dist <= params.R), c, 0.0)

    return Density(fn, support, c, c, "annulus")


def cr_disturbance_field(center, radius_soft: float, steepness: float, support: Box,
                         perturbation: str = "none", bump: Bump | None = None) -> LabelField:
    """Probability that a user at x disturbs the licensed user sitting at ``center``."""
    if steepness <= 0:
        raise ValueError("steepness must be positive")
    c = np.asarray(center, dtype=float)

    def h(x):
        dist = np.linalg.norm(as_points(x, len(c)) - c, axis=1)
        return 0.5 * (1 - np.tanh(0.5 * steepness * (dist - radius_soft)))

    return make_label_family(h, support, perturbation, bump)


@dataclass(frozen=True)
class Scenario:
    name: str
    kind: str
    density: DensityFamily
    labels: LabelField
    schedules: Schedules = field(default_factory=Schedules)
    noise: NoiseModel | None = None
    validity: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind == "classification" and self.density.drift != "none":
            raise ValueError("classification scenarios draw features from one fixed density")
        if self.kind == "regression" and self.noise is None:
            object.__setattr__(self, "noise", NoiseModel(bound=0.0))

    @property
    def dim(self) -> int:
        return self.density.support.dim

    @property
    def support(self) -> Box:
        return self.density.support

    @property
    def declared(self) -> str:
        """Which ergodic condition the family is built to satisfy."""
        if self.kind == "regression":
            return "violating" if self.density.drift == "mixture_constant" else "theorem-satisfying"
        return {"absolute_cesaro": "theorem-satisfying", "signed_cesaro": "lemma-only",
                "none": "violating"}[self.labels.mode]


def draw_features(family: DensityFamily, members: np.ndarray, rng: np.random.Generator,
                  budget: int = ATTEMPT_BUDGET) -> np.ndarray:
    """Rejection-sample X_j ~ f_{members[j]} under the envelope c2 on the support box."""
    members = np.asarray(members)
    support, env = family.support, family.envelope
    out = np.empty((len(members), support.dim))
    pending = np.arange(len(members))
    attempts = 0
    while pending.size:
        if attempts >= budget:
            raise SamplingError(f"{pending.size} points not accepted after {budget} attempts each; "
                                "check the density envelope")
        attempts += 1
        prop = support.uniform(rng, pending.size)
        dens = family.evaluate(members[pending], prop)
        if np.any(dens > env * (1 + 1e-12)):
            raise SamplingError("density exceeds its declared envelope")
        accept = rng.uniform(size=pending.size) * env < dens
        out[pending[accept]] = prop[accept]
        pending = pending[~accept]
    return out


def draw_responses(sc: Scenario, members: np.ndarray, x: np.ndarray,
                   label_rng: np.random.Generator, noise_rng: np.random.Generator) -> np.ndarray:
    if sc.kind == "classification":
        h = sc.labels.evaluate(members, x)
        return (label_rng.uniform(size=len(x)) < h).astype(float)
    return sc.labels.evaluate(members, x) + sc.noise.draw(noise_rng, len(x))


def sample_stream(sc: Scenario, n: int, seed: SeedSpec) -> Dataset:
    """Draw (X_i, Y_i), i = 1..n, each substream from its own derived seed."""
    if n < 1:
        raise ValueError("n must be at least 1")
    members = np.arange(1, n + 1)
    x = draw_features(sc.density, members, make_rng(seed.with_stream("features")))
    y = draw_responses(sc, members, x, make_rng(seed.with_stream("labels")), make_rng(seed.with_stream("noise")))
    return Dataset(x, y, sc.kind)


# presets

UNIT = Box((0.0,), (1.0,))
SQUARE = Box((-1.0, -1.0), (1.0, 1.0))


def _smooth_target(x):
    return 1.0 + 0.5 * np.sin(2 * np.pi * as_points(x, 1)[:, 0])


def _class_limit(x):
    return 0.5 + 0.4 * np.sin(2 * np.pi * as_points(x, 1)[:, 0])


def _cosine_density() -> Density:
    return Density(lambda x: 1 - np.cos(2 * np.pi * x[:, 0]), UNIT, 2.0, 0.0, "raised-cosine")


def _noise(options: dict) -> NoiseModel:
    if options.get("zero_noise"):
        return NoiseModel(options.get("noise_kind", "uniform_symmetric"), 0.0)
    return NoiseModel(options.get("noise_kind", "uniform_symmetric"), options.get("noise_bound", 0.3))


def _regression(name, density, h, eta, options):
    noise = _noise(options)
    schedules = options.get("schedules") or Schedules()
    validity = {"c1": density.c1, "c2": density.c2, "eta1": eta[0], "eta2": eta[1]}
    labels = LabelField(h, eta)
    return Scenario(name, "regression", density, labels, schedules, noise, validity)


def _smooth_iid_reg(options):
    return _regression("smooth_iid_reg", make_density_family(uniform_density(UNIT)), _smooth_target,
                       (0.5, 1.5), options)


def _drift_reg(options):
    family = make_density_family(uniform_density(UNIT), "mixture_decay", _cosine_density())
    return _regression("drift_reg", family, _smooth_target, (0.5, 1.5), options)


WIRELESS = PathLossParams(delta=3.0, r0=2.0, R=3.0, p_max=1.0)


def _wireless_power(options):
    params = options.get("path_loss") or WIRELESS
    h = wireless_power_target(params)
    eta = (min(params.p_max, params.R ** -params.delta), min(params.p_max, params.r0 ** -params.delta))
    return _regression("wireless_power", make_density_family(annulus_density(params)), h, eta, options)


def _classification(name, labels, options, density=None):
    density = density or make_density_family(uniform_density(UNIT))
    schedules = options.get("schedules") or Schedules()
    validity = {"c1": density.c1, "c2": density.c2}
    return Scenario(name, "classification", density, labels, schedules, None, validity)


CLASS_BUMP = Bump((0.5,), (0.15,), 0.15)
VIOLATING_BUMP = Bump((0.25,), (0.1,), -0.3)


def _iid_class(options):
    return _classification("iid_class", make_label_family(_class_limit, UNIT), options)


def _decay_class(options):
    return _classification("decay_class", make_label_family(_class_limit, UNIT, "decaying", CLASS_BUMP), options)


def _alternating_class(options):
    labels = make_label_family(_class_limit, UNIT, "alternating", CLASS_BUMP)
    return _classification("alternating_class", labels, options)


def _violating_class(options):
    labels = make_label_family(_class_limit, UNIT, "constant", VIOLATING_BUMP)
    return _classification("violating_class", labels, options)


CR_BUMP = Bump((0.5, 0.5), (0.3, 0.3), 0.1)


def _cr_network(options):
    labels = cr_disturbance_field((0.0, 0.0), 0.5, 8.0, SQUARE, "decaying", CR_BUMP)
    return _classification("cr_network", labels, options, make_density_family(uniform_density(SQUARE)))


PRESETS: dict[str, Callable[[dict], Scenario]] = {
    "smooth_iid_reg": _smooth_iid_reg,
    "drift_reg": _drift_reg,
    "wireless_power": _wireless_power,
    "iid_class": _iid_class,
    "decay_class": _decay_class,
    "alternating_class": _alternating_class,
    "cr_network": _cr_network,
    "violating_class": _violating_class,
}

OPTION_KEYS = ("zero_noise", "noise_bound", "noise_kind", "schedules", "path_loss")


def get_scenario(name: str, **options) -> Scenario:
    if name not in PRESETS:
        raise KeyError(f"unknown scenario {name!r}; known: {', '.join(PRESETS)}")
    unknown = set(options) - set(OPTION_KEYS)
    if unknown:
        raise KeyError(f"unknown scenario options: {', '.join(sorted(unknown))}")
    return PRESETS[name](options)


def with_schedules(sc: Scenario, schedules: Schedules) -> Scenario:
    return replace(sc, schedules=schedules)
