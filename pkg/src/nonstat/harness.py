"""Monte Carlo estimation of average error and average variance across sample sizes.

Each replication draws one stream of n samples. The Cesaro mean over
i = 1..n is estimated by drawing indices i uniformly, building the rule on
the first i samples and scoring fresh queries drawn for position i + 1.
Replications run in parallel and are reduced in replication order, so the
output does not depend on the worker count.
"""

from __future__ import annotations

import logging
import math
import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .classification import Bayes, KnnRule, PlainMajority, ZetaMajority, predict_batch
from .core import Schedules, SeedSpec, make_rng
from .neighbors import SpatialIndex, knn_radius
from .oracles import GridSpec, bayes_error, cesaro_density_gap, cesaro_label_gap, m_star_finite, margin_mass
from .regression import rate_bound
from .scenarios import Scenario, draw_features, get_scenario, sample_stream

log = logging.getLogger(__name__)

REGRESSION_RULES = ("knn", "ball", "oracle")
CLASSIFICATION_RULES = ("knn_rule", "zeta_majority", "plain_majority", "bayes")


# rules as seen by the harness: parameters follow the scenario schedules at prefix size i

class KnnRegressor:
    name = "knn"

    def param(self, sc: Scenario, n: int):
        return sc.schedules.k_of_n(n)

    def predict(self, sc, idx, i, queries, coins):
        return idx.knn_label_means(queries, self.param(sc, i))


class BallRegressor:
    """Mean label in the ball expected to hold k(i) points under the limit density."""

    name = "ball"

    def param(self, sc: Scenario, n: int):
        return sc.schedules.k_of_n(n)

    def predict(self, sc, idx, i, queries, coins):
        k = self.param(sc, i)
        f = sc.density.base(queries)
        r = np.array([knn_radius(i, k, fx, sc.dim) if fx > 0 else np.inf for fx in f])
        n_tot, y_sum = idx.ball_label_stats(queries, r)
        fallback = float(np.mean(idx.dataset.y))
        return np.where(n_tot > 0, y_sum / np.maximum(n_tot, 1), fallback)


class OracleRegressor:
    """Predicts h(x) exactly; a reference for the noise floor."""

    name = "oracle"

    def param(self, sc, n):
        return None

    def predict(self, sc, idx, i, queries, coins):
        return sc.labels(queries)


class Classifier:
    def __init__(self, name: str):
        if name not in CLASSIFICATION_RULES:
            raise ValueError(f"unknown classifier {name!r}")
        self.name = name

    def param(self, sc: Scenario, n: int):
        if self.name == "knn_rule":
            return sc.schedules.k_of_n(n)
        if self.name == "bayes":
            return None
        return sc.schedules.r_of_n(n, sc.dim)

    def kind(self, sc: Scenario, i: int):
        p = self.param(sc, i)
        if self.name == "knn_rule":
            return KnnRule(p)
        if self.name == "zeta_majority":
            return ZetaMajority(p, sc.schedules.zeta)
        if self.name == "plain_majority":
            return PlainMajority(p)
        return Bayes(sc.labels)

    def predict(self, sc, idx, i, queries, coins):
        return predict_batch(self.kind(sc, i), idx, queries, coins)


def make_rule(name: str):
    if name == "knn":
        return KnnRegressor()
    if name == "ball":
        return BallRegressor()
    if name == "oracle":
        return OracleRegressor()
    return Classifier(name)


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    rule: str
    n_grid: tuple[int, ...]
    replications: int = 200
    index_samples: int = 32
    queries: int = 16
    seed: int = 20240917
    grid_points: int | None = None
    common_queries: bool = False
    conditional_loss: bool = False
    schedules: dict = field(default_factory=dict)
    scenario_options: dict = field(default_factory=dict)
    output: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        if self.replications < 1 or self.index_samples < 1 or self.queries < 1:
            raise ValueError("replications, index_samples and queries must all be >= 1")
        if not self.n_grid or any(n < 1 for n in self.n_grid):
            raise ValueError("n_grid must be a non-empty list of positive sizes")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ValueError("n_grid must be strictly increasing")
        if self.rule not in REGRESSION_RULES + CLASSIFICATION_RULES:
            raise ValueError(f"unknown rule {self.rule!r}")

    def build_scenario(self) -> Scenario:
        options = dict(self.scenario_options)
        sc = get_scenario(self.scenario, **options)
        if self.schedules:
            base = sc.schedules
            merged = {k: getattr(base, k) for k in ("k_exponent", "radius_exponent", "radius_scale", "zeta")}
            merged.update(self.schedules)
            sc = replace(sc, schedules=Schedules(**merged))
        return sc

    def resolved(self) -> dict:
        """Every setting with defaults filled in, as logged before a run."""
        sc = self.build_scenario()
        s = sc.schedules
        return {
            "scenario": self.scenario,
            "rule": self.rule,
            "n_grid": list(self.n_grid),
            "replications": self.replications,
            "index_samples": self.index_samples,
            "queries": self.queries,
            "seed": self.seed,
            "grid_points": GridSpec(sc.support, self.grid_points).points_per_axis,
            "common_queries": self.common_queries,
            "conditional_loss": self.conditional_loss,
            "schedules": {"k_exponent": s.k_exponent, "radius_exponent": s.radius_exponent,
                          "radius_scale": s.radius_scale, "zeta": s.zeta},
            "scenario_options": dict(self.scenario_options),
            "output": self.output,
        }


@dataclass(frozen=True)
class MetricRow:
    scenario: str
    rule: str
    n: int
    k_or_r: float | None
    zeta: float | None
    estimate: float
    se: float
    target: float
    gap: float
    rate_ref: float | None
    replications: int
    seed: int
    floor: float | None = None
    margin: float | None = None


@dataclass
class MetricSeries:
    rows: list[MetricRow] = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)


def worker_count() -> int:
    raw = os.environ.get("NONSTAT_THREADS", "").strip()
    n = int(raw) if raw else 0
    if n < 0:
        raise ValueError("NONSTAT_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def _query_tag(cfg: ExperimentConfig) -> int:
    # independent query streams per rule unless common random numbers are requested
    return 0 if cfg.common_queries else zlib.crc32(cfg.rule.encode()) + 1


def _sample_indices(rng: np.random.Generator, n: int, count: int) -> np.ndarray:
    if count >= n:
        return np.arange(1, n + 1)
    return rng.integers(1, n + 1, size=count)


def _replicate(cfg: ExperimentConfig, sc: Scenario, rule, n: int, rep: int) -> float:
    """Mean loss over the sampled indices and queries of one replication."""
    base = SeedSpec(cfg.seed, rep)
    data = sample_stream(sc, n, base)
    full = SpatialIndex(data)
    tag = _query_tag(cfg)
    qrng = make_rng(base.with_stream("query", tag))
    indices = _sample_indices(qrng, n, cfg.index_samples)
    members = np.repeat(indices + 1, cfg.queries)
    x = draw_features(sc.density, members, qrng)
    h = sc.labels.evaluate(members, x)
    if sc.kind == "classification":
        y = (qrng.uniform(size=len(members)) < h).astype(np.int8)
    else:
        y = h + sc.noise.draw(qrng, len(members))
    coins = make_rng(base.with_stream("coin", tag)).integers(0, 2, size=len(members)).astype(np.int8)
    losses = np.empty(len(members))
    q = cfg.queries
    for j, i in enumerate(indices):
        sl = slice(j * q, (j + 1) * q)
        pred = rule.predict(sc, full.prefix(int(i)), int(i), x[sl], coins[sl])
        losses[sl] = _loss(sc, pred, y[sl], h[sl], cfg.conditional_loss)
    return float(np.mean(losses))


def _loss(sc: Scenario, pred, y, h, conditional: bool) -> np.ndarray:
    """Per-query loss, or its expectation over the query label given X when ``conditional``."""
    if sc.kind == "classification":
        if conditional:
            return np.where(pred == 1, 1 - h, h)
        return (pred != y).astype(float)
    if conditional:
        return (h - pred) ** 2 + sc.noise.variance
    return (y - pred) ** 2


def _run_replications(cfg, sc, rule, n) -> np.ndarray:
    work = lambda rep: _replicate(cfg, sc, rule, n, rep)  # noqa: E731
    threads = min(worker_count(), cfg.replications)
    if threads <= 1:
        return np.array([work(rep) for rep in range(cfg.replications)])
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return np.array(list(pool.map(work, range(cfg.replications))))


def _summarise(values: np.ndarray) -> tuple[float, float]:
    est = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(len(values))) if len(values) > 1 else math.nan
    return est, se


def _check_kind(cfg, sc, kind):
    if sc.kind != kind:
        raise ValueError(f"scenario {sc.name!r} is a {sc.kind} scenario")
    allowed = CLASSIFICATION_RULES if kind == "classification" else REGRESSION_RULES
    if cfg.rule not in allowed:
        raise ValueError(f"rule {cfg.rule!r} does not apply to {kind}")


def estimate_Tn(cfg: ExperimentConfig, n: int, *, scenario: Scenario | None = None, rule=None) -> MetricRow:
    """Average misclassification probability over positions 1..n, with the Bayes error as target."""
    sc = scenario or cfg.build_scenario()
    if sc.kind != "classification":
        raise ValueError(f"scenario {sc.name!r} is not a classification scenario")
    if rule is None:
        _check_kind(cfg, sc, "classification")
        rule = make_rule(cfg.rule)
    est, se = _summarise(_run_replications(cfg, sc, rule, n))
    grid = GridSpec(sc.support, cfg.grid_points)
    base = sc.density.base
    target = bayes_error(sc.labels, base, grid).value
    floor = m_star_finite(sc.labels, n, base, grid).value
    margin = margin_mass(sc.labels, base, sc.schedules.zeta, grid).value
    zeta = sc.schedules.zeta if getattr(rule, "name", "") == "zeta_majority" else None
    return MetricRow(sc.name, getattr(rule, "name", "custom"), n, rule.param(sc, n), zeta, est, se,
                     target, est - target, None, cfg.replications, cfg.seed, floor, margin)


def estimate_avg_variance(cfg: ExperimentConfig, n: int, *, scenario: Scenario | None = None,
                          rule=None) -> MetricRow:
    """Average squared prediction error over positions 1..n, with the noise variance as target."""
    sc = scenario or cfg.build_scenario()
    if sc.kind != "regression":
        raise ValueError(f"scenario {sc.name!r} is not a regression scenario")
    if rule is None:
        _check_kind(cfg, sc, "regression")
        rule = make_rule(cfg.rule)
    est, se = _summarise(_run_replications(cfg, sc, rule, n))
    target = sc.noise.variance
    k = sc.schedules.k_of_n(n)
    rate = rate_bound(k).bound if k >= 2 else None
    return MetricRow(sc.name, getattr(rule, "name", "custom"), n, rule.param(sc, n), None, est, se,
                     target, est - target, rate, cfg.replications, cfg.seed)


def convergence_sweep(cfg: ExperimentConfig) -> MetricSeries:
    sc = cfg.build_scenario()
    estimate = estimate_Tn if sc.kind == "classification" else estimate_avg_variance
    series = MetricSeries()
    for n in cfg.n_grid:
        row = estimate(cfg, n, scenario=sc)
        log.info("%s/%s n=%d estimate=%.6g se=%.3g target=%.6g", sc.name, cfg.rule, n, row.estimate, row.se,
                 row.target)
        series.rows.append(row)
    return series


@dataclass(frozen=True)
class ConditionReport:
    scenario: str
    label: str
    declared: str
    n_grid: tuple[int, ...]
    gaps: dict

    @property
    def consistent(self) -> bool:
        return self.label == self.declared


def _vanishing(values: Sequence[float], atol: float = 1e-12) -> bool:
    if values[-1] <= atol:
        return True
    return all(b < a for a, b in zip(values, values[1:])) and values[-1] < 0.9 * values[0]


def condition_report(scenario: Scenario, n_grid: Sequence[int] = (100, 1000, 10000),
                     grid: GridSpec | None = None) -> ConditionReport:
    """Evaluate the Cesaro gaps along ``n_grid`` and label the scenario accordingly.

    A gap series counts as vanishing when it ends at zero or decreases
    strictly and loses more than 10% of its first value.
    """
    grid = grid or GridSpec(scenario.support)
    if scenario.kind == "regression":
        density = [cesaro_density_gap(scenario.density, n, grid).value for n in n_grid]
        label = "theorem-satisfying" if _vanishing(density) else "violating"
        gaps = {"density": density}
    else:
        absolute = [cesaro_label_gap(scenario.labels, n, grid, "absolute").value for n in n_grid]
        signed = [cesaro_label_gap(scenario.labels, n, grid, "signed").value for n in n_grid]
        if _vanishing(absolute):
            label = "theorem-satisfying"
        elif _vanishing(signed):
            label = "lemma-only"
        else:
            label = "violating"
        gaps = {"absolute": absolute, "signed": signed}
    return ConditionReport(scenario.name, label, scenario.declared, tuple(n_grid), gaps)


# pass/fail checks evaluated by the CLI in --assert mode

@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


REGRESSION_GAP_MAX = 0.01
RATE_BAND = 3.0
CLASSIFICATION_GAP_MAX = 0.05
WIRELESS_VARIANCE_MAX = 1e-3


def _decreasing(v: np.ndarray) -> bool:
    return bool(np.all(np.diff(v) < 0))


def check_regression_consistency(series: MetricSeries, gap_max: float = REGRESSION_GAP_MAX) -> Check:
    gap = series.column("gap")
    ok = bool(np.all(gap > 0)) and _decreasing(gap) and gap[-1] < gap_max
    return Check("regression consistency", ok, f"gaps {np.array2string(gap, precision=6)}; need > 0, "
                                               f"strictly decreasing, last < {gap_max}")


def check_rate_tracking(series: MetricSeries, band: float = RATE_BAND) -> Check:
    ratio = series.column("gap") / series.column("rate_ref")
    med = float(np.median(ratio))
    ok = bool(np.all(ratio > 0)) and bool(np.all(ratio <= band * med)) and bool(np.all(ratio >= med / band))
    return Check("rate tracking", ok, f"gap/rate ratios {np.array2string(ratio, precision=5)}; "
                                      f"median {med:.5g}, band x{band}")


def check_classification_consistency(series: MetricSeries, gap_max: float = CLASSIFICATION_GAP_MAX) -> Check:
    gap = series.column("gap")
    ok = _decreasing(gap) and gap[-1] <= gap_max
    return Check("classification consistency", ok,
                 f"T_n - L* {np.array2string(gap, precision=5)}; need decreasing, last <= {gap_max}")


def check_floor(series: MetricSeries) -> Check:
    est, se, floor = series.column("estimate"), series.column("se"), series.column("floor")
    ok = bool(np.all(est >= floor - 3 * np.nan_to_num(se)))
    return Check("lower-bound floor", ok, f"T_n {np.array2string(est, precision=5)} vs "
                                          f"M_n {np.array2string(floor, precision=5)}")


def check_lemma_band(series: MetricSeries) -> Check:
    last = series.rows[-1]
    limit = last.target + last.margin + 3 * last.se
    return Check("lemma band", last.estimate <= limit, f"T_n {last.estimate:.5g} <= L* + b(zeta) + 3SE = {limit:.5g}")


def check_negative_control(series: MetricSeries) -> Check:
    last = series.rows[-1]
    return Check("negative control", abs(last.gap) > 3 * last.se,
                 f"|T_n - L*| = {abs(last.gap):.5g} vs 3SE = {3 * last.se:.5g}")


def check_variance_ceiling(series: MetricSeries, ceiling: float = WIRELESS_VARIANCE_MAX) -> Check:
    last = series.rows[-1]
    return Check("average variance ceiling", last.estimate <= ceiling,
                 f"average variance {last.estimate:.5g} <= {ceiling}")


def check_gap_ceiling(series: MetricSeries, gap_max: float = CLASSIFICATION_GAP_MAX) -> Check:
    last = series.rows[-1]
    return Check("excess error ceiling", last.gap <= gap_max, f"T_n - L* = {last.gap:.5g} <= {gap_max}")


def default_checks(series: MetricSeries, sc: Scenario, rule: str) -> list[Check]:
    """The acceptance checks that apply to a finished sweep of ``sc`` under ``rule``."""
    if sc.kind == "regression":
        if sc.noise.bound == 0:
            return [check_variance_ceiling(series)]
        if rule != "knn" or sc.declared != "theorem-satisfying":
            return []
        return [check_regression_consistency(series), check_rate_tracking(series)]
    checks = [check_floor(series)]
    if sc.declared == "violating":
        checks.append(check_negative_control(series))
    elif sc.declared == "lemma-only" and rule == "zeta_majority":
        checks.append(check_lemma_band(series))
    elif sc.declared == "theorem-satisfying" and rule == "plain_majority":
        checks.append(check_classification_consistency(series) if len(series) > 1 else check_gap_ceiling(series))
    return checks
