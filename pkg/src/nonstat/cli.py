"""Command-line front end.

Exit codes: 0 success, 1 configuration error, 2 runtime failure, 3 failed
``--assert`` check.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import yaml

from .core import Schedules
from .harness import (
    CLASSIFICATION_RULES,
    REGRESSION_RULES,
    ExperimentConfig,
    MetricSeries,
    condition_report,
    convergence_sweep,
    default_checks,
)
from .oracles import GridSpec, bayes_error, chernoff_tail_check, m_star_finite, margin_mass
from .scenarios import PathLossParams

log = logging.getLogger("nonstat")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_ASSERT = 0, 1, 2, 3

CSV_COLUMNS = ("scenario", "rule", "n", "k_or_r", "zeta", "estimate", "se", "target", "gap", "rate_ref",
               "replications", "seed")

CONFIG_KEYS = {"scenario", "rule", "n_grid", "replications", "index_samples", "queries", "seed", "grid_points",
               "common_queries", "conditional_loss", "schedules", "scenario_options", "output"}
SCHEDULE_KEYS = {"k_exponent", "radius_exponent", "radius_scale", "zeta"}
SCENARIO_OPTION_KEYS = {"zero_noise", "noise_bound", "noise_kind", "path_loss"}
PATH_LOSS_KEYS = {"delta", "r0", "R", "p_max"}

SWEEP_P = tuple(round(0.1 * j, 1) for j in range(1, 10))
SWEEP_R = (10, 100, 1000, 10000)
SWEEP_GAMMA = (0.05, 0.1, 0.2, 0.5)

DEFAULT_CONDITION_GRID = (100, 1000, 10000)


class ConfigError(Exception):
    pass


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, int) and not isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return "" if math.isnan(value) else f"{value:.9g}"
    return str(value)


def format_csv(series: MetricSeries) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in series:
        writer.writerow([_format(getattr(row, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def write_csv(series: MetricSeries, path) -> None:
    """Header plus one row per sample size; UTF-8 with LF line endings."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_csv(series))


def _reject_unknown(mapping: dict, allowed: set, where: str):
    if not isinstance(mapping, dict):
        raise ConfigError(f"{where} must be a mapping")
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(map(str, unknown)))}")


def load_config(path, *, default_rule: str | None = None, require_grid: bool = True) -> ExperimentConfig:
    """Read a YAML experiment document; unknown keys anywhere are errors."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    if doc is None:
        doc = {}
    _reject_unknown(doc, CONFIG_KEYS, "config")
    if "scenario" not in doc:
        raise ConfigError("config needs a 'scenario'")
    doc = dict(doc)
    if "n_grid" not in doc:
        if require_grid:
            raise ConfigError("config needs an 'n_grid'")
        doc["n_grid"] = list(DEFAULT_CONDITION_GRID)
    if "rule" not in doc:
        if default_rule is None:
            raise ConfigError("config needs a 'rule'")
        doc["rule"] = default_rule
    schedules = doc.get("schedules") or {}
    _reject_unknown(schedules, SCHEDULE_KEYS, "schedules")
    options = dict(doc.get("scenario_options") or {})
    _reject_unknown(options, SCENARIO_OPTION_KEYS, "scenario_options")
    try:
        if "path_loss" in options:
            _reject_unknown(options["path_loss"], PATH_LOSS_KEYS, "scenario_options.path_loss")
            options["path_loss"] = PathLossParams(**options["path_loss"])
        if schedules:
            Schedules(**schedules)
        doc["schedules"] = schedules
        doc["scenario_options"] = options
        if not isinstance(doc["n_grid"], list):
            raise ConfigError("n_grid must be a list of sample sizes")
        cfg = ExperimentConfig(**doc)
        cfg.build_scenario()
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def _log_resolved(cfg: ExperimentConfig):
    resolved = cfg.resolved()
    opts = resolved["scenario_options"]
    if isinstance(opts.get("path_loss"), PathLossParams):
        p = opts["path_loss"]
        opts["path_loss"] = {"delta": p.delta, "r0": p.r0, "R": p.R, "p_max": p.p_max}
    log.info("resolved config:\n%s", yaml.safe_dump(resolved, sort_keys=False).rstrip())


def _report_checks(checks) -> int:
    failed = 0
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}")
        failed += not c.passed
    return EXIT_ASSERT if failed else EXIT_OK


def _simulate(args, kind: str) -> int:
    rules = REGRESSION_RULES if kind == "regression" else CLASSIFICATION_RULES
    cfg = load_config(args.config)
    if args.output:
        cfg = replace(cfg, output=args.output)
    sc = cfg.build_scenario()
    if sc.kind != kind or cfg.rule not in rules:
        raise ConfigError(f"scenario {cfg.scenario!r} with rule {cfg.rule!r} is not a {kind} experiment")
    _log_resolved(cfg)
    series = convergence_sweep(cfg)
    if cfg.output:
        write_csv(series, cfg.output)
        log.info("wrote %s", cfg.output)
    else:
        sys.stdout.write(format_csv(series))
    if args.assert_:
        checks = default_checks(series, sc, cfg.rule)
        if not checks:
            log.warning("no acceptance check applies to %s/%s", sc.name, cfg.rule)
        return _report_checks(checks)
    return EXIT_OK


def _check_conditions(args) -> int:
    cfg = load_config(args.config, default_rule="knn", require_grid=False)
    sc = cfg.build_scenario()
    _log_resolved(cfg)
    report = condition_report(sc, cfg.n_grid, GridSpec(sc.support, cfg.grid_points))
    for name, values in report.gaps.items():
        print(f"{name} gap: " + " ".join(f"n={n}:{v:.6g}" for n, v in zip(report.n_grid, values)))
    print(report.label)
    if args.assert_ and not report.consistent:
        print(f"FAIL label {report.label} differs from declared {report.declared}")
        return EXIT_ASSERT
    return EXIT_OK


def _oracle(args) -> int:
    cfg = load_config(args.config, default_rule="knn", require_grid=False)
    sc = cfg.build_scenario()
    _log_resolved(cfg)
    grid = GridSpec(sc.support, cfg.grid_points)
    if sc.kind == "regression":
        print(f"sigma_N^2 = {sc.noise.variance:.9g}")
        return EXIT_OK
    base = sc.density.base
    le = bayes_error(sc.labels, base, grid)
    print(f"L* = {le.value:.9g} (grid delta {le.delta:.3g})")
    for n in cfg.n_grid:
        m = m_star_finite(sc.labels, n, base, grid)
        print(f"M_n[n={n}] = {m.value:.9g} (grid delta {m.delta:.3g})")
    b = margin_mass(sc.labels, base, sc.schedules.zeta, grid)
    print(f"b(zeta={sc.schedules.zeta:g}) = {b.value:.9g} (grid delta {b.delta:.3g})")
    return EXIT_OK


def _tail_check(args) -> int:
    if args.sweep:
        if any(v is not None for v in (args.p, args.r, args.gamma)):
            raise ConfigError("--sweep cannot be combined with --p/--r/--gamma")
        cases = [(p, r, g) for p in SWEEP_P for r in SWEEP_R for g in SWEEP_GAMMA]
    else:
        if None in (args.p, args.r, args.gamma):
            raise ConfigError("tail-check needs --p, --r and --gamma, or --sweep")
        cases = [(args.p, args.r, args.gamma)]
    try:
        results = [chernoff_tail_check(p, r, g) for p, r, g in cases]
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    violations = 0
    for res in results:
        verdict = "HOLDS" if res.holds else "VIOLATED"
        violations += not res.holds
        print(f"p={res.p:g} r={res.r} gamma={res.gamma:g} exact_tail={res.exact_tail:.9g} "
              f"bound={res.bound:.9g} {verdict}")
    if args.sweep:
        print(f"{len(results)} cases, {violations} violations")
    return EXIT_ASSERT if (violations and args.assert_) else EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nonstat", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in (("simulate-regression", "average-variance sweep from a YAML config"),
                        ("simulate-classification", "average-error sweep from a YAML config")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config")
        p.add_argument("--output", "-o", help="CSV path (overrides the config; default stdout)")
        p.add_argument("--assert", dest="assert_", action="store_true", help="evaluate acceptance checks")
    p = sub.add_parser("check-conditions", help="Cesaro gaps and scenario label")
    p.add_argument("config")
    p.add_argument("--assert", dest="assert_", action="store_true")
    p = sub.add_parser("oracle", help="print the quadrature targets")
    p.add_argument("config")
    p = sub.add_parser("tail-check", help="exact binomial tail against the Chernoff bound")
    p.add_argument("--p", type=float)
    p.add_argument("--r", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--sweep", action="store_true")
    p.add_argument("--assert", dest="assert_", action="store_true")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {
        "simulate-regression": lambda a: _simulate(a, "regression"),
        "simulate-classification": lambda a: _simulate(a, "classification"),
        "check-conditions": _check_conditions,
        "oracle": _oracle,
        "tail-check": _tail_check,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - the CLI boundary maps every failure to an exit code
        log.error("runtime failure: %s", exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
