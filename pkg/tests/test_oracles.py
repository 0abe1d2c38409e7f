import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nonstat.core import Box, Bump, DensityFamily, LabelField, uniform_density
from nonstat.oracles import (
    GridSpec,
    bayes_error,
    cesaro_density_gap,
    cesaro_label_gap,
    chernoff_tail_check,
    m_star_finite,
    margin_mass,
    truncated_variance_target,
)
from nonstat.scenarios import PRESETS, get_scenario

UNIT = Box((0.0,), (1.0,))
U = uniform_density(UNIT)
GRID = GridSpec(UNIT)


def const(c):
    return lambda x: np.full(len(x), float(c))


def ident(x):
    return np.asarray(x)[:, 0]


def cosine_q():
    from nonstat.core import Density
    return Density(lambda x: 1 - np.cos(2 * np.pi * x[:, 0]), UNIT, 2.0)


def test_grid_needs_two_points():
    with pytest.raises(ValueError):
        GridSpec(UNIT, 1)
    assert GridSpec(Box((0, 0), (1, 1))).points_per_axis == 128
    pts = GridSpec(UNIT, 4).points()
    assert np.allclose(pts[:, 0], [0.125, 0.375, 0.625, 0.875])


@pytest.mark.parametrize("h,expected", [(const(0.0), 0.0), (const(0.5), 0.5)])
def test_bayes_error_constants(h, expected):
    assert bayes_error(h, U, GRID).value == pytest.approx(expected, abs=1e-12)


def test_bayes_error_identity_field():
    coarse, fine = bayes_error(ident, U, GridSpec(UNIT, 512)), bayes_error(ident, U, GRID)
    assert coarse.value == pytest.approx(0.25, abs=1e-5)
    assert fine.value == pytest.approx(0.25, abs=1e-6)


def test_bayes_error_identity_with_half_distance():
    sc = get_scenario("iid_class")
    x = GRID.points()
    h = sc.labels(x)
    assert np.allclose(np.minimum(h, 1 - h), 0.5 - np.abs(h - 0.5), atol=1e-12)
    le = bayes_error(sc.labels, U, GRID).value
    assert le == pytest.approx(0.5 - np.sum(np.abs(h - 0.5)) * GRID.cell_volume, abs=1e-12)
    assert 0 <= le <= 0.5


def test_m_star_equals_bayes_when_members_agree():
    sc = get_scenario("iid_class")
    assert m_star_finite(sc.labels, 500, U, GRID).value == pytest.approx(bayes_error(sc.labels, U, GRID).value,
                                                                         abs=1e-12)


def test_m_star_two_member_average():
    # h_1 = 1/4 - 1/4 = 0 and h_2 = 1/4 + 1/4 = 1/2, using a flat perturbation as a test double
    labels = LabelField(const(0.25), bump=const(0.25), pattern="alternating")
    assert m_star_finite(labels, 2, U, GRID).value == pytest.approx(0.25, abs=1e-12)


def test_m_star_matches_monte_carlo():
    sc = get_scenario("decay_class")
    n = 400
    rng = np.random.default_rng(2024)
    m = 10**6
    i = rng.integers(1, n + 1, m)
    x = rng.uniform(0, 1, (m, 1))
    h = sc.labels.evaluate(i, x)
    vals = np.minimum(h, 1 - h)
    se = vals.std() / math.sqrt(m)
    est = m_star_finite(sc.labels, n, U, GRID)
    assert abs(est.value - vals.mean()) <= 4 * se + est.delta


@pytest.mark.parametrize("name", ["decay_class", "alternating_class", "violating_class", "iid_class"])
def test_m_star_within_absolute_gap_of_bayes(name):
    sc = get_scenario(name)
    le = bayes_error(sc.labels, U, GRID)
    for n in (10, 100, 1000):
        m = m_star_finite(sc.labels, n, U, GRID)
        gap = cesaro_label_gap(sc.labels, n, GRID, "absolute")
        assert abs(m.value - le.value) <= gap.value + m.delta + le.delta + 1e-12


@pytest.mark.parametrize("hval", [0.9, 0.5])
def test_margin_mass_empty_preimage(hval):
    assert margin_mass(const(hval), U, 0.1, GRID).value == 0.0


def test_margin_mass_identity_field():
    est = margin_mass(ident, U, 0.1, GRID)
    assert est.value == pytest.approx(0.2, abs=1e-3)
    assert margin_mass(ident, U, 0.1, GridSpec(UNIT, 1000)).value == pytest.approx(0.2, abs=2e-3)
    with pytest.raises(ValueError):
        margin_mass(ident, U, 0.25, GRID)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.001, 0.2499), st.floats(0.001, 0.2499))
def test_margin_mass_monotone(z1, z2):
    sc = get_scenario("iid_class")
    lo, hi = sorted((z1, z2))
    g = GridSpec(UNIT, 1024)
    assert margin_mass(sc.labels, U, lo, g).value <= margin_mass(sc.labels, U, hi, g).value


def test_density_gap_examples():
    assert cesaro_density_gap(DensityFamily(U), 100, GRID).value == 0.0
    fam = DensityFamily(U, "mixture_decay", cosine_q())
    one = cesaro_density_gap(fam, 1, GRID).value
    assert one == pytest.approx(1.0, abs=1e-6)
    g100, g10k = cesaro_density_gap(fam, 100, GRID).value, cesaro_density_gap(fam, 10**4, GRID).value
    assert g10k < g100
    assert g100 <= 1.0 * fam.mean_weight(100) + 1e-12
    const_fam = DensityFamily(U, "mixture_constant", cosine_q(), 0.3)
    for n in (100, 10**4):
        assert cesaro_density_gap(const_fam, n, GRID).value == pytest.approx(0.3, abs=1e-6)


def test_label_gap_examples():
    flat = LabelField(const(0.5))
    assert cesaro_label_gap(flat, 100, GRID, "absolute").value == 0.0
    assert cesaro_label_gap(flat, 100, GRID, "signed").value == 0.0
    bump = Bump((0.5,), (0.2,), 0.15)
    alt = LabelField(const(0.5), bump=bump, pattern="alternating")
    assert cesaro_label_gap(alt, 1000, GRID, "signed").value == 0.0
    assert cesaro_label_gap(alt, 1000, GRID, "absolute").value == pytest.approx(0.15, abs=1e-4)
    dec = LabelField(const(0.5), bump=Bump((0.5,), (0.2,), 0.2), pattern="decaying")
    assert cesaro_label_gap(dec, 10**4, GRID).value < cesaro_label_gap(dec, 100, GRID).value
    with pytest.raises(ValueError):
        cesaro_label_gap(dec, 10, GRID, "both")


def test_label_gap_matches_brute_force():
    sc = get_scenario("decay_class")
    x = GRID.points()
    n = 50
    h = sc.labels(x)
    members = np.stack([sc.labels.evaluate(np.full(len(x), i), x) for i in range(1, n + 1)])
    brute_abs = np.max(np.mean(np.abs(members - h), axis=0))
    brute_signed = np.max(np.abs(np.mean(members, axis=0) - h))
    assert cesaro_label_gap(sc.labels, n, GRID, "absolute").value == pytest.approx(brute_abs, rel=1e-9)
    assert cesaro_label_gap(sc.labels, n, GRID, "signed").value == pytest.approx(brute_signed, rel=1e-9)


def exact_tail(p, r, gamma):
    """Exact rational binomial tail; slow but independent of the log-space implementation."""
    pf, g = Fraction(p), Fraction(gamma)
    theta = pf * r
    total = Fraction(0)
    for j in range(r + 1):
        if abs(j - theta) >= theta * g:
            total += math.comb(r, j) * pf**j * (1 - pf) ** (r - j)
    return float(total)


def test_tail_bound_exceeds_one():
    res = chernoff_tail_check(0.5, 10, 0.5)
    assert res.bound == pytest.approx(2 * math.exp(-5 / 16), rel=1e-12)
    assert res.bound == pytest.approx(1.4632, abs=1e-4)
    assert res.holds
    assert res.exact_tail == pytest.approx(exact_tail(0.5, 10, 0.5), rel=1e-12)


@pytest.mark.parametrize("p,r,gamma", [(0.5, 1000, 0.2), (0.3, 200, 0.1), (0.9, 50, 0.05), (0.1, 10, 0.5)])
def test_tail_matches_rational_oracle(p, r, gamma):
    res = chernoff_tail_check(p, r, gamma)
    assert res.exact_tail == pytest.approx(exact_tail(p, r, gamma), rel=1e-9, abs=1e-300)
    assert 0 <= res.exact_tail <= 1
    assert res.holds


@pytest.mark.parametrize("args", [(0.0, 10, 0.1), (1.0, 10, 0.1), (0.5, 0, 0.1), (0.5, 10, 0.0), (0.5, 10, 0.6)])
def test_tail_check_rejects(args):
    with pytest.raises(ValueError):
        chernoff_tail_check(*args)


def test_truncated_target_examples():
    fam = DensityFamily(U)
    assert truncated_variance_target(const(1.0), fam, 0.1, GRID, 0.03).value == pytest.approx(0.03)
    assert truncated_variance_target(const(0.05), fam, 0.1, GRID, 0.03).value == pytest.approx(1.03)


def test_truncated_target_non_increasing_on_smooth_scenario():
    sc = get_scenario("smooth_iid_reg")
    vals = [truncated_variance_target(sc.labels, sc.density, z, GRID, sc.noise.variance).value
            for z in (0.1, 0.01, 0.001)]
    assert all(b <= a for a, b in zip(vals, vals[1:]))
    assert vals[-1] == pytest.approx(sc.noise.variance, abs=1e-12)


def test_truncated_target_decreasing_when_density_vanishes():
    sc = get_scenario("drift_reg")
    fam = DensityFamily(cosine_q())
    vals = [truncated_variance_target(sc.labels, fam, z, GRID, 0.03).value for z in (0.1, 0.01, 0.001)]
    assert vals[0] > vals[1] > vals[2] > 0.03


@pytest.mark.parametrize("name", sorted(n for n in PRESETS if get_scenario(n).kind == "classification"))
def test_refinement_within_reported_delta(name):
    sc = get_scenario(name)
    g = GridSpec(sc.support, 512 if sc.dim == 1 else 64)
    base = sc.density.base
    for fn in (lambda gr: bayes_error(sc.labels, base, gr),
               lambda gr: m_star_finite(sc.labels, 100, base, gr),
               lambda gr: margin_mass(sc.labels, base, 0.1, gr),
               lambda gr: cesaro_label_gap(sc.labels, 100, gr)):
        coarse, fine = fn(g), fn(g.refined())
        assert abs(fine.value - coarse.value) <= coarse.delta + 1e-15
