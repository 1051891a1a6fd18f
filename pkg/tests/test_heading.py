import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from doppdrive.errors import EmptyHistogram, InvalidResolution
from doppdrive.heading import (
    B_MIN,
    G_FLOOR,
    TAN_CLAMP,
    GThetaTable,
    HeadingDistribution,
    build_table,
    dumps_table,
    fit_empirical,
    g_theta,
    g_values,
    loads_table,
)

LAPLACE = HeadingDistribution.laplace(0.0, 3.1)


@pytest.fixture(scope="module")
def table():
    return build_table(LAPLACE)


def mc_g(theta, b_rad, n, seed, mu=0.0):
    """Monte-Carlo oracle: mean clamped |tan(theta + alpha)| over truncated Laplace draws."""
    r = np.random.default_rng(seed)
    a = r.laplace(mu, b_rad, size=int(n * 1.01) + 100)
    a = a[np.abs(a) <= math.pi / 2][:n]
    vals = np.minimum(np.abs(np.tan(theta + a)), TAN_CLAMP)
    return max(vals.mean(), G_FLOOR), vals.std(ddof=1) / math.sqrt(a.size)


def test_delta_distribution_examples():
    delta = HeadingDistribution.delta(0.0)
    assert g_theta(0.0, delta) == G_FLOOR
    assert g_theta(math.pi / 4, delta) == pytest.approx(1.0, abs=1e-12)
    assert g_theta(math.radians(89.5), delta) == pytest.approx(TAN_CLAMP)


@pytest.mark.parametrize("theta_deg, b_deg", [(0.0, 3.1), (30.0, 3.1), (-60.0, 10.0), (85.0, 3.1), (150.0, 20.0)])
def test_quadrature_matches_monte_carlo(theta_deg, b_deg):
    th, b = math.radians(theta_deg), math.radians(b_deg)
    mean, se = mc_g(th, b, 1_000_000, seed=int(theta_deg * 10 + b_deg * 100) % 2**31)
    q = g_theta(th, HeadingDistribution("laplace", 0.0, b))
    assert abs(q - mean) <= 3 * se + 1e-12


def test_pdf_normalised():
    a = np.linspace(-math.pi / 2, math.pi / 2, 200_001)
    for d in (LAPLACE, HeadingDistribution.laplace(5.0, 40.0)):
        assert np.trapezoid(d.pdf(a), a) == pytest.approx(1.0, abs=1e-6)


def test_values_floor_and_finite(table):
    assert np.all(np.isfinite(table.values))
    assert table.values.min() >= G_FLOOR
    assert table.values.max() <= TAN_CLAMP


def test_table_default_shape_and_symmetry(table):
    assert table.values.size == 3601
    assert table.theta_grid[0] == -math.pi and table.theta_grid[-1] == math.pi
    assert math.degrees(table.resolution) == pytest.approx(0.1)
    assert np.max(np.abs(table.values - table.values[::-1])) <= 1e-6


def test_table_grid_points_equal_direct(table):
    idx = [0, 7, 900, 1800, 2345, 3600]
    direct = g_values(table.theta_grid[idx], LAPLACE)
    assert np.array_equal(table.lookup(table.theta_grid[idx]), direct)


def test_table_mid_grid_interpolation(table):
    mids = 0.5 * (table.theta_grid[:-1] + table.theta_grid[1:])
    direct = g_values(mids, LAPLACE)
    err = np.abs(table.lookup(mids) - direct)
    # linear interpolation error ~ |second difference| / 8; take the larger neighbour for slack
    d2 = np.abs(np.diff(table.values, 2))
    d2 = np.concatenate(([d2[0]], d2, [d2[-1]]))
    bound = np.maximum(1e-3, 0.25 * np.maximum(d2[:-1], d2[1:]))
    assert np.all(err <= bound)


def test_monotone_in_abs_theta_for_laplace():
    for b_deg in (3.1, 8.0):
        b = math.radians(b_deg)
        th = np.linspace(0, math.pi / 2 - 3 * b, 400)
        g = g_values(th, HeadingDistribution("laplace", 0.0, b))
        assert np.all(np.diff(g) >= -1e-12)


@given(st.floats(-math.pi, math.pi), st.floats(0.5, 30.0))
def test_symmetry_property(theta, b_deg):
    d = HeadingDistribution.laplace(0.0, b_deg)
    assert g_theta(theta, d) == pytest.approx(g_theta(-theta, d), abs=1e-6)


def test_lookup_wraps_angles(table):
    assert table(3 * math.pi / 4 + 2 * math.pi) == pytest.approx(table(3 * math.pi / 4), abs=1e-9)


@pytest.mark.parametrize("res", [0.0, 1e-5, 0.06, -0.01])
def test_invalid_resolution(res):
    with pytest.raises(InvalidResolution):
        build_table(LAPLACE, res)


def test_coarse_table_covers_range():
    t = build_table(LAPLACE, 0.05)
    assert t.resolution <= 0.05
    assert t.theta_grid[-1] == math.pi


def test_export_round_trip_bit_identical(table, tmp_path):
    text = dumps_table(table)
    back = loads_table(text)
    assert np.array_equal(back.values, table.values)
    assert np.array_equal(back.theta_grid, table.theta_grid)
    assert back.metadata == table.metadata
    assert dumps_table(back) == text
    path = tmp_path / "g.txt"
    table.save(path)
    assert path.read_text() == text
    assert np.array_equal(GThetaTable.load(path).values, table.values)


def test_export_header(table):
    first, second = dumps_table(table).splitlines()[:2]
    assert first.startswith("# g_theta kind=laplace mu_deg=0 b_deg=3.1")
    assert "tan_clamp_deg=88" in first and "resolution_deg=" in first
    assert second == "theta_deg,value"


def test_import_rejects_garbage():
    with pytest.raises(ValueError):
        loads_table("theta_deg,value\n0,1\n")


def test_empirical_distribution_g():
    d = HeadingDistribution("empirical", angles=np.array([-0.1, 0.2]), probs=np.array([0.25, 0.75]))
    th = 0.3
    expect = 0.25 * abs(math.tan(th - 0.1)) + 0.75 * abs(math.tan(th + 0.2))
    assert g_theta(th, d) == pytest.approx(expect, rel=1e-12)


def test_distribution_invariants():
    with pytest.raises(ValueError):
        HeadingDistribution("laplace", 0.0, 0.0)
    with pytest.raises(ValueError):
        HeadingDistribution("empirical", angles=np.array([0.0, 0.1]), probs=np.array([0.5, 0.6]))
    with pytest.raises(EmptyHistogram):
        HeadingDistribution("empirical", angles=np.array([]), probs=np.array([]))


def test_fit_single_bin():
    d = fit_empirical([0.0], [10])
    assert d.mu == 0.0 and d.b == B_MIN
    assert d.kind == "empirical" and list(d.probs) == [1.0]


def test_fit_laplace_samples(rng):
    a = rng.laplace(0.0, math.radians(3.1), 100_000)
    d = fit_empirical(a)
    assert abs(d.b - math.radians(3.1)) <= 0.05 * math.radians(3.1)
    assert abs(d.mu) < math.radians(0.1)
    assert d.probs.sum() == pytest.approx(1.0)


def test_fit_bimodal_keeps_side_modes(rng):
    core = rng.laplace(0.0, math.radians(3.1), 20_000)
    side = np.concatenate((np.full(1500, math.pi / 2), np.full(1500, -math.pi / 2)))
    d = fit_empirical(np.concatenate((core, side)))
    assert d.probs[0] > 0.05 and d.probs[-1] > 0.05  # both +-90 degree modes survive
    assert abs(d.b - math.radians(3.1)) <= 0.1 * math.radians(3.1)  # ...but do not widen the fit


def test_fit_folds_reversed_headings():
    d = fit_empirical([math.pi - 0.01, 0.01], [1, 1])
    assert np.all(np.abs(d.angles) <= math.pi / 2)


def test_fit_empty():
    with pytest.raises(EmptyHistogram):
        fit_empirical([], [])
    with pytest.raises(EmptyHistogram):
        fit_empirical([0.1], [0])
