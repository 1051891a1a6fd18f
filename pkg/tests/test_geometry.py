import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from doppdrive.doppler import EgoState, EgoVelocity
from doppdrive.errors import DegeneratePoint, NonMonotonicTimestamps
from doppdrive.geometry import (
    Pose2,
    accumulate_pose,
    azimuth_of,
    poses_to_current,
    radial_frame_at,
    radial_unit_vectors,
    transform_to_current,
    wrap_angle,
)

coord = st.floats(-500, 500, allow_nan=False)
angle = st.floats(-math.pi, math.pi, allow_nan=False)


@pytest.mark.parametrize(
    "p, expected",
    [((0, 10, 0), 0.0), ((10, 0, 0), math.pi / 2), ((5, 5, 1), math.pi / 4), ((-10, 0, 0), -math.pi / 2)],
)
def test_azimuth_examples(p, expected):
    assert azimuth_of(p) == pytest.approx(expected, abs=1e-15)


def test_azimuth_behind_is_plus_pi():
    assert azimuth_of((0.0, -3.0, 0.0)) == math.pi
    assert azimuth_of((-0.0, -3.0, 0.0)) == math.pi


def test_azimuth_degenerate():
    with pytest.raises(DegeneratePoint):
        azimuth_of((0.0, 0.0, 4.0))
    with pytest.raises(DegeneratePoint):
        azimuth_of(np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 0.0]]))


def test_azimuth_vectorised_matches_scalar(rng):
    pts = rng.normal(size=(200, 3)) * 30
    vec = azimuth_of(pts)
    assert np.array_equal(vec, [azimuth_of(p) for p in pts])


@given(coord, coord, st.floats(-1.0, 1.0))
def test_ccw_rotation_decreases_azimuth(x, y, phi):
    # azimuth grows clockwise (toward +x), so a counter-clockwise rotation by phi lowers it by phi
    if math.hypot(x, y) < 1e-3:
        return
    rotated = Pose2(0, 0, phi).apply((x, y, 0.0))
    diff = wrap_angle(azimuth_of(rotated) - azimuth_of((x, y)))
    assert diff == pytest.approx(-phi, abs=1e-9)


@pytest.mark.parametrize(
    "p, r_hat, t_hat",
    [((0, 10, 0), (0, 1, 0), (-1, 0, 0)), ((3, 4, 2), (0.6, 0.8, 0), (-0.8, 0.6, 0)), ((-5, 0, 0), (-1, 0, 0), (0, -1, 0))],
)
def test_radial_frame_examples(p, r_hat, t_hat):
    f = radial_frame_at(p)
    assert np.allclose(f.r_hat, r_hat, atol=1e-15)
    assert np.allclose(f.t_hat, t_hat, atol=1e-15)
    assert f.theta == azimuth_of(p)


def test_radial_frame_invariants_many_points(rng):
    pts = rng.uniform(-200, 200, size=(100_000, 3))
    r, t = radial_unit_vectors(pts)
    assert np.all(np.abs(np.hypot(r[:, 0], r[:, 1]) - 1) <= 1e-9)
    assert np.all(np.abs(np.hypot(t[:, 0], t[:, 1]) - 1) <= 1e-9)
    assert np.all(np.abs(np.einsum("ij,ij->i", r, t)) <= 1e-9)
    # spot-check the vectorised form against the scalar one
    for p in pts[:50]:
        f = radial_frame_at(p)
        assert f.r_hat.z == f.t_hat.z == 0.0
    j = 17
    assert np.allclose(r[j], radial_frame_at(pts[j]).r_hat[:2])


def test_radial_frame_degenerate():
    with pytest.raises(DegeneratePoint):
        radial_frame_at((0, 0, 1))


@pytest.mark.parametrize(
    "p, pose, expected",
    [
        ((1, 0, 0), Pose2(), (1, 0, 0)),
        ((1, 0, 5), Pose2(0, 0, math.pi / 2), (0, 1, 5)),
        ((2, 3, 0), Pose2(1, -1, 0), (3, 2, 0)),
    ],
)
def test_transform_examples(p, pose, expected):
    assert np.allclose(transform_to_current(p, pose), expected, atol=1e-9)


@given(coord, coord, coord, coord, coord, angle)
def test_transform_inverse_round_trip(x, y, z, tx, ty, yaw):
    g = Pose2(tx, ty, yaw)
    back = transform_to_current(transform_to_current((x, y, z), g), g.inverse())
    assert np.allclose(back, (x, y, z), atol=1e-9)


@given(coord, coord, angle)
def test_pose_compose_inverse_identity(tx, ty, yaw):
    g = Pose2(tx, ty, yaw)
    for e in (g @ g.inverse(), g.inverse() @ g):
        assert abs(e.tx) < 1e-9 and abs(e.ty) < 1e-9 and abs(e.yaw) < 1e-12


def test_pose_yaw_wrapped():
    assert Pose2(0, 0, 3 * math.pi).yaw == pytest.approx(math.pi)
    assert Pose2(0, 0, -math.pi).yaw == math.pi


def _states(vels, rates):
    return [EgoState(EgoVelocity(*v), w) for v, w in zip(vels, rates)]


def test_accumulate_zero_velocity_is_identity():
    ts = [0.0, 0.1, 0.2, 0.3]
    assert accumulate_pose(ts, _states([(0, 0)] * 4, [0] * 4), 0) == Pose2()


def test_accumulate_one_step_forward():
    g = accumulate_pose([0.0, 0.1], _states([(0, 10)] * 2, [0, 0]), 0)
    assert (g.tx, g.ty, g.yaw) == pytest.approx((0.0, 1.0, 0.0), abs=1e-12)


def test_accumulate_yaw_rate():
    ts = np.arange(6) * 0.1
    g = accumulate_pose(ts, _states([(0, 0)] * 6, [0.2] * 6), 0)
    assert g.yaw == pytest.approx(0.1, abs=1e-12)


def test_accumulate_constant_turn_close_to_arc():
    # midpoint rule is exact in heading and second-order accurate in position
    v, w, n, dt = 15.0, 0.3, 20, 0.05
    ts = np.arange(n + 1) * dt
    g = accumulate_pose(ts, _states([(0, v)] * (n + 1), [w] * (n + 1)), 0)
    T = n * dt
    arc = (-(v / w) * (1 - math.cos(w * T)), (v / w) * math.sin(w * T))
    assert g.yaw == pytest.approx(w * T)
    # each step travels the chord 2R sin(w dt / 2) instead of the arc v dt
    chord_gap = v * T * (w * dt) ** 2 / 24
    assert math.hypot(g.tx - arc[0], g.ty - arc[1]) <= 1.01 * chord_gap


def test_accumulate_rejects_non_monotonic():
    with pytest.raises(NonMonotonicTimestamps):
        accumulate_pose([0.0, 0.2, 0.1], _states([(0, 1)] * 3, [0] * 3), 0)


@st.composite
def ego_sequences(draw):
    n = draw(st.integers(3, 12))
    dts = draw(st.lists(st.floats(0.01, 0.2), min_size=n - 1, max_size=n - 1))
    ts = np.concatenate(([0.0], np.cumsum(dts)))
    vels = draw(st.lists(st.tuples(st.floats(-5, 5), st.floats(-30, 30)), min_size=n, max_size=n))
    rates = draw(st.lists(st.floats(-0.5, 0.5), min_size=n, max_size=n))
    m = draw(st.integers(0, n - 1))
    return ts, _states(vels, rates), m


@given(ego_sequences())
def test_accumulate_composes_over_subsequences(seq):
    ts, states, m = seq
    whole = accumulate_pose(ts, states, 0, -1)
    split = accumulate_pose(ts, states, 0, m) @ accumulate_pose(ts, states, m, -1)
    assert (whole.tx, whole.ty) == pytest.approx((split.tx, split.ty), abs=1e-9)
    assert wrap_angle(whole.yaw - split.yaw) == pytest.approx(0.0, abs=1e-9)


@given(ego_sequences())
def test_poses_to_current_match_accumulate(seq):
    ts, states, _ = seq
    poses = poses_to_current(ts, states)
    for k, p in enumerate(poses):
        ref = accumulate_pose(ts, states, k, -1).inverse()
        assert (p.tx, p.ty) == pytest.approx((ref.tx, ref.ty), abs=1e-9)
        assert wrap_angle(p.yaw - ref.yaw) == pytest.approx(0.0, abs=1e-9)
