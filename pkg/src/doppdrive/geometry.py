"""Planar radar geometry: azimuths, radial/tangential frames and SE(2) poses.

Axis convention used throughout the package: +x lateral right, +y forward,
+z up. Azimuth is measured from +y and is positive toward +x, so a target
dead ahead has azimuth 0 and a target directly to the right has +pi/2.
Poses rotate counter-clockwise for positive yaw (a left turn).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DegeneratePoint, NonMonotonicTimestamps


class Vec3(NamedTuple):
    x: float
    y: float
    z: float = 0.0


def wrap_angle(angle):
    """Wrap angles to (-pi, pi]."""
    wrapped = np.pi - np.mod(np.pi - np.asarray(angle, dtype=float), 2.0 * np.pi)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


def azimuth_of(p) -> float | np.ndarray:
    """Azimuth of a point (or an ``(N, 3)``/``(N, 2)`` array of points).

    Raises
    ------
    DegeneratePoint
        If any point has ``x == y == 0``.
    """
    arr = np.asarray(p, dtype=float)
    x = arr[..., 0]
    y = arr[..., 1]
    if np.any((x == 0.0) & (y == 0.0)):
        raise DegeneratePoint("azimuth undefined for a point on the radar axis")
    theta = np.arctan2(x, y)
    # arctan2 returns -pi for (x=-0.0, y<0); fold onto +pi
    theta = np.where(theta == -np.pi, np.pi, theta)
    if theta.ndim == 0:
        return float(theta)
    return theta


@dataclass(frozen=True)
class RadialFrame:
    r_hat: Vec3
    t_hat: Vec3
    theta: float


def radial_frame_at(p) -> RadialFrame:
    """Radial and tangential unit vectors (in the xy-plane) at point ``p``.

    The tangential vector is the radial one rotated by +90 degrees.
    """
    x, y = float(p[0]), float(p[1])
    theta = azimuth_of((x, y))
    norm = math.hypot(x, y)
    rx, ry = x / norm, y / norm
    return RadialFrame(Vec3(rx, ry, 0.0), Vec3(-ry, rx, 0.0), theta)


def radial_unit_vectors(xy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised ``radial_frame_at``: returns ``(r_hat, t_hat)`` as ``(N, 2)`` arrays."""
    xy = np.asarray(xy, dtype=float)[:, :2]
    norm = np.hypot(xy[:, 0], xy[:, 1])
    if np.any(norm == 0.0):
        raise DegeneratePoint("radial direction undefined for a point on the radar axis")
    r_hat = xy / norm[:, None]
    t_hat = np.column_stack((-r_hat[:, 1], r_hat[:, 0]))
    return r_hat, t_hat


@dataclass(frozen=True)
class Pose2:
    """Planar rigid transform ``p -> R(yaw) p + t``; z passes through."""

    tx: float = 0.0
    ty: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))

    @classmethod
    def identity(cls) -> "Pose2":
        return cls()

    def rotation(self) -> np.ndarray:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return np.array([[c, -s], [s, c]])

    def apply(self, points) -> np.ndarray:
        pts = np.array(points, dtype=float)
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        x = pts[..., 0].copy()
        y = pts[..., 1].copy()
        pts[..., 0] = c * x - s * y + self.tx
        pts[..., 1] = s * x + c * y + self.ty
        return pts

    def compose(self, other: "Pose2") -> "Pose2":
        """``self ∘ other``: apply ``other`` first, then ``self``."""
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return Pose2(
            c * other.tx - s * other.ty + self.tx,
            s * other.tx + c * other.ty + self.ty,
            self.yaw + other.yaw,
        )

    def inverse(self) -> "Pose2":
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return Pose2(-(c * self.tx + s * self.ty), s * self.tx - c * self.ty, -self.yaw)

    def __matmul__(self, other: "Pose2") -> "Pose2":
        return self.compose(other)


def transform_to_current(p, pose_k_to_0: Pose2) -> np.ndarray:
    """Map point(s) from frame-k radar coordinates into current-frame coordinates."""
    return pose_k_to_0.apply(p)


def _interval_motion(dt, v0, v1, w0, w1) -> Pose2:
    # midpoint rule: mean body velocity, rotated by half the heading change
    cx = 0.5 * (v0[0] + v1[0])
    cy = 0.5 * (v0[1] + v1[1])
    dyaw = 0.5 * (w0 + w1) * dt
    half = Pose2(0.0, 0.0, 0.5 * dyaw)
    step = half.apply((cx * dt, cy * dt))
    return Pose2(float(step[0]), float(step[1]), dyaw)


def _check_monotonic(timestamps: Sequence[float]) -> None:
    ts = np.asarray(timestamps, dtype=float)
    if ts.size > 1 and np.any(np.diff(ts) <= 0.0):
        raise NonMonotonicTimestamps("frame timestamps must be strictly increasing")


def accumulate_pose(timestamps: Sequence[float], ego_states: Sequence, from_k: int, to_0: int = -1) -> Pose2:
    """Ego motion between two frames, integrated from per-frame velocity and yaw rate.

    The result is the pose of the radar at frame ``to_0`` expressed in the
    radar coordinates of frame ``from_k`` (e.g. ``ty = 1`` after driving 1 m
    forward). Points move the opposite way: use ``.inverse()`` to map
    frame-``from_k`` points into frame-``to_0`` coordinates.

    ``ego_states`` items need ``velocity`` (with ``cx``/``cy``) and ``yaw_rate``.
    """
    _check_monotonic(timestamps)
    n = len(timestamps)
    from_k %= n
    to_0 %= n
    if from_k > to_0:
        return accumulate_pose(timestamps, ego_states, to_0, from_k).inverse()
    motion = Pose2.identity()
    for j in range(from_k, to_0):
        a, b = ego_states[j], ego_states[j + 1]
        step = _interval_motion(
            timestamps[j + 1] - timestamps[j],
            (a.velocity.cx, a.velocity.cy),
            (b.velocity.cx, b.velocity.cy),
            a.yaw_rate,
            b.yaw_rate,
        )
        motion = motion @ step
    return motion


def poses_to_current(timestamps: Sequence[float], ego_states: Sequence) -> list[Pose2]:
    """Frame-k -> last-frame point transforms for every frame of a window."""
    _check_monotonic(timestamps)
    n = len(timestamps)
    out = [Pose2.identity()] * n
    motion = Pose2.identity()
    for j in range(n - 2, -1, -1):
        a, b = ego_states[j], ego_states[j + 1]
        step = _interval_motion(
            timestamps[j + 1] - timestamps[j],
            (a.velocity.cx, a.velocity.cy),
            (b.velocity.cx, b.velocity.cy),
            a.yaw_rate,
            b.yaw_rate,
        )
        motion = step @ motion
        out[j] = motion.inverse()
    return out
