"""Doppler decomposition into ego-speed and dynamic parts, and ego-velocity estimation.

Measurement model: ``d = v + h`` where ``v`` is the reflector's own radial
velocity (positive when moving away from the radar) and
``h = cx sin(theta) + cy cos(theta)`` is the ego velocity projected on the
line of sight. A static reflector therefore measures ``d == h``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InsufficientPoints, NoConsensus
from .geometry import Vec3, azimuth_of

log = logging.getLogger(__name__)

DOPPLER_MAX = 90.0
EGO_SPEED_MAX = 70.0


@dataclass(frozen=True)
class RadarPoint:
    position: Vec3
    doppler: float
    intensity: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "position", Vec3(*(float(c) for c in self.position)))
        if not all(np.isfinite(self.position)):
            raise ValueError("point position must be finite")
        if not abs(self.doppler) <= DOPPLER_MAX:
            raise ValueError(f"|doppler| exceeds {DOPPLER_MAX} m/s: {self.doppler}")
        if self.intensity < 0:
            raise ValueError("intensity must be non-negative")


@dataclass(frozen=True)
class EgoVelocity:
    cx: float = 0.0
    cy: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.cx) and np.isfinite(self.cy)):
            raise ValueError("ego velocity must be finite")
        if np.hypot(self.cx, self.cy) > EGO_SPEED_MAX:
            raise ValueError(f"ego speed exceeds {EGO_SPEED_MAX} m/s")

    def __mul__(self, a: float) -> "EgoVelocity":
        return EgoVelocity(self.cx * a, self.cy * a)

    __rmul__ = __mul__


@dataclass(frozen=True)
class EgoState:
    """Per-frame ego metadata: planar velocity (radar frame) and yaw rate."""

    velocity: EgoVelocity = EgoVelocity()
    yaw_rate: float = 0.0


@dataclass(frozen=True)
class DecomposedPoint:
    point: RadarPoint
    theta: float
    h: float
    v_dyn: float


def ego_speed_doppler(theta, ego: EgoVelocity):
    """Ego velocity projected on the line of sight at azimuth ``theta``."""
    return ego.cx * np.sin(theta) + ego.cy * np.cos(theta)


def decompose(point: RadarPoint, ego: EgoVelocity) -> DecomposedPoint:
    theta = azimuth_of(point.position)
    h = float(ego_speed_doppler(theta, ego))
    return DecomposedPoint(point, theta, h, point.doppler - h)


def decompose_arrays(positions: np.ndarray, doppler: np.ndarray, ego: EgoVelocity):
    """Vectorised :func:`decompose`; returns ``(theta, h, v_dyn)`` arrays."""
    theta = np.atleast_1d(azimuth_of(positions))
    h = ego_speed_doppler(theta, ego)
    return theta, h, np.asarray(doppler, dtype=float) - h


def doppler_from_range_rate(range_rate, theta, ego: EgoVelocity):
    """Convert a physical range rate into this package's Doppler convention.

    A radar observes ``range_rate = v - h``; adding ``2 h`` yields ``v + h``.
    """
    return np.asarray(range_rate, dtype=float) + 2.0 * ego_speed_doppler(theta, ego)


def _as_arrays(points, doppler):
    if doppler is None:
        pts = list(points)
        positions = np.array([p.position for p in pts], dtype=float).reshape(-1, 3)
        doppler = np.array([p.doppler for p in pts], dtype=float)
    else:
        positions = np.asarray(points, dtype=float)
        doppler = np.asarray(doppler, dtype=float)
    return positions, doppler


def estimate_ego_velocity(
    points,
    doppler: Sequence[float] | None = None,
    *,
    rng: np.random.Generator | int | None = None,
    prior: EgoVelocity | None = None,
    iterations: int = 100,
    inlier_threshold: float = 0.4,
    min_points: int = 8,
    min_inlier_ratio: float = 0.3,
) -> tuple[EgoVelocity, np.ndarray]:
    """Fit the ego velocity to the Doppler of static reflections.

    Static points satisfy ``d = cx sin(theta) + cy cos(theta)``, a model linear
    in ``(cx, cy)``. Moving reflectors are rejected by random-sample consensus
    over two-point minimal fits, after which the inliers are refit by least
    squares.

    Parameters
    ----------
    points : sequence of RadarPoint, or (N, 3) positions when ``doppler`` is given
    doppler : (N,) array, optional
    rng : numpy Generator or seed
        Drives the sampling; pass a seeded generator for reproducible fits.
    prior : EgoVelocity, optional
        Returned (with its own inlier mask) when no consensus is reached.

    Returns
    -------
    velocity : EgoVelocity
    inliers : (N,) bool array
    """
    positions, d = _as_arrays(points, doppler)
    n = d.size
    if n < min_points:
        raise InsufficientPoints(f"need at least {min_points} points, got {n}")
    theta = np.atleast_1d(azimuth_of(positions))
    A = np.column_stack((np.sin(theta), np.cos(theta)))
    rng = np.random.default_rng(rng)

    first = rng.integers(0, n, size=iterations)
    second = (first + rng.integers(1, n, size=iterations)) % n
    a11, a12 = A[first, 0], A[first, 1]
    a21, a22 = A[second, 0], A[second, 1]
    det = a11 * a22 - a12 * a21
    ok = np.abs(det) > 1e-9
    safe = np.where(ok, det, 1.0)
    cx = (d[first] * a22 - a12 * d[second]) / safe
    cy = (a11 * d[second] - d[first] * a21) / safe

    best_count, best_cost, best = -1, np.inf, None
    for i in np.flatnonzero(ok):
        resid = np.abs(d - A[:, 0] * cx[i] - A[:, 1] * cy[i])
        inl = resid < inlier_threshold
        count = int(inl.sum())
        cost = float(np.minimum(resid, inlier_threshold).sum())
        if count > best_count or (count == best_count and cost < best_cost):
            best_count, best_cost, best = count, cost, inl

    if best is None or best_count / n < min_inlier_ratio or best_count < 2:
        return _fallback(prior, A, d, inlier_threshold, best_count, n)

    sol, *_ = np.linalg.lstsq(A[best], d[best], rcond=None)
    mask = np.abs(d - A @ sol) < inlier_threshold
    if mask.sum() / n < min_inlier_ratio:
        return _fallback(prior, A, d, inlier_threshold, int(mask.sum()), n)
    return EgoVelocity(float(sol[0]), float(sol[1])), mask


def _fallback(prior, A, d, threshold, count, n):
    if prior is None:
        raise NoConsensus(f"only {max(count, 0)} of {n} points agree on an ego velocity")
    log.warning("ego-velocity fit found no consensus; falling back to prior %s", prior)
    mask = np.abs(d - A @ np.array([prior.cx, prior.cy])) < threshold
    return prior, mask
