"""Doppler-driven temporal aggregation and fixed-window baselines.

Every output point carries six features ``(x, y, z, v_dyn, intensity, k)``:
position in the current radar frame, the ego-compensated Doppler, the
reflection intensity, and the (non-positive) index of the frame the point
was measured in.

Past points are moved along their line of sight by ``v_dyn * dt``, which
removes radial scatter exactly. Their unknown tangential motion is bounded by
keeping a point only while ``dt <= D / (|v_dyn| g(theta))``.

Only planar motion is modelled. Objects with vertical velocity would need a
``g`` that also depends on elevation; that extension is not implemented.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .doppler import EgoState, RadarPoint, estimate_ego_velocity
from .errors import DegeneratePoint, NonMonotonicTimestamps
from .geometry import Vec3, azimuth_of, poses_to_current
from .heading import GThetaTable, HeadingDistribution, build_table

MODES = ("none", "standard", "doppdrive")
FEATURES = ("x", "y", "z", "v_dyn", "intensity", "frame_index")
_TIME_EPS = 1e-9


@dataclass
class FrameRecord:
    """One radar frame: timestamp, ego metadata and a point set as parallel arrays."""

    timestamp: float
    ego: EgoState
    positions: np.ndarray
    doppler: np.ndarray
    intensity: np.ndarray | None = None
    ids: np.ndarray | None = None

    def __post_init__(self):
        self.timestamp = float(self.timestamp)
        if not math.isfinite(self.timestamp):
            raise ValueError("frame timestamp must be finite")
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        n = self.positions.shape[0]
        self.doppler = np.asarray(self.doppler, dtype=float).reshape(n)
        self.intensity = (
            np.ones(n) if self.intensity is None else np.asarray(self.intensity, dtype=float).reshape(n)
        )
        self.ids = (
            np.full(n, -1, dtype=np.int64) if self.ids is None else np.asarray(self.ids, dtype=np.int64).reshape(n)
        )

    @classmethod
    def from_points(cls, timestamp: float, ego: EgoState, points: Iterable[RadarPoint]) -> "FrameRecord":
        pts = list(points)
        return cls(
            timestamp,
            ego,
            np.array([p.position for p in pts], dtype=float).reshape(-1, 3),
            np.array([p.doppler for p in pts], dtype=float),
            np.array([p.intensity for p in pts], dtype=float),
        )

    def __len__(self) -> int:
        return self.positions.shape[0]

    @property
    def points(self) -> list[RadarPoint]:
        return [
            RadarPoint(Vec3(*p), float(d), float(i))
            for p, d, i in zip(self.positions, self.doppler, self.intensity)
        ]

    def subset(self, mask) -> "FrameRecord":
        return FrameRecord(
            self.timestamp, self.ego, self.positions[mask], self.doppler[mask], self.intensity[mask], self.ids[mask]
        )


@lru_cache(maxsize=4)
def default_g_table() -> GThetaTable:
    return build_table(HeadingDistribution.laplace(0.0, 3.1))


@dataclass
class AggregationConfig:
    tolerance_d: float = 2.0
    window_seconds: float = 2.0
    baseline_window_seconds: float = 0.7
    g_table: GThetaTable = field(default_factory=default_g_table, repr=False)
    remove_ego_doppler: bool = True
    static_speed_epsilon: float = 0.1

    def __post_init__(self):
        if not self.tolerance_d > 0:
            raise ValueError("tolerance_d must be positive")
        if not self.baseline_window_seconds > 0:
            raise ValueError("baseline_window_seconds must be positive")
        if not self.window_seconds >= self.baseline_window_seconds:
            raise ValueError("window_seconds must be >= baseline_window_seconds")
        if self.static_speed_epsilon < 0:
            raise ValueError("static_speed_epsilon must be non-negative")


class AggregatedPoint(NamedTuple):
    x: float
    y: float
    z: float
    v_dyn: float
    intensity: float
    frame_index: int


@dataclass
class AggregatedCloud:
    """Aggregated points for one current frame.

    ``features`` is ``(N, 6)`` in :data:`FEATURES` order. ``ids`` carries the
    source point ids (``-1`` when unknown) and ``dt`` the age of each point.
    """

    timestamp: float
    features: np.ndarray
    ids: np.ndarray
    dt: np.ndarray

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def xyz(self) -> np.ndarray:
        return self.features[:, :3]

    @property
    def v_dyn(self) -> np.ndarray:
        return self.features[:, 3]

    @property
    def frame_index(self) -> np.ndarray:
        return self.features[:, 5].astype(np.int64)

    def points(self) -> list[AggregatedPoint]:
        return [AggregatedPoint(*row[:5], int(row[5])) for row in self.features.tolist()]

    def select(self, mask) -> "AggregatedCloud":
        return AggregatedCloud(self.timestamp, self.features[mask], self.ids[mask], self.dt[mask])


def radial_shift(position, v_dyn: float, dt: float, origin=(0.0, 0.0)) -> Vec3:
    """Move ``position`` by ``v_dyn * dt`` along the line of sight from ``origin``.

    ``origin`` is the radar position at measurement time, expressed in the same
    (current-frame) coordinates as ``position``. z is unchanged.
    """
    if dt < 0:
        raise ValueError("dt must be non-negative")
    dx = position[0] - origin[0]
    dy = position[1] - origin[1]
    rng = math.hypot(dx, dy)
    if rng == 0.0:
        raise DegeneratePoint("radial direction undefined at the radar origin")
    step = v_dyn * dt
    return Vec3(position[0] + step * dx / rng, position[1] + step * dy / rng, position[2])


def duration_limit(v_dyn, theta, cfg: AggregationConfig, g=None):
    """Longest aggregation duration for which the expected offset stays within ``tolerance_d``.

    Points slower than ``static_speed_epsilon`` get the full window.
    """
    v = np.abs(np.asarray(v_dyn, dtype=float))
    g = cfg.g_table.lookup(theta) if g is None else np.asarray(g, dtype=float)
    static = v < cfg.static_speed_epsilon
    with np.errstate(divide="ignore"):
        lim = cfg.tolerance_d / (np.where(static, 1.0, v) * g)
    out = np.where(static, cfg.window_seconds, np.minimum(cfg.window_seconds, lim))
    return float(out) if out.ndim == 0 else out


@dataclass
class _Prepared:
    p0: np.ndarray  # (N, 3) current-frame positions
    r_hat: np.ndarray  # (N, 2) line of sight at measurement, current-frame axes
    theta: np.ndarray  # azimuth in the measuring frame
    v_dyn: np.ndarray
    doppler: np.ndarray
    intensity: np.ndarray
    ids: np.ndarray
    k: np.ndarray
    dt: np.ndarray
    t0: float


def _check_window(window: Sequence[FrameRecord]) -> None:
    if not window:
        raise ValueError("aggregation window is empty")
    ts = np.array([f.timestamp for f in window])
    if np.any(np.diff(ts) <= 0):
        raise NonMonotonicTimestamps("frame timestamps must be strictly increasing")


def _prepare(window: Sequence[FrameRecord], horizon: float) -> _Prepared:
    _check_window(window)
    t0 = window[-1].timestamp
    first = 0
    while t0 - window[first].timestamp > horizon + _TIME_EPS:
        first += 1
    window = list(window[first:])
    if any(f.ego.velocity is None for f in window):
        raise ValueError("a frame has no ego velocity; estimate it before aggregating")
    poses = poses_to_current([f.timestamp for f in window], [f.ego for f in window])
    counts = np.array([len(f) for f in window])
    n = int(counts.sum())
    pos = np.concatenate([f.positions for f in window]) if n else np.zeros((0, 3))
    dop = np.concatenate([f.doppler for f in window]) if n else np.zeros(0)

    per = lambda vals: np.repeat(np.asarray(vals, dtype=float), counts)  # noqa: E731
    yaw = per([p.yaw for p in poses])
    c, s = np.cos(yaw), np.sin(yaw)
    x, y = pos[:, 0], pos[:, 1]
    rng = np.hypot(x, y)
    if np.any(rng == 0.0):
        raise DegeneratePoint("a point lies on the radar axis")
    sin_t, cos_t = x / rng, y / rng
    theta = np.atleast_1d(azimuth_of(pos)) if n else np.zeros(0)
    cx = per([f.ego.velocity.cx for f in window])
    cy = per([f.ego.velocity.cy for f in window])
    v_dyn = dop - (cx * np.sin(theta) + cy * np.cos(theta))

    p0 = np.empty_like(pos)
    p0[:, 0] = c * x - s * y + per([p.tx for p in poses])
    p0[:, 1] = s * x + c * y + per([p.ty for p in poses])
    p0[:, 2] = pos[:, 2]
    r_hat = np.column_stack((c * sin_t - s * cos_t, s * sin_t + c * cos_t))

    k = np.repeat(np.arange(-(len(window) - 1), 1), counts)
    dt = t0 - per([f.timestamp for f in window])
    return _Prepared(
        p0,
        r_hat,
        theta,
        v_dyn,
        dop,
        np.concatenate([f.intensity for f in window]) if n else np.zeros(0),
        np.concatenate([f.ids for f in window]) if n else np.zeros(0, dtype=np.int64),
        k,
        dt,
        t0,
    )


def _cloud(prep: _Prepared, xyz: np.ndarray, keep, cfg: AggregationConfig) -> AggregatedCloud:
    dop = prep.v_dyn if cfg.remove_ego_doppler else prep.doppler
    feats = np.column_stack((xyz[keep], dop[keep], prep.intensity[keep], prep.k[keep].astype(float)))
    return AggregatedCloud(prep.t0, feats.reshape(-1, 6), prep.ids[keep], prep.dt[keep])


def doppdrive_aggregate(window: Sequence[FrameRecord], cfg: AggregationConfig | None = None) -> AggregatedCloud:
    """Aggregate a window of frames (oldest first, current last) with Doppler-driven shifts.

    For each past point the Doppler is decomposed with its own frame's ego
    velocity and azimuth, the point is mapped into current coordinates and
    moved radially by ``v_dyn * dt``; it is kept only if ``dt`` is within
    :func:`duration_limit` (inclusive). Current-frame points always pass.
    """
    cfg = cfg or AggregationConfig()
    prep = _prepare(window, cfg.window_seconds)
    limit = duration_limit(prep.v_dyn, prep.theta, cfg)
    # timestamps differences carry rounding; the boundary stays inclusive
    keep = prep.dt <= np.atleast_1d(limit) + _TIME_EPS
    step = (prep.v_dyn * prep.dt)[:, None]
    xyz = prep.p0.copy()
    xyz[:, :2] += step * prep.r_hat
    return _cloud(prep, xyz, keep, cfg)


def fixed_radial_aggregate(window: Sequence[FrameRecord], cfg: AggregationConfig | None = None) -> AggregatedCloud:
    """Radial Doppler shift over the fixed baseline window, with no duration limit."""
    cfg = cfg or AggregationConfig()
    prep = _prepare(window, cfg.baseline_window_seconds)
    xyz = prep.p0.copy()
    xyz[:, :2] += (prep.v_dyn * prep.dt)[:, None] * prep.r_hat
    return _cloud(prep, xyz, np.ones(prep.dt.size, dtype=bool), cfg)


def standard_aggregate(window: Sequence[FrameRecord], cfg: AggregationConfig | None = None) -> AggregatedCloud:
    """Ego-motion-compensated accumulation over ``baseline_window_seconds``; no radial shift."""
    cfg = cfg or AggregationConfig()
    prep = _prepare(window, cfg.baseline_window_seconds)
    return _cloud(prep, prep.p0, np.ones(prep.dt.size, dtype=bool), cfg)


def no_aggregate(window: Sequence[FrameRecord], cfg: AggregationConfig | None = None) -> AggregatedCloud:
    cfg = cfg or AggregationConfig()
    prep = _prepare(list(window)[-1:], 0.0)
    return _cloud(prep, prep.p0, np.ones(prep.dt.size, dtype=bool), cfg)


_AGGREGATORS = {
    "none": no_aggregate,
    "standard": standard_aggregate,
    "doppdrive": doppdrive_aggregate,
    "fixed_radial": fixed_radial_aggregate,
}


def aggregate(window: Sequence[FrameRecord], cfg: AggregationConfig | None = None, mode: str = "doppdrive") -> AggregatedCloud:
    try:
        fn = _AGGREGATORS[mode]
    except KeyError:
        raise ValueError(f"unknown aggregation mode {mode!r}; expected one of {sorted(_AGGREGATORS)}") from None
    return fn(window, cfg)


class FrameBuffer:
    """Sliding window of frames; frames older than ``window_seconds`` are evicted on push."""

    def __init__(self, window_seconds: float = 2.0):
        self.window_seconds = window_seconds
        self._frames: deque[FrameRecord] = deque()

    def __len__(self) -> int:
        return len(self._frames)

    def push(self, frame: FrameRecord) -> None:
        if self._frames and not frame.timestamp > self._frames[-1].timestamp:
            raise NonMonotonicTimestamps(
                f"frame at t={frame.timestamp} is not after t={self._frames[-1].timestamp}"
            )
        self._frames.append(frame)
        horizon = frame.timestamp - self.window_seconds - _TIME_EPS
        while self._frames[0].timestamp < horizon:
            self._frames.popleft()

    def window(self) -> tuple[FrameRecord, ...]:
        return tuple(self._frames)


def push_frame(buffer: FrameBuffer, frame: FrameRecord) -> None:
    buffer.push(frame)


def sliding_aggregate(frames: Iterable[FrameRecord], cfg: AggregationConfig | None = None, mode: str = "doppdrive"):
    """Yield one aggregated cloud per input frame."""
    cfg = cfg or AggregationConfig()
    buf = FrameBuffer(cfg.window_seconds)
    for frame in frames:
        buf.push(frame)
        yield aggregate(buf.window(), cfg, mode)


def with_estimated_ego(frame: FrameRecord, rng=None, use_prior: bool = True, **kw) -> FrameRecord:
    """Replace a frame's ego velocity with one fitted to its static reflections.

    With ``use_prior`` the frame's metadata velocity is the fallback when the
    fit finds no consensus; otherwise :class:`NoConsensus` propagates.
    """
    prior = frame.ego.velocity if use_prior else None
    vel, _ = estimate_ego_velocity(frame.positions, frame.doppler, rng=rng, prior=prior, **kw)
    return replace(frame, ego=EgoState(vel, frame.ego.yaw_rate))
