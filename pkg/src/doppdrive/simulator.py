"""Synthetic multi-frame radar scenes with exact ground truth.

The world frame is the ego radar frame at t = 0 (x right, y forward). Objects
are boxes translating at constant velocity; headings are measured
counter-clockwise from +y, which makes an object's radial and tangential
speeds ``s cos(theta + alpha)`` and ``s sin(theta + alpha)`` for a reflector
at azimuth ``theta``. Reflection points are re-sampled on the visible faces
every frame, but each keeps its object-local coordinates so its true
position at any later time is known.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .aggregator import FrameRecord
from .doppler import EgoState, EgoVelocity, ego_speed_doppler
from .errors import InvalidScenario, UnknownPoint
from .geometry import Pose2, azimuth_of

CLASS_EXTENTS = {
    "car": (4.5, 1.8, 1.5),
    "van": (5.5, 2.0, 2.2),
    "truck": (12.0, 2.5, 3.5),
}
RADAR_HEIGHT = 0.5
REFERENCE_RANGE = 50.0


@dataclass(frozen=True)
class EgoSegment:
    duration: float
    speed: float
    yaw_rate: float = 0.0


@dataclass(frozen=True)
class ObjectSpec:
    """A box moving at constant velocity.

    ``position`` is the box centre (x, y) and base height z at t = 0 in world
    coordinates; ``speed`` may be negative (moving against ``heading``).
    ``points_per_frame`` is the mean reflection count at 50 m, scaled by
    ``(50 / range)**2``.
    """

    cls: str = "car"
    position: tuple = (0.0, 50.0, -RADAR_HEIGHT)
    speed: float = 0.0
    heading: float = 0.0
    extent: tuple | None = None
    points_per_frame: float = 6.0

    @property
    def size(self) -> tuple:
        return tuple(self.extent) if self.extent is not None else CLASS_EXTENTS[self.cls]

    @property
    def direction(self) -> np.ndarray:
        return np.array([-math.sin(self.heading), math.cos(self.heading)])

    @property
    def velocity(self) -> np.ndarray:
        return self.speed * self.direction


@dataclass(frozen=True)
class NoiseSpec:
    sigma_range: float = 0.15
    sigma_azimuth: float = math.radians(0.3)
    sigma_doppler: float = 0.1
    intensity_mean: float = 1.0
    intensity_jitter: float = 0.1

    @classmethod
    def none(cls) -> "NoiseSpec":
        return cls(0.0, 0.0, 0.0, 1.0, 0.0)


@dataclass(frozen=True)
class ScenarioSpec:
    duration: float = 4.0
    fps: float = 20.0
    ego_profile: tuple = (EgoSegment(1e9, 0.0),)
    objects: tuple = ()
    noise: NoiseSpec = NoiseSpec()
    fov_deg: float = 60.0
    max_range: float = 250.0
    seed: int = 0
    static_points_per_frame: float = 0.0
    guardrails: tuple = (-8.0, 8.0)
    max_points_per_object: int = 64

    @property
    def n_frames(self) -> int:
        return int(round(self.duration * self.fps))

    def validate(self) -> None:
        if not 1 <= self.fps <= 50:
            raise InvalidScenario(f"fps must be within [1, 50], got {self.fps}")
        if not self.duration > 0 or self.n_frames < 1:
            raise InvalidScenario("duration must cover at least one frame")
        if not self.max_range > 0:
            raise InvalidScenario("max_range must be positive")
        if not 0 < self.fov_deg <= 180:
            raise InvalidScenario("fov_deg must be within (0, 180]")
        if not self.ego_profile:
            raise InvalidScenario("ego_profile needs at least one segment")
        for seg in self.ego_profile:
            if not seg.duration > 0:
                raise InvalidScenario("ego segment durations must be positive")
        for i, obj in enumerate(self.objects):
            if obj.cls not in CLASS_EXTENTS:
                raise InvalidScenario(f"objects[{i}].cls: unknown class {obj.cls!r}")
            if any(not e > 0 for e in obj.size):
                raise InvalidScenario(f"objects[{i}].extent must be positive")
            if abs(obj.heading) > math.pi:
                raise InvalidScenario(f"objects[{i}].heading must be within [-pi, pi]")
            if obj.points_per_frame < 0:
                raise InvalidScenario(f"objects[{i}].points_per_frame must be non-negative")
        for name in ("sigma_range", "sigma_azimuth", "sigma_doppler", "intensity_jitter"):
            if getattr(self.noise, name) < 0:
                raise InvalidScenario(f"noise.{name} must be non-negative")

    def in_fov(self, xy_radar) -> bool:
        x, y = float(xy_radar[0]), float(xy_radar[1])
        r = math.hypot(x, y)
        if r == 0.0 or r > self.max_range:
            return False
        return abs(math.degrees(azimuth_of((x, y)))) <= self.fov_deg


@dataclass(frozen=True)
class Box:
    """BEV rectangle in one frame's radar coordinates; ``yaw`` is CCW from +y."""

    object_id: int
    cx: float
    cy: float
    length: float
    width: float
    yaw: float
    speed: float = 0.0
    score: float = 1.0

    def corners(self) -> np.ndarray:
        fwd = np.array([-math.sin(self.yaw), math.cos(self.yaw)])
        side = np.array([math.cos(self.yaw), math.sin(self.yaw)])
        c = np.array([self.cx, self.cy])
        hl, hw = 0.5 * self.length, 0.5 * self.width
        return np.array([c + hl * fwd + hw * side, c - hl * fwd + hw * side, c - hl * fwd - hw * side, c + hl * fwd - hw * side])


def ego_pose_at(profile: Sequence[EgoSegment], t: float) -> Pose2:
    """World pose of the radar at time ``t`` (exact integration of constant-twist segments)."""
    pose = Pose2.identity()
    remaining = t
    for i, seg in enumerate(profile):
        last = i == len(profile) - 1
        tau = remaining if last else min(remaining, seg.duration)
        pose = pose @ _arc(seg.speed, seg.yaw_rate, tau)
        remaining -= tau
        if remaining <= 0:
            break
    return pose


def _arc(speed: float, yaw_rate: float, tau: float) -> Pose2:
    dyaw = yaw_rate * tau
    if abs(dyaw) < 1e-12:
        return Pose2(0.0, speed * tau, dyaw)
    radius = speed / yaw_rate
    return Pose2(-radius * (1.0 - math.cos(dyaw)), radius * math.sin(dyaw), dyaw)


def ego_state_at(profile: Sequence[EgoSegment], t: float) -> EgoState:
    elapsed = 0.0
    for seg in profile[:-1]:
        if t < elapsed + seg.duration:
            return EgoState(EgoVelocity(0.0, seg.speed), seg.yaw_rate)
        elapsed += seg.duration
    seg = profile[-1]
    return EgoState(EgoVelocity(0.0, seg.speed), seg.yaw_rate)


@dataclass
class GroundTruth:
    """Per-frame ego poses and boxes plus per-point provenance.

    Point arrays are indexed by point id (ids are ``0..N-1`` in emission order).
    ``object_id`` is ``-1`` for static background. ``v``/``u`` are the true
    radial/tangential speeds at measurement, ``alpha`` the object heading
    relative to the measuring radar frame.
    """

    times: np.ndarray
    ego_poses: list
    objects: tuple
    boxes: list
    frame: np.ndarray
    object_id: np.ndarray
    world: np.ndarray
    local: np.ndarray
    true_position: np.ndarray
    v: np.ndarray
    u: np.ndarray
    alpha: np.ndarray
    spawn_outside_fov: list = field(default_factory=list)

    @property
    def n_points(self) -> int:
        return self.frame.size

    def _rows(self, ids) -> np.ndarray:
        ids = np.atleast_1d(np.asarray(ids, dtype=np.int64))
        bad = (ids < 0) | (ids >= self.n_points)
        if np.any(bad):
            raise UnknownPoint(f"unknown point id(s): {ids[bad][:5].tolist()}")
        return ids

    def is_dynamic(self, ids) -> np.ndarray:
        return self.object_id[self._rows(ids)] >= 0

    def relative_pose(self, from_frame: int, to_frame: int) -> Pose2:
        """Exact transform of points from ``from_frame`` radar coords into ``to_frame``'s."""
        return self.ego_poses[to_frame].inverse() @ self.ego_poses[from_frame]

    def world_at(self, ids, t: float) -> np.ndarray:
        """World position of each point at time ``t`` (rigidly attached to its object)."""
        rows = self._rows(ids)
        out = self.world[rows].copy()
        for oid in np.unique(self.object_id[rows]):
            if oid < 0:
                continue
            sel = self.object_id[rows] == oid
            obj = self.objects[oid]
            dt = t - self.times[self.frame[rows][sel]]
            out[sel, :2] += dt[:, None] * obj.velocity[None, :]
        return out

    def oracle_shift(self, ids, target_frame: int) -> np.ndarray:
        """True positions of points at ``target_frame``'s time, in that frame's radar coordinates."""
        world = self.world_at(ids, self.times[target_frame])
        return self.ego_poses[target_frame].inverse().apply(world)

    def eq_shift(self, ids, target_frame: int, tangential: bool = True) -> np.ndarray:
        """Shift by true radial (and optionally tangential) speed along measurement-time unit vectors."""
        rows = self._rows(ids)
        out = np.empty((rows.size, 3))
        for k in np.unique(self.frame[rows]):
            sel = self.frame[rows] == k
            r = rows[sel]
            pose = self.relative_pose(int(k), target_frame)
            p = pose.apply(self.true_position[r])
            xy = self.true_position[r, :2]
            rh = pose.rotation() @ (xy / np.hypot(xy[:, 0], xy[:, 1])[:, None]).T
            th = np.vstack((-rh[1], rh[0]))
            dt = self.times[target_frame] - self.times[k]
            p[:, :2] += (self.v[r] * dt * rh).T
            if tangential:
                p[:, :2] += (self.u[r] * dt * th).T
            out[sel] = p
        return out


def _visible_face_samples(rng, center, heading, size, radar_xy, n):
    """Sample n points on the box edges facing the radar; returns local (along, lateral) coords."""
    length, width = size[0], size[1]
    hl, hw = 0.5 * length, 0.5 * width
    fwd = np.array([-math.sin(heading), math.cos(heading)])
    side = np.array([math.cos(heading), math.sin(heading)])
    # edges as (start, end) in local coords and outward normal in local coords
    edges = [
        ((hl, -hw), (hl, hw), (1.0, 0.0)),
        ((-hl, -hw), (-hl, hw), (-1.0, 0.0)),
        ((-hl, hw), (hl, hw), (0.0, 1.0)),
        ((-hl, -hw), (hl, -hw), (0.0, -1.0)),
    ]
    to_radar = np.asarray(radar_xy) - np.asarray(center)
    vis = []
    for a, b, nrm in edges:
        mid = 0.5 * (np.array(a) + np.array(b))
        normal_w = nrm[0] * fwd + nrm[1] * side
        mid_w = mid[0] * fwd + mid[1] * side
        if normal_w @ (to_radar - mid_w) > 0:
            vis.append((np.array(a), np.array(b)))
    if not vis:
        vis = [(np.array(a), np.array(b)) for a, b, _ in edges]
    lengths = np.array([np.linalg.norm(b - a) for a, b in vis])
    pick = rng.choice(len(vis), size=n, p=lengths / lengths.sum())
    frac = rng.random(n)
    starts = np.array([vis[i][0] for i in pick]).reshape(n, 2)
    ends = np.array([vis[i][1] for i in pick]).reshape(n, 2)
    return starts + frac[:, None] * (ends - starts)


def synthesize(spec: ScenarioSpec) -> tuple[list[FrameRecord], GroundTruth]:
    """Render a scenario into radar frames and matching ground truth.

    Doppler is synthesised as ``d = v + h (+ noise)`` with ``v`` the true
    radial speed of the reflector and ``h`` the ego projection.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n_frames = spec.n_frames
    times = np.arange(n_frames) / spec.fps
    poses = [ego_pose_at(spec.ego_profile, t) for t in times]
    states = [ego_state_at(spec.ego_profile, t) for t in times]
    objects = tuple(spec.objects)
    noise = spec.noise

    spawn_outside = [
        i for i, o in enumerate(objects) if not spec.in_fov(poses[0].inverse().apply(np.array(o.position[:2])))
    ]

    frames, boxes = [], []
    cols = {k: [] for k in ("frame", "object_id", "world", "local", "true", "v", "u", "alpha")}
    next_id = 0
    for j, (t, pose, state) in enumerate(zip(times, poses, states)):
        to_radar = pose.inverse()
        radar_xy = np.array([pose.tx, pose.ty])
        world_pts, local_pts, oids = [], [], []
        frame_boxes = []
        for oid, obj in enumerate(objects):
            centre = np.array(obj.position[:2], dtype=float) + obj.velocity * t
            c_r = to_radar.apply(centre)
            box = Box(oid, float(c_r[0]), float(c_r[1]), obj.size[0], obj.size[1], obj.heading - pose.yaw, obj.speed)
            if not spec.in_fov(c_r):
                continue
            frame_boxes.append(box)
            rng_c = math.hypot(*c_r)
            lam = min(obj.points_per_frame * (REFERENCE_RANGE / max(rng_c, 1.0)) ** 2, spec.max_points_per_object)
            n = int(rng.poisson(lam))
            if n == 0:
                continue
            loc2 = _visible_face_samples(rng, centre, obj.heading, obj.size, radar_xy, n)
            z = obj.position[2] + rng.random(n) * obj.size[2]
            fwd, side = obj.direction, np.array([math.cos(obj.heading), math.sin(obj.heading)])
            wxy = centre + loc2[:, :1] * fwd + loc2[:, 1:] * side
            world_pts.append(np.column_stack((wxy, z)))
            local_pts.append(np.column_stack((loc2, z)))
            oids.append(np.full(n, oid))
        if spec.static_points_per_frame > 0 and spec.guardrails:
            n = int(rng.poisson(spec.static_points_per_frame))
            rail = rng.choice(np.asarray(spec.guardrails, dtype=float), size=n)
            along = 5.0 + rng.random(n) * (spec.max_range - 5.0)
            # rails run parallel to the world y axis
            wxy = np.column_stack((rail, pose.ty + along))
            r_xy = to_radar.apply(wxy)
            ok = np.array([spec.in_fov(p) for p in r_xy], dtype=bool)
            wxy = wxy[ok]
            m = wxy.shape[0]
            world_pts.append(np.column_stack((wxy, np.full(m, -RADAR_HEIGHT))))
            local_pts.append(np.full((m, 3), np.nan))
            oids.append(np.full(m, -1))
        boxes.append(frame_boxes)

        if world_pts:
            W = np.concatenate(world_pts)
            L = np.concatenate(local_pts)
            O = np.concatenate(oids).astype(np.int64)
        else:
            W, L, O = np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0, dtype=np.int64)
        m = O.size
        P = to_radar.apply(W) if m else np.zeros((0, 3))
        if m:
            theta = np.atleast_1d(azimuth_of(P))
        else:
            theta = np.zeros(0)
        vel_w = np.zeros((m, 2))
        alpha = np.zeros(m)
        for oid in np.unique(O[O >= 0]):
            vel_w[O == oid] = objects[oid].velocity
            alpha[O == oid] = objects[oid].heading - pose.yaw
        rot = to_radar.rotation()
        vel_r = vel_w @ rot.T
        r_hat = np.column_stack((np.sin(theta), np.cos(theta)))
        t_hat = np.column_stack((-np.cos(theta), np.sin(theta)))
        v = np.einsum("ij,ij->i", vel_r, r_hat)
        u = np.einsum("ij,ij->i", vel_r, t_hat)
        h = ego_speed_doppler(theta, state.velocity)
        d = v + h

        meas = P.copy()
        if m and (noise.sigma_range > 0 or noise.sigma_azimuth > 0):
            r = np.hypot(P[:, 0], P[:, 1]) + noise.sigma_range * rng.standard_normal(m)
            az = theta + noise.sigma_azimuth * rng.standard_normal(m)
            meas[:, 0] = r * np.sin(az)
            meas[:, 1] = r * np.cos(az)
        if m and noise.sigma_doppler > 0:
            d = d + noise.sigma_doppler * rng.standard_normal(m)
        intensity = noise.intensity_mean + noise.intensity_jitter * (rng.random(m) - 0.5) * 2.0
        ids = np.arange(next_id, next_id + m, dtype=np.int64)
        next_id += m
        frames.append(FrameRecord(float(t), state, meas, d, np.maximum(intensity, 0.0), ids))

        cols["frame"].append(np.full(m, j))
        cols["object_id"].append(O)
        cols["world"].append(W)
        cols["local"].append(L)
        cols["true"].append(P)
        cols["v"].append(v)
        cols["u"].append(u)
        cols["alpha"].append(np.mod(alpha + math.pi, 2 * math.pi) - math.pi)

    cat = {k: np.concatenate(v) for k, v in cols.items()}
    truth = GroundTruth(
        times=times,
        ego_poses=poses,
        objects=objects,
        boxes=boxes,
        frame=cat["frame"].astype(np.int64),
        object_id=cat["object_id"].astype(np.int64),
        world=cat["world"].reshape(-1, 3),
        local=cat["local"].reshape(-1, 3),
        true_position=cat["true"].reshape(-1, 3),
        v=cat["v"],
        u=cat["u"],
        alpha=cat["alpha"],
        spawn_outside_fov=spawn_outside,
    )
    return frames, truth


def sparsify(
    frames: Sequence[FrameRecord],
    profile: Callable[[np.ndarray], np.ndarray] | tuple | float,
    seed: int | np.random.Generator | None = 0,
) -> list[FrameRecord]:
    """Thin each frame by a range-dependent keep probability.

    ``profile`` is a constant, a callable of range, or ``(ranges, probs)``
    knots for piecewise-linear interpolation (held constant past the ends).
    """
    rng = np.random.default_rng(seed)
    if isinstance(profile, tuple):
        knots_r, knots_p = (np.asarray(a, dtype=float) for a in profile)
        if np.any(np.diff(knots_p) > 0):
            raise ValueError("density profile must be non-increasing in range")
        keep_prob = lambda r: np.interp(r, knots_r, knots_p)  # noqa: E731
    elif callable(profile):
        keep_prob = profile
    else:
        const = float(profile)
        keep_prob = lambda r: np.full_like(r, const)  # noqa: E731
    out = []
    for f in frames:
        r = np.hypot(f.positions[:, 0], f.positions[:, 1])
        p = np.clip(keep_prob(r), 0.0, 1.0)
        out.append(f.subset(rng.random(len(f)) < p))
    return out
