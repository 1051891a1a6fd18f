"""Text file formats: frames, scenarios, ground truth, run configs, aggregated clouds and reports.

Every format is JSON (frames and aggregated clouds as one JSON object per
line). Floats are written with Python's shortest round-trip repr, so
write -> read -> write is byte-identical. Angles in files are degrees;
everything in memory is radians.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._atomic import atomic_write_text
from .aggregator import MODES, AggregatedCloud, AggregationConfig, FrameRecord, default_g_table
from .doppler import DOPPLER_MAX, EgoState, EgoVelocity
from .errors import FormatError
from .heading import GThetaTable, HeadingDistribution, build_table
from .simulator import (
    Box,
    EgoSegment,
    GroundTruth,
    NoiseSpec,
    ObjectSpec,
    ScenarioSpec,
)
from .geometry import Pose2

SEED_ENV = "DOPPDRIVE_SEED"


def _dump(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def _parse(text: str, source: str, line_offset: int = 0):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(e.msg, source, e.lineno + line_offset, e.colno) from None


def _read_text(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise FormatError(f"cannot read file ({e.strerror})", str(path)) from None


def _num(obj: dict, key: str, where: str, default=None, *, source="<input>", line=None) -> float:
    if key not in obj:
        if default is not None:
            return default
        raise FormatError(f"missing key {where}{key}", source, line)
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise FormatError(f"{where}{key} must be a number, got {val!r}", source, line)
    return float(val)


def _check_keys(obj, allowed, where: str, source: str, line=None) -> None:
    if not isinstance(obj, dict):
        raise FormatError(f"{where or 'document'} must be an object", source, line)
    extra = sorted(set(obj) - set(allowed))
    if extra:
        raise FormatError(f"unknown key {where}{extra[0]}", source, line)


# ---------------------------------------------------------------- frames

def frame_to_dict(frame: FrameRecord) -> dict:
    vel = frame.ego.velocity
    ego = {"vx": None if vel is None else vel.cx, "vy": None if vel is None else vel.cy, "yaw_rate": frame.ego.yaw_rate}
    pts = []
    for (x, y, z), d, i, pid in zip(frame.positions.tolist(), frame.doppler.tolist(), frame.intensity.tolist(), frame.ids.tolist()):
        p = {"x": x, "y": y, "z": z, "d": d, "i": i}
        if pid >= 0:
            p["id"] = pid
        pts.append(p)
    return {"t": frame.timestamp, "ego": ego, "points": pts}


def frame_from_dict(obj, source: str = "<input>", line: int | None = None) -> FrameRecord:
    _check_keys(obj, ("t", "ego", "points"), "", source, line)
    t = _num(obj, "t", "", source=source, line=line)
    ego = obj.get("ego")
    if ego is None:
        raise FormatError("missing key ego", source, line)
    _check_keys(ego, ("vx", "vy", "yaw_rate"), "ego.", source, line)
    if ego.get("vx") is None or ego.get("vy") is None:
        vel = None
    else:
        try:
            vel = EgoVelocity(_num(ego, "vx", "ego.", source=source, line=line), _num(ego, "vy", "ego.", source=source, line=line))
        except ValueError as e:
            raise FormatError(str(e), source, line) from None
    yaw_rate = _num(ego, "yaw_rate", "ego.", 0.0, source=source, line=line)
    pts = obj.get("points")
    if not isinstance(pts, list):
        raise FormatError("points must be a list", source, line)
    n = len(pts)
    pos = np.empty((n, 3))
    dop = np.empty(n)
    inten = np.empty(n)
    ids = np.full(n, -1, dtype=np.int64)
    for j, p in enumerate(pts):
        where = f"points[{j}]."
        _check_keys(p, ("x", "y", "z", "d", "i", "id"), where, source, line)
        pos[j] = (_num(p, "x", where, source=source, line=line), _num(p, "y", where, source=source, line=line),
                  _num(p, "z", where, 0.0, source=source, line=line))
        dop[j] = _num(p, "d", where, source=source, line=line)
        inten[j] = _num(p, "i", where, 1.0, source=source, line=line)
        if "id" in p:
            if not isinstance(p["id"], int) or isinstance(p["id"], bool):
                raise FormatError(f"{where}id must be an integer", source, line)
            ids[j] = p["id"]
    if not (np.all(np.isfinite(pos)) and np.all(np.abs(dop) <= DOPPLER_MAX) and np.all(inten >= 0)):
        raise FormatError(f"point values out of range (finite positions, |d| <= {DOPPLER_MAX}, i >= 0)", source, line)
    return FrameRecord(t, EgoState(vel, yaw_rate), pos, dop, inten, ids)


def dumps_frames(frames) -> str:
    return "".join(_dump(frame_to_dict(f)) + "\n" for f in frames)


def loads_frames(text: str, source: str = "<input>") -> list[FrameRecord]:
    frames = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        frame = frame_from_dict(_parse(raw, source, lineno - 1), source, lineno)
        if frames and not frame.timestamp > frames[-1].timestamp:
            raise FormatError("timestamps must be strictly increasing", source, lineno)
        frames.append(frame)
    return frames


def write_frames(path, frames) -> None:
    atomic_write_text(path, dumps_frames(frames))


def read_frames(path) -> list[FrameRecord]:
    return loads_frames(_read_text(path), str(path))


# ---------------------------------------------------------------- scenarios

_SCENARIO_KEYS = ("duration", "fps", "seed", "fov_deg", "max_range", "static_points_per_frame", "guardrails",
                  "max_points_per_object", "ego_profile", "objects", "noise", "sparsity", "highway")
_OBJECT_KEYS = ("class", "position", "speed", "heading_deg", "extent", "points_per_frame")
_NOISE_KEYS = ("sigma_range", "sigma_azimuth_deg", "sigma_doppler", "intensity_mean", "intensity_jitter")
_HIGHWAY_KEYS = ("n_lane", "n_oncoming", "n_crossing", "duration", "fps", "points_per_frame", "noise")


@dataclass
class Scenario:
    spec: ScenarioSpec
    sparsity: tuple | None = None


def _vector(val, n: int, name: str, source: str) -> tuple:
    if not isinstance(val, list) or len(val) != n or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in val):
        raise FormatError(f"{name} must be a list of {n} numbers", source)
    return tuple(float(v) for v in val)


def _noise_from(obj, source: str) -> NoiseSpec:
    _check_keys(obj, _NOISE_KEYS, "noise.", source)
    base = NoiseSpec()
    return NoiseSpec(
        _num(obj, "sigma_range", "noise.", base.sigma_range, source=source),
        math.radians(_num(obj, "sigma_azimuth_deg", "noise.", math.degrees(base.sigma_azimuth), source=source)),
        _num(obj, "sigma_doppler", "noise.", base.sigma_doppler, source=source),
        _num(obj, "intensity_mean", "noise.", base.intensity_mean, source=source),
        _num(obj, "intensity_jitter", "noise.", base.intensity_jitter, source=source),
    )


def _sparsity_from(obj, source: str):
    _check_keys(obj, ("ranges", "keep"), "sparsity.", source)
    ranges, keep = obj.get("ranges"), obj.get("keep")
    if not isinstance(ranges, list) or not isinstance(keep, list) or len(ranges) != len(keep) or not ranges:
        raise FormatError("sparsity.ranges and sparsity.keep must be equal-length lists", source)
    knots = (_vector(ranges, len(ranges), "sparsity.ranges", source), _vector(keep, len(keep), "sparsity.keep", source))
    if any(b > a for a, b in zip(knots[1], knots[1][1:])):
        raise FormatError("sparsity.keep must be non-increasing in range", source)
    return knots


def scenario_from_dict(obj, source: str = "<input>") -> Scenario:
    """Build a scenario; raises :class:`FormatError` naming the offending field."""
    from .errors import InvalidScenario
    from .suite import highway_scenario

    _check_keys(obj, _SCENARIO_KEYS, "", source)
    seed = obj.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise FormatError("seed must be an integer", source)
    env = os.environ.get(SEED_ENV)
    if env is not None:
        seed = _env_seed(env)
    sparsity = _sparsity_from(obj["sparsity"], source) if "sparsity" in obj else None

    if "highway" in obj:
        hw = obj["highway"]
        _check_keys(hw, _HIGHWAY_KEYS, "highway.", source)
        kw = {}
        for key in ("n_lane", "n_oncoming", "n_crossing"):
            if key in hw:
                if not isinstance(hw[key], int) or isinstance(hw[key], bool) or hw[key] < 0:
                    raise FormatError(f"highway.{key} must be a non-negative integer", source)
                kw[key] = hw[key]
        for key in ("duration", "fps", "points_per_frame"):
            if key in hw:
                kw[key] = _num(hw, key, "highway.", source=source)
        if "noise" in hw:
            kw["noise"] = _noise_from(hw["noise"], source)
        spec = highway_scenario(seed, **kw)
    else:
        segs = []
        for j, seg in enumerate(obj.get("ego_profile", [{"duration": 1e9, "speed": 0.0}])):
            where = f"ego_profile[{j}]."
            _check_keys(seg, ("duration", "speed", "yaw_rate_deg"), where, source)
            segs.append(EgoSegment(_num(seg, "duration", where, 1e9, source=source), _num(seg, "speed", where, 0.0, source=source),
                                   math.radians(_num(seg, "yaw_rate_deg", where, 0.0, source=source))))
        objects = []
        for j, o in enumerate(obj.get("objects", [])):
            where = f"objects[{j}]."
            _check_keys(o, _OBJECT_KEYS, where, source)
            if "position" not in o:
                raise FormatError(f"missing key {where}position", source)
            pos = _vector(o["position"], 3, where + "position", source) if len(o["position"]) == 3 else \
                _vector(o["position"], 2, where + "position", source) + (-0.5,)
            objects.append(ObjectSpec(
                str(o.get("class", "car")),
                pos,
                _num(o, "speed", where, 0.0, source=source),
                math.radians(_num(o, "heading_deg", where, 0.0, source=source)),
                _vector(o["extent"], 3, where + "extent", source) if "extent" in o else None,
                _num(o, "points_per_frame", where, 6.0, source=source),
            ))
        mpo = obj.get("max_points_per_object", 64)
        if not isinstance(mpo, int) or isinstance(mpo, bool) or mpo < 1:
            raise FormatError("max_points_per_object must be a positive integer", source)
        spec = ScenarioSpec(
            duration=_num(obj, "duration", "", 4.0, source=source),
            fps=_num(obj, "fps", "", 20.0, source=source),
            ego_profile=tuple(segs),
            objects=tuple(objects),
            noise=_noise_from(obj.get("noise", {}), source),
            fov_deg=_num(obj, "fov_deg", "", 60.0, source=source),
            max_range=_num(obj, "max_range", "", 250.0, source=source),
            seed=seed,
            static_points_per_frame=_num(obj, "static_points_per_frame", "", 0.0, source=source),
            guardrails=_vector(obj["guardrails"], len(obj["guardrails"]), "guardrails", source) if "guardrails" in obj else (-8.0, 8.0),
            max_points_per_object=mpo,
        )
    try:
        spec.validate()
    except InvalidScenario as e:
        raise FormatError(str(e), source) from None
    return Scenario(spec, sparsity)


def read_scenario(path) -> Scenario:
    return scenario_from_dict(_parse(_read_text(path), str(path)), str(path))


def _env_seed(value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise FormatError(f"{SEED_ENV} must be an integer, got {value!r}", "environment") from None


# ---------------------------------------------------------------- ground truth

def _rows_or_null(a: np.ndarray) -> list:
    return [None if not np.all(np.isfinite(r)) else r for r in a.tolist()]


def _from_rows(rows, width: int) -> np.ndarray:
    out = np.full((len(rows), width), np.nan)
    for j, r in enumerate(rows):
        if r is not None:
            out[j] = r
    return out


def truth_to_dict(truth: GroundTruth) -> dict:
    return {
        "times": truth.times.tolist(),
        "ego_poses": [[p.tx, p.ty, p.yaw] for p in truth.ego_poses],
        "objects": [
            {"class": o.cls, "position": list(o.position), "speed": o.speed, "heading": o.heading,
             "extent": list(o.size), "points_per_frame": o.points_per_frame}
            for o in truth.objects
        ],
        "boxes": [
            [[b.object_id, b.cx, b.cy, b.length, b.width, b.yaw, b.speed, b.score] for b in frame_boxes]
            for frame_boxes in truth.boxes
        ],
        "points": {
            "frame": truth.frame.tolist(),
            "object_id": truth.object_id.tolist(),
            "world": truth.world.tolist(),
            "local": _rows_or_null(truth.local),
            "true_position": truth.true_position.tolist(),
            "v": truth.v.tolist(),
            "u": truth.u.tolist(),
            "alpha": truth.alpha.tolist(),
        },
        "spawn_outside_fov": [int(i) for i in truth.spawn_outside_fov],
    }


def truth_from_dict(obj, source: str = "<input>") -> GroundTruth:
    """Inverse of :func:`truth_to_dict`. Angles here are radians (machine-facing file)."""
    try:
        pts = obj["points"]
        n = len(pts["frame"])
        truth = GroundTruth(
            times=np.asarray(obj["times"], dtype=float),
            ego_poses=[Pose2(*p) for p in obj["ego_poses"]],
            objects=tuple(
                ObjectSpec(o["class"], tuple(o["position"]), o["speed"], o["heading"], tuple(o["extent"]), o["points_per_frame"])
                for o in obj["objects"]
            ),
            boxes=[[Box(int(b[0]), *b[1:]) for b in fb] for fb in obj["boxes"]],
            frame=np.asarray(pts["frame"], dtype=np.int64).reshape(n),
            object_id=np.asarray(pts["object_id"], dtype=np.int64).reshape(n),
            world=np.asarray(pts["world"], dtype=float).reshape(n, 3),
            local=_from_rows(pts["local"], 3),
            true_position=np.asarray(pts["true_position"], dtype=float).reshape(n, 3),
            v=np.asarray(pts["v"], dtype=float).reshape(n),
            u=np.asarray(pts["u"], dtype=float).reshape(n),
            alpha=np.asarray(pts["alpha"], dtype=float).reshape(n),
            spawn_outside_fov=list(obj.get("spawn_outside_fov", [])),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"malformed ground truth ({type(e).__name__}: {e})", source) from None
    if len(truth.ego_poses) != truth.times.size or len(truth.boxes) != truth.times.size:
        raise FormatError("times, ego_poses and boxes must have equal length", source)
    return truth


def write_truth(path, truth: GroundTruth) -> None:
    atomic_write_text(path, _dump(truth_to_dict(truth)) + "\n")


def read_truth(path) -> GroundTruth:
    return truth_from_dict(_parse(_read_text(path), str(path)), str(path))


# ---------------------------------------------------------------- run config

_CONFIG_REQUIRED = ("tolerance_d", "window_seconds", "baseline_window_seconds", "heading", "ego_source", "seed")
_CONFIG_OPTIONAL = ("mode", "remove_ego_doppler", "static_speed_epsilon", "g_table")


@dataclass
class RunConfig:
    """Everything ``aggregate`` needs besides the frames. Heading angles are radians here."""

    tolerance_d: float = 2.0
    window_seconds: float = 2.0
    baseline_window_seconds: float = 0.7
    heading: HeadingDistribution = field(default_factory=HeadingDistribution.laplace)
    ego_source: str = "metadata"
    seed: int = 0
    mode: str | None = None
    remove_ego_doppler: bool = True
    static_speed_epsilon: float = 0.1
    g_table_path: str | None = None

    def aggregation_config(self) -> AggregationConfig:
        if self.g_table_path is not None:
            table = GThetaTable.load(self.g_table_path)
        elif self.heading == HeadingDistribution.laplace():
            table = default_g_table()
        else:
            table = build_table(self.heading)
        return AggregationConfig(self.tolerance_d, self.window_seconds, self.baseline_window_seconds, table,
                                 self.remove_ego_doppler, self.static_speed_epsilon)


def _heading_from(obj, source: str) -> HeadingDistribution:
    if not isinstance(obj, dict):
        raise FormatError("heading must be an object", source)
    kind = obj.get("kind", "laplace")
    try:
        if kind == "laplace":
            _check_keys(obj, ("kind", "mu_deg", "b_deg"), "heading.", source)
            return HeadingDistribution.laplace(_num(obj, "mu_deg", "heading.", 0.0, source=source),
                                               _num(obj, "b_deg", "heading.", 3.1, source=source))
        if kind == "empirical":
            _check_keys(obj, ("kind", "angles_deg", "probs"), "heading.", source)
            for key in ("angles_deg", "probs"):
                if key not in obj:
                    raise FormatError(f"missing key heading.{key}", source)
            return HeadingDistribution("empirical", angles=np.radians(np.asarray(obj["angles_deg"], dtype=float)),
                                       probs=np.asarray(obj["probs"], dtype=float))
    except (TypeError, ValueError) as e:
        if isinstance(e, FormatError):
            raise
        raise FormatError(f"heading: {e}", source) from None
    raise FormatError(f"heading.kind must be 'laplace' or 'empirical', got {kind!r}", source)


def config_from_dict(obj, source: str = "<input>") -> RunConfig:
    """Validate a run config. ``DOPPDRIVE_SEED`` in the environment overrides ``seed``."""
    _check_keys(obj, _CONFIG_REQUIRED + _CONFIG_OPTIONAL, "", source)
    for key in _CONFIG_REQUIRED:
        if key not in obj:
            raise FormatError(f"missing config key {key}", source)
    seed = obj["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise FormatError("seed must be an integer", source)
    env = os.environ.get(SEED_ENV)
    if env is not None:
        seed = _env_seed(env)
    if obj["ego_source"] not in ("metadata", "estimate"):
        raise FormatError(f"ego_source must be 'metadata' or 'estimate', got {obj['ego_source']!r}", source)
    mode = obj.get("mode")
    if mode is not None and mode not in MODES:
        raise FormatError(f"mode must be one of {', '.join(MODES)}, got {mode!r}", source)
    flag = obj.get("remove_ego_doppler", True)
    if not isinstance(flag, bool):
        raise FormatError("remove_ego_doppler must be true or false", source)
    cfg = RunConfig(
        tolerance_d=_num(obj, "tolerance_d", "", source=source),
        window_seconds=_num(obj, "window_seconds", "", source=source),
        baseline_window_seconds=_num(obj, "baseline_window_seconds", "", source=source),
        heading=_heading_from(obj["heading"], source),
        ego_source=obj["ego_source"],
        seed=seed,
        mode=mode,
        remove_ego_doppler=flag,
        static_speed_epsilon=_num(obj, "static_speed_epsilon", "", 0.1, source=source),
        g_table_path=obj.get("g_table"),
    )
    # same checks AggregationConfig applies, without building a table
    try:
        AggregationConfig(cfg.tolerance_d, cfg.window_seconds, cfg.baseline_window_seconds, default_g_table(),
                          cfg.remove_ego_doppler, cfg.static_speed_epsilon)
    except ValueError as e:
        raise FormatError(str(e), source) from None
    return cfg


def config_to_dict(cfg: RunConfig) -> dict:
    h = cfg.heading
    if h.kind == "laplace":
        heading = {"kind": "laplace", "mu_deg": math.degrees(h.mu), "b_deg": math.degrees(h.b)}
    else:
        heading = {"kind": "empirical", "angles_deg": np.degrees(h.angles).tolist(), "probs": np.asarray(h.probs).tolist()}
    out = {
        "tolerance_d": cfg.tolerance_d,
        "window_seconds": cfg.window_seconds,
        "baseline_window_seconds": cfg.baseline_window_seconds,
        "heading": heading,
        "ego_source": cfg.ego_source,
        "seed": cfg.seed,
        "remove_ego_doppler": cfg.remove_ego_doppler,
        "static_speed_epsilon": cfg.static_speed_epsilon,
    }
    if cfg.mode is not None:
        out["mode"] = cfg.mode
    if cfg.g_table_path is not None:
        out["g_table"] = cfg.g_table_path
    return out


def read_config(path) -> RunConfig:
    return config_from_dict(_parse(_read_text(path), str(path)), str(path))


def write_config(path, cfg: RunConfig) -> None:
    atomic_write_text(path, json.dumps(config_to_dict(cfg), indent=2) + "\n")


# ---------------------------------------------------------------- aggregated clouds

@dataclass
class AggregatedRun:
    """Contents of an aggregated-output file: one cloud per input frame."""

    mode: str
    label: str
    clouds: list


def dumps_aggregated(clouds, mode: str, label: str | None = None) -> str:
    label = label or mode
    lines = []
    for j, c in enumerate(clouds):
        rec = {"t": c.timestamp, "frame": j, "mode": mode, "label": label,
               "points": c.features.tolist(), "ids": c.ids.tolist(), "dt": c.dt.tolist()}
        lines.append(_dump(rec) + "\n")
    return "".join(lines)


def loads_aggregated(text: str, source: str = "<input>") -> AggregatedRun:
    clouds, mode, label = [], None, None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        rec = _parse(raw, source, lineno - 1)
        _check_keys(rec, ("t", "frame", "mode", "label", "points", "ids", "dt"), "", source, lineno)
        try:
            feats = np.asarray(rec["points"], dtype=float).reshape(-1, 6)
            n = feats.shape[0]
            ids = np.asarray(rec["ids"], dtype=np.int64).reshape(n)
            dt = np.asarray(rec["dt"], dtype=float).reshape(n)
            t = float(rec["t"])
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"malformed aggregated record ({type(e).__name__}: {e})", source, lineno) from None
        if mode is None:
            mode, label = rec.get("mode"), rec.get("label")
        elif rec.get("mode") != mode:
            raise FormatError("mixed modes in one aggregated file", source, lineno)
        if clouds and not t > clouds[-1].timestamp:
            raise FormatError("timestamps must be strictly increasing", source, lineno)
        clouds.append(AggregatedCloud(t, feats, ids, dt))
    return AggregatedRun(mode or "none", label or mode or "none", clouds)


def write_aggregated(path, clouds, mode: str, label: str | None = None) -> None:
    atomic_write_text(path, dumps_aggregated(clouds, mode, label))


def read_aggregated(path) -> AggregatedRun:
    return loads_aggregated(_read_text(path), str(path))


# ---------------------------------------------------------------- reports

def dumps_table(rows) -> str:
    """``metric,bin,value`` CSV text."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("metric", "bin", "value"))
    for metric, bin_, value in rows:
        w.writerow((metric, bin_, repr(float(value))))
    return buf.getvalue()


def loads_table(text: str, source: str = "<input>") -> list[tuple]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != ["metric", "bin", "value"]:
        raise FormatError("report table must start with a metric,bin,value header", source, 1)
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 3:
            raise FormatError(f"expected 3 columns, got {len(row)}", source, lineno)
        try:
            out.append((row[0], row[1], float(row[2])))
        except ValueError:
            raise FormatError(f"value is not a number: {row[2]!r}", source, lineno) from None
    return out


def write_table(path, rows) -> None:
    atomic_write_text(path, dumps_table(rows))


def read_table(path) -> list[tuple]:
    return loads_table(_read_text(path), str(path))


def _finite_or_null(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _finite_or_null(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite_or_null(v) for v in obj]
    if isinstance(obj, np.generic):
        return _finite_or_null(obj.item())
    return obj


def write_report(path, document: dict) -> None:
    """One JSON document per run; non-finite numbers become null."""
    atomic_write_text(path, json.dumps(_finite_or_null(document), indent=2, allow_nan=False) + "\n")
