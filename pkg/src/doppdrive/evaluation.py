"""Metrics comparing aggregation modes against simulator ground truth.

Three families of metrics:

* dispersion of aggregated dynamic points around their true current position,
  split into the component along the measurement line of sight and the
  tangential remainder;
* the share of dynamic points a duration-limited aggregation drops relative to
  a fixed-window one, binned by range, speed and heading;
* average precision of a deliberately simple BEV grid-clustering detector, used
  only to compare input clouds with each other.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage
from shapely.geometry import Polygon, box as shapely_box

from .aggregator import AggregatedCloud
from .errors import MissingGroundTruth, WindowMismatch
from .simulator import Box, GroundTruth

RANGE_BINS = (0.0, 40.0, 80.0, 120.0, 160.0)
SPEED_BINS = (0.0, 12.0, 24.0, 36.0, 48.0)
HEADING_BINS_DEG = (0.0, 30.0, 60.0, 120.0, 180.0)


def _bin_labels(edges) -> list[str]:
    return [f"[{edges[i]:g},{edges[i + 1]:g}]" for i in range(len(edges) - 1)]


def frame_of(truth: GroundTruth, timestamp: float) -> int:
    j = int(np.argmin(np.abs(truth.times - timestamp)))
    if abs(truth.times[j] - timestamp) > 1e-6:
        raise WindowMismatch(f"no ground-truth frame at t={timestamp}")
    return j


def _as_list(clouds) -> list[AggregatedCloud]:
    return [clouds] if isinstance(clouds, AggregatedCloud) else list(clouds)


# --------------------------------------------------------------------------- dispersion


@dataclass
class DispersionReport:
    radial_spread: dict
    tangential_spread: dict
    mean_offset: dict
    counts: dict
    overall_mean_offset: float
    max_abs_radial: float
    mean_radial_spread: float
    mean_tangential_spread: float
    offset_histogram: tuple = field(default_factory=tuple)

    def rows(self, prefix: str = "") -> list[tuple[str, str, float]]:
        out = [
            (prefix + "overall_mean_offset", "all", self.overall_mean_offset),
            (prefix + "max_abs_radial_offset", "all", self.max_abs_radial),
            (prefix + "mean_radial_spread", "all", self.mean_radial_spread),
            (prefix + "mean_tangential_spread", "all", self.mean_tangential_spread),
        ]
        for oid in sorted(self.counts):
            out += [
                (prefix + "radial_spread", f"object{oid}", self.radial_spread[oid]),
                (prefix + "tangential_spread", f"object{oid}", self.tangential_spread[oid]),
                (prefix + "mean_offset", f"object{oid}", self.mean_offset[oid]),
                (prefix + "retained", f"object{oid}", float(self.counts[oid])),
            ]
        return out


def offsets(cloud: AggregatedCloud, truth: GroundTruth) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Signed radial and tangential offsets ``q_tilde - q`` and their norm, per point.

    Radial is along the line of sight from the measuring radar position to
    the point, expressed in current-frame axes.
    """
    if cloud.ids.size and np.any(cloud.ids < 0):
        raise MissingGroundTruth("aggregated points without source ids cannot be evaluated")
    if cloud.ids.size and cloud.ids.max() >= truth.n_points:
        bad = np.unique(cloud.ids[cloud.ids >= truth.n_points])[:5].tolist()
        raise MissingGroundTruth(f"aggregated point ids not present in ground truth: {bad}")
    target = frame_of(truth, cloud.timestamp)
    q = truth.oracle_shift(cloud.ids, target)
    diff = cloud.xyz[:, :2] - q[:, :2]
    radial = np.empty(len(cloud))
    tangential = np.empty(len(cloud))
    src = truth.frame[cloud.ids]
    for k in np.unique(src):
        sel = src == k
        rot = truth.relative_pose(int(k), target).rotation()
        xy = truth.true_position[cloud.ids[sel], :2]
        r_hat = (rot @ (xy / np.hypot(xy[:, 0], xy[:, 1])[:, None]).T).T
        t_hat = np.column_stack((-r_hat[:, 1], r_hat[:, 0]))
        radial[sel] = np.einsum("ij,ij->i", diff[sel], r_hat)
        tangential[sel] = np.einsum("ij,ij->i", diff[sel], t_hat)
    return radial, tangential, np.hypot(diff[:, 0], diff[:, 1])


def dispersion(clouds, truth: GroundTruth, hist_bins=(0, 0.5, 1, 2, 4, 8, 16, np.inf)) -> DispersionReport:
    """Spread of aggregated dynamic points around their true positions, per object."""
    per_obj: dict[int, list] = {}
    all_off, all_rad = [], []
    for cloud in _as_list(clouds):
        radial, tangential, norm = offsets(cloud, truth)
        oid = truth.object_id[cloud.ids] if len(cloud) else np.zeros(0, dtype=np.int64)
        dyn = oid >= 0
        all_off.append(norm[dyn])
        all_rad.append(radial[dyn])
        for o in np.unique(oid[dyn]):
            sel = oid == o
            per_obj.setdefault(int(o), []).append((radial[sel], tangential[sel], norm[sel]))

    rs, ts, mo, cnt = {}, {}, {}, {}
    for o, parts in per_obj.items():
        r = np.concatenate([p[0] for p in parts])
        t = np.concatenate([p[1] for p in parts])
        n = np.concatenate([p[2] for p in parts])
        rs[o], ts[o], mo[o], cnt[o] = float(np.std(r)), float(np.std(t)), float(np.mean(n)), int(n.size)
    off = np.concatenate(all_off) if all_off else np.zeros(0)
    rad = np.concatenate(all_rad) if all_rad else np.zeros(0)
    hist = np.histogram(off, bins=np.asarray(hist_bins, dtype=float))[0] if off.size else np.zeros(len(hist_bins) - 1)
    return DispersionReport(
        radial_spread=rs,
        tangential_spread=ts,
        mean_offset=mo,
        counts=cnt,
        overall_mean_offset=float(off.mean()) if off.size else 0.0,
        max_abs_radial=float(np.abs(rad).max()) if rad.size else 0.0,
        mean_radial_spread=float(np.mean(list(rs.values()))) if rs else 0.0,
        mean_tangential_spread=float(np.mean(list(ts.values()))) if ts else 0.0,
        offset_histogram=tuple(int(h) for h in hist),
    )


# --------------------------------------------------------------------------- elimination


@dataclass
class EliminationReport:
    per_frame: list
    mean_fraction: float
    range_bins: dict
    speed_bins: dict
    heading_bins: dict
    eliminated: int
    total: int
    bin_counts: dict = field(default_factory=dict)

    def rows(self, prefix: str = "") -> list[tuple[str, str, float]]:
        out = [(prefix + "elimination_mean", "all", self.mean_fraction)]
        out += [(prefix + "elimination_range", b, v) for b, v in self.range_bins.items()]
        out += [(prefix + "elimination_speed", b, v) for b, v in self.speed_bins.items()]
        out += [(prefix + "elimination_heading", b, v) for b, v in self.heading_bins.items()]
        return out


def _binned(values, eliminated, edges, counts: dict, key: str) -> dict:
    idx = np.digitize(values, edges[1:-1], right=False)
    inside = (values >= edges[0]) & (values <= edges[-1])
    out = {}
    for i, label in enumerate(_bin_labels(edges)):
        sel = inside & (idx == i)
        out[label] = float(eliminated[sel].mean()) if sel.any() else float("nan")
        counts[f"{key}{label}"] = (int(eliminated[sel].sum()), int(sel.sum()))
    return out


def elimination_stats(
    doppdrive_out,
    fixed_window_out,
    truth: GroundTruth,
    range_bins=RANGE_BINS,
    speed_bins=SPEED_BINS,
    heading_bins=HEADING_BINS_DEG,
) -> EliminationReport:
    """Fraction of ground-truth dynamic points in the fixed-window clouds that are missing from DoppDrive's.

    The per-frame fractions average frames with at least one dynamic point;
    bin values pool all frames. Speed bins use the object's true speed,
    heading bins its absolute heading relative to the measuring radar frame in
    degrees, range bins the true range at measurement.
    """
    dd, fx = _as_list(doppdrive_out), _as_list(fixed_window_out)
    if len(dd) != len(fx):
        raise WindowMismatch(f"{len(dd)} DoppDrive clouds vs {len(fx)} fixed-window clouds")
    per_frame, ids_all, elim_all = [], [], []
    for a, b in zip(dd, fx):
        if abs(a.timestamp - b.timestamp) > 1e-9:
            raise WindowMismatch(f"clouds at t={a.timestamp} and t={b.timestamp} are not aligned")
        dyn_ids = b.ids[truth.is_dynamic(b.ids)] if len(b) else np.zeros(0, dtype=np.int64)
        gone = ~np.isin(dyn_ids, a.ids)
        if dyn_ids.size:
            per_frame.append(float(gone.mean()))
        ids_all.append(dyn_ids)
        elim_all.append(gone)
    ids = np.concatenate(ids_all) if ids_all else np.zeros(0, dtype=np.int64)
    gone = np.concatenate(elim_all) if elim_all else np.zeros(0, dtype=bool)
    rng = np.hypot(truth.true_position[ids, 0], truth.true_position[ids, 1])
    speed = np.array([abs(truth.objects[o].speed) for o in truth.object_id[ids]])
    heading = np.degrees(np.abs(truth.alpha[ids]))
    counts: dict = {}
    return EliminationReport(
        per_frame=per_frame,
        mean_fraction=float(np.mean(per_frame)) if per_frame else 0.0,
        range_bins=_binned(rng, gone, np.asarray(range_bins, float), counts, "range"),
        speed_bins=_binned(speed, gone, np.asarray(speed_bins, float), counts, "speed"),
        heading_bins=_binned(heading, gone, np.asarray(heading_bins, float), counts, "heading"),
        eliminated=int(gone.sum()),
        total=int(gone.size),
        bin_counts=counts,
    )


# --------------------------------------------------------------------------- detection


@dataclass(frozen=True)
class DetectorParams:
    cell: float = 0.5
    min_points: int = 4
    min_speed: float = 0.5


def cluster_detect(cloud: AggregatedCloud, params: DetectorParams = DetectorParams()) -> list[Box]:
    """Axis-aligned BEV boxes around 8-connected occupied cells of moving points.

    Components with fewer than ``min_points`` points are dropped. A box spans
    the full extent of its component's cells; its score is the point count.
    """
    if len(cloud) == 0:
        return []
    moving = np.abs(cloud.v_dyn) >= params.min_speed
    xy = cloud.xyz[moving, :2]
    if xy.shape[0] == 0:
        return []
    cells = np.floor(xy / params.cell).astype(np.int64)
    lo = cells.min(axis=0)
    cells -= lo
    shape = tuple(cells.max(axis=0) + 1)
    grid = np.zeros(shape, dtype=bool)
    grid[cells[:, 0], cells[:, 1]] = True
    labels, n = ndimage.label(grid, structure=np.ones((3, 3), dtype=int))
    point_label = labels[cells[:, 0], cells[:, 1]]
    counts = np.bincount(point_label, minlength=n + 1)
    boxes = []
    for lab, sl in enumerate(ndimage.find_objects(labels), start=1):
        if counts[lab] < params.min_points:
            continue
        x0 = (sl[0].start + lo[0]) * params.cell
        x1 = (sl[0].stop + lo[0]) * params.cell
        y0 = (sl[1].start + lo[1]) * params.cell
        y1 = (sl[1].stop + lo[1]) * params.cell
        boxes.append(Box(-1, 0.5 * (x0 + x1), 0.5 * (y0 + y1), y1 - y0, x1 - x0, 0.0, score=float(counts[lab])))
    return boxes


def _polygon(b: Box) -> Polygon:
    if b.yaw == 0.0:
        hw, hl = 0.5 * b.width, 0.5 * b.length
        return shapely_box(b.cx - hw, b.cy - hl, b.cx + hw, b.cy + hl)
    return Polygon(b.corners())


def bev_iou(a: Box, b: Box) -> float:
    pa, pb = _polygon(a), _polygon(b)
    inter = pa.intersection(pb).area
    if inter == 0.0:
        return 0.0
    return float(inter / (pa.area + pb.area - inter))


@dataclass
class DetectionEvalReport:
    precision: list
    recall: list
    ap: float
    range_ap: dict = field(default_factory=dict)
    n_gt: int = 0
    n_det: int = 0

    def rows(self, prefix: str = "") -> list[tuple[str, str, float]]:
        out = [(prefix + "ap", "all", self.ap)]
        out += [(prefix + "ap_range", b, v) for b, v in self.range_ap.items()]
        return out


def _match(dets_per_frame, gts_per_frame, iou_threshold):
    scores, tp = [], []
    for dets, gts in zip(dets_per_frame, gts_per_frame):
        order = sorted(range(len(dets)), key=lambda i: -dets[i].score)
        taken = np.zeros(len(gts), dtype=bool)
        gpolys = [_polygon(g) for g in gts]
        for i in order:
            d = dets[i]
            dp = _polygon(d)
            best, best_j = iou_threshold, -1
            for j, gp in enumerate(gpolys):
                if taken[j] or not dp.intersects(gp):
                    continue
                inter = dp.intersection(gp).area
                iou = inter / (dp.area + gp.area - inter)
                if iou >= best:
                    best, best_j = iou, j
            if best_j >= 0:
                taken[best_j] = True
            scores.append(d.score)
            tp.append(best_j >= 0)
    return np.array(scores), np.array(tp, dtype=bool)


def _ap_from(scores, tp, n_gt):
    if n_gt == 0 or scores.size == 0:
        return [], [], 0.0
    order = np.argsort(-scores, kind="stable")
    tp = tp[order]
    ctp = np.cumsum(tp)
    precision = ctp / np.arange(1, tp.size + 1)
    recall = ctp / n_gt
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    r = np.concatenate(([0.0], recall))
    p = np.concatenate(([envelope[0]], envelope))
    ap = float(np.sum(np.diff(r) * 0.5 * (p[1:] + p[:-1])))
    return precision.tolist(), recall.tolist(), ap


def average_precision(
    detections: Sequence[Sequence[Box]],
    ground_truth: Sequence[Sequence[Box]],
    iou_threshold: float = 0.1,
    range_bins=RANGE_BINS,
) -> DetectionEvalReport:
    """AP over frames with greedy, score-ordered, one-to-one matching in BEV.

    ``detections`` and ``ground_truth`` hold one list of boxes per frame (a
    bare list of boxes is treated as a single frame). The precision envelope
    is integrated over recall with the trapezoid rule.
    """
    if not 0 < iou_threshold < 1:
        raise ValueError("iou_threshold must be within (0, 1)")
    if detections and isinstance(detections[0], Box):
        detections = [detections]
    if ground_truth and isinstance(ground_truth[0], Box):
        ground_truth = [ground_truth]
    if len(detections) < len(ground_truth):
        detections = list(detections) + [[] for _ in range(len(ground_truth) - len(detections))]
    n_gt = sum(len(g) for g in ground_truth)
    scores, tp = _match(detections, ground_truth, iou_threshold)
    precision, recall, ap = _ap_from(scores, tp, n_gt)

    range_ap = {}
    if range_bins is not None:
        edges = np.asarray(range_bins, dtype=float)
        for i, label in enumerate(_bin_labels(edges)):
            inside = lambda b: edges[i] <= math.hypot(b.cx, b.cy) < edges[i + 1]  # noqa: E731
            g = [[b for b in frame if inside(b)] for frame in ground_truth]
            d = [[b for b in frame if inside(b)] for frame in detections]
            ng = sum(len(x) for x in g)
            if ng == 0:
                continue
            s, t = _match(d, g, iou_threshold)
            range_ap[label] = _ap_from(s, t, ng)[2]
    return DetectionEvalReport(precision, recall, ap, range_ap, n_gt, int(scores.size))


def report_dict(report) -> dict:
    d = asdict(report)
    d["type"] = type(report).__name__
    return d
