"""Command-line entry point: simulate -> aggregate -> eval -> plot, plus g(theta) table export.

Exit codes: 0 success, 2 input/format error, 3 ego-velocity estimation
failure, 4 frame or ground-truth alignment error.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import formats
from .aggregator import MODES, sliding_aggregate, with_estimated_ego
from .doppler import decompose_arrays
from .errors import (
    DoppDriveError,
    FormatError,
    InsufficientPoints,
    MissingGroundTruth,
    NoConsensus,
    UnknownPoint,
    WindowMismatch,
)
from .evaluation import (
    DetectorParams,
    average_precision,
    cluster_detect,
    dispersion,
    elimination_stats,
    frame_of,
    report_dict,
)
from .heading import HeadingDistribution, build_table
from .simulator import sparsify, synthesize
from .svg import bar_charts_svg, bev_svg

log = logging.getLogger("doppdrive")

EXIT_OK, EXIT_INPUT, EXIT_ESTIMATION, EXIT_ALIGNMENT = 0, 2, 3, 4


def cmd_simulate(args) -> int:
    scenario = formats.read_scenario(args.scenario)
    frames, truth = synthesize(scenario.spec)
    if scenario.sparsity is not None:
        frames = sparsify(frames, scenario.sparsity, seed=scenario.spec.seed + 10_000)
    formats.write_frames(args.out, frames)
    formats.write_truth(args.truth, truth)
    log.info("wrote %d frames to %s", len(frames), args.out)
    return EXIT_OK


def _resolve_ego(frames, run: formats.RunConfig):
    if run.ego_source == "metadata":
        for f in frames:
            if f.ego.velocity is None:
                raise FormatError(f"frame at t={f.timestamp} has no ego velocity and ego_source is 'metadata'")
        return frames
    rng = np.random.default_rng(run.seed)
    out = []
    for f in frames:
        try:
            out.append(with_estimated_ego(f, rng, use_prior=True))
        except InsufficientPoints as e:
            if f.ego.velocity is None:
                raise NoConsensus(f"t={f.timestamp}: {e}") from None
            log.warning("t=%s: %s; using metadata ego velocity", f.timestamp, e)
            out.append(f)
    return out


def cmd_aggregate(args) -> int:
    run = formats.read_config(args.config)
    mode = args.mode or run.mode
    if mode is None:
        raise FormatError("no aggregation mode: pass --mode or set mode in the config")
    frames = formats.read_frames(args.frames)
    frames = _resolve_ego(frames, run)
    cfg = run.aggregation_config()
    clouds = list(sliding_aggregate(frames, cfg, mode))
    label = args.label or (f"{mode}-D{cfg.tolerance_d:g}" if mode == "doppdrive" else mode)
    formats.write_aggregated(args.out, clouds, mode, label)
    log.info("wrote %d aggregated clouds to %s", len(clouds), args.out)
    return EXIT_OK


def _unique_labels(labels):
    seen: dict[str, int] = {}
    out = []
    for lab in labels:
        seen[lab] = seen.get(lab, 0) + 1
        out.append(lab if seen[lab] == 1 else f"{lab}#{seen[lab]}")
    return out


def _bin_for(label: str, bin_: str) -> str:
    return label if bin_ == "all" else f"{label}:{bin_}"


def cmd_eval(args) -> int:
    truth = formats.read_truth(args.truth)
    runs = [formats.read_aggregated(p) for p in args.agg]
    labels = _unique_labels([r.label for r in runs])
    times = [np.array([c.timestamp for c in r.clouds]) for r in runs]
    for path, t in zip(args.agg[1:], times[1:]):
        if t.shape != times[0].shape or np.any(np.abs(t - times[0]) > 1e-9):
            raise WindowMismatch(f"{path}: frames do not align with {args.agg[0]}")
    start = truth.times[0] + args.warmup - 1e-9 if truth.times.size else 0.0
    scored = [[c for c in r.clouds if c.timestamp >= start] for r in runs]
    for c in scored[0] if scored else []:
        frame_of(truth, c.timestamp)

    detector = DetectorParams(args.cell, args.min_points, args.min_speed)
    doc = {"truth": str(args.truth), "iou_threshold": args.iou, "warmup": args.warmup,
           "detector": report_dict(detector), "runs": [], "elimination": []}
    rows = []
    for path, run, label, clouds in zip(args.agg, runs, labels, scored):
        disp = dispersion(clouds, truth)
        gts = [truth.boxes[frame_of(truth, c.timestamp)] for c in clouds]
        det = average_precision([cluster_detect(c, detector) for c in clouds], gts, args.iou)
        doc["runs"].append({"file": str(path), "label": label, "mode": run.mode,
                            "dispersion": report_dict(disp), "detection": report_dict(det)})
        rows += [(m, _bin_for(label, b), v) for m, b, v in disp.rows() + det.rows()]
    for i, run in enumerate(runs):
        if run.mode != "doppdrive":
            continue
        for j in range(len(runs)):
            if j == i:
                continue
            el = elimination_stats(scored[i], scored[j], truth)
            pair = f"{labels[i]}|{labels[j]}"
            doc["elimination"].append({"doppdrive": labels[i], "reference": labels[j], **report_dict(el)})
            rows += [(m, _bin_for(pair, b), v) for m, b, v in el.rows()]
    out = Path(args.out)
    formats.write_report(out, doc)
    table = Path(args.table) if args.table else out.with_suffix(".csv")
    formats.write_table(table, rows)
    log.info("wrote %s and %s", out, table)
    return EXIT_OK


def cmd_plot(args) -> int:
    if args.report:
        rows = formats.read_table(args.report)
        if args.metric:
            rows = [r for r in rows if r[0] in set(args.metric)]
        formats.atomic_write_text(args.out, bar_charts_svg(rows))
        return EXIT_OK
    if not (args.frames or args.agg):
        raise FormatError("plot needs --report, or --frames and/or --agg with --frame-index")
    n = args.frame_index
    detector = DetectorParams(args.cell, args.min_points, args.min_speed)
    boxes, t = [], None
    if args.agg:
        clouds = formats.read_aggregated(args.agg).clouds
        if not 0 <= n < len(clouds):
            raise FormatError(f"--frame-index {n} out of range (0..{len(clouds) - 1})", args.agg)
        cloud = clouds[n]
        t = cloud.timestamp
        xy, dyn = cloud.xyz[:, :2], np.abs(cloud.v_dyn) >= detector.min_speed
        boxes += [(b.corners(), "detection") for b in cluster_detect(cloud, detector)]
    if args.frames:
        frames = formats.read_frames(args.frames)
        if not 0 <= n < len(frames):
            raise FormatError(f"--frame-index {n} out of range (0..{len(frames) - 1})", args.frames)
        frame = frames[n]
        if t is not None and abs(frame.timestamp - t) > 1e-9:
            raise WindowMismatch(f"frame {n} is at t={frame.timestamp} but the aggregated cloud is at t={t}")
        t = frame.timestamp
        if not args.agg:
            xy = frame.positions[:, :2]
            if frame.ego.velocity is None or len(frame) == 0:
                v = frame.doppler
            else:
                v = decompose_arrays(frame.positions, frame.doppler, frame.ego.velocity)[2]
            dyn = np.abs(v) >= detector.min_speed
    if args.truth:
        truth = formats.read_truth(args.truth)
        boxes += [(b.corners(), "truth") for b in truth.boxes[frame_of(truth, t)]]
    title = f"t = {t:.2f} s"
    formats.atomic_write_text(args.out, bev_svg(xy, dyn, boxes, title=title))
    return EXIT_OK


def cmd_lut(args) -> int:
    dist = HeadingDistribution.laplace(args.mu, args.b)
    table = build_table(dist, math.radians(args.resolution))
    table.save(args.out)
    log.info("wrote %d rows to %s", table.values.size, args.out)
    return EXIT_OK


def _detector_args(p) -> None:
    d = DetectorParams()
    p.add_argument("--cell", type=float, default=d.cell, help="detector grid cell [m]")
    p.add_argument("--min-points", type=int, default=d.min_points, help="points needed for a detection")
    p.add_argument("--min-speed", type=float, default=d.min_speed, help="|v_dyn| marking a point dynamic [m/s]")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="doppdrive", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="synthesize frames and ground truth from a scenario file")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True, help="frame file (one JSON object per line)")
    p.add_argument("--truth", required=True, help="ground-truth file")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("aggregate", help="sliding-window aggregation of a frame file")
    p.add_argument("--frames", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--mode", choices=MODES + ("fixed_radial",), help="overrides the config's mode")
    p.add_argument("--label", help="name used for this run in eval reports")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("eval", help="score aggregated runs against ground truth")
    p.add_argument("--agg", required=True, nargs="+")
    p.add_argument("--truth", required=True)
    p.add_argument("--out", required=True, help="report document (JSON); a metric,bin,value table goes next to it")
    p.add_argument("--table", help="path for the flat table (default: --out with .csv suffix)")
    p.add_argument("--iou", type=float, default=0.1)
    p.add_argument("--warmup", type=float, default=0.0, help="skip frames in the first N seconds")
    _detector_args(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("plot", help="render a report table or one frame as SVG")
    p.add_argument("--report", help="metric,bin,value table from eval")
    p.add_argument("--metric", action="append", help="only plot this metric (repeatable)")
    p.add_argument("--frames")
    p.add_argument("--agg")
    p.add_argument("--truth", help="overlay ground-truth boxes")
    p.add_argument("--frame-index", type=int, default=0)
    p.add_argument("--out", required=True)
    _detector_args(p)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("lut", help="export a g(theta) lookup table for a Laplace heading prior")
    p.add_argument("--mu", type=float, default=0.0, help="heading mean [deg]")
    p.add_argument("--b", type=float, default=3.1, help="heading scale [deg]")
    p.add_argument("--resolution", type=float, default=0.1, help="grid spacing [deg]")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_lut)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except NoConsensus as e:
        code = EXIT_ESTIMATION
        msg = str(e)
    except (WindowMismatch, MissingGroundTruth, UnknownPoint) as e:
        code = EXIT_ALIGNMENT
        msg = e.args[0] if e.args else str(e)
    except (DoppDriveError, ValueError, OSError) as e:
        code = EXIT_INPUT
        msg = str(e)
    print(f"doppdrive {args.command}: error: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
