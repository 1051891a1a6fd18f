import json
import re
import subprocess
import sys
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from doppdrive import formats
from doppdrive.cli import main
from doppdrive.heading import GThetaTable

SCENARIO = {
    "duration": 1.5,
    "fps": 20,
    "seed": 5,
    "static_points_per_frame": 20,
    "ego_profile": [{"speed": 20.0}],
    "objects": [
        {"position": [0, 60], "speed": 30.0, "heading_deg": 0, "points_per_frame": 10},
        {"position": [5, 40], "speed": 10.0, "heading_deg": 3, "points_per_frame": 10},
    ],
}
CONFIG = {
    "tolerance_d": 2.0,
    "window_seconds": 2.0,
    "baseline_window_seconds": 0.7,
    "heading": {"kind": "laplace", "mu_deg": 0.0, "b_deg": 3.1},
    "ego_source": "metadata",
    "seed": 0,
}


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    sc = write_json(d / "scenario.json", SCENARIO)
    cfg = write_json(d / "config.json", CONFIG)
    assert main(["simulate", "--scenario", sc, "--out", str(d / "frames.jsonl"), "--truth", str(d / "truth.json")]) == 0
    for mode in ("none", "standard", "doppdrive"):
        assert main(["aggregate", "--frames", str(d / "frames.jsonl"), "--config", cfg, "--mode", mode,
                     "--out", str(d / f"{mode}.jsonl")]) == 0
    return d


def test_simulate_frame_count_and_determinism(work, tmp_path):
    frames = formats.read_frames(work / "frames.jsonl")
    assert len(frames) == round(SCENARIO["duration"] * SCENARIO["fps"])
    assert main(["simulate", "--scenario", str(work / "scenario.json"), "--out", str(tmp_path / "f.jsonl"),
                 "--truth", str(tmp_path / "t.json")]) == 0
    assert (tmp_path / "f.jsonl").read_bytes() == (work / "frames.jsonl").read_bytes()
    assert (tmp_path / "t.json").read_bytes() == (work / "truth.json").read_bytes()


def test_simulate_invalid_fps(tmp_path, capsys):
    sc = write_json(tmp_path / "s.json", {**SCENARIO, "fps": 0})
    code = main(["simulate", "--scenario", sc, "--out", str(tmp_path / "f"), "--truth", str(tmp_path / "t")])
    assert code == 2 and "fps" in capsys.readouterr().err
    assert not (tmp_path / "f").exists()


def test_simulate_seed_env_changes_output(tmp_path, monkeypatch):
    monkeypatch.setenv("DOPPDRIVE_SEED", "77")
    sc = write_json(tmp_path / "s.json", SCENARIO)
    main(["simulate", "--scenario", sc, "--out", str(tmp_path / "a"), "--truth", str(tmp_path / "ta")])
    monkeypatch.setenv("DOPPDRIVE_SEED", "5")
    main(["simulate", "--scenario", sc, "--out", str(tmp_path / "b"), "--truth", str(tmp_path / "tb")])
    assert (tmp_path / "a").read_bytes() != (tmp_path / "b").read_bytes()


def test_aggregate_none_equals_input(work):
    frames = formats.read_frames(work / "frames.jsonl")
    run = formats.read_aggregated(work / "none.jsonl")
    assert run.mode == "none" and len(run.clouds) == len(frames)
    for f, c in zip(frames, run.clouds):
        np.testing.assert_array_equal(c.xyz, f.positions)
        np.testing.assert_array_equal(c.ids, f.ids)
        assert np.all(c.frame_index == 0)


def test_aggregate_static_scene_doppdrive_equals_standard(tmp_path):
    sc = write_json(tmp_path / "s.json", {**SCENARIO, "objects": [], "static_points_per_frame": 30,
                                              "noise": {"sigma_range": 0, "sigma_azimuth_deg": 0, "sigma_doppler": 0}})
    cfg = write_json(tmp_path / "c.json", {**CONFIG, "window_seconds": 0.7})
    main(["simulate", "--scenario", sc, "--out", str(tmp_path / "f"), "--truth", str(tmp_path / "t")])
    out = {}
    for mode in ("standard", "doppdrive"):
        assert main(["aggregate", "--frames", str(tmp_path / "f"), "--config", cfg, "--mode", mode,
                     "--out", str(tmp_path / mode)]) == 0
        out[mode] = formats.read_aggregated(tmp_path / mode).clouds
    for a, b in zip(out["standard"], out["doppdrive"]):
        np.testing.assert_array_equal(np.sort(a.ids), np.sort(b.ids))
        # static points are shifted by v_dyn * dt, which is zero up to rounding without noise
        order_a, order_b = np.argsort(a.ids), np.argsort(b.ids)
        np.testing.assert_allclose(a.xyz[order_a], b.xyz[order_b], atol=1e-9)


def test_aggregate_missing_config_key(work, tmp_path, capsys):
    cfg = write_json(tmp_path / "c.json", {k: v for k, v in CONFIG.items() if k != "tolerance_d"})
    code = main(["aggregate", "--frames", str(work / "frames.jsonl"), "--config", cfg, "--mode", "doppdrive",
                 "--out", str(tmp_path / "o")])
    assert code == 2 and "tolerance_d" in capsys.readouterr().err


def test_aggregate_no_consensus_exit_3(tmp_path, capsys):
    rng = np.random.default_rng(0)
    pts = [{"x": float(rng.uniform(-20, 20)), "y": float(rng.uniform(10, 80)), "z": 0.0,
            "d": float(rng.uniform(-40, 40)), "i": 1.0} for _ in range(40)]
    frame = {"t": 0.0, "ego": {"vx": None, "vy": None, "yaw_rate": 0.0}, "points": pts}
    f = tmp_path / "f.jsonl"
    f.write_text(json.dumps(frame) + "\n")
    cfg = write_json(tmp_path / "c.json", {**CONFIG, "ego_source": "estimate"})
    code = main(["aggregate", "--frames", str(f), "--config", cfg, "--mode", "doppdrive", "--out", str(tmp_path / "o")])
    assert code == 3, capsys.readouterr().err
    cfg = write_json(tmp_path / "m.json", CONFIG)
    assert main(["aggregate", "--frames", str(f), "--config", cfg, "--mode", "standard", "--out", str(tmp_path / "o")]) == 2


def test_aggregate_estimated_ego_matches_metadata(work, tmp_path):
    cfg = write_json(tmp_path / "c.json", {**CONFIG, "ego_source": "estimate"})
    assert main(["aggregate", "--frames", str(work / "frames.jsonl"), "--config", cfg, "--mode", "doppdrive",
                 "--out", str(tmp_path / "o")]) == 0
    est = formats.read_aggregated(tmp_path / "o").clouds[-1]
    meta = formats.read_aggregated(work / "doppdrive.jsonl").clouds[-1]
    assert abs(len(est) - len(meta)) <= 0.1 * len(meta)


def test_eval_identical_runs(work, tmp_path):
    dd = str(work / "doppdrive.jsonl")
    assert main(["eval", "--agg", dd, dd, "--truth", str(work / "truth.json"), "--out", str(tmp_path / "r.json")]) == 0
    doc = json.loads((tmp_path / "r.json").read_text())
    a, b = doc["runs"]
    assert a["label"] != b["label"]
    assert a["detection"]["ap"] == b["detection"]["ap"]
    assert all(e["eliminated"] == 0 for e in doc["elimination"])
    rows = formats.read_table(tmp_path / "r.csv")
    assert any(r[0] == "ap" for r in rows)


def test_eval_doppdrive_beats_standard_offset(work, tmp_path):
    assert main(["eval", "--agg", str(work / "standard.jsonl"), str(work / "doppdrive.jsonl"),
                 "--truth", str(work / "truth.json"), "--out", str(tmp_path / "r.json"), "--warmup", "0.7"]) == 0
    doc = json.loads((tmp_path / "r.json").read_text())
    std, dd = (r["dispersion"]["overall_mean_offset"] for r in doc["runs"])
    assert dd < std


def test_eval_missing_ground_truth_exit_4(work, tmp_path, capsys):
    text = (work / "doppdrive.jsonl").read_text()
    bad = tmp_path / "bad.jsonl"
    bad.write_text(re.sub(r'"ids":\[(\d+)', r'"ids":[99999999', text))
    code = main(["eval", "--agg", str(bad), "--truth", str(work / "truth.json"), "--out", str(tmp_path / "r.json")])
    assert code == 4 and "99999999" in capsys.readouterr().err


def test_eval_window_mismatch_exit_4(work, tmp_path):
    lines = (work / "standard.jsonl").read_text().splitlines(keepends=True)
    short = tmp_path / "short.jsonl"
    short.write_text("".join(lines[:-1]))
    code = main(["eval", "--agg", str(work / "doppdrive.jsonl"), str(short), "--truth", str(work / "truth.json"),
                 "--out", str(tmp_path / "r.json")])
    assert code == 4


def svg_root(path):
    return ET.parse(path).getroot()


def classes(root, cls):
    return [e for e in root.iter() if cls in (e.get("class") or "").split()]


def test_plot_empty_frame_has_axes(tmp_path):
    f = tmp_path / "f.jsonl"
    f.write_text('{"t":0.0,"ego":{"vx":0.0,"vy":10.0,"yaw_rate":0.0},"points":[]}\n')
    assert main(["plot", "--frames", str(f), "--out", str(tmp_path / "p.svg")]) == 0
    root = svg_root(tmp_path / "p.svg")
    assert classes(root, "axes") and not classes(root, "point")


def test_plot_point_counts(work, tmp_path):
    frames = formats.read_frames(work / "frames.jsonl")
    assert main(["plot", "--frames", str(work / "frames.jsonl"), "--frame-index", "10", "--truth", str(work / "truth.json"),
                 "--out", str(tmp_path / "p.svg")]) == 0
    root = svg_root(tmp_path / "p.svg")
    assert len(classes(root, "point")) == len(frames[10])
    # straight ego at 20 m/s: v_dyn = d - 20 cos(theta)
    f = frames[10]
    v = f.doppler - 20.0 * f.positions[:, 1] / np.hypot(f.positions[:, 0], f.positions[:, 1])
    assert len(classes(root, "dynamic")) == int(np.sum(np.abs(v) >= 0.5))
    assert len(classes(root, "truth")) == 2
    agg = formats.read_aggregated(work / "doppdrive.jsonl").clouds[10]
    assert main(["plot", "--agg", str(work / "doppdrive.jsonl"), "--frames", str(work / "frames.jsonl"),
                 "--frame-index", "10", "--out", str(tmp_path / "q.svg")]) == 0
    assert len(classes(svg_root(tmp_path / "q.svg"), "point")) == len(agg)


def test_plot_frame_index_out_of_range(work, tmp_path):
    assert main(["plot", "--frames", str(work / "frames.jsonl"), "--frame-index", "999", "--out", str(tmp_path / "p")]) == 2


def test_plot_d_sweep_bars(tmp_path):
    rows = [("ap", f"doppdrive-D{d}", 0.1 * d) for d in (1, 2, 3, 4, 5)]
    formats.write_table(tmp_path / "t.csv", rows + [("offset", "x", 1.0)])
    assert main(["plot", "--report", str(tmp_path / "t.csv"), "--metric", "ap", "--out", str(tmp_path / "b.svg")]) == 0
    root = svg_root(tmp_path / "b.svg")
    charts = classes(root, "chart")
    assert len(charts) == 1 and charts[0].get("data-metric") == "ap"
    assert len(classes(root, "bar")) == 5


def test_lut_defaults_and_round_trip(tmp_path):
    out = tmp_path / "g.csv"
    assert main(["lut", "--out", str(out)]) == 0
    table = GThetaTable.load(out)
    assert table.values.size == 3601
    table.save(tmp_path / "g2.csv")
    assert (tmp_path / "g2.csv").read_bytes() == out.read_bytes()
    back = GThetaTable.load(tmp_path / "g2.csv")
    np.testing.assert_array_equal(back.values, table.values)


def test_lut_bad_resolution(tmp_path, capsys):
    assert main(["lut", "--resolution", "0", "--out", str(tmp_path / "g.csv")]) == 2
    assert "resolution" in capsys.readouterr().err.lower()


def test_console_script_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "doppdrive.cli", "lut", "--resolution", "1", "--out", str(tmp_path / "g")],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    r = subprocess.run([sys.executable, "-m", "doppdrive.cli", "simulate", "--scenario", str(tmp_path / "missing.json"),
                        "--out", "x", "--truth", "y"], capture_output=True, text=True)
    assert r.returncode == 2 and "missing.json" in r.stderr
