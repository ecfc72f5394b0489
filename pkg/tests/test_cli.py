import json

import pytest

from motbench.cli import RunManifest, main, manifest_path, parse_overrides
from motbench.metrics import COLUMNS
from motbench.model import parse_detections, parse_tracks
from motbench.synth import SceneConfig


@pytest.fixture
def scene_dir(tmp_path):
    cfg = tmp_path / "scene.json"
    cfg.write_text(SceneConfig(n_targets=3, frame_count=40, noise_sigma=1.0, seed=5, name="demo").to_json())
    out = tmp_path / "demo"
    assert main(["gen", str(cfg), str(out)]) == 0
    return out


def test_gen_is_byte_identical(tmp_path, scene_dir):
    again = tmp_path / "again"
    assert main(["gen", str(tmp_path / "scene.json"), str(again)]) == 0
    for name in ("gt.csv", "det.csv", "seqinfo.ini"):
        assert (again / name).read_bytes() == (scene_dir / name).read_bytes()


def test_gen_without_misses_has_one_detection_per_gt_box(scene_dir):
    gt = parse_tracks((scene_dir / "gt.csv").read_text())
    dets = parse_detections((scene_dir / "det.csv").read_text())
    assert sum(len(t) for t in gt) == len(dets)


def test_track_then_eval(tmp_path, scene_dir, capsys):
    hyp = tmp_path / "runs" / "tbd.csv"
    assert main(["track", "TBD", str(scene_dir / "det.csv"), str(hyp), "--seed", "4"]) == 0
    m = RunManifest.from_json(manifest_path(hyp).read_text())
    assert m.tracker == "TBD" and m.seed == 4 and m.seconds >= 0
    prefix = str(tmp_path / "res")
    assert main(["eval", str(scene_dir / "gt.csv"), str(hyp), prefix, "--plot"]) == 0
    table = capsys.readouterr().out
    header, row = table.splitlines()
    assert header.split() == ["Method", *COLUMNS]
    assert row.split()[0] == "TBD"
    assert (tmp_path / "res.txt").read_text() == table
    kv = (tmp_path / "res.kv").read_text()
    assert "MOTA=" in kv
    frames = (tmp_path / "res_frames.csv").read_text().splitlines()
    assert frames[0] == "frame,fp,fn,idsw" and len(frames) == 41
    assert (tmp_path / "res_frames.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_track_dp_mode_recorded(tmp_path, scene_dir):
    hyp = tmp_path / "dp.csv"
    assert main(["track", "DP_NMS", str(scene_dir / "det.csv"), str(hyp), "--mode", "exact",
                 "--params", "nms_threshold=0.4"]) == 0
    m = json.loads(manifest_path(hyp).read_text())
    assert m["params"]["mode"] == "exact" and m["params"]["nms_threshold"] == 0.4


def test_unknown_tracker_lists_valid_names(tmp_path, scene_dir, capsys):
    assert main(["track", "FOO", str(scene_dir / "det.csv"), str(tmp_path / "x.csv")]) == 1
    err = capsys.readouterr().err
    assert "FOO" in err and "DP_NMS, CEM, SMOT, TBD, JPDA_m" in err
    assert not (tmp_path / "x.csv").exists()


def test_unknown_parameter_rejected(tmp_path, scene_dir, capsys):
    assert main(["track", "TBD", str(scene_dir / "det.csv"), str(tmp_path / "x.csv"), "--params", "bogus=1"]) == 1
    assert "bogus" in capsys.readouterr().err


def test_mode_only_for_dp_nms(tmp_path, scene_dir):
    assert main(["track", "TBD", str(scene_dir / "det.csv"), str(tmp_path / "x.csv"), "--mode", "exact"]) == 1


def test_params_file(tmp_path, scene_dir):
    pf = tmp_path / "p.txt"
    pf.write_text("# tuned\nocclusion_max = 5\n")
    hyp = tmp_path / "x.csv"
    assert main(["track", "TBD", str(scene_dir / "det.csv"), str(hyp), "--params-file", str(pf)]) == 0
    assert RunManifest.from_json(manifest_path(hyp).read_text()).params["occlusion_max"] == 5


def test_parse_overrides():
    assert parse_overrides("a=1, b=2.5") == {"a": 1.0, "b": 2.5}
    assert parse_overrides("a=1\n# c\nb = -3\n") == {"a": 1.0, "b": -3.0}
    with pytest.raises(Exception):
        parse_overrides("a")


def test_empty_detections_give_empty_tracks(tmp_path):
    det = tmp_path / "det.csv"
    det.write_text("")
    out = tmp_path / "out.csv"
    assert main(["track", "JPDA_m", str(det), str(out)]) == 0
    assert out.read_text() == ""


def test_eval_errors(tmp_path, scene_dir, capsys):
    empty = tmp_path / "gt.csv"
    empty.write_text("")
    assert main(["eval", str(empty), str(scene_dir / "gt.csv"), str(tmp_path / "r")]) == 1
    bad = tmp_path / "bad.csv"
    bad.write_text("1,1,0,0,5\n")
    assert main(["eval", str(scene_dir / "gt.csv"), str(bad), str(tmp_path / "r")]) == 1
    assert "line 1" in capsys.readouterr().err
    assert main(["eval", str(scene_dir / "gt.csv"), str(tmp_path / "missing.csv"), str(tmp_path / "r")]) == 1


def test_tune_writes_report_and_plot(tmp_path, scene_dir, capsys):
    out = tmp_path / "tune" / "report.txt"
    assert main(["tune", "DP_NMS", str(scene_dir), str(out), "--runs", "3", "--seed", "2", "--plot"]) == 0
    assert capsys.readouterr().out.startswith("best run ")
    text = out.read_text()
    assert text.startswith("tracker=DP_NMS\nruns=3\nseed=2\n")
    assert out.with_suffix(".png").exists()
    again = tmp_path / "again.txt"
    assert main(["tune", "DP_NMS", str(scene_dir), str(again), "--runs", "3", "--seed", "2", "--jobs", "2"]) == 0
    assert again.read_bytes() == out.read_bytes()


def test_tune_needs_ground_truth(tmp_path, scene_dir, capsys):
    (scene_dir / "gt.csv").unlink()
    assert main(["tune", "TBD", str(scene_dir), str(tmp_path / "r.txt"), "--runs", "1"]) == 1
    assert "gt.csv" in capsys.readouterr().err
