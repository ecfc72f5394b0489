import json
import math

import numpy as np
import pytest

from motbench.model import parse_detections, parse_tracks, serialize_detections, serialize_tracks
from motbench.solvers import KalmanState, MotionModel
from motbench.synth import (
    OracleSizeError,
    SceneConfig,
    generate_scene,
    oracle_assignment,
    oracle_jpda,
    oracle_kbest,
)
from motbench.trackers.jpda import JPDAConfig


def test_noise_free_detections_equal_gt():
    cfg = SceneConfig(n_targets=4, frame_count=30, seed=2)
    gt, dets = generate_scene(cfg)
    key = lambda fb: (fb[0], fb[1].left, fb[1].top)
    gt_boxes = sorted(((f, b) for t in gt for f, b in t.boxes.items()), key=key)
    det_boxes = sorted(((d.frame, d.box) for d in dets), key=key)
    assert gt_boxes == det_boxes


def test_same_seed_same_scene():
    cfg = SceneConfig(n_targets=3, frame_count=40, miss_rate=0.3, clutter_rate=1.5, noise_sigma=2, seed=9)
    assert generate_scene(cfg) == generate_scene(cfg)
    other = generate_scene(SceneConfig(**{**json.loads(cfg.to_json()), "seed": 10}))
    assert other != generate_scene(cfg)


def test_miss_rate_is_binomial():
    cfg = SceneConfig(n_targets=10, frame_count=100, miss_rate=0.5, seed=1)
    gt, dets = generate_scene(cfg)
    n = sum(len(t) for t in gt)
    assert n == 1000
    sd = math.sqrt(n * 0.25)
    assert abs(len(dets) - 500) <= 3 * sd


def test_clutter_rate_is_poisson():
    cfg = SceneConfig(n_targets=0, frame_count=400, clutter_rate=2.0, seed=3)
    _, dets = generate_scene(cfg)
    assert abs(len(dets) - 800) <= 3 * math.sqrt(800)


def test_occlusion_window_removes_detections():
    cfg = SceneConfig(n_targets=2, frame_count=50, occlusions=[(1, 10, 24)], seed=5)
    gt, dets = generate_scene(cfg)
    t1 = {f: b for f, b in gt[0].boxes.items()}
    hidden = {f for f in range(10, 25)}
    for d in dets:
        if d.frame in hidden:
            assert d.box != t1[d.frame]
    assert len(dets) == 100 - 15


@pytest.mark.parametrize("motion", ["constant_velocity", "sinusoidal", "crossing"])
def test_targets_stay_near_the_image(motion):
    cfg = SceneConfig(n_targets=8, frame_count=500, motion=motion, seed=7, speed=(5, 10))
    gt, _ = generate_scene(cfg)
    for t in gt:
        assert len(t) == 500
        for b in t.boxes.values():
            assert -b.width <= b.left and b.right <= cfg.width + b.width
            assert -b.height <= b.top and b.bottom <= cfg.height + b.height


def test_scene_survives_csv_round_trip():
    gt, dets = generate_scene(SceneConfig(n_targets=3, frame_count=20, noise_sigma=2, clutter_rate=1, seed=1))
    assert parse_tracks(serialize_tracks(gt)) == gt
    assert parse_detections(serialize_detections(dets)) == [
        d.__class__(d.frame, d.box, round(d.confidence, 6)) for d in dets
    ]


def test_config_validation():
    with pytest.raises(ValueError):
        SceneConfig(miss_rate=1.0)
    with pytest.raises(ValueError):
        SceneConfig(frame_count=1)
    with pytest.raises(ValueError):
        SceneConfig(motion="teleport")
    with pytest.raises(ValueError):
        SceneConfig.from_json('{"n_target": 3}')


def test_config_json_round_trip():
    cfg = SceneConfig(n_targets=2, occlusions=[(1, 3, 4)], name="x")
    assert SceneConfig.from_json(cfg.to_json()) == cfg


# -- oracle self-checks ---------------------------------------------------------


def test_oracle_assignment_small():
    assert oracle_assignment([[7.0]]).pairs == ((0, 0),)
    assert oracle_assignment([[1, 2], [2, 1]]).total_cost == 2.0
    assert [a.total_cost for a in oracle_kbest([[1, 2], [2, 1]], 5)] == [2.0, 4.0]


def test_oracle_kbest_all_zero_is_lexicographic():
    out = oracle_kbest(np.zeros((3, 3)), 10)
    assert len(out) == 6
    rows = [tuple(a.as_dict()[i] for i in range(3)) for a in out]
    assert rows == sorted(rows)


def test_oracle_caps():
    with pytest.raises(OracleSizeError):
        oracle_kbest(np.zeros((6, 6)), 1)


def _state(cx, cy):
    return KalmanState(np.array([cx, cy, 20, 50, 0, 0, 0, 0.0]), np.eye(8) * 4)


def test_oracle_jpda_no_measurements():
    beta, miss = oracle_jpda([_state(0, 0)], [], JPDAConfig(), MotionModel().measurement_noise())
    assert beta.shape == (1, 0) and miss[0] == 1.0


def test_oracle_jpda_limit_certain_detection():
    cfg = JPDAConfig(p_detect=1 - 1e-12, clutter_density=1e-300)
    z = np.array([1.0, -1.0, 20, 50])
    beta, miss = oracle_jpda([_state(0, 0)], [z], cfg, MotionModel().measurement_noise())
    assert beta[0, 0] == pytest.approx(1.0, abs=1e-9)


def test_oracle_jpda_two_by_two_by_hand():
    """Two targets, two measurements, each measurement gated by both targets.

    With per-pair likelihood ratios l_ij and miss weight q = 1 - p_D, the
    seven hypotheses are: both miss (q^2); one detection (l_ij q); and the two
    complete assignments (l_11 l_22, l_12 l_21).
    """
    cfg = JPDAConfig(gate=50.0, p_detect=0.8, clutter_density=1e-4)
    R = MotionModel().measurement_noise()
    targets = [_state(0, 0), _state(4, 0)]
    zs = [np.array([1.0, 0, 20, 50]), np.array([3.0, 0, 20, 50])]
    S = np.eye(4) * 4 + R
    def lik(t, z):
        d = z - t.mean[:4]
        g = math.exp(-0.5 * d @ np.linalg.solve(S, d)) / math.sqrt((2 * math.pi) ** 4 * np.linalg.det(S))
        return 0.8 * g / 1e-4
    l = np.array([[lik(t, z) for z in zs] for t in targets])
    q = 0.2
    w = {
        "mm": q * q, "1m": l[0, 0] * q, "2m": l[0, 1] * q, "m1": q * l[1, 0], "m2": q * l[1, 1],
        "12": l[0, 0] * l[1, 1], "21": l[0, 1] * l[1, 0],
    }
    total = sum(w.values())
    want_beta00 = (w["1m"] + w["12"]) / total
    want_miss1 = (w["mm"] + w["1m"] + w["2m"]) / total
    beta, miss = oracle_jpda(targets, zs, cfg, R)
    assert beta[0, 0] == pytest.approx(want_beta00, rel=1e-12)
    assert miss[1] == pytest.approx(want_miss1, rel=1e-12)
