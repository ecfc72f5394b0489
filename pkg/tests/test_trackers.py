import numpy as np
import pytest

from conftest import box, straight_track
from motbench.metrics import evaluate
from motbench.model import BBox, Detection, Sequence, Trajectory
from motbench.solvers import MotionModel, kalman_predict, kalman_update
from motbench.solvers.kalman import initial_state
from motbench.synth import SceneConfig, generate_scene
from motbench.trackers import (
    TRACKERS,
    CEMState,
    CEMTarget,
    JPDAConfig,
    JPDATracker,
    UnknownTrackerError,
    cem_energy,
    cem_gradient,
    default_params,
    get_tracker,
    jpda_marginals,
    regressor_order,
    run_cem,
    track_dp_nms,
    track_jpda_m,
    track_smot,
    track_tbd,
)
from motbench.trackers.common import interpolate, link_consecutive, number_tracks
from motbench.trackers.dp_nms import solve_flow
from motbench.trackers.jpda import pda_update
from motbench.trackers.smot import gap_schedule, hankel, similarity
from motbench.trackers.common import Tracklet

SEQ = Sequence("t", 60, 30, 1920, 1080)


def test_registry_names():
    assert list(TRACKERS) == ["DP_NMS", "CEM", "SMOT", "TBD", "JPDA_m"]
    with pytest.raises(UnknownTrackerError) as exc:
        get_tracker("FOO")
    assert "JPDA_m" in str(exc.value)


@pytest.mark.parametrize("name", list(TRACKERS))
def test_empty_input(name):
    assert get_tracker(name)([], None, SEQ) == []


@pytest.mark.parametrize("name", list(TRACKERS))
def test_single_smooth_target_gives_one_track(name):
    dets = straight_track(range(1, 61), conf=0.95)
    tracks = get_tracker(name)(dets, None, SEQ)
    assert len(tracks) == 1
    assert tracks[0].frames == list(range(1, 61))


@pytest.mark.parametrize("name", list(TRACKERS))
def test_deterministic_and_unique_ids(name, degraded_scene):
    cfg, gt, dets = degraded_scene
    a = get_tracker(name)(dets, None, cfg.sequence)
    b = get_tracker(name)(list(dets), None, cfg.sequence)
    assert a == b
    assert len({t.id for t in a}) == len(a)


@pytest.mark.parametrize("name", list(TRACKERS))
def test_output_boxes_stay_near_image(name, clean_scene):
    cfg, gt, dets = clean_scene
    margin = max(max(b.width, b.height) for t in gt for b in t.boxes.values())
    for t in get_tracker(name)(dets, None, cfg.sequence):
        for b in t.boxes.values():
            assert -margin <= b.left and b.right <= cfg.width + margin
            assert -margin <= b.top and b.bottom <= cfg.height + margin


def test_params_override_is_validated():
    with pytest.raises(KeyError):
        default_params("TBD").replace({"no_such": 1})


# -- common helpers -------------------------------------------------------------------


def test_link_consecutive_and_interpolate():
    dets = straight_track([1, 2, 3]) + straight_track([6, 7])
    tracklets = link_consecutive(dets, 0.3)
    assert [(t.start, t.end) for t in tracklets] == [(1, 3), (6, 7)]
    filled = interpolate(tracklets[0].join(tracklets[1]).boxes())
    assert sorted(filled) == list(range(1, 8))
    assert filled[4].left == pytest.approx(100 + 3 * 3)


def test_number_tracks_orders_by_start():
    out = number_tracks([{5: box(0, 0)}, {1: box(9, 9)}, {1: box(1, 1)}])
    assert [(t.id, t.start, t.boxes[t.start].left) for t in out] == [(1, 1, 1), (2, 1, 9), (3, 5, 0)]


# -- DP_NMS -----------------------------------------------------------------------------


def test_exact_flow_no_worse_than_dp(degraded_scene):
    for seed in range(3):
        cfg = SceneConfig(n_targets=4, frame_count=60, miss_rate=0.2, clutter_rate=2, noise_sigma=3, seed=seed)
        _, dets = generate_scene(cfg)
        g, exact = solve_flow(dets, default_params("DP_NMS"), "exact")
        _, dp = solve_flow(dets, default_params("DP_NMS"), "dp")
        assert g.total_cost(exact) <= g.total_cost(dp) + 1e-9


def test_dp_nms_mode_validated():
    with pytest.raises(ValueError):
        track_dp_nms(straight_track([1, 2]), mode="fast")


def test_dp_nms_bridges_short_gap():
    dets = straight_track([f for f in range(1, 31) if f not in (10, 11)], conf=0.95)
    tracks = track_dp_nms(dets, seq=SEQ)
    assert len(tracks) == 1 and tracks[0].frames == list(range(1, 31))


# -- TBD --------------------------------------------------------------------------------


@pytest.mark.parametrize("missing,expected", [(15, 1), (20, 1), (21, 2), (25, 2)])
def test_tbd_occlusion_bound(missing, expected):
    frames = [f for f in range(1, 81) if not 31 <= f < 31 + missing]
    tracks = track_tbd(straight_track(frames, vx=2.0, vy=0.5))
    assert len(tracks) == expected


def test_tbd_keeps_parallel_targets_apart():
    dets = straight_track(range(1, 41), y0=100) + straight_track(range(1, 41), y0=400)
    tracks = track_tbd([d for d in dets if not (15 <= d.frame <= 20)])
    assert len(tracks) == 2
    assert all(len(t) == 40 for t in tracks)


# -- SMOT -------------------------------------------------------------------------------


def test_regressor_order_constant_and_line():
    assert regressor_order(np.tile([5.0, 7.0], (20, 1))) == 1
    t = np.arange(20.0)[:, None]
    assert regressor_order(np.hstack([3 + 2 * t, 1 - 0.5 * t])) == 2


def _svd_rank(xy, rows, tol):
    """Independent numerical rank of the centred block Hankel matrix."""
    xy = xy - xy.mean(axis=0)
    n = len(xy) - rows + 1
    H = np.zeros((2 * rows, n))
    for i in range(rows):
        for j in range(n):
            H[2 * i, j] = xy[i + j, 0]
            H[2 * i + 1, j] = xy[i + j, 1]
    s = np.linalg.svd(H, compute_uv=False)
    return max(1, int(np.sum(s > tol * s[0])))


@pytest.mark.parametrize("freq", [0.05, 0.2, 0.7])
@pytest.mark.parametrize("length", [12, 30])
def test_regressor_order_sinusoid_matches_svd_rank(freq, length):
    t = np.arange(length, dtype=float)
    xy = np.column_stack([40 * np.sin(freq * t), 25 * np.cos(1.7 * freq * t) + 0.3 * t])
    rows = max(2, min(5, length // 2))
    assert regressor_order(xy, rank_tol=0.02, fit_tol=0.0, max_rows=5) == _svd_rank(xy, rows, 0.02)


def test_regressor_order_needs_four_points():
    with pytest.raises(ValueError):
        regressor_order(np.zeros((3, 2)))


def test_hankel_layout():
    xy = np.array([[1, 10], [2, 20], [3, 30]], dtype=float)
    np.testing.assert_array_equal(hankel(xy, 2), [[1, 2], [10, 20], [2, 3], [20, 30]])


def test_smot_similarity_prefers_same_motion():
    p = default_params("SMOT")
    line = straight_track(range(1, 41), vx=2.0, vy=1.0)
    a, b = Tracklet(tuple(line[:15])), Tracklet(tuple(line[25:]))
    assert similarity(a, b, p) > 0
    # a fragment moving the opposite way, starting near where a ends
    back = [Detection(f, box(130 - 2.0 * (f - 26), 215 + 1.0 * (f - 26))) for f in range(26, 41)]
    assert similarity(a, Tracklet(tuple(back)), p) <= 0
    assert similarity(b, a, p) == -np.inf


def test_gap_schedule():
    assert gap_schedule(20) == [2, 4, 8, 16, 20]
    assert gap_schedule(2) == [2]
    assert gap_schedule(1) == [1]


def test_smot_links_across_gap():
    dets = straight_track([f for f in range(1, 61) if not 20 <= f <= 29], vx=2.0, vy=1.0)
    tracks = track_smot(dets)
    assert len(tracks) == 1 and tracks[0].frames == list(range(1, 61))


# -- JPDA -------------------------------------------------------------------------------


def _states(rng, n):
    model = MotionModel()
    out = []
    for _ in range(n):
        s = initial_state(box(*rng.uniform(0, 60, 2), 20, 50), model, velocity=rng.normal(0, 1, 4))
        out.append(kalman_predict(s, 1, model))
    return out


def test_jpda_marginals_sum_to_one():
    rng = np.random.default_rng(0)
    model = MotionModel()
    for _ in range(50):
        states = _states(rng, int(rng.integers(1, 5)))
        zs = [np.concatenate([rng.uniform(0, 60, 2), [20, 50]]) for _ in range(int(rng.integers(0, 5)))]
        beta, miss, _ = jpda_marginals(states, zs, JPDAConfig(gate=30), model)
        np.testing.assert_allclose(beta.sum(axis=1) + miss, 1.0, atol=1e-9)
        assert np.all(beta.sum(axis=0) <= 1 + 1e-9)


def test_jpda_single_hypothesis_is_hard():
    rng = np.random.default_rng(1)
    model = MotionModel()
    for _ in range(30):
        states = _states(rng, 3)
        zs = [np.concatenate([rng.uniform(0, 60, 2), [20, 50]]) for _ in range(3)]
        beta, miss, _ = jpda_marginals(states, zs, JPDAConfig(m=1, gate=30), model)
        assert set(np.unique(np.concatenate([beta.ravel(), miss]))) <= {0.0, 1.0}


def test_jpda_limit_is_plain_kalman_update():
    model = MotionModel()
    s = _states(np.random.default_rng(2), 1)[0]
    z = s.mean[:4] + np.array([1.0, -0.5, 0.3, 0.2])
    cfg = JPDAConfig(p_detect=1 - 1e-12, clutter_density=1e-300)
    beta, miss, _ = jpda_marginals([s], [z], cfg, model)
    assert beta[0, 0] == pytest.approx(1.0, abs=1e-9)
    got = pda_update(s, [z], beta[0], miss[0], model)
    want = kalman_update(s, z, model)
    np.testing.assert_allclose(got.mean, want.mean, atol=1e-8)
    np.testing.assert_allclose(got.cov, want.cov, atol=1e-8)


def test_jpda_online_truncation(degraded_scene):
    cfg, _, dets = degraded_scene
    full = {t.id: t for t in track_jpda_m(dets, seq=cfg.sequence)}
    for cut in (40, 97, 150):
        seq = Sequence("cut", cut)
        part = track_jpda_m([d for d in dets if d.frame <= cut], seq=seq)
        for t in part:
            head = {f: b for f, b in full[t.id].boxes.items() if f <= cut}
            assert dict(t.boxes) == head
        assert {t.id for t in part} == {i for i, t in full.items() if t.start <= cut}


def test_jpda_records_frames():
    dets = straight_track(range(1, 11))
    tracks, tracker = track_jpda_m(dets, record=True)
    assert [r.frame for r in tracker.records] == list(range(1, 11))
    assert len(tracks) == 1


def test_jpda_config_validation():
    with pytest.raises(ValueError):
        JPDAConfig(m=0)
    with pytest.raises(ValueError):
        JPDAConfig(p_detect=1.0)


# -- CEM --------------------------------------------------------------------------------


def _two_target_scene():
    a = straight_track(range(1, 41), x0=600, y0=300, vx=2, vy=0, conf=0.9)
    b = straight_track(range(1, 41), x0=900, y0=600, vx=-1, vy=1, conf=0.9)
    return a, b


def _random_state(rng):
    targets = []
    for _ in range(int(rng.integers(1, 4))):
        start, length = int(rng.integers(1, 20)), int(rng.integers(1, 20))
        xy = np.column_stack([rng.uniform(560, 700, length), rng.uniform(280, 340, length)])
        targets.append(CEMTarget(start, xy))
    return CEMState(tuple(targets))


def test_cem_gradient_matches_finite_differences():
    a, b = _two_target_scene()
    dets = a + b
    rng = np.random.default_rng(0)
    h = 1e-5
    for _ in range(10):
        s = _random_state(rng)
        x = s.flat()
        g = cem_gradient(s, dets, seq=SEQ)
        fd = np.array([
            (cem_energy(s.with_flat(x + h * e), dets, seq=SEQ) - cem_energy(s.with_flat(x - h * e), dets, seq=SEQ))
            / (2 * h)
            for e in np.eye(len(x))
        ])
        assert np.linalg.norm(g - fd) <= 1e-4 * max(np.linalg.norm(fd), 1e-8)


def test_cem_energy_terms_by_hand():
    # one target, one frame, exactly on its detection and far from the border
    d = [Detection(1, BBox(990, 490, 20, 40), 1.0)]
    s = CEMState((CEMTarget(1, [[1000.0, 510.0]]),))
    p = default_params("CEM")
    lam, gate = p["data_lambda"], p["data_gate"]
    data = -1.0 + lam / (gate**2 + lam)
    reg = 1 + p["reg_mu"] * 1.0
    # the only frame is both the first and the last: no persistence charge
    seq = Sequence("one", 1)
    assert cem_energy(s, d, p, seq) == pytest.approx(p["w_data"] * data + p["w_reg"] * reg)


def test_cem_merge_fires_on_fragmented_init():
    a, b = _two_target_scene()
    dets = [d for d in a + b if not (d in b and 16 <= d.frame <= 25)]
    init = [
        Trajectory(1, {d.frame: d.box for d in a}),
        Trajectory(2, {d.frame: d.box for d in b if d.frame <= 15}),
        Trajectory(3, {d.frame: d.box for d in b if d.frame >= 26}),
    ]
    res = run_cem(dets, init=init, seq=Sequence("m", 40))
    assert any(name == "merge" for name, _ in res.moves)
    assert res.energy_trace[-1] < res.energy_trace[0]
    assert cem_energy(res.state, dets, seq=Sequence("m", 40)) == pytest.approx(res.energy_trace[-1])
    assert len(res.trajectories) == 2


def test_cem_trace_non_increasing(degraded_scene):
    cfg, _, dets = degraded_scene
    res = run_cem(dets, seq=cfg.sequence)
    tr = res.energy_trace
    assert all(b <= a for a, b in zip(tr, tr[1:]))
