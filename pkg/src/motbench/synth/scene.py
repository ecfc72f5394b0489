"""Synthetic scenes: ground-truth motion plus a noisy, lossy, cluttered detector."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from ..model import BBox, Detection, Sequence, Trajectory

MOTIONS = ("constant_velocity", "sinusoidal", "crossing")


@dataclass(frozen=True)
class SceneConfig:
    n_targets: int = 5
    frame_count: int = 200
    width: float = 1920.0
    height: float = 1080.0
    motion: str = "constant_velocity"
    miss_rate: float = 0.0
    clutter_rate: float = 0.0
    noise_sigma: float = 0.0
    occlusions: tuple = ()  # (target id, first frame, last frame), inclusive
    seed: int = 0
    speed: tuple = (1.0, 3.0)
    box_width: tuple = (30.0, 60.0)
    aspect: float = 2.5
    frame_rate: float = 30.0
    name: str = "synthetic"

    def __post_init__(self):
        if self.motion not in MOTIONS:
            raise ValueError(f"motion must be one of {MOTIONS}, got {self.motion!r}")
        if not 0.0 <= self.miss_rate < 1.0:
            raise ValueError("miss_rate must lie in [0, 1)")
        if self.clutter_rate < 0 or self.noise_sigma < 0:
            raise ValueError("clutter_rate and noise_sigma must be non-negative")
        if self.frame_count < 2:
            raise ValueError("frame_count must be >= 2")
        if self.n_targets < 0:
            raise ValueError("n_targets must be >= 0")
        occ = tuple(tuple(int(v) for v in o) for o in self.occlusions)
        object.__setattr__(self, "occlusions", occ)
        object.__setattr__(self, "speed", tuple(self.speed))
        object.__setattr__(self, "box_width", tuple(self.box_width))

    @property
    def sequence(self) -> Sequence:
        return Sequence(self.name, self.frame_count, self.frame_rate, self.width, self.height)

    @classmethod
    def from_json(cls, text: str) -> "SceneConfig":
        data = json.loads(text)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown scene config keys: {sorted(unknown)}")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def _q(v: float) -> float:
    # 2-decimal grid so CSV round trips are exact
    return round(float(v), 2)


def _reflect(pos: float, vel: float, lo: float, hi: float) -> tuple[float, float]:
    if hi <= lo:
        return 0.5 * (lo + hi), 0.0
    while pos < lo or pos > hi:
        if pos < lo:
            pos, vel = 2 * lo - pos, -vel
        else:
            pos, vel = 2 * hi - pos, -vel
    return pos, vel


def _ground_truth(cfg: SceneConfig, rng: np.random.Generator) -> list[Trajectory]:
    T = cfg.frame_count
    tracks = []
    for tid in range(1, cfg.n_targets + 1):
        w = rng.uniform(*cfg.box_width)
        h = cfg.aspect * w
        lo_x, hi_x = w / 2, cfg.width - w / 2
        lo_y, hi_y = h / 2, cfg.height - h / 2
        speed = rng.uniform(*cfg.speed)
        if cfg.motion == "crossing":
            from_left = tid % 2 == 1
            x = lo_x + 1.0 if from_left else hi_x - 1.0
            band = 0.3 * (hi_y - lo_y)
            y = 0.5 * (lo_y + hi_y) + rng.uniform(-band, band)
            vx, vy = (speed if from_left else -speed), 0.0
        else:
            x = rng.uniform(lo_x, hi_x)
            y = rng.uniform(lo_y, hi_y)
            angle = rng.uniform(0, 2 * np.pi)
            vx, vy = speed * np.cos(angle), speed * np.sin(angle)
        amp = rng.uniform(10.0, 25.0) if cfg.motion == "sinusoidal" else 0.0
        period = rng.uniform(40.0, 80.0)
        phase = rng.uniform(0, 2 * np.pi)
        boxes = {}
        for f in range(1, T + 1):
            if f > 1:
                x, vx = _reflect(x + vx, vx, lo_x, hi_x)
                y, vy = _reflect(y + vy, vy, lo_y, hi_y)
            cx, cy = x, y
            if amp:
                norm = np.hypot(vx, vy) or 1.0
                off = amp * np.sin(2 * np.pi * f / period + phase)
                cx = float(np.clip(x - off * vy / norm, lo_x, hi_x))
                cy = float(np.clip(y + off * vx / norm, lo_y, hi_y))
            boxes[f] = BBox(_q(cx - w / 2), _q(cy - h / 2), _q(w), _q(h))
        tracks.append(Trajectory(tid, boxes))
    return tracks


def generate_scene(cfg: SceneConfig) -> tuple[list[Trajectory], list[Detection]]:
    """Ground truth and detections, deterministic in ``cfg.seed``.

    Motion, detector misses/noise and clutter draw from separate RNG streams,
    so clutter never correlates with the targets.
    """
    motion_ss, det_ss, clutter_ss = np.random.SeedSequence(cfg.seed).spawn(3)
    gt = _ground_truth(cfg, np.random.default_rng(motion_ss))
    det_rng = np.random.default_rng(det_ss)
    clutter_rng = np.random.default_rng(clutter_ss)
    occluded = {}
    for tid, first, last in cfg.occlusions:
        occluded.setdefault(tid, []).append((first, last))

    per_frame: dict[int, list[Detection]] = {f: [] for f in range(1, cfg.frame_count + 1)}
    for traj in gt:
        for f, b in traj.boxes.items():
            # draw every variate regardless of outcome to keep streams aligned
            miss = det_rng.random() < cfg.miss_rate
            noise = det_rng.normal(0.0, 1.0, 4) * cfg.noise_sigma
            conf = det_rng.uniform(0.6, 1.0)
            if miss or any(a <= f <= z for a, z in occluded.get(traj.id, ())):
                continue
            box = BBox(
                _q(b.left + noise[0]),
                _q(b.top + noise[1]),
                _q(max(2.0, b.width + noise[2])),
                _q(max(2.0, b.height + noise[3])),
            )
            per_frame[f].append(Detection(f, box, round(conf, 6)))
    for f in per_frame:
        for _ in range(clutter_rng.poisson(cfg.clutter_rate)):
            w = clutter_rng.uniform(*cfg.box_width)
            h = min(cfg.aspect * w, cfg.height)
            left = clutter_rng.uniform(0, max(cfg.width - w, 0.0))
            top = clutter_rng.uniform(0, max(cfg.height - h, 0.0))
            conf = clutter_rng.uniform(0.1, 0.7)
            per_frame[f].append(Detection(f, BBox(_q(left), _q(top), _q(w), _q(h)), round(conf, 6)))
    detections = []
    for f in sorted(per_frame):
        detections.extend(sorted(per_frame[f], key=lambda d: (d.box.left, d.box.top)))
    return gt, detections
