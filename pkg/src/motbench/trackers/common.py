"""Helpers shared by several trackers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model import BBox, Detection, Sequence, Trajectory, frames_by_index, iou
from ..solvers.assignment import gated_assignment


@dataclass(frozen=True)
class Tracklet:
    detections: tuple[Detection, ...]

    def __post_init__(self):
        if not self.detections:
            raise ValueError("tracklet must not be empty")
        frames = [d.frame for d in self.detections]
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise ValueError("tracklet frames must be strictly increasing")

    @property
    def start(self) -> int:
        return self.detections[0].frame

    @property
    def end(self) -> int:
        return self.detections[-1].frame

    def __len__(self):
        return len(self.detections)

    def centers(self) -> np.ndarray:
        return np.array([d.box.center for d in self.detections])

    def frames(self) -> np.ndarray:
        return np.array([d.frame for d in self.detections])

    def boxes(self) -> dict[int, BBox]:
        return {d.frame: d.box for d in self.detections}

    def join(self, other: "Tracklet") -> "Tracklet":
        return Tracklet(self.detections + other.detections)


def link_consecutive(detections, overlap_min: float) -> list[Tracklet]:
    """Grow tracklets frame to frame by Hungarian matching on ``1 - iou``.

    Only pairs overlapping by more than ``overlap_min`` may be linked.
    """
    chains: list[list[Detection]] = []
    active: list[int] = []
    by_frame = frames_by_index(detections)
    prev_frame = None
    for f in sorted(by_frame):
        dets = by_frame[f]
        if prev_frame != f - 1:
            active = []
        links = {}
        if active and dets:
            ov = np.array([[iou(chains[a][-1].box, d.box) for d in dets] for a in active])
            cost = np.where(ov > overlap_min, 1.0 - ov, np.inf)
            links = {c: active[r] for r, c in gated_assignment(cost, 1.0).pairs}
        new_active = []
        for j, d in enumerate(dets):
            if j in links:
                chains[links[j]].append(d)
                new_active.append(links[j])
            else:
                chains.append([d])
                new_active.append(len(chains) - 1)
        active = new_active
        prev_frame = f
    return [Tracklet(tuple(c)) for c in chains]


def interpolate(boxes: dict[int, BBox]) -> dict[int, BBox]:
    """Fill frame gaps by linear interpolation of box corners and sizes."""
    frames = sorted(boxes)
    out = dict(boxes)
    for a, b in zip(frames, frames[1:]):
        if b - a > 1:
            ba, bb = boxes[a], boxes[b]
            for f in range(a + 1, b):
                t = (f - a) / (b - a)
                out[f] = BBox(
                    ba.left + t * (bb.left - ba.left),
                    ba.top + t * (bb.top - ba.top),
                    ba.width + t * (bb.width - ba.width),
                    ba.height + t * (bb.height - ba.height),
                )
    return dict(sorted(out.items()))


def number_tracks(box_maps) -> list[Trajectory]:
    """Assign ids 1..K in a canonical order (start frame, then first box)."""
    maps = [m for m in box_maps if m]

    def key(m):
        f = min(m)
        b = m[f]
        return (f, b.left, b.top, b.width, b.height, len(m))

    maps.sort(key=key)
    return [Trajectory(i, m) for i, m in enumerate(maps, start=1)]


def infer_sequence(detections, seq: Sequence | None) -> Sequence:
    if seq is not None:
        return seq
    dets = list(detections)
    if not dets:
        return Sequence("inferred", 1)
    return Sequence(
        "inferred",
        max(d.frame for d in dets),
        image_width=max(d.box.right for d in dets),
        image_height=max(d.box.bottom for d in dets),
    )


def velocity(frames: np.ndarray, xy: np.ndarray) -> np.ndarray:
    """Least-squares velocity (px/frame) of a short point sequence."""
    if len(frames) < 2:
        return np.zeros(2)
    t = frames - frames.mean()
    return (t[:, None] * (xy - xy.mean(axis=0))).sum(axis=0) / (t ** 2).sum()
