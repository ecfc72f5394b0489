"""Two-stage tracking-by-detection.

Stage 1 links overlapping detections in consecutive frames into tracklets.
Stage 2 bridges occlusions: a tracklet end may be joined to a later tracklet
start when at most ``occlusion_max`` frames are missing in between and the
motion-extrapolated positions agree. Both stages use Hungarian matching.
"""

from __future__ import annotations

import numpy as np

from ..model import ParamSet
from ..solvers.assignment import gated_assignment
from .common import Tracklet, interpolate, link_consecutive, number_tracks, velocity

DEFAULTS = {
    "overlap_min": 0.3,
    "occlusion_max": 20,
    "link_gate": 40.0,
    "link_gate_growth": 3.0,
    "velocity_window": 10,
    "min_length": 3,
    "min_tracklet": 2,
}


def default_params() -> ParamSet:
    return ParamSet(DEFAULTS, integer={"occlusion_max", "velocity_window", "min_length", "min_tracklet"})


def _extrapolate(t: Tracklet, frame: int, window: int, from_end: bool) -> np.ndarray:
    frames, xy = t.frames(), t.centers()
    if from_end:
        frames, xy = frames[-window:], xy[-window:]
        anchor_f, anchor = frames[-1], xy[-1]
    else:
        frames, xy = frames[:window], xy[:window]
        anchor_f, anchor = frames[0], xy[0]
    return anchor + velocity(frames, xy) * (frame - anchor_f)


def bridge_cost(a: Tracklet, b: Tracklet, params: ParamSet) -> float:
    """Normalised link cost in [0, 1], or inf when the pair is not admissible."""
    missing = b.start - a.end - 1
    if missing < 0 or missing > params["occlusion_max"]:
        return np.inf
    window = params["velocity_window"]
    ahead = _extrapolate(a, b.start, window, from_end=True)
    behind = _extrapolate(b, a.end, window, from_end=False)
    dist = 0.5 * (
        np.linalg.norm(ahead - b.centers()[0]) + np.linalg.norm(behind - a.centers()[-1])
    )
    gate = params["link_gate"] + params["link_gate_growth"] * (missing + 1)
    return dist / gate if dist <= gate else np.inf


def bridge(tracklets: list[Tracklet], params: ParamSet) -> list[list[Tracklet]]:
    """Stage 2: one Hungarian pass over (tracklet end, tracklet start) pairs."""
    n = len(tracklets)
    if n < 2:
        return [[t] for t in tracklets]
    cost = np.full((n, n), np.inf)
    starts = np.array([t.start for t in tracklets])
    for i, a in enumerate(tracklets):
        lo, hi = a.end + 1, a.end + 1 + params["occlusion_max"]
        for j in np.flatnonzero((starts >= lo) & (starts <= hi)):
            cost[i, j] = bridge_cost(a, tracklets[j], params)
    nxt = dict(gated_assignment(cost, 1.0).pairs)
    has_prev = set(nxt.values())
    chains = []
    for i in range(n):
        if i in has_prev:
            continue
        chain = [tracklets[i]]
        while i in nxt:
            i = nxt[i]
            chain.append(tracklets[i])
        chains.append(chain)
    return chains


def track_tbd(detections, params: ParamSet | None = None, seq=None):
    params = params or default_params()
    # isolated detections are almost always clutter; keeping them lets the
    # bridging stage chain unrelated false alarms into long tracks
    tracklets = [t for t in link_consecutive(detections, params["overlap_min"])
                 if len(t) >= params["min_tracklet"]]
    out = []
    for chain in bridge(tracklets, params):
        boxes = {}
        for t in chain:
            boxes.update(t.boxes())
        if len(boxes) >= params["min_length"]:
            out.append(interpolate(boxes))
    return number_tracks(out)
