"""Similar-motion tracking: link tracklets whose joint dynamics stay low-order.

The dynamics of a point sequence are summarised by the order of the linear
regressor that reproduces it, read off the numerical rank of a block Hankel
matrix. Joining two fragments of one smoothly moving target does not raise
that order; joining unrelated fragments does.
"""

from __future__ import annotations

import math

import numpy as np

from ..model import ParamSet
from ..solvers.assignment import gla_solve
from .common import Tracklet, interpolate, link_consecutive, number_tracks

DEFAULTS = {
    "overlap_min": 0.3,
    "smot_max_gap": 20,
    "max_speed": 20.0,
    "rank_tol": 0.02,
    "fit_tol": 4.0,
    "margin": 0,
    "hankel_rows": 5,
    "window": 15,
    "min_length": 3,
    "min_tracklet": 2,
}


def default_params() -> ParamSet:
    return ParamSet(
        DEFAULTS,
        integer={"smot_max_gap", "margin", "hankel_rows", "window", "min_length", "min_tracklet"},
    )


def hankel(xy: np.ndarray, rows: int) -> np.ndarray:
    """Block Hankel matrix of a (L, 2) sequence with ``rows`` block rows."""
    xy = np.asarray(xy, dtype=float)
    cols = len(xy) - rows + 1
    return np.vstack([xy[i:i + cols].T for i in range(rows)])


def regressor_order(track_xy, rank_tol: float = 0.02, fit_tol: float = 0.0, max_rows: int = 5) -> int:
    """Smallest order k >= 1 whose regressor reproduces the sequence.

    The sequence is centred and arranged in a block Hankel matrix; k is the
    number of singular values kept before the remainder is negligible, either
    relative to the largest (``rank_tol``) or because the per-point residual
    of the rank-k approximation drops to ``fit_tol`` pixels.
    """
    xy = np.asarray(track_xy, dtype=float)
    if xy.ndim != 2 or len(xy) < 4:
        raise ValueError("regressor_order needs at least 4 positions")
    xy = xy - xy.mean(axis=0)
    rows = max(2, min(max_rows, len(xy) // 2))
    H = hankel(xy, rows)
    s = np.linalg.svd(H, compute_uv=False)
    if s[0] <= 0:
        return 1
    points = H.size / 2
    tail = np.sqrt(np.maximum(np.cumsum((s ** 2)[::-1])[::-1], 0.0) / points)
    for k in range(len(s)):
        # k components kept; s[k] is the first dropped one
        if s[k] <= rank_tol * s[0] or tail[k] <= fit_tol:
            return max(1, k)
    return len(s)


def _order(xy: np.ndarray, params: ParamSet) -> int:
    if len(xy) < 4:
        return 1 if len(xy) == 1 else 2
    return regressor_order(xy, params["rank_tol"], params["fit_tol"], params["hankel_rows"])


def joined_centers(a: Tracklet, b: Tracklet, window: int) -> np.ndarray:
    """Tail of ``a``, straight-line fill over the gap, head of ``b``."""
    tail, head = a.centers()[-window:], b.centers()[:window]
    fa, fb = a.frames()[-window:], b.frames()[:window]
    pts = [np.column_stack([np.interp(np.arange(fa[0], fa[-1] + 1), fa, tail[:, i]) for i in range(2)])]
    gap = b.start - a.end
    if gap > 1:
        t = (np.arange(1, gap) / gap)[:, None]
        pts.append(tail[-1] + t * (head[0] - tail[-1]))
    pts.append(np.column_stack([np.interp(np.arange(fb[0], fb[-1] + 1), fb, head[:, i]) for i in range(2)]))
    return np.vstack(pts)


def _dense(t: Tracklet, window: int, tail: bool) -> np.ndarray:
    f = t.frames()[-window:] if tail else t.frames()[:window]
    xy = t.centers()[-window:] if tail else t.centers()[:window]
    grid = np.arange(f[0], f[-1] + 1)
    return np.column_stack([np.interp(grid, f, xy[:, i]) for i in range(2)])


def similarity(a: Tracklet, b: Tracklet, params: ParamSet, max_gap: int | None = None) -> float:
    """Linking payoff of ``a`` followed by ``b``; -inf when not admissible.

    Payoff is ``order(a) + order(b) + 1 - order(a+b)``, floored at zero; the
    pair is refused outright when the joint order exceeds the larger single
    order by more than ``margin``.
    """
    gap = b.start - a.end
    if gap < 1 or gap > min(params["smot_max_gap"], max_gap or math.inf):
        return -math.inf
    (ax, ay), (bx, by) = a.detections[-1].box.center, b.detections[0].box.center
    if math.hypot(bx - ax, by - ay) > params["max_speed"] * gap:
        return -math.inf
    w = params["window"]
    oa = _order(_dense(a, w, tail=True), params)
    ob = _order(_dense(b, w, tail=False), params)
    oj = _order(joined_centers(a, b, w), params)
    if oj > max(oa, ob) + params["margin"]:
        return -math.inf
    return max(0.0, float(oa + ob + 1 - oj))


def gap_schedule(max_gap: int) -> list[int]:
    """Allowed gaps per linking stage: 2, 4, 8, ... capped at ``max_gap``."""
    out, g = [], 2
    while g < max_gap:
        out.append(g)
        g *= 2
    return out + [max(max_gap, 1)]


def link_round(tracklets: list[Tracklet], params: ParamSet, max_gap: int | None = None) -> list[Tracklet] | None:
    """One GLA linking pass; None when nothing was linked."""
    n = len(tracklets)
    sim = np.full((n, n), -np.inf)
    starts = np.array([t.start for t in tracklets])
    reach = min(params["smot_max_gap"], max_gap or math.inf)
    for i, a in enumerate(tracklets):
        cand = np.flatnonzero((starts > a.end) & (starts <= a.end + reach))
        for j in cand:
            sim[i, j] = similarity(a, tracklets[j], params, max_gap)
    if not np.any(sim > 0):
        return None
    nxt = dict(gla_solve(sim).pairs)
    if not nxt:
        return None
    has_prev = set(nxt.values())
    out = []
    for i in range(n):
        if i in has_prev:
            continue
        t = tracklets[i]
        while i in nxt:
            i = nxt[i]
            t = t.join(tracklets[i])
        out.append(t)
    return out


def track_smot(detections, params: ParamSet | None = None, seq=None):
    params = params or default_params()
    tracklets = [t for t in link_consecutive(detections, params["overlap_min"])
                 if len(t) >= params["min_tracklet"]]
    # short gaps first: fragments grow long enough for their order to be
    # informative before wide gaps are considered
    for max_gap in gap_schedule(params["smot_max_gap"]):
        while True:
            linked = link_round(tracklets, params, max_gap)
            if linked is None:
                break
            tracklets = linked
    return number_tracks(
        interpolate(t.boxes()) for t in tracklets if len(t) >= params["min_length"]
    )
