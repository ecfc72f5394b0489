"""Network-flow tracking (exact successive shortest paths, or DP with NMS)."""

from __future__ import annotations

from ..model import ParamSet
from ..solvers.flow import FLOW_DEFAULTS, build_flow_graph, dp_greedy_paths, min_cost_flow
from .common import interpolate, number_tracks

MODES = ("exact", "dp")


def default_params() -> ParamSet:
    return ParamSet(FLOW_DEFAULTS, integer={"max_gap"})


def solve_flow(detections, params: ParamSet, mode: str = "dp"):
    """Return (graph, paths) for the chosen solver."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    g = build_flow_graph(detections, params)
    paths = min_cost_flow(g) if mode == "exact" else dp_greedy_paths(g)
    return g, paths


def track_dp_nms(detections, params: ParamSet | None = None, seq=None, mode: str = "dp"):
    detections = list(detections)
    if not detections:
        return []
    params = params or default_params()
    g, paths = solve_flow(detections, params, mode)
    # frames skipped inside a path are filled by interpolation
    return number_tracks(
        interpolate({g.detections[k].frame: g.detections[k].box for k in p}) for p in paths
    )
