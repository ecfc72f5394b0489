"""The five baseline trackers behind one calling convention.

Every tracker is ``fn(detections, params=None, seq=None) -> list[Trajectory]``
with its defaults from ``default_params(name)``.
"""

from __future__ import annotations

from functools import partial

from ..model import ParamSet
from . import cem, dp_nms, jpda, smot, tbd
from .cem import CEMState, CEMTarget, cem_energy, cem_gradient, run_cem, track_cem
from .common import Tracklet, link_consecutive
from .dp_nms import track_dp_nms
from .jpda import JPDAConfig, JPDATracker, jpda_marginals, track_jpda_m
from .smot import regressor_order, track_smot
from .tbd import track_tbd

TRACKERS = {
    "DP_NMS": (track_dp_nms, dp_nms.default_params),
    "CEM": (track_cem, cem.default_params),
    "SMOT": (track_smot, smot.default_params),
    "TBD": (track_tbd, tbd.default_params),
    "JPDA_m": (track_jpda_m, jpda.default_params),
}


class UnknownTrackerError(KeyError):
    def __str__(self):
        return f"unknown tracker {self.args[0]!r}; valid trackers: {', '.join(TRACKERS)}"


def get_tracker(name: str, **options):
    """Tracker function by name; ``options`` (e.g. ``mode`` for DP_NMS) are bound."""
    try:
        fn, _ = TRACKERS[name]
    except KeyError:
        raise UnknownTrackerError(name) from None
    return partial(fn, **options) if options else fn


def default_params(name: str) -> ParamSet:
    try:
        return TRACKERS[name][1]()
    except KeyError:
        raise UnknownTrackerError(name) from None


__all__ = [
    "TRACKERS", "UnknownTrackerError", "get_tracker", "default_params",
    "CEMState", "CEMTarget", "cem_energy", "cem_gradient", "run_cem", "track_cem",
    "Tracklet", "link_consecutive", "track_dp_nms", "JPDAConfig", "JPDATracker",
    "jpda_marginals", "track_jpda_m", "regressor_order", "track_smot", "track_tbd",
]
