"""Combinatorial and estimation primitives shared by the trackers."""

from .assignment import (
    Assignment,
    InfeasibleError,
    gated_assignment,
    gla_solve,
    hungarian,
    murty_mbest,
)
from .flow import (
    FlowGraph,
    build_flow_graph,
    detection_cost,
    dp_greedy_paths,
    flow_params,
    min_cost_flow,
)
from .kalman import (
    CovarianceError,
    KalmanState,
    MotionModel,
    initial_state,
    innovation,
    kalman_predict,
    kalman_update,
)

__all__ = [
    "Assignment", "InfeasibleError", "gated_assignment", "gla_solve", "hungarian", "murty_mbest",
    "FlowGraph", "build_flow_graph", "detection_cost", "dp_greedy_paths", "flow_params", "min_cost_flow",
    "CovarianceError", "KalmanState", "MotionModel", "initial_state", "innovation",
    "kalman_predict", "kalman_update",
]
