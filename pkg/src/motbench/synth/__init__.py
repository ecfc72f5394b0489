"""Synthetic scenes and brute-force oracles."""

from .oracles import (
    OracleSizeError,
    oracle_assignment,
    oracle_flow,
    oracle_gla,
    oracle_jpda,
    oracle_kbest,
)
from .scene import MOTIONS, SceneConfig, generate_scene

__all__ = [
    "MOTIONS", "SceneConfig", "generate_scene", "OracleSizeError",
    "oracle_assignment", "oracle_flow", "oracle_gla", "oracle_jpda", "oracle_kbest",
]
