"""Baseline multi-object trackers with CLEAR-MOT evaluation and parameter tuning."""

__version__ = "0.1.0"
