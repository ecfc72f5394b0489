"""Randomised parameter search on training sequences.

Every run perturbs each parameter independently and uniformly within
``[low_factor * default, high_factor * default]``, runs the tracker on all
training sequences and scores the pooled MOTA. Run 0 always uses the
defaults. Each run draws from its own stream seeded by ``(seed, run)``, so the
report does not depend on execution order or on ``jobs``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .metrics import COLUMNS, EvalConfig, EvalResult, evaluate_many
from .model import Detection, ParamSet, Sequence, Trajectory
from .trackers import default_params, get_tracker


@dataclass(frozen=True)
class TuneConfig:
    runs: int = 20
    seed: int = 0
    low_factor: float = 0.5
    high_factor: float = 2.0

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if not 0 < self.low_factor <= 1 <= self.high_factor:
            raise ValueError("need 0 < low_factor <= 1 <= high_factor")


@dataclass(frozen=True)
class TrainingSequence:
    seq: Sequence
    detections: list[Detection]
    gt: list[Trajectory]


def sample_params(defaults: ParamSet, rng: np.random.Generator,
                  low_factor: float = 0.5, high_factor: float = 2.0) -> ParamSet:
    """Independent uniform draw of every parameter around its default.

    Draws happen in parameter order, one per parameter, so a given stream
    always yields the same set.
    """
    out = {}
    for name in defaults.names():
        d = float(defaults.defaults[name])
        lo, hi = sorted((low_factor * d, high_factor * d))
        v = float(rng.uniform(lo, hi))
        if name in defaults.integer:
            # nearest integer that still lies in the interval
            v = float(min(max(math.floor(v + 0.5), math.ceil(lo)), math.floor(hi)))
        out[name] = v
    return defaults.replace(out)


def run_rng(seed: int, run: int) -> np.random.Generator:
    return np.random.default_rng([seed, run])


@dataclass(frozen=True)
class TuneRun:
    index: int
    params: ParamSet
    result: EvalResult | None
    error: str | None = None

    @property
    def mota(self) -> float:
        return self.result.mota if self.result is not None else -math.inf


def _run_one(tracker: str, options: dict, params: ParamSet, training: list[TrainingSequence],
             index: int, iou_min: float) -> TuneRun:
    fn = get_tracker(tracker, **options)
    try:
        items = [(t.seq.name, t.gt, fn(t.detections, params, t.seq), t.seq.frame_count, None)
                 for t in training]
        return TuneRun(index, params, evaluate_many(items, EvalConfig(iou_min)))
    except Exception as exc:  # a broken parameter draw must not end the search
        return TuneRun(index, params, None, f"{type(exc).__name__}: {exc}")


@dataclass(frozen=True)
class TuneReport:
    tracker: str
    config: TuneConfig
    runs: tuple[TuneRun, ...]

    @property
    def best_index(self) -> int:
        # max() keeps the first maximum, i.e. the lowest run index on ties
        return max(self.runs, key=lambda r: r.mota).index

    @property
    def best(self) -> TuneRun:
        return self.runs[self.best_index]

    @property
    def best_params(self) -> ParamSet:
        return self.best.params

    def to_text(self) -> str:
        """Key-value report followed by a readable block with the chosen parameters.

        Frame rates are left out so that reports are reproducible byte for byte.
        """
        c = self.config
        lines = [
            f"tracker={self.tracker}",
            f"runs={c.runs}",
            f"seed={c.seed}",
            f"low_factor={c.low_factor!r}",
            f"high_factor={c.high_factor!r}",
            f"best_index={self.best_index}",
            f"best_mota={self.best.mota!r}",
        ]
        for r in self.runs:
            p = f"run.{r.index}."
            lines.append(p + ("status=ok" if r.error is None else f"status=failed ({r.error})"))
            if r.result is not None:
                row = r.result.row()
                lines.extend(f"{p}{k}={_num(row[k])}" for k in COLUMNS if k != "Hz")
            lines.extend(f"{p}param.{k}={_num(r.params[k])}" for k in r.params.names())
        best = self.best
        lines.append("")
        lines.append(f"# Best parameter set: run {best.index} of {c.runs}, MOTA {best.mota:.1f}")
        width = max(len(k) for k in best.params.names())
        lines.extend(f"#   {k.ljust(width)} = {_num(best.params[k])}" for k in best.params.names())
        return "\n".join(lines) + "\n"


def _num(v) -> str:
    return str(v) if isinstance(v, int) else repr(float(v))


def tune(tracker: str, training: list[TrainingSequence], cfg: TuneConfig = TuneConfig(),
         jobs: int = 1, iou_min: float = 0.5, **options) -> TuneReport:
    """Run ``cfg.runs`` trials and keep the parameter set with the best pooled MOTA.

    ``options`` are passed to the tracker factory (e.g. ``mode`` for DP_NMS).
    """
    if not training:
        raise ValueError("need at least one training sequence")
    defaults = default_params(tracker)
    draws = [defaults] + [
        sample_params(defaults, run_rng(cfg.seed, r), cfg.low_factor, cfg.high_factor)
        for r in range(1, cfg.runs)
    ]
    args = [(tracker, options, p, training, i, iou_min) for i, p in enumerate(draws)]
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_run_one, *zip(*args)))
    else:
        runs = [_run_one(*a) for a in args]
    return TuneReport(tracker, cfg, tuple(runs))
