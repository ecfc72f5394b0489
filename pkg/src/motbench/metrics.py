"""CLEAR-MOT evaluation producing one results-table row per tracker."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from .model import Trajectory, iou
from .solvers.assignment import gated_assignment

COLUMNS = ("MOTA", "MOTP", "FAR", "MT(%)", "ML(%)", "FP", "FN", "IDsw", "rel.ID", "FM", "rel.FM", "Hz")

MT_THRESHOLD = 0.8
ML_THRESHOLD = 0.2


class EvaluationError(ValueError):
    """The metrics are undefined for this input (e.g. no ground-truth boxes)."""


@dataclass(frozen=True)
class EvalConfig:
    iou_min: float = 0.5


@dataclass(frozen=True)
class FrameMatch:
    matches: tuple[tuple[int, int, float], ...]  # (gt id, hyp id, iou)
    unmatched_gt: tuple[int, ...]
    unmatched_hyp: tuple[int, ...]


@dataclass(frozen=True)
class FrameMatching:
    frames: dict  # frame -> FrameMatch, ascending

    def __iter__(self):
        return iter(self.frames.items())


def _by_frame(tracks) -> dict[int, dict[int, object]]:
    out: dict[int, dict[int, object]] = {}
    for t in tracks:
        for f, b in t.boxes.items():
            out.setdefault(f, {})[t.id] = b
    return out


def match_frames(gt: list[Trajectory], hyp: list[Trajectory], iou_min: float = 0.5) -> FrameMatching:
    """Frame-by-frame CLEAR correspondence.

    A pair matched in the previous frame is kept while its IoU stays at or
    above ``iou_min``; everything left is matched by Hungarian assignment on
    ``1 - iou`` over pairs with IoU >= ``iou_min``.
    """
    gt_f, hyp_f = _by_frame(gt), _by_frame(hyp)
    previous: dict[int, int] = {}
    frames = {}
    for f in sorted(set(gt_f) | set(hyp_f)):
        g, h = gt_f.get(f, {}), hyp_f.get(f, {})
        matches = []
        for gid, hid in sorted(previous.items()):
            if gid in g and hid in h:
                ov = iou(g[gid], h[hid])
                if ov >= iou_min:
                    matches.append((gid, hid, ov))
        taken_g = {m[0] for m in matches}
        taken_h = {m[1] for m in matches}
        rest_g = [i for i in sorted(g) if i not in taken_g]
        rest_h = [i for i in sorted(h) if i not in taken_h]
        if rest_g and rest_h:
            ov = np.array([[iou(g[a], h[b]) for b in rest_h] for a in rest_g])
            cost = np.where(ov >= iou_min, 1.0 - ov, np.inf)
            # any admissible pair (cost <= 1) beats leaving both sides unmatched
            sol = gated_assignment(cost, 1.0)
            for r, c in sol.pairs:
                matches.append((rest_g[r], rest_h[c], float(ov[r, c])))
        matches.sort()
        mg = {m[0] for m in matches}
        mh = {m[1] for m in matches}
        frames[f] = FrameMatch(
            tuple(matches),
            tuple(i for i in sorted(g) if i not in mg),
            tuple(i for i in sorted(h) if i not in mh),
        )
        previous = {m[0]: m[1] for m in matches}
    return FrameMatching(frames)


@dataclass(frozen=True)
class Counts:
    """Additive CLEAR counts; pooled over sequences by summation."""

    frames: int = 0
    gt_boxes: int = 0
    matches: int = 0
    iou_sum: float = 0.0
    fp: int = 0
    fn: int = 0
    idsw: int = 0
    fm: int = 0
    gt_tracks: int = 0
    mt: int = 0
    ml: int = 0

    def __add__(self, other: "Counts") -> "Counts":
        return Counts(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))


@dataclass(frozen=True)
class EvalResult:
    mota: float
    motp: float
    far: float
    mt_pct: float
    ml_pct: float
    fp: int
    fn: int
    idsw: int
    rel_id: float
    fm: int
    rel_fm: float
    hz: float
    counts: Counts = field(repr=False, default=Counts())
    per_sequence: dict = field(repr=False, default_factory=dict)

    @classmethod
    def from_counts(cls, c: Counts, hz: float = 0.0, per_sequence=None) -> "EvalResult":
        if c.gt_boxes == 0:
            raise EvaluationError("no ground-truth boxes: MOTA is undefined")
        # rel.ID and rel.FM divide by recall in percent
        recall = 100.0 * c.matches / c.gt_boxes
        return cls(
            mota=100.0 * (1.0 - (c.fp + c.fn + c.idsw) / c.gt_boxes),
            motp=100.0 * c.iou_sum / c.matches if c.matches else 0.0,
            far=c.fp / c.frames if c.frames else 0.0,
            mt_pct=100.0 * c.mt / c.gt_tracks,
            ml_pct=100.0 * c.ml / c.gt_tracks,
            fp=c.fp,
            fn=c.fn,
            idsw=c.idsw,
            rel_id=c.idsw / recall if recall else 0.0,
            fm=c.fm,
            rel_fm=c.fm / recall if recall else 0.0,
            hz=hz,
            counts=c,
            per_sequence=dict(per_sequence or {}),
        )

    def row(self) -> dict[str, float]:
        return dict(zip(COLUMNS, (
            self.mota, self.motp, self.far, self.mt_pct, self.ml_pct, self.fp, self.fn,
            self.idsw, self.rel_id, self.fm, self.rel_fm, self.hz,
        )))


def count(gt: list[Trajectory], hyp: list[Trajectory], cfg: EvalConfig = EvalConfig(),
          frame_count: int | None = None) -> tuple[Counts, FrameMatching]:
    matching = match_frames(gt, hyp, cfg.iou_min)
    last_partner: dict[int, int] = {}
    tracked: dict[int, set[int]] = {t.id: set() for t in gt}
    fp = fn = idsw = n_match = 0
    iou_sum = []
    for f, fm in matching:
        fp += len(fm.unmatched_hyp)
        fn += len(fm.unmatched_gt)
        for gid, hid, ov in fm.matches:
            n_match += 1
            iou_sum.append(ov)
            if gid in last_partner and last_partner[gid] != hid:
                idsw += 1
            last_partner[gid] = hid
            tracked[gid].add(f)

    frag = mt = ml = 0
    for t in gt:
        status = [f in tracked[t.id] for f in t.frames]
        frag += sum(1 for a, b in zip(status, status[1:]) if a and not b)
        coverage = sum(status) / len(status)
        mt += coverage >= MT_THRESHOLD
        ml += coverage <= ML_THRESHOLD

    if frame_count is None:
        all_frames = [f for t in list(gt) + list(hyp) for f in t.boxes]
        frame_count = max(all_frames) if all_frames else 0
    c = Counts(
        frames=frame_count,
        gt_boxes=sum(len(t) for t in gt),
        matches=n_match,
        iou_sum=math.fsum(iou_sum),
        fp=fp, fn=fn, idsw=idsw, fm=frag,
        gt_tracks=len(gt), mt=mt, ml=ml,
    )
    return c, matching


def evaluate(gt: list[Trajectory], hyp: list[Trajectory], cfg: EvalConfig = EvalConfig(),
             frame_count: int | None = None, seconds: float | None = None) -> EvalResult:
    """CLEAR-MOT metrics for one sequence.

    ``seconds`` is the tracker's wall-clock time; Hz is frames per second of
    it (0 when not supplied).
    """
    c, _ = count(gt, hyp, cfg, frame_count)
    hz = c.frames / seconds if seconds else 0.0
    return EvalResult.from_counts(c, hz)


def evaluate_many(items, cfg: EvalConfig = EvalConfig()) -> EvalResult:
    """Pool counts over sequences.

    ``items`` yields ``(name, gt, hyp, frame_count, seconds)``; sequences are
    folded in name order.
    """
    total = Counts()
    seconds = 0.0
    per = {}
    for name, gt, hyp, frame_count, secs in sorted(items, key=lambda it: it[0]):
        c, _ = count(gt, hyp, cfg, frame_count)
        per[name] = EvalResult.from_counts(c, c.frames / secs if secs else 0.0)
        total = total + c
        seconds += secs or 0.0
    return EvalResult.from_counts(total, total.frames / seconds if seconds else 0.0, per)


def per_frame_errors(matching: FrameMatching, frame_count: int | None = None):
    """Rows of (frame, fp, fn, idsw) for plotting."""
    last: dict[int, int] = {}
    rows = {}
    for f, fm in matching:
        sw = 0
        for gid, hid, _ in fm.matches:
            if gid in last and last[gid] != hid:
                sw += 1
            last[gid] = hid
        rows[f] = (len(fm.unmatched_hyp), len(fm.unmatched_gt), sw)
    last_frame = max(rows) if rows else 0
    if frame_count is not None:
        last_frame = max(last_frame, frame_count)
    return [(f, *rows.get(f, (0, 0, 0))) for f in range(1, last_frame + 1)]


# -- output ------------------------------------------------------------------


def _fmt(col: str, v) -> str:
    if col in ("FP", "FN", "IDsw", "FM"):
        return f"{int(v):,}"
    return f"{v:.1f}"


def format_table(rows: list[tuple[str, EvalResult]]) -> str:
    """Aligned plain-text table: a Method label column followed by the metric columns."""
    header = ("Method",) + COLUMNS
    body = [(name,) + tuple(_fmt(c, v) for c, v in res.row().items()) for name, res in rows]
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    lines = []
    for r in [header] + body:
        cells = [r[0].ljust(widths[0])] + [cell.rjust(w) for cell, w in zip(r[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


def format_keyvalue(res: EvalResult, prefix: str = "") -> str:
    """Machine-readable ``key=value`` lines, including each sequence's row."""
    lines = [f"{prefix}{k}={_kv(v)}" for k, v in res.row().items()]
    for name in sorted(res.per_sequence):
        lines.extend(
            f"{prefix}seq.{name}.{k}={_kv(v)}" for k, v in res.per_sequence[name].row().items()
        )
    return "\n".join(lines) + "\n"


def _kv(v) -> str:
    return str(v) if isinstance(v, int) else repr(float(v))


def parse_keyvalue(text: str) -> dict[str, float]:
    out = {}
    for line in text.splitlines():
        if line.strip() and not line.startswith("#"):
            k, v = line.split("=", 1)
            out[k] = float(v)
    return out
