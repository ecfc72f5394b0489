"""Domain types and the 10-column CSV exchange format.

Rows look like ``frame,id,left,top,width,height,conf,x,y,z``. Detections
carry ``-1`` in the id column; the trailing x, y, z columns are opaque
sentinels and are always written as ``-1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping


class FormatError(ValueError):
    """Malformed exchange-format input."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class BBox:
    left: float
    top: float
    width: float
    height: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError(f"box must have positive size, got {self.width}x{self.height}")

    @property
    def right(self) -> float:
        return self.left + self.width

    @property
    def bottom(self) -> float:
        return self.top + self.height

    @property
    def center(self) -> tuple[float, float]:
        return (self.left + 0.5 * self.width, self.top + 0.5 * self.height)

    @property
    def area(self) -> float:
        return self.width * self.height

    @classmethod
    def from_center(cls, cx: float, cy: float, width: float, height: float) -> "BBox":
        return cls(cx - 0.5 * width, cy - 0.5 * height, width, height)


@dataclass(frozen=True)
class Detection:
    frame: int
    box: BBox
    confidence: float = 1.0

    def __post_init__(self):
        if self.frame < 1:
            raise ValueError(f"frame index must be >= 1, got {self.frame}")


@dataclass(frozen=True)
class Trajectory:
    """Identity-labelled boxes, at most one per frame. Frames may have gaps."""

    id: int
    boxes: Mapping[int, BBox]

    def __post_init__(self):
        if self.id < 1:
            raise ValueError(f"trajectory id must be >= 1, got {self.id}")
        if not self.boxes:
            raise ValueError("trajectory must contain at least one box")
        ordered = dict(sorted(self.boxes.items()))
        object.__setattr__(self, "boxes", MappingProxyType(ordered))

    @property
    def frames(self) -> list[int]:
        return list(self.boxes)

    @property
    def start(self) -> int:
        return next(iter(self.boxes))

    @property
    def end(self) -> int:
        return next(reversed(self.boxes))

    def __len__(self) -> int:
        return len(self.boxes)

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return self.id == other.id and dict(self.boxes) == dict(other.boxes)

    def __hash__(self):
        return hash((self.id, tuple(self.boxes.items())))

    def relabel(self, new_id: int) -> "Trajectory":
        return Trajectory(new_id, dict(self.boxes))

    def __reduce__(self):
        return Trajectory, (self.id, dict(self.boxes))


@dataclass(frozen=True)
class Sequence:
    name: str
    frame_count: int
    frame_rate: float = 30.0
    image_width: float = 1920.0
    image_height: float = 1080.0

    def __post_init__(self):
        if self.frame_count < 1:
            raise ValueError("frame_count must be >= 1")
        if not self.frame_rate > 0:
            raise ValueError("frame_rate must be > 0")


@dataclass(frozen=True)
class ParamSet:
    """Named tracker parameters with defaults.

    ``integer`` names the parameters that only take whole values; the tuner
    rounds their samples.
    """

    defaults: Mapping[str, float]
    values: Mapping[str, float] = field(default=None)
    integer: frozenset = frozenset()

    def __post_init__(self):
        defaults = dict(self.defaults)
        values = dict(defaults if self.values is None else self.values)
        if set(values) != set(defaults):
            raise KeyError(f"parameter names differ from defaults: {sorted(set(values) ^ set(defaults))}")
        for name, v in values.items():
            if not math.isfinite(v):
                raise ValueError(f"parameter {name!r} is not finite: {v}")
        object.__setattr__(self, "defaults", MappingProxyType(defaults))
        object.__setattr__(self, "values", MappingProxyType({k: values[k] for k in defaults}))
        object.__setattr__(self, "integer", frozenset(self.integer))

    def __getitem__(self, name: str) -> float:
        value = self.values[name]
        return int(round(value)) if name in self.integer else value

    def __contains__(self, name: str) -> bool:
        return name in self.values

    def __len__(self) -> int:
        return len(self.values)

    def names(self) -> list[str]:
        return list(self.values)

    def replace(self, updates: Mapping[str, float]) -> "ParamSet":
        """Return a copy with some current values replaced; unknown names are rejected."""
        unknown = [k for k in updates if k not in self.values]
        if unknown:
            raise KeyError(f"unknown parameter(s) {unknown}; valid: {self.names()}")
        values = dict(self.values)
        values.update({k: float(v) for k, v in updates.items()})
        return ParamSet(self.defaults, values, self.integer)

    def reset(self) -> "ParamSet":
        return ParamSet(self.defaults, None, self.integer)

    def __reduce__(self):
        return ParamSet, (dict(self.defaults), dict(self.values), self.integer)


# -- geometry ---------------------------------------------------------------


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union. Touching boxes have zero overlap."""
    w = min(a.right, b.right) - max(a.left, b.left)
    h = min(a.bottom, b.bottom) - max(a.top, b.top)
    if w <= 0 or h <= 0:
        return 0.0
    inter = w * h
    union = a.area + b.area - inter
    return min(1.0, inter / union)


# -- exchange format ----------------------------------------------------------

_N_FIELDS = 10


def _split_rows(text: str):
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != _N_FIELDS:
            raise FormatError(f"expected {_N_FIELDS} fields, got {len(fields)}", lineno)
        try:
            values = [float(f) for f in fields]
        except ValueError:
            raise FormatError(f"non-numeric field in {line!r}", lineno) from None
        if not all(math.isfinite(v) for v in values):
            raise FormatError("non-finite field", lineno)
        yield lineno, values


def _row_frame_box(lineno: int, values: list[float]) -> tuple[int, BBox]:
    frame = values[0]
    if frame != int(frame) or frame < 1:
        raise FormatError(f"frame must be an integer >= 1, got {frame}", lineno)
    try:
        box = BBox(*values[2:6])
    except ValueError as exc:
        raise FormatError(str(exc), lineno) from None
    return int(frame), box


def parse_detections(text: str) -> list[Detection]:
    out = []
    for lineno, values in _split_rows(text):
        frame, box = _row_frame_box(lineno, values)
        out.append(Detection(frame, box, values[6]))
    return out


def parse_tracks(text: str) -> list[Trajectory]:
    """Group track rows by identity; trajectories are returned sorted by id."""
    grouped: dict[int, dict[int, BBox]] = {}
    for lineno, values in _split_rows(text):
        frame, box = _row_frame_box(lineno, values)
        ident = values[1]
        if ident != int(ident) or ident < 1:
            raise FormatError(f"track id must be an integer >= 1, got {ident}", lineno)
        boxes = grouped.setdefault(int(ident), {})
        if frame in boxes:
            raise FormatError(f"duplicate (frame {frame}, id {int(ident)})", lineno)
        boxes[frame] = box
    return [Trajectory(i, grouped[i]) for i in sorted(grouped)]


def _fmt_geom(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


def _row(frame: int, ident: int, box: BBox, conf: float) -> str:
    return ",".join(
        [str(frame), str(ident), _fmt_geom(box.left), _fmt_geom(box.top),
         _fmt_geom(box.width), _fmt_geom(box.height), f"{conf:.6f}", "-1", "-1", "-1"]
    )


def serialize_tracks(tracks: Iterable[Trajectory]) -> str:
    rows = [(f, t.id, b) for t in tracks for f, b in t.boxes.items()]
    rows.sort(key=lambda r: (r[0], r[1]))
    return "".join(_row(f, i, b, 1.0) + "\n" for f, i, b in rows)


def serialize_detections(detections: Iterable[Detection]) -> str:
    return "".join(_row(d.frame, -1, d.box, d.confidence) + "\n" for d in detections)


def read_detections(path) -> list[Detection]:
    with open(path, encoding="utf-8") as fh:
        return parse_detections(fh.read())


def read_tracks(path) -> list[Trajectory]:
    with open(path, encoding="utf-8") as fh:
        return parse_tracks(fh.read())


def write_text(path, text: str) -> None:
    """Write with LF line endings, creating parent directories."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def frames_by_index(detections: Iterable[Detection]) -> dict[int, list[Detection]]:
    out: dict[int, list[Detection]] = {}
    for d in detections:
        out.setdefault(d.frame, []).append(d)
    return out


# -- seqinfo -----------------------------------------------------------------


def parse_seqinfo(text: str) -> Sequence:
    kv = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(("#", "[")):
            continue
        if "=" not in line:
            raise FormatError(f"expected key=value, got {line!r}", lineno)
        k, v = line.split("=", 1)
        kv[k.strip()] = v.strip()
    try:
        return Sequence(
            name=kv.get("name", "seq"),
            frame_count=int(kv["frame_count"]),
            frame_rate=float(kv.get("frame_rate", 30.0)),
            image_width=float(kv.get("width", 1920)),
            image_height=float(kv.get("height", 1080)),
        )
    except KeyError as exc:
        raise FormatError(f"seqinfo missing {exc.args[0]!r}") from None


def serialize_seqinfo(seq: Sequence) -> str:
    return (
        f"name={seq.name}\n"
        f"frame_count={seq.frame_count}\n"
        f"frame_rate={seq.frame_rate:g}\n"
        f"width={seq.image_width:g}\n"
        f"height={seq.image_height:g}\n"
    )
