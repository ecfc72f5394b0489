"""``motbench`` command line: gen, track, eval, tune."""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

from . import __version__
from .metrics import (
    EvalConfig,
    EvaluationError,
    EvalResult,
    count,
    format_keyvalue,
    format_table,
    per_frame_errors,
)
from .model import (
    FormatError,
    ParamSet,
    Sequence,
    parse_seqinfo,
    read_detections,
    read_tracks,
    serialize_detections,
    serialize_seqinfo,
    serialize_tracks,
    write_text,
)
from .synth import SceneConfig, generate_scene
from .trackers import TRACKERS, UnknownTrackerError, default_params, get_tracker
from .tuning import TrainingSequence, TuneConfig, tune


class CLIError(Exception):
    """User-facing failure; reported on stderr with exit status 1."""


@dataclass(frozen=True)
class RunManifest:
    tracker: str
    params: dict
    inputs: list
    seed: int | None
    seconds: float
    version: str = __version__

    def __post_init__(self):
        if self.seconds < 0:
            raise ValueError("seconds must be >= 0")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls(**json.loads(text))


def manifest_path(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


# -- parameter handling ------------------------------------------------------


def parse_overrides(text: str) -> dict[str, float]:
    """``k=v,k=v`` (or one pair per line) into a dict of floats."""
    out = {}
    for item in text.replace("\n", ",").split(","):
        item = item.strip()
        if not item or item.startswith("#"):
            continue
        if "=" not in item:
            raise CLIError(f"bad parameter override {item!r}; expected key=value")
        k, v = (s.strip() for s in item.split("=", 1))
        try:
            out[k] = float(v)
        except ValueError:
            raise CLIError(f"parameter {k!r}: {v!r} is not a number") from None
    return out


def resolve_params(tracker: str, params_file: str | None, overrides: str | None) -> ParamSet:
    params = default_params(tracker)
    updates = {}
    if params_file:
        updates.update(parse_overrides(Path(params_file).read_text()))
    if overrides:
        updates.update(parse_overrides(overrides))
    try:
        return params.replace(updates)
    except KeyError as exc:
        raise CLIError(exc.args[0]) from None


def _load_seqinfo(path: str | None, near: Path) -> Sequence | None:
    candidate = Path(path) if path else near.with_name("seqinfo.ini")
    if candidate.exists():
        return parse_seqinfo(candidate.read_text())
    if path:
        raise CLIError(f"seqinfo file not found: {path}")
    return None


# -- commands ----------------------------------------------------------------


def cmd_gen(args) -> int:
    cfg = SceneConfig.from_json(Path(args.config).read_text())
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    gt, dets = generate_scene(cfg)
    write_text(out / "gt.csv", serialize_tracks(gt))
    write_text(out / "det.csv", serialize_detections(dets))
    write_text(out / "seqinfo.ini", serialize_seqinfo(cfg.sequence))
    return 0


def cmd_track(args) -> int:
    if args.mode and args.tracker != "DP_NMS":
        raise CLIError("--mode only applies to DP_NMS")
    fn = get_tracker(args.tracker, **({"mode": args.mode} if args.mode else {}))
    params = resolve_params(args.tracker, args.params_file, args.params)
    det_path = Path(args.det)
    dets = read_detections(det_path)
    seq = _load_seqinfo(args.seqinfo, det_path)
    t0 = time.perf_counter()
    tracks = fn(dets, params, seq) if dets else []
    seconds = time.perf_counter() - t0
    out = Path(args.out)
    write_text(out, serialize_tracks(tracks))
    manifest = RunManifest(
        tracker=args.tracker,
        params=dict(params.values) | ({"mode": args.mode or "dp"} if args.tracker == "DP_NMS" else {}),
        inputs=[str(det_path)],
        seed=args.seed,
        seconds=seconds,
    )
    write_text(manifest_path(out), manifest.to_json())
    return 0


def cmd_eval(args) -> int:
    gt_path, hyp_path = Path(args.gt), Path(args.hyp)
    gt, hyp = read_tracks(gt_path), read_tracks(hyp_path)
    seq = _load_seqinfo(args.seqinfo, gt_path)
    frame_count = seq.frame_count if seq else None
    counts, matching = count(gt, hyp, EvalConfig(args.iou_min), frame_count)
    name = args.name
    hz = 0.0
    mpath = Path(args.manifest) if args.manifest else manifest_path(hyp_path)
    if mpath.exists():
        m = RunManifest.from_json(mpath.read_text())
        hz = counts.frames / m.seconds if m.seconds > 0 else 0.0
        name = name or m.tracker
    elif args.manifest:
        raise CLIError(f"manifest not found: {args.manifest}")
    res = EvalResult.from_counts(counts, hz)
    table = format_table([(name or hyp_path.stem, res)])
    prefix = args.out
    write_text(prefix + ".txt", table)
    write_text(prefix + ".kv", format_keyvalue(res))
    rows = per_frame_errors(matching, frame_count)
    write_text(prefix + "_frames.csv", "frame,fp,fn,idsw\n" + "".join(f"{f},{a},{b},{c}\n" for f, a, b, c in rows))
    if args.plot:
        from .plotting import plot_frame_errors

        plot_frame_errors(rows, prefix + "_frames.png", title=name or hyp_path.stem)
    sys.stdout.write(table)
    return 0


def _training_dirs(root: Path) -> list[Path]:
    dirs = [root] if (root / "det.csv").exists() else sorted(p for p in root.iterdir() if (p / "det.csv").exists())
    if not dirs:
        raise CLIError(f"no det.csv found in {root} or its subdirectories")
    missing = [str(d) for d in dirs if not (d / "gt.csv").exists()]
    if missing:
        raise CLIError(f"missing gt.csv in: {', '.join(missing)}")
    return dirs


def load_training(root: Path) -> list[TrainingSequence]:
    out = []
    for d in _training_dirs(root):
        dets, gt = read_detections(d / "det.csv"), read_tracks(d / "gt.csv")
        seq = _load_seqinfo(None, d / "det.csv")
        if seq is None:
            last = max([det.frame for det in dets] + [t.end for t in gt])
            seq = Sequence(d.name, last)
        out.append(TrainingSequence(seq, dets, gt))
    return out


def cmd_tune(args) -> int:
    get_tracker(args.tracker)
    if args.mode and args.tracker != "DP_NMS":
        raise CLIError("--mode only applies to DP_NMS")
    options = {"mode": args.mode} if args.mode else {}
    cfg = TuneConfig(args.runs, args.seed, args.low, args.high)
    report = tune(args.tracker, load_training(Path(args.train_dir)), cfg, jobs=args.jobs,
                  iou_min=args.iou_min, **options)
    write_text(Path(args.out), report.to_text())
    if args.plot:
        from .plotting import plot_tuning

        plot_tuning(report, str(Path(args.out).with_suffix(".png")))
    print(f"best run {report.best_index}: MOTA {report.best.mota:.1f}")
    return 0


# -- entry point -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="motbench", description="Multi-object tracking baselines and evaluation.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic scene")
    g.add_argument("config", help="scene configuration (JSON)")
    g.add_argument("outdir")
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("track", help="run a tracker on a detection file")
    t.add_argument("tracker", help=f"one of {', '.join(TRACKERS)}")
    t.add_argument("det")
    t.add_argument("out")
    t.add_argument("--params", help="overrides as k=v,k=v")
    t.add_argument("--params-file", help="file of k=v lines")
    t.add_argument("--mode", choices=["exact", "dp"], help="DP_NMS solver (default dp)")
    t.add_argument("--seed", type=int, default=None, help="recorded in the manifest")
    t.add_argument("--seqinfo", help="sequence info file (default: seqinfo.ini beside DET)")
    t.set_defaults(func=cmd_track)

    e = sub.add_parser("eval", help="score a track file against ground truth")
    e.add_argument("gt")
    e.add_argument("hyp")
    e.add_argument("out", help="output prefix for .txt, .kv and _frames.csv")
    e.add_argument("--iou-min", type=float, default=0.5)
    e.add_argument("--manifest", help="run manifest for the Hz column (default: HYP.manifest.json)")
    e.add_argument("--name", help="method label in the table")
    e.add_argument("--seqinfo", help="sequence info file (default: seqinfo.ini beside GT)")
    e.add_argument("--plot", action="store_true", help="also render _frames.png")
    e.set_defaults(func=cmd_eval)

    u = sub.add_parser("tune", help="randomised parameter search")
    u.add_argument("tracker")
    u.add_argument("train_dir", help="directory of sequences, each with det.csv and gt.csv")
    u.add_argument("out")
    u.add_argument("--runs", type=int, default=20)
    u.add_argument("--seed", type=int, default=0)
    u.add_argument("--jobs", type=int, default=1)
    u.add_argument("--low", type=float, default=0.5)
    u.add_argument("--high", type=float, default=2.0)
    u.add_argument("--iou-min", type=float, default=0.5)
    u.add_argument("--mode", choices=["exact", "dp"])
    u.add_argument("--plot", action="store_true", help="also render a per-run MOTA chart")
    u.set_defaults(func=cmd_tune)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UnknownTrackerError as exc:
        msg = str(exc)
    except (CLIError, FormatError, EvaluationError, OSError, ValueError) as exc:
        msg = str(exc)
    print(f"motbench: error: {msg}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
