"""Command-line entry point wiring converters, tracker, evaluator and reports.

Exit codes: 0 success, 1 internal error, 2 usage or input error. Every
command drops a manifest.json next to its outputs recording the arguments,
config snapshot, input/output digests and wall time, so runs can be audited
and replayed.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .association import (
    MODES,
    TrackResult,
    TrackerConfig,
    run_tracker,
)
from .convert import (
    ConversionError,
    SynonymMap,
    convert_cocovid,
    convert_imagenet_vid,
    convert_motchallenge,
    normalize_occlusions,
    parse_imagenet_vid_document,
)
from .data_model import (
    AnnotationError,
    DetectionFormatError,
    VideoMeta,
    load_base_names,
    parse_annotations,
    parse_detection_file,
    serialize_annotations,
    serialize_detections,
    split_categories,
    validate_annotation_set,
)
from .report import ReportSchemaError, comparison_text, load_reports, write_comparison, write_stats_figures
from .stats import stats_report
from .synth import SynthConfig, generate_scenario
from .teta import SPLITS, compute_teta

CONFIG_ENV = "MOTKIT_CONFIG"

_INPUT_ERRORS = (
    AnnotationError,
    DetectionFormatError,
    ConversionError,
    ReportSchemaError,
    FileNotFoundError,
    IsADirectoryError,
    ValueError,
    KeyError,
    json.JSONDecodeError,
)


class _Cli:
    """Holds the manifest bookkeeping for a single command invocation."""

    def __init__(self, command: str, args: argparse.Namespace):
        self.command = command
        self.args = args
        self.inputs: dict[str, str] = {}
        self.outputs: dict[str, str] = {}
        self.config_snapshot: dict | None = None
        self.started = time.perf_counter()

    def read(self, path: str | Path) -> bytes:
        p = Path(path)
        if not p.is_file():
            raise FileNotFoundError(f"input file not found: {p}")
        data = p.read_bytes()
        self.inputs[str(p)] = hashlib.sha256(data).hexdigest()
        return data

    def write(self, path: str | Path, data: bytes | str) -> Path:
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        if isinstance(data, str):
            data = data.encode("utf-8")
        p.write_bytes(data)
        self.outputs[str(p)] = hashlib.sha256(data).hexdigest()
        return p

    def register_output(self, path: Path):
        self.outputs[str(path)] = hashlib.sha256(Path(path).read_bytes()).hexdigest()

    def write_manifest(self, out_dir: str | Path):
        manifest = {
            "command": self.command,
            "args": {
                k: (str(v) if isinstance(v, Path) else v)
                for k, v in vars(self.args).items()
                if k != "func"
            },
            "config": self.config_snapshot,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "version": __version__,
            "wall_time_s": round(time.perf_counter() - self.started, 6),
        }
        path = Path(out_dir) / "manifest.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(manifest, indent=2) + "\n")


def _load_tracker_config(args: argparse.Namespace, cli: _Cli) -> TrackerConfig:
    path = args.config or os.environ.get(CONFIG_ENV)
    if path:
        config = TrackerConfig.from_json(cli.read(path))
    else:
        config = TrackerConfig()
    if getattr(args, "mode", None):
        config = TrackerConfig(**{**asdict(config), "mode": args.mode, "motion": config.motion})
    cli.config_snapshot = json.loads(config.to_json())
    return config


# ---------------------------------------------------------------------------
# command handlers
# ---------------------------------------------------------------------------

def cmd_convert(args: argparse.Namespace, cli: _Cli) -> int:
    synonyms = None
    if args.synonyms:
        synonyms = SynonymMap.from_json(cli.read(args.synonyms))
    raw = cli.read(args.input)
    if args.source_format == "motchallenge":
        rows = [line for line in raw.decode("utf-8").splitlines() if line.strip()]
        frame_count = args.frame_count
        if frame_count is None:
            frames = [int(float(line.split(",")[0])) for line in rows]
            frame_count = max(frames) if frames else 1
        meta = VideoMeta(
            id=args.video_id,
            name=args.video_name,
            width=args.width,
            height=args.height,
            frame_count=frame_count,
            fps=args.fps,
            ann_fps=args.fps,
        )
        aset = convert_motchallenge(raw, meta, args.category_id, args.category_name)
        dropped = len(rows) - len(aset.annotations)
        if dropped:
            print(f"dropped {dropped} zero-confidence rows")
    elif args.source_format == "cocovid":
        aset = convert_cocovid(raw, synonyms, source_dataset=args.source_dataset)
    else:
        if synonyms is None:
            raise ConversionError("--synonyms is required for imagenetvid sources")
        frames, meta = parse_imagenet_vid_document(raw)
        aset = convert_imagenet_vid(frames, meta, synonyms, source_dataset=args.source_dataset)
    if args.normalize:
        aset = normalize_occlusions(aset)
    problems = validate_annotation_set(aset)
    if problems:
        raise ConversionError("converted set fails validation: " + "; ".join(problems[:5]))
    out = args.out or str(Path(args.out_dir) / "annotations.json")
    cli.write(out, serialize_annotations(aset))
    print(f"wrote {out}: {len(aset.videos)} videos, {len(aset.categories)} categories, "
          f"{len(aset.annotations)} annotations")
    return 0


def cmd_validate(args: argparse.Namespace, cli: _Cli) -> int:
    aset = parse_annotations(cli.read(args.annotations))
    problems = validate_annotation_set(aset)
    summary = stats_report(aset)["summary"]
    print(f"videos: {summary['n_videos']}  categories: {summary['n_classes']}  "
          f"tracks: {summary['n_tracks']}  boxes: {summary['n_boxes']}  "
          f"annotated frames: {summary['n_frames']}")
    if problems:
        for p in problems:
            print(f"problem: {p}", file=sys.stderr)
        return 2
    print("annotation set is valid")
    return 0


def cmd_stats(args: argparse.Namespace, cli: _Cli) -> int:
    aset = parse_annotations(cli.read(args.annotations))
    if args.base_classes:
        base = load_base_names(cli.read(args.base_classes))
        aset.categories = split_categories(aset.categories, base)
        n_base = sum(1 for c in aset.categories if c.split == "base")
        print(f"category split: {n_base} base / {len(aset.categories) - n_base} novel")
    doc = stats_report(aset)
    out = Path(args.out_dir) / "stats.json"
    cli.write(out, json.dumps(doc, indent=2))
    lines = ["dimension,class,count"]
    for dim in ("object_size", "object_shape", "track_length"):
        for cls, count in doc[dim].items():
            lines.append(f"{dim},{cls},{count}")
    for attr, count in doc["attributes"]["track_counts"].items():
        lines.append(f"attribute,{attr},{count}")
    cli.write(Path(args.out_dir) / "stats_tables.csv", "\n".join(lines) + "\n")
    s = doc["summary"]
    print(f"videos: {s['n_videos']}  categories: {s['n_classes']}  tracks: {s['n_tracks']}  "
          f"boxes: {s['n_boxes']}  annotated frames: {s['n_frames']}")
    print(f"wrote {out}")
    return 0


def cmd_track(args: argparse.Namespace, cli: _Cli) -> int:
    config = _load_tracker_config(args, cli)
    sequences = parse_detection_file(cli.read(args.detections), args.embedding_dim)
    sequences.sort(key=lambda s: s.video_id)
    if args.jobs > 1 and len(sequences) > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(lambda seq: run_tracker(seq, config), sequences))
    else:
        results = [run_tracker(seq, config) for seq in sequences]
    merged = TrackResult(records=[r for res in results for r in res.records])
    out = args.out or str(Path(args.out_dir) / "tracks.json")
    cli.write(out, merged.to_json())
    n_tracks = len({(r.video_id, r.track_id) for r in merged.records})
    print(f"wrote {out}: {len(merged.records)} records, {n_tracks} tracks, "
          f"{len(sequences)} videos (mode={config.mode})")
    return 0


def cmd_evaluate(args: argparse.Namespace, cli: _Cli) -> int:
    gt = parse_annotations(cli.read(args.gt))
    base = load_base_names(cli.read(args.base_classes))
    gt.categories = split_categories(gt.categories, base)
    pred = TrackResult.from_json(cli.read(args.pred))
    thresholds = [float(t) for t in args.loc_thresholds.split(",") if t.strip()]
    report = compute_teta(
        gt, pred, thresholds, label=args.label or Path(args.pred).stem, n_jobs=args.jobs
    )
    out_json = Path(args.out_dir) / "teta_report.json"
    cli.write(out_json, report.to_json())
    cli.write(Path(args.out_dir) / "teta_report.csv", report.to_csv())
    print(f"{'split':<8}{'TETA':>8}{'LocA':>8}{'AssA':>8}{'ClsA':>8}")
    for split in SPLITS:
        teta, loca, assa, clsa = report.scores(split)
        print(f"{split:<8}{teta:8.1f}{loca:8.1f}{assa:8.1f}{clsa:8.1f}")
    print(f"wrote {out_json}")
    return 0


def cmd_synth(args: argparse.Namespace, cli: _Cli) -> int:
    if args.config:
        cfg = SynthConfig.from_json(cli.read(args.config))
    else:
        cfg = SynthConfig()
    if args.seed is not None:
        cfg = SynthConfig(**{**asdict(cfg), "seed": args.seed})
    cli.config_snapshot = asdict(cfg)
    aset, dets = generate_scenario(cfg)
    out_ann = args.out_ann or str(Path(args.out_dir) / "synthetic_annotations.json")
    out_det = args.out_det or str(Path(args.out_dir) / "synthetic_detections.jsonl")
    cli.write(out_ann, serialize_annotations(aset))
    cli.write(out_det, serialize_detections(dets))
    n_dets = sum(len(d) for _, d in dets.frames)
    print(f"wrote {out_ann} ({len(aset.annotations)} annotations) and "
          f"{out_det} ({n_dets} detections)")
    return 0


def cmd_report(args: argparse.Namespace, cli: _Cli) -> int:
    for path in args.reports:
        cli.read(path)
    kind, reports = load_reports([Path(p) for p in args.reports])
    out_dir = Path(args.out_dir)
    if kind == "evaluation":
        written = write_comparison(reports, out_dir)
        print(comparison_text(reports))
    else:
        written = []
        for doc in reports:
            written.extend(write_stats_figures(doc, out_dir))
    for path in written:
        cli.register_output(path)
        print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# parser assembly
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="motkit",
        description="Multi-object tracking toolkit: convert, validate, stats, "
        "track, evaluate, synth, report.",
    )
    parser.add_argument("--version", action="version", version=f"motkit {__version__}")
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--jobs", type=int, default=1, help="worker pool size")
    shared.add_argument("--seed", type=int, default=None, help="random seed override")
    shared.add_argument("--out-dir", default=".", help="output directory")
    shared.add_argument(
        "--config", default=None, help=f"config file (or ${CONFIG_ENV})"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", parents=[shared], help="convert source annotations")
    p.add_argument("input", help="source annotation file")
    p.add_argument(
        "--from",
        dest="source_format",
        required=True,
        choices=["motchallenge", "cocovid", "imagenetvid"],
    )
    p.add_argument("--synonyms", default=None, help="synonym map JSON")
    p.add_argument("--source-dataset", default=None, help="dataset name for polysemy constraints")
    p.add_argument("--out", default=None, help="output annotation JSON path")
    p.add_argument("--normalize", action="store_true", help="fill interior gaps with null records")
    p.add_argument("--category-id", type=int, default=1)
    p.add_argument("--category-name", default="object")
    p.add_argument("--video-id", type=int, default=1)
    p.add_argument("--video-name", default="sequence")
    p.add_argument("--width", type=int, default=1920)
    p.add_argument("--height", type=int, default=1080)
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--frame-count", type=int, default=None)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("validate", parents=[shared], help="check an annotation file")
    p.add_argument("annotations")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("stats", parents=[shared], help="dataset statistics and attributes")
    p.add_argument("annotations")
    p.add_argument("--base-classes", default=None, help="newline-delimited base class names")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("track", parents=[shared], help="run the tracker over detections")
    p.add_argument("--detections", required=True, help="detection JSONL file")
    p.add_argument("--mode", choices=list(MODES), default=None)
    p.add_argument("--embedding-dim", type=int, default=None)
    p.add_argument("--out", default=None, help="output track result JSON path")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("evaluate", parents=[shared], help="score predictions against ground truth")
    p.add_argument("--gt", required=True, help="annotation JSON")
    p.add_argument("--pred", required=True, help="track result JSON")
    p.add_argument("--base-classes", required=True, help="newline-delimited base class names")
    p.add_argument("--loc-thresholds", default="0.5", help="comma-separated IoU thresholds")
    p.add_argument("--label", default=None, help="method label for reports")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", parents=[shared], help="generate a synthetic scenario")
    p.add_argument("--out-ann", default=None)
    p.add_argument("--out-det", default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", parents=[shared], help="tables and figures from report JSONs")
    p.add_argument("reports", nargs="+", help="evaluation or stats report JSONs")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    cli = _Cli(args.command, args)
    try:
        code = args.func(args, cli)
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - internal failures
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    cli.write_manifest(args.out_dir)
    return code


if __name__ == "__main__":
    sys.exit(main())
