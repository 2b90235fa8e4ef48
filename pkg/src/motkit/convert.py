"""Converters from source annotation dialects into the unified protocol.

Supported sources: MOTChallenge text files, COCO-video style JSON (VIS
datasets) and ImageNet-VID style per-frame object records. Category
vocabularies are reconciled through a synonym map and interior track gaps
are normalized to explicit null (fully occluded) records.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from .data_model import (
    AnnotationSet,
    BBox,
    Category,
    GtAnnotation,
    VideoMeta,
)


class ConversionError(ValueError):
    """Raised for malformed source annotations or unresolvable categories."""


@dataclass
class SynonymMap:
    """canonical name -> source names, plus per-dataset overrides for
    polysemous terms ((source name, source dataset) -> canonical)."""

    canonical: dict[str, set[str]] = field(default_factory=dict)
    constraints: dict[tuple[str, str], str] = field(default_factory=dict)

    def __post_init__(self):
        owners: dict[str, str] = {}
        constrained = {name for name, _ in self.constraints}
        for canon, sources in self.canonical.items():
            for src in sources:
                prev = owners.get(src)
                if prev is not None and prev != canon and src not in constrained:
                    raise ConversionError(
                        f"source name {src!r} maps to both {prev!r} and {canon!r} "
                        "without a disambiguating constraint"
                    )
                owners.setdefault(src, canon)
        self._owners = owners

    def resolve(self, name: str, source_dataset: str | None = None) -> str | None:
        """Canonical name for a source name, or None when unmapped."""
        if source_dataset is not None and (name, source_dataset) in self.constraints:
            return self.constraints[(name, source_dataset)]
        if name in self._owners:
            return self._owners[name]
        if name in self.canonical:
            return name
        return None

    @classmethod
    def from_json(cls, document: bytes | str) -> "SynonymMap":
        doc = json.loads(document)
        constraints_raw = doc.pop("constraints", [])
        canonical = {str(k): {str(s) for s in v} for k, v in doc.items()}
        constraints = {
            (str(c["name"]), str(c["source"])): str(c["canonical"]) for c in constraints_raw
        }
        return cls(canonical=canonical, constraints=constraints)


# ---------------------------------------------------------------------------
# MOTChallenge
# ---------------------------------------------------------------------------

def convert_motchallenge(
    det_text: bytes | str,
    seq_info: VideoMeta,
    category_id: int,
    category_name: str = "object",
) -> AnnotationSet:
    """Convert `frame,id,x,y,w,h,conf,...` rows (1-based frames) to annotations.

    Rows with conf == 0 mark ignore regions and are dropped; trailing columns
    beyond the seventh are discarded.
    """
    if isinstance(det_text, bytes):
        det_text = det_text.decode("utf-8")
    annotations = []
    dropped = 0
    for lineno, line in enumerate(det_text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) < 7:
            raise ConversionError(f"line {lineno}: expected at least 7 fields, got {len(parts)}")
        try:
            frame = int(float(parts[0]))
            track_id = int(float(parts[1]))
            x, y, w, h = (float(p) for p in parts[2:6])
            conf = float(parts[6])
        except ValueError as exc:
            raise ConversionError(f"line {lineno}: {exc}") from exc
        if conf == 0:
            dropped += 1
            continue
        if frame < 1:
            raise ConversionError(f"line {lineno}: frame {frame} not 1-based")
        try:
            bbox = BBox(x, y, w, h)
        except ValueError as exc:
            raise ConversionError(f"line {lineno}: {exc}") from exc
        annotations.append(
            GtAnnotation(
                video_id=seq_info.id,
                frame_index=frame - 1,
                track_id=track_id,
                category_id=category_id,
                bbox=bbox,
            )
        )
    return AnnotationSet(
        videos=[seq_info],
        categories=[Category(id=category_id, name=category_name)],
        annotations=annotations,
    )


# ---------------------------------------------------------------------------
# COCO-video (VIS-style)
# ---------------------------------------------------------------------------

def convert_cocovid(
    doc: bytes | str,
    synonyms: SynonymMap | None = None,
    source_dataset: str | None = None,
    default_fps: float = 30.0,
) -> AnnotationSet:
    """Convert a COCO-video document (per-track `bboxes` array, null = absent).

    Null entries inside a track's span become explicit occlusion records;
    leading and trailing nulls are trimmed. With a synonym map, every source
    category must resolve to a canonical name.
    """
    try:
        data = json.loads(doc)
    except json.JSONDecodeError as exc:
        raise ConversionError(f"invalid JSON: {exc}") from exc

    track_lengths: dict[int, int] = {}
    for ann in data.get("annotations", []):
        vid = int(ann["video_id"])
        track_lengths[vid] = max(track_lengths.get(vid, 0), len(ann.get("bboxes", [])))

    videos = []
    for v in data.get("videos", []):
        vid = int(v["id"])
        fps = float(v.get("fps", default_fps))
        frame_count = int(v.get("length", track_lengths.get(vid, 1)))
        videos.append(
            VideoMeta(
                id=vid,
                name=str(v.get("name", f"video_{vid}")),
                width=int(v["width"]),
                height=int(v["height"]),
                frame_count=max(frame_count, 1),
                fps=fps,
                ann_fps=float(v.get("ann_fps", fps)),
            )
        )

    categories = []
    for c in data.get("categories", []):
        name = str(c["name"])
        if synonyms is not None:
            canonical = synonyms.resolve(name, source_dataset)
            if canonical is None:
                raise ConversionError(f"category {name!r} has no synonym mapping")
            name = canonical
        categories.append(Category(id=int(c["id"]), name=name))

    annotations = []
    for i, ann in enumerate(data.get("annotations", [])):
        where = f"annotations[{i}]"
        try:
            track_id = int(ann["id"])
            video_id = int(ann["video_id"])
            category_id = int(ann["category_id"])
            bboxes = ann["bboxes"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConversionError(f"{where}: {exc}") from exc
        present = [fi for fi, b in enumerate(bboxes) if b is not None]
        if not present:
            continue
        first, last = present[0], present[-1]
        for fi in range(first, last + 1):
            raw = bboxes[fi]
            if raw is None:
                bbox = None
            else:
                try:
                    bbox = BBox.from_list(raw)
                except ValueError as exc:
                    raise ConversionError(f"{where}, frame {fi}: {exc}") from exc
            annotations.append(
                GtAnnotation(
                    video_id=video_id,
                    frame_index=fi,
                    track_id=track_id,
                    category_id=category_id,
                    bbox=bbox,
                )
            )
    out = AnnotationSet(videos=videos, categories=categories, annotations=annotations)
    return _collapse_duplicate_categories(out)


# ---------------------------------------------------------------------------
# ImageNet-VID style
# ---------------------------------------------------------------------------

def convert_imagenet_vid(
    frames: list[dict],
    meta: VideoMeta,
    synonyms: SynonymMap,
    source_dataset: str | None = None,
) -> AnnotationSet:
    """Convert per-frame object records with corner coordinates and wnid names.

    Every wnid must resolve through the synonym map; corner coordinates are
    converted to (x, y, w, h).
    """
    name_to_id: dict[str, int] = {}
    categories: list[Category] = []
    annotations = []
    for frame in frames:
        try:
            frame_index = int(frame["frame_index"])
            objects = frame["objects"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConversionError(f"frame record: {exc}") from exc
        for obj in objects:
            where = f"frame {frame_index}"
            try:
                track_id = int(obj["trackid"])
                wnid = str(obj["name"])
                xmin, xmax = float(obj["xmin"]), float(obj["xmax"])
                ymin, ymax = float(obj["ymin"]), float(obj["ymax"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ConversionError(f"{where}: {exc}") from exc
            if xmax <= xmin or ymax <= ymin:
                raise ConversionError(
                    f"{where}, track {track_id}: degenerate corners "
                    f"({xmin}, {ymin}, {xmax}, {ymax})"
                )
            canonical = synonyms.resolve(wnid, source_dataset)
            if canonical is None:
                raise ConversionError(f"{where}: wnid {wnid!r} has no synonym mapping")
            if canonical not in name_to_id:
                name_to_id[canonical] = len(name_to_id) + 1
                categories.append(Category(id=name_to_id[canonical], name=canonical))
            annotations.append(
                GtAnnotation(
                    video_id=meta.id,
                    frame_index=frame_index,
                    track_id=track_id,
                    category_id=name_to_id[canonical],
                    bbox=BBox(xmin, ymin, xmax - xmin, ymax - ymin),
                )
            )
    return AnnotationSet(videos=[meta], categories=categories, annotations=annotations)


def parse_imagenet_vid_document(doc: bytes | str) -> tuple[list[dict], VideoMeta]:
    """Read the JSON wrapper used by the CLI: {"video": {...}, "frames": [...]}"""
    try:
        data = json.loads(doc)
        video = data["video"]
        frames = data["frames"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ConversionError(f"invalid document: {exc}") from exc
    frame_count = video.get("frame_count")
    if frame_count is None:
        frame_count = 1 + max(
            (int(f.get("frame_index", 0)) for f in frames), default=0
        )
    fps = float(video.get("fps", 30.0))
    meta = VideoMeta(
        id=int(video.get("id", 1)),
        name=str(video.get("name", "video_1")),
        width=int(video["width"]),
        height=int(video["height"]),
        frame_count=int(frame_count),
        fps=fps,
        ann_fps=float(video.get("ann_fps", fps)),
    )
    return frames, meta


# ---------------------------------------------------------------------------
# category merging & occlusion normalization
# ---------------------------------------------------------------------------

def _collapse_duplicate_categories(aset: AnnotationSet) -> AnnotationSet:
    """Fold categories sharing a name into the first occurrence's id."""
    keeper: dict[str, Category] = {}
    id_remap: dict[int, int] = {}
    categories: list[Category] = []
    for c in aset.categories:
        if c.name in keeper:
            id_remap[c.id] = keeper[c.name].id
        else:
            keeper[c.name] = c
            id_remap[c.id] = c.id
            categories.append(c)
    annotations = [
        replace(a, category_id=id_remap.get(a.category_id, a.category_id))
        for a in aset.annotations
    ]
    track_cat: dict[tuple[int, int], int] = {}
    for a in annotations:
        key = (a.video_id, a.track_id)
        prev = track_cat.get(key)
        if prev is not None and prev != a.category_id:
            raise ConversionError(
                f"track {a.track_id} in video {a.video_id} would span categories "
                f"{prev} and {a.category_id} after merging"
            )
        track_cat.setdefault(key, a.category_id)
    return AnnotationSet(videos=aset.videos, categories=categories, annotations=annotations)


def merge_categories(aset: AnnotationSet, synonyms: SynonymMap) -> AnnotationSet:
    """Rename categories through the synonym map and collapse duplicates.

    Names without a mapping pass through unchanged; merging that would give a
    track two categories fails loudly.
    """
    renamed = [
        replace(c, name=synonyms.resolve(c.name) or c.name) for c in aset.categories
    ]
    return _collapse_duplicate_categories(
        AnnotationSet(videos=aset.videos, categories=renamed, annotations=aset.annotations)
    )


def normalize_occlusions(aset: AnnotationSet) -> AnnotationSet:
    """Fill interior frame gaps of every track with explicit null records.

    Idempotent; present boxes are carried over untouched and track ids are
    preserved across the filled gaps.
    """
    fills: list[GtAnnotation] = []
    for (video_id, track_id), records in sorted(aset.tracks().items()):
        have = {r.frame_index for r in records}
        first, last = records[0].frame_index, records[-1].frame_index
        for fi in range(first + 1, last):
            if fi not in have:
                fills.append(
                    GtAnnotation(
                        video_id=video_id,
                        frame_index=fi,
                        track_id=track_id,
                        category_id=records[0].category_id,
                        bbox=None,
                    )
                )
    # existing records keep their order so a gapless set round-trips untouched
    return AnnotationSet(
        videos=aset.videos,
        categories=aset.categories,
        annotations=list(aset.annotations) + fills,
    )
