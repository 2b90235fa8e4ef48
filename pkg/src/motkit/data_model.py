"""Core data types shared by every stage of the toolkit.

Annotations follow the TAO-style protocol: videos, categories, tracks and
per-frame boxes, with a null box standing for a completely occluded object.
Detector outputs are frame-ordered lists of boxes with confidences, optional
per-class scores and an appearance embedding.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

SPLIT_BASE = "base"
SPLIT_NOVEL = "novel"

UNKNOWN_CATEGORY = -1


class AnnotationError(ValueError):
    """Raised for malformed or inconsistent annotation documents."""


class DetectionFormatError(ValueError):
    """Raised for malformed detection documents."""


@dataclass(frozen=True)
class BBox:
    """Axis-aligned rectangle in absolute pixels, stored as (x, y, w, h)."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"bbox origin must be finite, got ({self.x}, {self.y})")
        if not (self.w > 0 and self.h > 0 and math.isfinite(self.w) and math.isfinite(self.h)):
            raise ValueError(f"bbox size must be positive and finite, got ({self.w}, {self.h})")

    @property
    def cx(self) -> float:
        return self.x + self.w / 2.0

    @property
    def cy(self) -> float:
        return self.y + self.h / 2.0

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def aspect(self) -> float:
        return self.w / self.h

    def as_xyxy(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.x + self.w, self.y + self.h)

    def to_list(self) -> list[float]:
        return [self.x, self.y, self.w, self.h]

    @classmethod
    def from_list(cls, values) -> "BBox":
        if len(values) != 4:
            raise ValueError(f"bbox needs 4 values, got {len(values)}")
        return cls(float(values[0]), float(values[1]), float(values[2]), float(values[3]))


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes; edge-touching boxes score 0."""
    ax1, ay1, ax2, ay2 = a.as_xyxy()
    bx1, by1, bx2, by2 = b.as_xyxy()
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    # areas from the same corner differences keep identical boxes at exactly 1
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    return inter / union


def iou_matrix(boxes_a: list[BBox], boxes_b: list[BBox]) -> np.ndarray:
    """Pairwise IoU, shape (len(a), len(b)). Vectorized over numpy."""
    if not boxes_a or not boxes_b:
        return np.zeros((len(boxes_a), len(boxes_b)))
    a = np.array([b.as_xyxy() for b in boxes_a])
    b = np.array([b.as_xyxy() for b in boxes_b])
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    return np.where(inter > 0, inter / union, 0.0)


@dataclass(frozen=True)
class Category:
    id: int
    name: str
    split: str | None = None

    def __post_init__(self):
        if self.split not in (None, SPLIT_BASE, SPLIT_NOVEL):
            raise ValueError(f"unknown split {self.split!r}")


@dataclass(frozen=True)
class VideoMeta:
    id: int
    name: str
    width: int
    height: int
    frame_count: int
    fps: float
    ann_fps: float

    def __post_init__(self):
        if self.width < 1 or self.height < 1 or self.frame_count < 1:
            raise ValueError(f"video {self.id}: width/height/frame_count must be >= 1")
        if self.ann_fps > self.fps:
            raise ValueError(f"video {self.id}: ann_fps {self.ann_fps} exceeds fps {self.fps}")

    @property
    def duration(self) -> float:
        return self.frame_count / self.fps


@dataclass(frozen=True)
class GtAnnotation:
    """One track observation; bbox is None exactly when fully occluded."""

    video_id: int
    frame_index: int
    track_id: int
    category_id: int
    bbox: BBox | None


@dataclass
class AnnotationSet:
    videos: list[VideoMeta]
    categories: list[Category]
    annotations: list[GtAnnotation]

    def video_by_id(self) -> dict[int, VideoMeta]:
        return {v.id: v for v in self.videos}

    def category_by_id(self) -> dict[int, Category]:
        return {c.id: c for c in self.categories}

    def tracks(self) -> dict[tuple[int, int], list[GtAnnotation]]:
        """Annotations grouped by (video_id, track_id), sorted by frame."""
        out: dict[tuple[int, int], list[GtAnnotation]] = {}
        for ann in self.annotations:
            out.setdefault((ann.video_id, ann.track_id), []).append(ann)
        for recs in out.values():
            recs.sort(key=lambda r: r.frame_index)
        return out


@dataclass(eq=False)
class Detection:
    """A single detector output box with confidence and appearance embedding."""

    bbox: BBox
    score: float
    embedding: np.ndarray
    class_scores: dict[int, float] | None = None
    assigned_category: int | None = None

    def __post_init__(self):
        self.embedding = np.asarray(self.embedding, dtype=float)
        if not math.isfinite(self.score):
            raise ValueError(f"detection score must be finite, got {self.score}")
        if self.assigned_category is None and self.class_scores:
            # argmax; ties broken toward the lowest category id
            self.assigned_category = min(
                self.class_scores, key=lambda cid: (-self.class_scores[cid], cid)
            )

    def __eq__(self, other):
        if not isinstance(other, Detection):
            return NotImplemented
        return (
            self.bbox == other.bbox
            and self.score == other.score
            and np.array_equal(self.embedding, other.embedding)
            and self.class_scores == other.class_scores
            and self.assigned_category == other.assigned_category
        )


@dataclass
class DetectionSequence:
    video_id: int
    frames: list[tuple[int, list[Detection]]]

    def embedding_dim(self) -> int | None:
        for _, dets in self.frames:
            if dets:
                return int(dets[0].embedding.shape[0])
        return None

    def __eq__(self, other):
        if not isinstance(other, DetectionSequence):
            return NotImplemented
        return self.video_id == other.video_id and self.frames == other.frames


# ---------------------------------------------------------------------------
# annotation document I/O
# ---------------------------------------------------------------------------

def _require(cond: bool, where: str, message: str):
    if not cond:
        raise AnnotationError(f"{where}: {message}")


def parse_annotations(document: bytes | str) -> AnnotationSet:
    """Parse a TAO-protocol annotation JSON document.

    Errors carry the offending location (array name plus index) so bad
    exports can be fixed at the source.
    """
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise AnnotationError(f"invalid JSON: {exc}") from exc
    _require(isinstance(doc, dict), "document", "top level must be an object")
    for key in ("videos", "categories", "annotations"):
        _require(key in doc, "document", f"missing key {key!r}")
        _require(isinstance(doc[key], list), key, "must be an array")

    videos = []
    for i, v in enumerate(doc["videos"]):
        where = f"videos[{i}]"
        try:
            videos.append(
                VideoMeta(
                    id=int(v["id"]),
                    name=str(v["name"]),
                    width=int(v["width"]),
                    height=int(v["height"]),
                    frame_count=int(v["frame_count"]),
                    fps=float(v["fps"]),
                    ann_fps=float(v["ann_fps"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise AnnotationError(f"{where}: {exc}") from exc
    _require(len({v.id for v in videos}) == len(videos), "videos", "duplicate video ids")

    categories = []
    for i, c in enumerate(doc["categories"]):
        where = f"categories[{i}]"
        try:
            categories.append(
                Category(id=int(c["id"]), name=str(c["name"]), split=c.get("split"))
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise AnnotationError(f"{where}: {exc}") from exc
    _require(
        len({c.id for c in categories}) == len(categories), "categories", "duplicate category ids"
    )

    video_ids = {v.id: v for v in videos}
    category_ids = {c.id for c in categories}
    seen: set[tuple[int, int, int]] = set()
    track_home: dict[tuple[int, int], int] = {}
    annotations = []
    for i, a in enumerate(doc["annotations"]):
        where = f"annotations[{i}]"
        try:
            video_id = int(a["video_id"])
            frame_index = int(a["frame_index"])
            track_id = int(a["track_id"])
            category_id = int(a["category_id"])
            raw_box = a["bbox"]
        except (KeyError, TypeError, ValueError) as exc:
            raise AnnotationError(f"{where}: {exc}") from exc
        _require(video_id in video_ids, where, f"unknown video_id {video_id}")
        _require(category_id in category_ids, where, f"unknown category_id {category_id}")
        meta = video_ids[video_id]
        _require(
            0 <= frame_index < meta.frame_count,
            where,
            f"frame_index {frame_index} outside [0, {meta.frame_count})",
        )
        triple = (video_id, frame_index, track_id)
        _require(triple not in seen, where, f"duplicate (video, frame, track) {triple}")
        seen.add(triple)
        key = (video_id, track_id)
        prev = track_home.get(key)
        if prev is None:
            track_home[key] = category_id
        else:
            _require(
                prev == category_id,
                where,
                f"track {track_id} in video {video_id} has two categories ({prev}, {category_id})",
            )
        if raw_box is None:
            bbox = None
        else:
            try:
                bbox = BBox.from_list(raw_box)
            except ValueError as exc:
                raise AnnotationError(f"{where}: {exc}") from exc
        annotations.append(GtAnnotation(video_id, frame_index, track_id, category_id, bbox))
    return AnnotationSet(videos=videos, categories=categories, annotations=annotations)


def serialize_annotations(aset: AnnotationSet) -> bytes:
    doc = {
        "videos": [
            {
                "id": v.id,
                "name": v.name,
                "width": v.width,
                "height": v.height,
                "frame_count": v.frame_count,
                "fps": v.fps,
                "ann_fps": v.ann_fps,
            }
            for v in aset.videos
        ],
        "categories": [
            {"id": c.id, "name": c.name, **({"split": c.split} if c.split else {})}
            for c in aset.categories
        ],
        "annotations": [
            {
                "video_id": a.video_id,
                "frame_index": a.frame_index,
                "track_id": a.track_id,
                "category_id": a.category_id,
                "bbox": a.bbox.to_list() if a.bbox is not None else None,
            }
            for a in aset.annotations
        ],
    }
    return json.dumps(doc).encode("utf-8")


def validate_annotation_set(aset: AnnotationSet) -> list[str]:
    """Check every cross-reference and invariant; returns problem strings.

    An empty list means the set is internally consistent. Re-checks the same
    rules the parser enforces so converter outputs built in memory get the
    same scrutiny as parsed files.
    """
    problems: list[str] = []
    video_ids = {}
    for v in aset.videos:
        if v.id in video_ids:
            problems.append(f"duplicate video id {v.id}")
        video_ids[v.id] = v
    cat_ids = set()
    for c in aset.categories:
        if c.id in cat_ids:
            problems.append(f"duplicate category id {c.id}")
        cat_ids.add(c.id)
    names = [c.name for c in aset.categories]
    if len(set(names)) != len(names):
        problems.append("duplicate category names")

    seen: set[tuple[int, int, int]] = set()
    track_video: dict[int, int] = {}
    track_cat: dict[tuple[int, int], int] = {}
    for i, a in enumerate(aset.annotations):
        where = f"annotations[{i}]"
        if a.video_id not in video_ids:
            problems.append(f"{where}: unknown video_id {a.video_id}")
            continue
        if a.category_id not in cat_ids:
            problems.append(f"{where}: unknown category_id {a.category_id}")
        meta = video_ids[a.video_id]
        if not 0 <= a.frame_index < meta.frame_count:
            problems.append(
                f"{where}: frame_index {a.frame_index} outside [0, {meta.frame_count})"
            )
        triple = (a.video_id, a.frame_index, a.track_id)
        if triple in seen:
            problems.append(f"{where}: duplicate (video, frame, track) {triple}")
        seen.add(triple)
        home = track_video.get(a.track_id)
        if home is not None and home != a.video_id:
            problems.append(
                f"{where}: track {a.track_id} appears in videos {home} and {a.video_id}"
            )
        track_video.setdefault(a.track_id, a.video_id)
        key = (a.video_id, a.track_id)
        cat = track_cat.get(key)
        if cat is not None and cat != a.category_id:
            problems.append(
                f"{where}: track {a.track_id} has categories {cat} and {a.category_id}"
            )
        track_cat.setdefault(key, a.category_id)
    return problems


# ---------------------------------------------------------------------------
# detection document I/O (JSON Lines, one frame per line)
# ---------------------------------------------------------------------------

def _parse_detection_line(line: str, lineno: int, expected_dim: int | None):
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DetectionFormatError(f"line {lineno}: invalid JSON: {exc}") from exc
    try:
        video_id = int(rec["video_id"])
        frame_index = int(rec["frame_index"])
        raw_dets = rec["detections"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DetectionFormatError(f"line {lineno}: {exc}") from exc
    dets = []
    for j, d in enumerate(raw_dets):
        where = f"line {lineno}, detection {j}"
        try:
            bbox = BBox.from_list(d["bbox"])
            score = float(d["score"])
            embedding = np.asarray(d["embedding"], dtype=float)
            raw_scores = d.get("class_scores")
        except (KeyError, TypeError, ValueError) as exc:
            raise DetectionFormatError(f"{where}: {exc}") from exc
        if embedding.ndim != 1:
            raise DetectionFormatError(f"{where}: embedding must be a flat vector")
        if expected_dim is not None and embedding.shape[0] != expected_dim:
            raise DetectionFormatError(
                f"{where}: embedding dimension {embedding.shape[0]} != expected {expected_dim}"
            )
        class_scores = (
            {int(k): float(v) for k, v in raw_scores.items()} if raw_scores else None
        )
        dets.append(Detection(bbox=bbox, score=score, embedding=embedding, class_scores=class_scores))
    return video_id, frame_index, dets


def parse_detections(document: bytes | str, expected_dim: int | None = None) -> DetectionSequence:
    """Parse a single-video JSON-Lines detection file.

    expected_dim=None adopts the first embedding's dimension and enforces it
    for the rest of the file.
    """
    sequences = parse_detection_file(document, expected_dim)
    if len(sequences) != 1:
        raise DetectionFormatError(
            f"expected a single video, found {len(sequences)} video ids"
        )
    return sequences[0]


def parse_detection_file(
    document: bytes | str, expected_dim: int | None = None
) -> list[DetectionSequence]:
    """Parse a detection file that may interleave several videos."""
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    by_video: dict[int, list[tuple[int, list[Detection]]]] = {}
    dim = expected_dim
    for lineno, line in enumerate(document.splitlines(), start=1):
        if not line.strip():
            continue
        video_id, frame_index, dets = _parse_detection_line(line, lineno, dim)
        if dim is None:
            for d in dets:
                dim = int(d.embedding.shape[0])
                break
            if dim is not None:
                for j, d in enumerate(dets):
                    if d.embedding.shape[0] != dim:
                        raise DetectionFormatError(
                            f"line {lineno}, detection {j}: embedding dimension "
                            f"{d.embedding.shape[0]} != expected {dim}"
                        )
        frames = by_video.setdefault(video_id, [])
        if frames and frame_index <= frames[-1][0]:
            raise DetectionFormatError(
                f"line {lineno}: frame_index {frame_index} not increasing for video "
                f"{video_id} (previous {frames[-1][0]})"
            )
        frames.append((frame_index, dets))
    return [DetectionSequence(video_id=vid, frames=frames) for vid, frames in by_video.items()]


def serialize_detections(sequences: DetectionSequence | list[DetectionSequence]) -> bytes:
    if isinstance(sequences, DetectionSequence):
        sequences = [sequences]
    lines = []
    for seq in sequences:
        for frame_index, dets in seq.frames:
            rec = {
                "video_id": seq.video_id,
                "frame_index": frame_index,
                "detections": [
                    {
                        "bbox": d.bbox.to_list(),
                        "score": d.score,
                        "class_scores": (
                            {str(k): v for k, v in d.class_scores.items()}
                            if d.class_scores
                            else None
                        ),
                        "embedding": [float(x) for x in d.embedding],
                    }
                    for d in dets
                ],
            }
            lines.append(json.dumps(rec))
    return ("\n".join(lines) + "\n").encode("utf-8")


# ---------------------------------------------------------------------------
# category splits
# ---------------------------------------------------------------------------

def split_categories(categories: list[Category], base_names: set[str]) -> list[Category]:
    """Assign every category to the base or novel split by name."""
    return [
        replace(c, split=SPLIT_BASE if c.name in base_names else SPLIT_NOVEL)
        for c in categories
    ]


def load_base_names(text: bytes | str) -> set[str]:
    """Read a newline-delimited base-class name list; blank lines ignored."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    return {line.strip() for line in text.splitlines() if line.strip()}
