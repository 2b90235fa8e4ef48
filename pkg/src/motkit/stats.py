"""Dataset-level statistics and per-track/per-object attribute taxonomies."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .data_model import AnnotationSet, BBox, GtAnnotation, VideoMeta

SIZE_LARGE = "large"
SIZE_MEDIUM = "medium"
SIZE_SMALL = "small"
SHAPE_COMPLEX = "complex"
SHAPE_INTERMEDIATE = "intermediate"
SHAPE_NORMAL = "normal"
LENGTH_LONG = "long"
LENGTH_MEDIUM = "medium"
LENGTH_SHORT = "short"


@dataclass(frozen=True)
class SummaryStats:
    n_classes: int
    n_videos: int
    n_tracks: int
    n_boxes: int
    n_frames: int
    resolution_range: tuple[int, int]
    duration_range: tuple[float, float]
    objects_per_frame_range: tuple[int, int]
    ann_fps_range: tuple[float, float]


@dataclass(frozen=True)
class AttributeFlags:
    occluded_track: bool
    fast_motion: bool
    out_of_view: bool
    shape_change: bool


def dataset_summary(aset: AnnotationSet) -> SummaryStats:
    """Exact counts over an annotation set; boxes count non-null records only.

    A frame counts as annotated when any record (including a null box) exists
    for it; resolution uses the frame height.
    """
    n_boxes = sum(1 for a in aset.annotations if a.bbox is not None)
    tracks = {(a.video_id, a.track_id) for a in aset.annotations}
    frames = {(a.video_id, a.frame_index) for a in aset.annotations}
    per_frame: dict[tuple[int, int], int] = {}
    for a in aset.annotations:
        if a.bbox is not None:
            key = (a.video_id, a.frame_index)
            per_frame[key] = per_frame.get(key, 0) + 1

    heights = [v.height for v in aset.videos]
    durations = [v.duration for v in aset.videos]
    ann_fps = [v.ann_fps for v in aset.videos]
    obj_counts = list(per_frame.values())
    return SummaryStats(
        n_classes=len(aset.categories),
        n_videos=len(aset.videos),
        n_tracks=len(tracks),
        n_boxes=n_boxes,
        n_frames=len(frames),
        resolution_range=(min(heights), max(heights)) if heights else (0, 0),
        duration_range=(min(durations), max(durations)) if durations else (0.0, 0.0),
        objects_per_frame_range=(min(obj_counts), max(obj_counts)) if obj_counts else (0, 0),
        ann_fps_range=(min(ann_fps), max(ann_fps)) if ann_fps else (0.0, 0.0),
    )


def compute_track_attributes(track: list[GtAnnotation], meta: VideoMeta) -> AttributeFlags:
    """Challenge flags for one track (records sorted by frame, >= 1 present box).

    - occluded: a null-box record sits between the first and last present box
    - fast motion: consecutive annotated centers move more than width/25
    - out of view: some box extends beyond the image rectangle
    - shape change: aspect ratio shifts by more than 1/5 (relative) between
      consecutive annotated frames
    """
    records = sorted(track, key=lambda r: r.frame_index)
    present = [r for r in records if r.bbox is not None]
    if not present:
        raise ValueError("track has no present bbox")
    first, last = present[0].frame_index, present[-1].frame_index
    occluded = any(
        r.bbox is None and first < r.frame_index < last for r in records
    )
    fast = False
    shape = False
    for prev, cur in zip(present, present[1:]):
        dx = cur.bbox.cx - prev.bbox.cx
        dy = cur.bbox.cy - prev.bbox.cy
        if math.hypot(dx, dy) > meta.width / 25.0:
            fast = True
        if abs(cur.bbox.aspect - prev.bbox.aspect) / prev.bbox.aspect > 0.2:
            shape = True
    out = any(
        r.bbox.x < 0
        or r.bbox.y < 0
        or r.bbox.x + r.bbox.w > meta.width
        or r.bbox.y + r.bbox.h > meta.height
        for r in present
    )
    return AttributeFlags(
        occluded_track=occluded, fast_motion=fast, out_of_view=out, shape_change=shape
    )


def classify_object(bbox: BBox, meta: VideoMeta) -> tuple[str, str]:
    """Size class by image-area fraction, shape class by aspect ratio.

    Boundary values land in the larger / more extreme class.
    """
    fraction = bbox.area / (meta.width * meta.height)
    if fraction >= 0.5:
        size = SIZE_LARGE
    elif fraction >= 0.1:
        size = SIZE_MEDIUM
    else:
        size = SIZE_SMALL
    aspect = bbox.aspect
    if aspect >= 5.0 or aspect <= 0.2:
        shape = SHAPE_COMPLEX
    elif aspect >= 2.0 or aspect <= 0.5:
        shape = SHAPE_INTERMEDIATE
    else:
        shape = SHAPE_NORMAL
    return size, shape


def classify_track_length(track: list[GtAnnotation], meta: VideoMeta) -> str:
    """Span of annotated frames relative to the video length."""
    frames = [r.frame_index for r in track if r.bbox is not None]
    if not frames:
        raise ValueError("track has no present bbox")
    span = max(frames) - min(frames) + 1
    ratio = span / meta.frame_count
    if ratio >= 0.8:
        return LENGTH_LONG
    if ratio >= 0.2:
        return LENGTH_MEDIUM
    return LENGTH_SHORT


def stats_report(aset: AnnotationSet) -> dict:
    """Summary plus attribute and class histograms, JSON-serializable."""
    summary = dataset_summary(aset)
    videos = aset.video_by_id()
    tracks = aset.tracks()

    attr_counts = {"occluded_track": 0, "fast_motion": 0, "out_of_view": 0, "shape_change": 0}
    attr_videos: dict[str, set[int]] = {k: set() for k in attr_counts}
    length_counts = {LENGTH_LONG: 0, LENGTH_MEDIUM: 0, LENGTH_SHORT: 0}
    size_counts = {SIZE_LARGE: 0, SIZE_MEDIUM: 0, SIZE_SMALL: 0}
    shape_counts = {SHAPE_COMPLEX: 0, SHAPE_INTERMEDIATE: 0, SHAPE_NORMAL: 0}

    for (video_id, _), records in tracks.items():
        meta = videos[video_id]
        if not any(r.bbox is not None for r in records):
            continue
        flags = compute_track_attributes(records, meta)
        for name in attr_counts:
            if getattr(flags, name):
                attr_counts[name] += 1
                attr_videos[name].add(video_id)
        length_counts[classify_track_length(records, meta)] += 1

    for ann in aset.annotations:
        if ann.bbox is None:
            continue
        size, shape = classify_object(ann.bbox, videos[ann.video_id])
        size_counts[size] += 1
        shape_counts[shape] += 1

    n_tracks = max(summary.n_tracks, 1)
    n_videos = max(summary.n_videos, 1)
    return {
        "summary": {
            "n_classes": summary.n_classes,
            "n_videos": summary.n_videos,
            "n_tracks": summary.n_tracks,
            "n_boxes": summary.n_boxes,
            "n_frames": summary.n_frames,
            "resolution_range": list(summary.resolution_range),
            "duration_range": list(summary.duration_range),
            "objects_per_frame_range": list(summary.objects_per_frame_range),
            "ann_fps_range": list(summary.ann_fps_range),
        },
        "attributes": {
            "track_counts": attr_counts,
            "track_fractions": {k: v / n_tracks for k, v in attr_counts.items()},
            "video_fractions": {k: len(v) / n_videos for k, v in attr_videos.items()},
        },
        "object_size": size_counts,
        "object_shape": shape_counts,
        "track_length": length_counts,
    }
