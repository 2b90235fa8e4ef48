"""Synthetic tracking scenarios with known ground truth.

Generates annotation sets together with matching noisy detections so the
tracker and the evaluator can be checked against constructions whose correct
answers are known exactly, and injects controlled corruptions (id switches,
class flips, box jitter, deletions) into track results for metric
sensitivity checks.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .association import TrackRecord, TrackResult
from .data_model import (
    AnnotationSet,
    BBox,
    Category,
    Detection,
    DetectionSequence,
    GtAnnotation,
    VideoMeta,
)

MOTION_CONSTANT_VELOCITY = "constant_velocity"
MOTION_SINUSOIDAL = "sinusoidal"

_PLACEMENT_ATTEMPTS = 200
_EMBEDDING_ATTEMPTS = 1000


@dataclass(frozen=True)
class SynthConfig:
    n_tracks: int = 5
    n_frames: int = 50
    n_categories: int = 4
    image_width: int = 800
    image_height: int = 600
    motion_model: str = MOTION_CONSTANT_VELOCITY
    embedding_dim: int = 16
    embedding_separation: float = 0.8
    box_noise_std: float = 0.0
    embedding_noise_std: float = 0.0
    detection_drop_rate: float = 0.0
    clutter_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("detection_drop_rate", "clutter_rate"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name} must be in [0,1), got {v}")
        if self.embedding_separation <= 0:
            raise ValueError("embedding_separation must be positive")
        if self.motion_model not in (MOTION_CONSTANT_VELOCITY, MOTION_SINUSOIDAL):
            raise ValueError(f"unknown motion model {self.motion_model!r}")
        if min(self.n_tracks, self.n_frames, self.n_categories) < 1:
            raise ValueError("n_tracks, n_frames and n_categories must be >= 1")

    @classmethod
    def from_json(cls, document: bytes | str) -> "SynthConfig":
        doc = json.loads(document)
        if "image_size" in doc:
            w, h = doc.pop("image_size")
            doc["image_width"], doc["image_height"] = int(w), int(h)
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ValueError(f"bad scenario config: {exc}") from exc


@dataclass(frozen=True)
class ErrorSpec:
    id_switch_rate: float = 0.0
    class_flip_rate: float = 0.0
    box_jitter_std: float = 0.0
    deletion_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("id_switch_rate", "class_flip_rate", "deletion_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0,1], got {v}")


def _separated_latents(rng: np.random.Generator, cfg: SynthConfig) -> np.ndarray:
    """Unit-sphere latent embeddings with a guaranteed pairwise gap."""
    latents: list[np.ndarray] = []
    for _ in range(cfg.n_tracks):
        for _ in range(_EMBEDDING_ATTEMPTS):
            v = rng.normal(size=cfg.embedding_dim)
            v /= np.linalg.norm(v)
            if all(np.linalg.norm(v - u) >= cfg.embedding_separation for u in latents):
                latents.append(v)
                break
        else:
            raise ValueError(
                f"cannot place {cfg.n_tracks} embeddings with separation "
                f"{cfg.embedding_separation} in dimension {cfg.embedding_dim}"
            )
    return np.stack(latents)


def _track_boxes(rng: np.random.Generator, cfg: SynthConfig) -> list[BBox]:
    """One in-bounds trajectory of per-frame boxes following the motion model."""
    short_side = min(cfg.image_width, cfg.image_height)
    w = float(rng.uniform(0.05, 0.12) * short_side)
    h = float(rng.uniform(0.05, 0.12) * short_side)
    if w >= cfg.image_width or h >= cfg.image_height:
        raise ValueError(
            f"track box ({w:.0f}x{h:.0f}) cannot fit image "
            f"({cfg.image_width}x{cfg.image_height})"
        )
    span = max(cfg.n_frames - 1, 1)
    for _ in range(_PLACEMENT_ATTEMPTS):
        if cfg.motion_model == MOTION_CONSTANT_VELOCITY:
            vx = float(rng.uniform(-3.5, 3.5))
            vy = float(rng.uniform(-3.5, 3.5))
            lo_x = max(0.0, -vx * span)
            hi_x = cfg.image_width - w - max(0.0, vx * span)
            lo_y = max(0.0, -vy * span)
            hi_y = cfg.image_height - h - max(0.0, vy * span)
            if hi_x <= lo_x or hi_y <= lo_y:
                continue
            x0 = float(rng.uniform(lo_x, hi_x))
            y0 = float(rng.uniform(lo_y, hi_y))
            return [BBox(x0 + vx * t, y0 + vy * t, w, h) for t in range(cfg.n_frames)]
        amp_x = float(rng.uniform(10.0, 60.0))
        amp_y = float(rng.uniform(10.0, 60.0))
        if amp_x + w >= cfg.image_width - amp_x or amp_y + h >= cfg.image_height - amp_y:
            continue
        x0 = float(rng.uniform(amp_x, cfg.image_width - w - amp_x))
        y0 = float(rng.uniform(amp_y, cfg.image_height - h - amp_y))
        period = float(rng.uniform(20.0, 60.0))
        phase_x = float(rng.uniform(0.0, 2.0 * math.pi))
        phase_y = float(rng.uniform(0.0, 2.0 * math.pi))
        return [
            BBox(
                x0 + amp_x * math.sin(2.0 * math.pi * t / period + phase_x),
                y0 + amp_y * math.sin(2.0 * math.pi * t / period + phase_y),
                w,
                h,
            )
            for t in range(cfg.n_frames)
        ]
    raise ValueError("could not place a feasible trajectory inside the image")


def _true_class_scores(
    rng: np.random.Generator, category_id: int, n_categories: int
) -> dict[int, float]:
    scores = {category_id: float(rng.uniform(0.55, 0.95))}
    others = [c for c in range(1, n_categories + 1) if c != category_id]
    rng.shuffle(others)
    for cid in others[:2]:
        scores[cid] = float(rng.uniform(0.0, 0.5))
    return scores


def generate_scenario(cfg: SynthConfig) -> tuple[AnnotationSet, DetectionSequence]:
    """Build matched ground truth and detections, deterministic per seed.

    With all noise, drop and clutter parameters at zero the detections
    reproduce the ground-truth boxes exactly, one per record.
    """
    rng = np.random.default_rng(cfg.seed)
    latents = _separated_latents(rng, cfg)
    trajectories = [_track_boxes(rng, cfg) for _ in range(cfg.n_tracks)]
    track_categories = [int(rng.integers(1, cfg.n_categories + 1)) for _ in range(cfg.n_tracks)]

    meta = VideoMeta(
        id=1,
        name=f"synthetic_{cfg.seed}",
        width=cfg.image_width,
        height=cfg.image_height,
        frame_count=cfg.n_frames,
        fps=30.0,
        ann_fps=30.0,
    )
    categories = [Category(id=i, name=f"class_{i:03d}") for i in range(1, cfg.n_categories + 1)]
    annotations = [
        GtAnnotation(
            video_id=1,
            frame_index=t,
            track_id=k + 1,
            category_id=track_categories[k],
            bbox=trajectories[k][t],
        )
        for t in range(cfg.n_frames)
        for k in range(cfg.n_tracks)
    ]

    short_side = min(cfg.image_width, cfg.image_height)
    frames: list[tuple[int, list[Detection]]] = []
    for t in range(cfg.n_frames):
        dets: list[Detection] = []
        for k in range(cfg.n_tracks):
            if rng.random() < cfg.detection_drop_rate:
                continue
            gt = trajectories[k][t]
            x = gt.x + rng.normal(0.0, cfg.box_noise_std)
            y = gt.y + rng.normal(0.0, cfg.box_noise_std)
            w = max(2.0, gt.w + rng.normal(0.0, cfg.box_noise_std))
            h = max(2.0, gt.h + rng.normal(0.0, cfg.box_noise_std))
            if cfg.box_noise_std == 0.0:
                bbox = gt
            else:
                bbox = BBox(x, y, w, h)
            emb = latents[k] + rng.normal(0.0, cfg.embedding_noise_std, cfg.embedding_dim)
            dets.append(
                Detection(
                    bbox=bbox,
                    score=float(rng.uniform(0.6, 0.98)),
                    embedding=emb,
                    class_scores=_true_class_scores(rng, track_categories[k], cfg.n_categories),
                )
            )
        n_clutter = int(rng.binomial(cfg.n_tracks, cfg.clutter_rate)) if cfg.clutter_rate else 0
        for _ in range(n_clutter):
            w = float(rng.uniform(0.05, 0.12) * short_side)
            h = float(rng.uniform(0.05, 0.12) * short_side)
            x = float(rng.uniform(0.0, cfg.image_width - w))
            y = float(rng.uniform(0.0, cfg.image_height - h))
            emb = rng.normal(size=cfg.embedding_dim)
            emb /= np.linalg.norm(emb)
            cats = rng.permutation(np.arange(1, cfg.n_categories + 1))[:3]
            dets.append(
                Detection(
                    bbox=BBox(x, y, w, h),
                    score=float(rng.uniform(0.1, 0.6)),
                    embedding=emb,
                    class_scores={int(c): float(rng.uniform(0.0, 1.0)) for c in cats},
                )
            )
        order = rng.permutation(len(dets))
        frames.append((t, [dets[i] for i in order]))

    return (
        AnnotationSet(videos=[meta], categories=categories, annotations=annotations),
        DetectionSequence(video_id=1, frames=frames),
    )


# ---------------------------------------------------------------------------
# controlled corruption of track results
# ---------------------------------------------------------------------------

def inject_errors(tr: TrackResult, spec: ErrorSpec) -> TrackResult:
    """Apply the configured corruptions; record order is preserved.

    Each corruption type draws from its own random stream, so enabling one
    never changes what another would have done at the same seed.
    """
    streams = np.random.SeedSequence(spec.seed).spawn(4)
    switch_rng = np.random.default_rng(streams[0])
    flip_rng = np.random.default_rng(streams[1])
    jitter_rng = np.random.default_rng(streams[2])
    delete_rng = np.random.default_rng(streams[3])

    records = list(tr.records)

    # id switches: walk each track in frame order, branching to fresh ids
    new_ids: dict[int, int] = {}
    if spec.id_switch_rate > 0 and records:
        next_id = max(r.track_id for r in records) + 1
        by_track: dict[tuple[int, int], list[int]] = {}
        for idx, r in enumerate(records):
            by_track.setdefault((r.video_id, r.track_id), []).append(idx)
        for key in sorted(by_track):
            indices = sorted(by_track[key], key=lambda i: records[i].frame_index)
            current = records[indices[0]].track_id
            for idx in indices[1:]:
                if switch_rng.random() < spec.id_switch_rate:
                    current = next_id
                    next_id += 1
                new_ids[idx] = current

    category_pool = sorted({r.category_id for r in records})

    out: list[TrackRecord] = []
    for idx, r in enumerate(records):
        rec = r
        if idx in new_ids and new_ids[idx] != rec.track_id:
            rec = replace(rec, track_id=new_ids[idx])
        if spec.class_flip_rate > 0 and flip_rng.random() < spec.class_flip_rate:
            choices = [c for c in category_pool if c != rec.category_id]
            if choices:
                rec = replace(rec, category_id=int(choices[flip_rng.integers(len(choices))]))
            else:
                rec = replace(rec, category_id=rec.category_id + 1)
        if spec.box_jitter_std > 0:
            rec = replace(
                rec,
                bbox=BBox(
                    rec.bbox.x + jitter_rng.normal(0.0, spec.box_jitter_std),
                    rec.bbox.y + jitter_rng.normal(0.0, spec.box_jitter_std),
                    rec.bbox.w,
                    rec.bbox.h,
                ),
            )
        if spec.deletion_rate > 0 and delete_rng.random() < spec.deletion_rate:
            continue
        out.append(rec)
    return TrackResult(records=out)
