"""Per-frame track/detection association with fused appearance + motion scores.

Pipeline per frame: suppress mutually occluding detections, predict every
track's box, score track/detection pairs, solve the assignment, update
matched tracks (Kalman + EMA embedding), start tracks for unclaimed
detections, retire tracks that ran out of memory.

Scores are similarities throughout (larger = better match): the appearance
score combines a bidirectional softmax over raw embedding dot products with
a cosine term, and the fused score mixes in the IoU of the predicted and
detected boxes with weight ``w``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .data_model import BBox, Detection, DetectionSequence, UNKNOWN_CATEGORY, iou_matrix
from .motion import KalmanState, MotionNoiseConfig, kf_init, kf_predict, kf_update

MODE_FUSED = "fused"
MODE_APPEARANCE_ONLY = "appearance_only"
MODE_MOTION_ONLY = "motion_only"
MODES = (MODE_FUSED, MODE_APPEARANCE_ONLY, MODE_MOTION_ONLY)


@dataclass(frozen=True)
class TrackerConfig:
    """Association hyperparameters; defaults follow the reference operating point."""

    w: float = 0.03
    alpha: float = 0.2
    match_threshold: float = 0.5
    init_iou_threshold: float = 0.3
    memory_frames: int = 30
    occlusion_iou_threshold: float = 0.7
    mode: str = MODE_FUSED
    normalize_embeddings: bool = False
    motion: MotionNoiseConfig = field(default_factory=MotionNoiseConfig)

    def __post_init__(self):
        if not 0.0 <= self.w <= 1.0:
            raise ValueError(f"w must be in [0,1], got {self.w}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0,1], got {self.alpha}")
        if not 0.0 <= self.init_iou_threshold <= 1.0:
            raise ValueError(f"init_iou_threshold must be in [0,1], got {self.init_iou_threshold}")
        if not 0.0 <= self.occlusion_iou_threshold <= 1.0:
            raise ValueError(
                f"occlusion_iou_threshold must be in [0,1], got {self.occlusion_iou_threshold}"
            )
        if self.memory_frames < 0:
            raise ValueError(f"memory_frames must be >= 0, got {self.memory_frames}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")

    @classmethod
    def from_json(cls, document: bytes | str) -> "TrackerConfig":
        doc = json.loads(document)
        try:
            motion = MotionNoiseConfig(**doc.pop("motion", {}))
            return cls(motion=motion, **doc)
        except TypeError as exc:
            raise ValueError(f"bad tracker config: {exc}") from exc

    def to_json(self) -> str:
        doc = asdict(self)
        return json.dumps(doc, indent=2)


@dataclass
class ActiveTrack:
    track_id: int
    embedding: np.ndarray
    kalman: KalmanState
    last_matched_frame: int
    category_id: int
    history: list[tuple[int, BBox]] = field(default_factory=list)
    # running category vote: id -> (count, last frame seen); ties go to most recent
    category_votes: dict[int, tuple[int, int]] = field(default_factory=dict)
    predicted_box: BBox | None = None

    def observe_category(self, category_id: int, frame_index: int):
        count, _ = self.category_votes.get(category_id, (0, -1))
        self.category_votes[category_id] = (count + 1, frame_index)
        self.category_id = max(
            self.category_votes.items(), key=lambda kv: (kv[1][0], kv[1][1])
        )[0]


@dataclass
class TrackerState:
    config: TrackerConfig
    tracks: list[ActiveTrack] = field(default_factory=list)
    next_id: int = 1
    frame_cursor: int = -1
    video_id: int = 0


@dataclass(frozen=True)
class TrackRecord:
    video_id: int
    frame_index: int
    track_id: int
    category_id: int
    bbox: BBox
    score: float


@dataclass
class TrackResult:
    records: list[TrackRecord] = field(default_factory=list)

    def by_video(self) -> dict[int, list[TrackRecord]]:
        out: dict[int, list[TrackRecord]] = {}
        for r in self.records:
            out.setdefault(r.video_id, []).append(r)
        return out

    def to_json(self) -> str:
        return json.dumps(
            [
                {
                    "video_id": r.video_id,
                    "frame_index": r.frame_index,
                    "track_id": r.track_id,
                    "category_id": r.category_id,
                    "bbox": r.bbox.to_list(),
                    "score": r.score,
                }
                for r in self.records
            ]
        )

    @classmethod
    def from_json(cls, document: bytes | str) -> "TrackResult":
        doc = json.loads(document)
        records = [
            TrackRecord(
                video_id=int(r["video_id"]),
                frame_index=int(r["frame_index"]),
                track_id=int(r["track_id"]),
                category_id=int(r["category_id"]),
                bbox=BBox.from_list(r["bbox"]),
                score=float(r["score"]),
            )
            for r in doc
        ]
        return cls(records=records)


# ---------------------------------------------------------------------------
# scoring
# ---------------------------------------------------------------------------

def occlusion_prefilter(dets: list[Detection], thresh: float) -> list[Detection]:
    """Drop the lower-confidence member of every heavily overlapping pair.

    Pairs are processed in descending overlap so the most blatant occlusions
    resolve first; equal-confidence pairs are left alone.
    """
    n = len(dets)
    if n < 2:
        return list(dets)
    overlaps = iou_matrix([d.bbox for d in dets], [d.bbox for d in dets])
    pairs = [
        (overlaps[i, j], i, j)
        for i in range(n)
        for j in range(i + 1, n)
        if overlaps[i, j] > thresh
    ]
    pairs.sort(key=lambda p: (-p[0], p[1], p[2]))
    alive = [True] * n
    for _, i, j in pairs:
        if not (alive[i] and alive[j]):
            continue
        if dets[i].score > dets[j].score:
            alive[j] = False
        elif dets[j].score > dets[i].score:
            alive[i] = False
    return [d for d, keep in zip(dets, alive) if keep]


def bisoftmax_scores(track_embs: np.ndarray, det_embs: np.ndarray) -> np.ndarray:
    """Bidirectional softmax over raw dot products, averaged.

    Entry (t, r) is the mean of a softmax over detections (for track t) and a
    softmax over tracks (for detection r). Dot products are shifted by their
    per-axis max before exponentiation, which leaves the ratios unchanged.
    """
    dots = track_embs @ det_embs.T
    over_dets = np.exp(dots - dots.max(axis=1, keepdims=True))
    over_dets /= over_dets.sum(axis=1, keepdims=True)
    over_tracks = np.exp(dots - dots.max(axis=0, keepdims=True))
    over_tracks /= over_tracks.sum(axis=0, keepdims=True)
    return 0.5 * (over_dets + over_tracks)


def cosine_scores(track_embs: np.ndarray, det_embs: np.ndarray) -> np.ndarray:
    t_norm = np.linalg.norm(track_embs, axis=1)
    d_norm = np.linalg.norm(det_embs, axis=1)
    if np.any(t_norm == 0) or np.any(d_norm == 0):
        raise ValueError("zero-norm embedding: cosine similarity undefined")
    return (track_embs / t_norm[:, None]) @ (det_embs / d_norm[:, None]).T


def appearance_score_matrix(track_embs: np.ndarray, det_embs: np.ndarray) -> np.ndarray:
    """Appearance similarity in [0, 2]: 0.5*(1 + cosine) + bisoftmax."""
    track_embs = np.atleast_2d(np.asarray(track_embs, dtype=float))
    det_embs = np.atleast_2d(np.asarray(det_embs, dtype=float))
    if track_embs.shape[0] == 0 or det_embs.shape[0] == 0:
        raise ValueError("appearance scores need at least one track and one detection")
    if track_embs.shape[1] != det_embs.shape[1]:
        raise ValueError(
            f"embedding dimensions differ: {track_embs.shape[1]} vs {det_embs.shape[1]}"
        )
    return 0.5 * (1.0 + cosine_scores(track_embs, det_embs)) + bisoftmax_scores(
        track_embs, det_embs
    )


def fused_score_matrix(
    app: np.ndarray | None,
    predicted_boxes: list[BBox],
    det_boxes: list[BBox],
    w: float,
    mode: str = MODE_FUSED,
) -> np.ndarray:
    """Blend appearance and motion similarity per the configured mode."""
    if mode == MODE_APPEARANCE_ONLY:
        return np.array(app, dtype=float)
    overlaps = iou_matrix(predicted_boxes, det_boxes)
    if mode == MODE_MOTION_ONLY:
        return overlaps
    if mode != MODE_FUSED:
        raise ValueError(f"unknown mode {mode!r}")
    app = np.asarray(app, dtype=float)
    if app.shape != overlaps.shape:
        raise ValueError(f"shape mismatch: appearance {app.shape} vs IoU {overlaps.shape}")
    return (1.0 - w) * app + w * overlaps


def update_embedding(e_prev: np.ndarray, f_new: np.ndarray, alpha: float) -> np.ndarray:
    """Exponential moving average: alpha keeps the stored embedding."""
    e_prev = np.asarray(e_prev, dtype=float)
    f_new = np.asarray(f_new, dtype=float)
    if e_prev.shape != f_new.shape:
        raise ValueError(f"embedding shapes differ: {e_prev.shape} vs {f_new.shape}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0,1], got {alpha}")
    return alpha * e_prev + (1.0 - alpha) * f_new


# ---------------------------------------------------------------------------
# assignment
# ---------------------------------------------------------------------------

def hungarian_assign(scores: np.ndarray) -> list[tuple[int, int]]:
    """Maximum-total-score one-to-one assignment, lexicographically canonical.

    Covers min(rows, cols) pairs. Among equally optimal assignments the one
    whose sorted (row, col) pair list is lexicographically smallest is
    returned, so degenerate score matrices (e.g. all zeros) still resolve
    deterministically.
    """
    scores = np.asarray(scores, dtype=float)
    if scores.ndim != 2:
        raise ValueError(f"score matrix must be 2-D, got shape {scores.shape}")
    n, m = scores.shape
    if n == 0 or m == 0:
        return []
    if not np.all(np.isfinite(scores)):
        raise ValueError("score matrix contains non-finite entries")

    rows, cols = linear_sum_assignment(scores, maximize=True)
    best_total = float(scores[rows, cols].sum())
    tol = 1e-9 * (1.0 + abs(best_total))
    k = min(n, m)

    pairs: list[tuple[int, int]] = []
    fixed_total = 0.0
    avail_cols = list(range(m))
    row = 0
    while len(pairs) < k and row < n:
        chosen = None
        for j in avail_cols:
            remaining = k - len(pairs) - 1
            if remaining > 0:
                sub_rows = range(row + 1, n)
                sub_cols = [c for c in avail_cols if c != j]
                if n - row - 1 < remaining or len(sub_cols) < remaining:
                    continue
                sub = scores[np.ix_(list(sub_rows), sub_cols)]
                rr, cc = linear_sum_assignment(sub, maximize=True)
                completion = float(sub[rr, cc].sum())
            else:
                completion = 0.0
            if fixed_total + scores[row, j] + completion >= best_total - tol:
                chosen = j
                break
        if chosen is not None:
            pairs.append((row, chosen))
            fixed_total += scores[row, chosen]
            avail_cols.remove(chosen)
        # when rows outnumber columns an optimal assignment may skip this row
        row += 1
    if len(pairs) < k:
        # tolerance misjudged a forced row; fall back to the solver's answer
        return sorted(zip(rows.tolist(), cols.tolist()))
    return pairs


# ---------------------------------------------------------------------------
# tracker
# ---------------------------------------------------------------------------

def _prepare_embedding(det: Detection, normalize: bool) -> np.ndarray:
    emb = np.asarray(det.embedding, dtype=float)
    if normalize:
        norm = np.linalg.norm(emb)
        if norm > 0:
            emb = emb / norm
    return emb


def step_tracker(
    state: TrackerState, frame: tuple[int, list[Detection]]
) -> tuple[TrackerState, list[TrackRecord]]:
    """Advance the tracker by one frame; returns the state and frame outputs.

    Outputs cover every matched track and every track initialized this frame.
    Unmatched detections that overlap an existing prediction above the init
    threshold are dropped for this frame only.
    """
    cfg = state.config
    frame_index, detections = frame
    if frame_index <= state.frame_cursor:
        raise ValueError(
            f"frame {frame_index} out of order (cursor at {state.frame_cursor})"
        )
    state.frame_cursor = frame_index

    dets = occlusion_prefilter(detections, cfg.occlusion_iou_threshold)

    predicted: list[BBox] = []
    for track in state.tracks:
        track.kalman, box = kf_predict(track.kalman, cfg.motion)
        track.predicted_box = box
        predicted.append(box)

    matched_pairs: list[tuple[int, int]] = []
    if state.tracks and dets:
        det_boxes = [d.bbox for d in dets]
        if cfg.mode == MODE_MOTION_ONLY:
            app = None
        else:
            track_embs = np.stack([t.embedding for t in state.tracks])
            det_embs = np.stack([_prepare_embedding(d, cfg.normalize_embeddings) for d in dets])
            app = appearance_score_matrix(track_embs, det_embs)
        scores = fused_score_matrix(app, predicted, det_boxes, cfg.w, cfg.mode)
        for ti, dj in hungarian_assign(scores):
            if scores[ti, dj] >= cfg.match_threshold:
                matched_pairs.append((ti, dj))

    outputs: list[TrackRecord] = []
    matched_dets: set[int] = set()
    for ti, dj in matched_pairs:
        track = state.tracks[ti]
        det = dets[dj]
        matched_dets.add(dj)
        track.kalman = kf_update(track.kalman, det.bbox, cfg.motion)
        if cfg.mode != MODE_MOTION_ONLY:
            track.embedding = update_embedding(
                track.embedding, _prepare_embedding(det, cfg.normalize_embeddings), cfg.alpha
            )
        track.last_matched_frame = frame_index
        track.history.append((frame_index, det.bbox))
        track.observe_category(
            det.assigned_category if det.assigned_category is not None else UNKNOWN_CATEGORY,
            frame_index,
        )
        outputs.append(
            TrackRecord(
                video_id=state.video_id,
                frame_index=frame_index,
                track_id=track.track_id,
                category_id=track.category_id,
                bbox=det.bbox,
                score=det.score,
            )
        )

    # new tracks: unmatched detections clear of every predicted box
    for dj, det in enumerate(dets):
        if dj in matched_dets:
            continue
        if predicted:
            overlap = float(iou_matrix(predicted, [det.bbox]).max())
            if overlap >= cfg.init_iou_threshold:
                continue
        category = det.assigned_category if det.assigned_category is not None else UNKNOWN_CATEGORY
        track = ActiveTrack(
            track_id=state.next_id,
            embedding=_prepare_embedding(det, cfg.normalize_embeddings),
            kalman=kf_init(det.bbox, cfg.motion),
            last_matched_frame=frame_index,
            category_id=category,
            history=[(frame_index, det.bbox)],
        )
        track.observe_category(category, frame_index)
        state.next_id += 1
        state.tracks.append(track)
        outputs.append(
            TrackRecord(
                video_id=state.video_id,
                frame_index=frame_index,
                track_id=track.track_id,
                category_id=track.category_id,
                bbox=det.bbox,
                score=det.score,
            )
        )

    state.tracks = [
        t for t in state.tracks if frame_index - t.last_matched_frame <= cfg.memory_frames
    ]
    return state, outputs


def run_tracker(dets: DetectionSequence, config: TrackerConfig) -> TrackResult:
    """Track one video end to end; deterministic for a given input and config."""
    state = TrackerState(config=config, video_id=dets.video_id)
    records: list[TrackRecord] = []
    for frame in dets.frames:
        state, outputs = step_tracker(state, frame)
        records.extend(outputs)
    return TrackResult(records=records)
