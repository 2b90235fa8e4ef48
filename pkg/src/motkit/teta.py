"""Tracking evaluation: localization, classification and association accuracy.

Localization matches ground-truth and predicted boxes per frame,
class-agnostically, with a one-to-one assignment that maximizes total IoU
over pairs at or above the localization threshold. Classification and
association are then judged on the matched pairs only. The headline score is
the arithmetic mean of the three accuracies, reported for the full category
set and for the base/novel splits.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .association import TrackResult, TrackRecord, hungarian_assign
from .data_model import (
    AnnotationSet,
    GtAnnotation,
    SPLIT_BASE,
    SPLIT_NOVEL,
    iou_matrix,
)

SPLIT_ALL = "all"
SPLITS = (SPLIT_ALL, SPLIT_BASE, SPLIT_NOVEL)

# forbidden pairs in the localization assignment get this score so they are
# only chosen when structurally unavoidable, then filtered out
_FORBIDDEN = -1e9


@dataclass(frozen=True)
class LocMatch:
    video_id: int
    frame_index: int
    gt_track_id: int
    pred_track_id: int
    gt_category_id: int
    pred_category_id: int
    iou: float


@dataclass
class TetaCounts:
    tpl: int = 0
    fpl: int = 0
    fnl: int = 0
    tpc: int = 0
    fpc: int = 0
    fnc: int = 0
    assoc_fractions: list[float] = field(default_factory=list)

    def add(self, other: "TetaCounts"):
        self.tpl += other.tpl
        self.fpl += other.fpl
        self.fnl += other.fnl
        self.tpc += other.tpc
        self.fpc += other.fpc
        self.fnc += other.fnc
        self.assoc_fractions.extend(other.assoc_fractions)

    def to_dict(self) -> dict:
        return {
            "tpl": self.tpl,
            "fpl": self.fpl,
            "fnl": self.fnl,
            "tpc": self.tpc,
            "fpc": self.fpc,
            "fnc": self.fnc,
        }


@dataclass
class SplitResult:
    loca: float
    clsa: float
    assa: float
    teta: float
    counts: dict[float, TetaCounts]


@dataclass
class TetaReport:
    splits: dict[str, SplitResult]
    thresholds: list[float]
    label: str = ""

    def scores(self, split: str) -> tuple[float, float, float, float]:
        s = self.splits[split]
        return (s.teta, s.loca, s.assa, s.clsa)

    def to_json(self) -> str:
        return json.dumps(
            {
                "label": self.label,
                "thresholds": self.thresholds,
                "splits": {
                    name: {
                        "teta": s.teta,
                        "loca": s.loca,
                        "assa": s.assa,
                        "clsa": s.clsa,
                        "counts": {str(t): c.to_dict() for t, c in s.counts.items()},
                    }
                    for name, s in self.splits.items()
                },
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, document: bytes | str) -> "TetaReport":
        doc = json.loads(document)
        splits = {}
        for name, s in doc["splits"].items():
            counts = {
                float(t): TetaCounts(**c) for t, c in s.get("counts", {}).items()
            }
            splits[name] = SplitResult(
                loca=s["loca"], clsa=s["clsa"], assa=s["assa"], teta=s["teta"], counts=counts
            )
        return cls(splits=splits, thresholds=doc["thresholds"], label=doc.get("label", ""))

    def to_csv(self) -> str:
        lines = ["split,TETA,LocA,AssA,ClsA"]
        for name in SPLITS:
            s = self.splits[name]
            lines.append(
                f"{name.capitalize()},{round(s.teta, 2)},{round(s.loca, 2)},"
                f"{round(s.assa, 2)},{round(s.clsa, 2)}"
            )
        return "\n".join(lines) + "\n"


def ground_truth_result(gt: AnnotationSet, score: float = 1.0) -> TrackResult:
    """Re-express ground truth as a track result (perfect predictions).

    Fully occluded records carry no box and are omitted.
    """
    return TrackResult(
        records=[
            TrackRecord(
                video_id=a.video_id,
                frame_index=a.frame_index,
                track_id=a.track_id,
                category_id=a.category_id,
                bbox=a.bbox,
                score=score,
            )
            for a in gt.annotations
            if a.bbox is not None
        ]
    )


# ---------------------------------------------------------------------------
# per-frame localization matching
# ---------------------------------------------------------------------------

def match_localization(
    gt_frame: list[GtAnnotation],
    pred_frame: list[TrackRecord],
    loc_iou_thresh: float,
) -> tuple[list[LocMatch], int, int]:
    """Match one frame's boxes class-agnostically; returns (TPLs, FPL, FNL).

    Fully occluded ground truth (null box) is excluded from matching and from
    the false-negative count.
    """
    gt_present = [g for g in gt_frame if g.bbox is not None]
    if not gt_present or not pred_frame:
        return [], len(pred_frame), len(gt_present)
    overlaps = iou_matrix([g.bbox for g in gt_present], [p.bbox for p in pred_frame])
    scores = np.where(overlaps >= loc_iou_thresh, overlaps, _FORBIDDEN)
    matches = []
    for gi, pj in hungarian_assign(scores):
        if overlaps[gi, pj] >= loc_iou_thresh:
            g, p = gt_present[gi], pred_frame[pj]
            matches.append(
                LocMatch(
                    video_id=g.video_id,
                    frame_index=g.frame_index,
                    gt_track_id=g.track_id,
                    pred_track_id=p.track_id,
                    gt_category_id=g.category_id,
                    pred_category_id=p.category_id,
                    iou=float(overlaps[gi, pj]),
                )
            )
    fpl = len(pred_frame) - len(matches)
    fnl = len(gt_present) - len(matches)
    return matches, fpl, fnl


# ---------------------------------------------------------------------------
# component scores
# ---------------------------------------------------------------------------

def compute_loca(counts: TetaCounts) -> float:
    denom = counts.tpl + counts.fpl + counts.fnl
    return 100.0 * counts.tpl / denom if denom else 0.0


def classification_counts(matches: list[LocMatch]) -> tuple[int, int, int]:
    """Per-TPL classification tally: a wrong label costs one FPC and one FNC."""
    tpc = sum(1 for m in matches if m.pred_category_id == m.gt_category_id)
    wrong = len(matches) - tpc
    return tpc, wrong, wrong


def compute_clsa(matches: list[LocMatch]) -> float:
    tpc, fpc, fnc = classification_counts(matches)
    denom = tpc + fpc + fnc
    return 100.0 * tpc / denom if denom else 0.0


def association_fractions(matches: list[LocMatch]) -> list[float]:
    """Per-TPL association agreement, aligned with the input order.

    For a TPL pairing ground-truth track g with predicted track p, the
    fraction is TPA / (TPA + FPA + FNA), where TPA counts TPLs sharing both
    ids, FPA counts TPLs with the same predicted id but another ground truth,
    and FNA counts TPLs with the same ground truth under another predicted
    id. Track ids are scoped per video.
    """
    pair_count: dict[tuple[int, int, int], int] = {}
    gt_count: dict[tuple[int, int], int] = {}
    pred_count: dict[tuple[int, int], int] = {}
    for m in matches:
        pair_count[(m.video_id, m.gt_track_id, m.pred_track_id)] = (
            pair_count.get((m.video_id, m.gt_track_id, m.pred_track_id), 0) + 1
        )
        gt_count[(m.video_id, m.gt_track_id)] = gt_count.get((m.video_id, m.gt_track_id), 0) + 1
        pred_count[(m.video_id, m.pred_track_id)] = (
            pred_count.get((m.video_id, m.pred_track_id), 0) + 1
        )
    fractions = []
    for m in matches:
        tpa = pair_count[(m.video_id, m.gt_track_id, m.pred_track_id)]
        fpa = pred_count[(m.video_id, m.pred_track_id)] - tpa
        fna = gt_count[(m.video_id, m.gt_track_id)] - tpa
        fractions.append(tpa / (tpa + fpa + fna))
    return fractions


def compute_assa(matches: list[LocMatch]) -> float:
    fractions = association_fractions(matches)
    return 100.0 * float(np.mean(fractions)) if fractions else 0.0


# ---------------------------------------------------------------------------
# full evaluation
# ---------------------------------------------------------------------------

def _score_split(counts: TetaCounts) -> tuple[float, float, float, float]:
    loca = compute_loca(counts)
    denom_c = counts.tpc + counts.fpc + counts.fnc
    clsa = 100.0 * counts.tpc / denom_c if denom_c else 0.0
    assa = 100.0 * float(np.mean(counts.assoc_fractions)) if counts.assoc_fractions else 0.0
    teta = (loca + clsa + assa) / 3.0
    return loca, clsa, assa, teta


def compute_teta(
    gt: AnnotationSet,
    pred: TrackResult,
    loc_iou_thresh: float | list[float] = 0.5,
    label: str = "",
    n_jobs: int = 1,
) -> TetaReport:
    """Evaluate predictions against ground truth for All/Base/Novel splits.

    Split membership of a TPL, FNL and the classification tallies follows
    the ground-truth category; an FPL follows its predicted category when
    that category has a known split, otherwise it counts toward All only.
    With several localization thresholds, scores are averaged across them.
    Videos are independent; n_jobs > 1 evaluates them in a worker pool with
    the reduction always in video-id order.
    """
    thresholds = (
        [float(loc_iou_thresh)]
        if isinstance(loc_iou_thresh, (int, float))
        else [float(t) for t in loc_iou_thresh]
    )
    if not thresholds:
        raise ValueError("need at least one localization threshold")

    gt_videos = {v.id for v in gt.videos}
    pred_by_video = pred.by_video()
    unknown = sorted(set(pred_by_video) - gt_videos)
    if unknown:
        raise ValueError(f"predictions reference unknown video ids {unknown}")
    seen_pred: set[tuple[int, int, int]] = set()
    for vid, records in pred_by_video.items():
        for r in records:
            key = (vid, r.frame_index, r.track_id)
            if key in seen_pred:
                raise ValueError(f"duplicate prediction for (video, frame, track) {key}")
            seen_pred.add(key)

    split_of = {c.id: c.split for c in gt.categories}

    gt_frames: dict[int, dict[int, list[GtAnnotation]]] = {v: {} for v in gt_videos}
    for ann in gt.annotations:
        gt_frames[ann.video_id].setdefault(ann.frame_index, []).append(ann)
    pred_frames: dict[int, dict[int, list[TrackRecord]]] = {v: {} for v in gt_videos}
    for vid, records in pred_by_video.items():
        for r in records:
            pred_frames[vid].setdefault(r.frame_index, []).append(r)

    def evaluate_video(vid: int) -> dict[float, dict[str, TetaCounts]]:
        frames = sorted(set(gt_frames[vid]) | set(pred_frames[vid]))
        out: dict[float, dict[str, TetaCounts]] = {}
        for t in thresholds:
            video_matches: list[LocMatch] = []
            counts = {s: TetaCounts() for s in SPLITS}
            for fi in frames:
                gts = gt_frames[vid].get(fi, [])
                preds = pred_frames[vid].get(fi, [])
                matches, _, _ = match_localization(gts, preds, t)
                video_matches.extend(matches)
                matched_gt = {(m.frame_index, m.gt_track_id) for m in matches}
                matched_pred = {(m.frame_index, m.pred_track_id) for m in matches}
                for g in gts:
                    if g.bbox is None or (fi, g.track_id) in matched_gt:
                        continue
                    counts[SPLIT_ALL].fnl += 1
                    if split_of.get(g.category_id) in (SPLIT_BASE, SPLIT_NOVEL):
                        counts[split_of[g.category_id]].fnl += 1
                for p in preds:
                    if (fi, p.track_id) in matched_pred:
                        continue
                    counts[SPLIT_ALL].fpl += 1
                    if split_of.get(p.category_id) in (SPLIT_BASE, SPLIT_NOVEL):
                        counts[split_of[p.category_id]].fpl += 1
            fractions = association_fractions(video_matches)
            for m, frac in zip(video_matches, fractions):
                correct = m.pred_category_id == m.gt_category_id
                targets = [SPLIT_ALL]
                if split_of.get(m.gt_category_id) in (SPLIT_BASE, SPLIT_NOVEL):
                    targets.append(split_of[m.gt_category_id])
                for s in targets:
                    counts[s].tpl += 1
                    counts[s].assoc_fractions.append(frac)
                    if correct:
                        counts[s].tpc += 1
                    else:
                        counts[s].fpc += 1
                        counts[s].fnc += 1
            out[t] = counts
        return out

    ordered = sorted(gt_videos)
    if n_jobs > 1 and len(ordered) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            per_video = list(pool.map(evaluate_video, ordered))
    else:
        per_video = [evaluate_video(vid) for vid in ordered]

    # reduction in video-id order regardless of completion order
    per_threshold: dict[float, dict[str, TetaCounts]] = {
        t: {s: TetaCounts() for s in SPLITS} for t in thresholds
    }
    for counts_by_threshold in per_video:
        for t in thresholds:
            for s in SPLITS:
                per_threshold[t][s].add(counts_by_threshold[t][s])

    splits: dict[str, SplitResult] = {}
    for s in SPLITS:
        locas, clsas, assas, tetas = [], [], [], []
        for t in thresholds:
            loca, clsa, assa, teta = _score_split(per_threshold[t][s])
            locas.append(loca)
            clsas.append(clsa)
            assas.append(assa)
            tetas.append(teta)
        splits[s] = SplitResult(
            loca=float(np.mean(locas)),
            clsa=float(np.mean(clsas)),
            assa=float(np.mean(assas)),
            teta=float(np.mean(tetas)),
            counts={t: per_threshold[t][s] for t in thresholds},
        )
    return TetaReport(splits=splits, thresholds=thresholds, label=label)
