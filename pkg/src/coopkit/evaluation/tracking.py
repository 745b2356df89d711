"""Tracking metrics: CLEAR scores, identity scores, and coverage tiers.

Per-frame correspondence follows the CLEAR convention: pairs matched in
the previous frame keep their match while still within the gate, and the
remainder is assigned optimally by BEV center distance. On top of the
frame-level counts this reports identity scores from a single global
assignment between ground-truth and predicted trajectories, plus the
mostly-tracked / partially-tracked / mostly-lost split.

MOTP here is the mean BEV center distance of matched pairs, in meters,
so lower is better.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..assignment import gated_assignment
from ..geometry import Box3D

__all__ = ["TrackingEvalReport", "evaluate_tracking"]


@dataclass(frozen=True)
class TrackingEvalReport:
    """Aggregate tracking scores over a sequence.

    gt counts ground-truth boxes, not trajectories; mt / pt / ml count
    trajectories and always sum to their total.
    """

    mota: float
    motp: float
    idf1: float
    idp: float
    idr: float
    recall: float
    precision: float
    gt: int
    mt: int
    pt: int
    ml: int
    fp: int
    fn: int
    ids: int
    fm: int

    def to_dict(self) -> dict:
        return {
            "mota": self.mota,
            "motp": self.motp,
            "idf1": self.idf1,
            "idp": self.idp,
            "idr": self.idr,
            "recall": self.recall,
            "precision": self.precision,
            "gt": self.gt,
            "mt": self.mt,
            "pt": self.pt,
            "ml": self.ml,
            "fp": self.fp,
            "fn": self.fn,
            "ids": self.ids,
            "fm": self.fm,
        }


def _require_ids(frames: list[list[Box3D]], side: str) -> None:
    for frame in frames:
        for box in frame:
            if box.track_id is None:
                raise ValueError(f"{side} box without track_id")


def evaluate_tracking(
    pred_tracks: list[list[Box3D]],
    gt_tracks: list[list[Box3D]],
    match_dist: float = 2.0,
) -> TrackingEvalReport:
    """Score predicted tracks against ground truth.

    Both arguments are per-frame box lists aligned by index; a shorter
    side is padded with empty frames. Every box needs a track_id.
    """
    if match_dist <= 0:
        raise ValueError(f"match_dist must be positive, got {match_dist}")
    _require_ids(pred_tracks, "prediction")
    _require_ids(gt_tracks, "ground truth")

    n_frames = max(len(pred_tracks), len(gt_tracks))
    preds = list(pred_tracks) + [[] for _ in range(n_frames - len(pred_tracks))]
    gts = list(gt_tracks) + [[] for _ in range(n_frames - len(gt_tracks))]

    total_gt = sum(len(f) for f in gts)
    total_pred = sum(len(f) for f in preds)

    fp = fn = ids = 0
    match_distances: list[float] = []
    # gt id -> pred id matched in the previous frame (continuity) and in
    # the most recent matched frame ever (switch detection across gaps).
    prev_match: dict[int, int] = {}
    last_match: dict[int, int] = {}
    # gt id -> per-frame matched flags over frames where the gt appears.
    presence: dict[int, list[bool]] = {}
    # (gt id, pred id) -> number of gated co-located frames.
    overlap: dict[tuple[int, int], int] = {}

    for gt_frame, pred_frame in zip(gts, preds):
        gt_ids = [b.track_id for b in gt_frame]
        pred_ids = [b.track_id for b in pred_frame]
        dist = np.full((len(gt_frame), len(pred_frame)), np.inf)
        for i, g in enumerate(gt_frame):
            for j, p in enumerate(pred_frame):
                dist[i, j] = np.hypot(*(g.center[:2] - p.center[:2]))
                if dist[i, j] <= match_dist:
                    key = (g.track_id, p.track_id)
                    overlap[key] = overlap.get(key, 0) + 1

        # Carry over last frame's pairs that are still close enough.
        matched: dict[int, int] = {}
        used_gt: set[int] = set()
        used_pred: set[int] = set()
        for i, gid in enumerate(gt_ids):
            pid = prev_match.get(gid)
            if pid is None or pid not in pred_ids:
                continue
            j = pred_ids.index(pid)
            if j not in used_pred and dist[i, j] <= match_dist:
                matched[i] = j
                used_gt.add(i)
                used_pred.add(j)

        free_gt = [i for i in range(len(gt_frame)) if i not in used_gt]
        free_pred = [j for j in range(len(pred_frame)) if j not in used_pred]
        if free_gt and free_pred:
            sub = dist[np.ix_(free_gt, free_pred)]
            for r, c in gated_assignment(sub, match_dist):
                matched[free_gt[r]] = free_pred[c]

        fn += len(gt_frame) - len(matched)
        fp += len(pred_frame) - len(matched)
        prev_match = {}
        for i, j in matched.items():
            gid, pid = gt_ids[i], pred_ids[j]
            match_distances.append(float(dist[i, j]))
            if gid in last_match and last_match[gid] != pid:
                ids += 1
            last_match[gid] = pid
            prev_match[gid] = pid
        for i, gid in enumerate(gt_ids):
            presence.setdefault(gid, []).append(i in matched)

    matches_total = len(match_distances)
    mota = 1.0 - (fp + fn + ids) / total_gt if total_gt else 0.0
    motp = float(np.mean(match_distances)) if match_distances else 0.0
    recall = matches_total / total_gt if total_gt else 0.0
    precision = matches_total / total_pred if total_pred else 0.0

    # Identity scores: one global trajectory-to-trajectory assignment
    # maximizing the number of gated co-located frames.
    gt_traj = sorted(presence)
    pred_traj = sorted({b.track_id for f in preds for b in f})
    idtp = 0
    if gt_traj and pred_traj:
        weights = np.zeros((len(gt_traj), len(pred_traj)))
        for (gid, pid), count in overlap.items():
            weights[gt_traj.index(gid), pred_traj.index(pid)] = count
        rows, cols = linear_sum_assignment(weights, maximize=True)
        idtp = int(weights[rows, cols].sum())
    idp = idtp / total_pred if total_pred else 0.0
    idr = idtp / total_gt if total_gt else 0.0
    denom = total_gt + total_pred
    idf1 = 2.0 * idtp / denom if denom else 0.0

    mt = pt = ml = fm = 0
    for flags in presence.values():
        coverage = sum(flags) / len(flags)
        if coverage >= 0.8:
            mt += 1
        elif coverage <= 0.2:
            ml += 1
        else:
            pt += 1
        # A fragmentation is a gap between two tracked stretches.
        runs = [k for k, _ in itertools.groupby(flags)]
        fm += sum(
            1
            for idx, val in enumerate(runs)
            if not val and 0 < idx < len(runs) - 1
        )

    return TrackingEvalReport(
        mota=mota,
        motp=motp,
        idf1=idf1,
        idp=idp,
        idr=idr,
        recall=recall,
        precision=precision,
        gt=total_gt,
        mt=mt,
        pt=pt,
        ml=ml,
        fp=fp,
        fn=fn,
        ids=ids,
        fm=fm,
    )
