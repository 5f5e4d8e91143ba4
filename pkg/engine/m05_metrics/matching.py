"""One-to-one matching of ground-truth and predicted nuclei.

Segments are matched on pixel IoU strictly above 0.5, which makes every match
unique without an assignment step. Centroids are matched greedily, nearest
pair first, within a radius.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import spatial

from engine.lib.config import MetricDefaults
from engine.lib.errors import MatchUniquenessViolation, ShapeMismatch
from engine.m04_postproc.types import InstanceMap, NucleusRecord

MatchKind = Literal["segment", "centroid"]


@dataclass(frozen=True)
class MatchedPair:
    gt_id: int
    pred_id: int
    score: float


@dataclass(frozen=True)
class MatchResult:
    """Matched pairs plus the ids left over on either side.

    ``score`` is the IoU for segment matches and the centroid distance in
    pixels for centroid matches.
    """

    pairs: tuple[MatchedPair, ...]
    unmatched_gt: frozenset[int]
    unmatched_pred: frozenset[int]
    kind: MatchKind = "segment"

    @property
    def tp(self) -> int:
        return len(self.pairs)

    @property
    def fp(self) -> int:
        return len(self.unmatched_pred)

    @property
    def fn(self) -> int:
        return len(self.unmatched_gt)

    @property
    def is_empty(self) -> bool:
        return self.tp == 0 and self.fp == 0 and self.fn == 0


def _present_ids(labels: np.ndarray) -> np.ndarray:
    ids = np.unique(labels)
    return ids[ids > 0]


def _check_unique(pairs: Sequence[MatchedPair]) -> None:
    gt = [p.gt_id for p in pairs]
    pred = [p.pred_id for p in pairs]
    if len(set(gt)) != len(gt) or len(set(pred)) != len(pred):
        raise MatchUniquenessViolation("an instance was paired more than once")


def iou_table(gt: np.ndarray, pred: np.ndarray) -> dict[tuple[int, int], float]:
    """IoU of every (gt, pred) pair with a non-empty intersection."""
    if gt.shape != pred.shape:
        raise ShapeMismatch(f"gt {gt.shape} and pred {pred.shape} differ")
    g = gt.astype(np.int64).ravel()
    p = pred.astype(np.int64).ravel()
    n_g = int(g.max()) + 1 if g.size else 1
    n_p = int(p.max()) + 1 if p.size else 1
    gt_area = np.bincount(g, minlength=n_g)
    pred_area = np.bincount(p, minlength=n_p)
    both = (g > 0) & (p > 0)
    codes, inter = np.unique(g[both] * n_p + p[both], return_counts=True)
    table: dict[tuple[int, int], float] = {}
    for code, n in zip(codes.tolist(), inter.tolist(), strict=True):
        gi, pi = divmod(code, n_p)
        table[(gi, pi)] = n / float(gt_area[gi] + pred_area[pi] - n)
    return table


def match_segments(
    gt: InstanceMap, pred: InstanceMap, iou_thresh: float = MetricDefaults().match_iou
) -> MatchResult:
    """Pair segments whose IoU exceeds ``iou_thresh`` (0.5 keeps pairs unique)."""
    table = iou_table(gt.labels, pred.labels)
    pairs = sorted(
        (MatchedPair(gi, pi, iou) for (gi, pi), iou in table.items() if iou > iou_thresh),
        key=lambda m: (m.gt_id, m.pred_id),
    )
    _check_unique(pairs)
    matched_gt = {m.gt_id for m in pairs}
    matched_pred = {m.pred_id for m in pairs}
    return MatchResult(
        pairs=tuple(pairs),
        unmatched_gt=frozenset(int(i) for i in _present_ids(gt.labels) if i not in matched_gt),
        unmatched_pred=frozenset(
            int(i) for i in _present_ids(pred.labels) if i not in matched_pred
        ),
        kind="segment",
    )


def centroid_radius_px(
    mpp: float, radius_um: float = MetricDefaults().centroid_radius_um
) -> float:
    """Matching radius in pixels: 6 px at 0.5 um/px, 12 px at 0.25 um/px."""
    return radius_um / mpp


def match_centroids(
    gt_records: Sequence[NucleusRecord],
    pred_records: Sequence[NucleusRecord],
    radius_px: float,
) -> MatchResult:
    """Greedy bipartite matching on centroid distance.

    Candidate pairs lie within ``radius_px``; they are taken in order of
    ``(distance, gt index, pred index)`` and each record is used at most once.
    """
    pairs: list[MatchedPair] = []
    if gt_records and pred_records:
        gt_xy = np.array([r.centroid for r in gt_records], dtype=np.float64)
        pred_xy = np.array([r.centroid for r in pred_records], dtype=np.float64)
        near = spatial.cKDTree(gt_xy).query_ball_tree(spatial.cKDTree(pred_xy), radius_px)
        candidates = sorted(
            (float(np.hypot(*(gt_xy[i] - pred_xy[j]))), i, j)
            for i, js in enumerate(near)
            for j in js
        )
        used_gt: set[int] = set()
        used_pred: set[int] = set()
        for d, i, j in candidates:
            if d > radius_px:
                continue
            if i in used_gt or j in used_pred:
                continue
            used_gt.add(i)
            used_pred.add(j)
            pairs.append(MatchedPair(gt_records[i].id, pred_records[j].id, d))
    _check_unique(pairs)
    matched_gt = {m.gt_id for m in pairs}
    matched_pred = {m.pred_id for m in pairs}
    return MatchResult(
        pairs=tuple(pairs),
        unmatched_gt=frozenset(r.id for r in gt_records if r.id not in matched_gt),
        unmatched_pred=frozenset(r.id for r in pred_records if r.id not in matched_pred),
        kind="centroid",
    )


__all__ = [
    "MatchKind",
    "MatchResult",
    "MatchedPair",
    "centroid_radius_px",
    "iou_table",
    "match_centroids",
    "match_segments",
]
