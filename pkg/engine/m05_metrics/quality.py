"""Panoptic quality and its binary and multi-class aggregates."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import structlog

from engine.lib.errors import IndexOutOfRange, ShapeMismatch
from engine.m04_postproc.types import InstanceMap
from engine.m05_metrics.matching import MatchResult, match_segments

log = structlog.get_logger(__name__)


@dataclass(frozen=True)
class PanopticQuality:
    pq: float
    dq: float
    sq: float
    tp: int
    fp: int
    fn: int
    empty_convention: bool = False


def _from_counts(tp: int, fp: int, fn: int, iou_sum: float) -> PanopticQuality:
    if tp == 0 and fp == 0 and fn == 0:
        return PanopticQuality(1.0, 1.0, 1.0, 0, 0, 0, empty_convention=True)
    dq = tp / (tp + 0.5 * fp + 0.5 * fn)
    sq = iou_sum / tp if tp else 0.0
    return PanopticQuality(pq=dq * sq, dq=dq, sq=sq, tp=tp, fp=fp, fn=fn)


def panoptic_quality(match: MatchResult) -> PanopticQuality:
    """``dq * sq`` with ``dq = TP / (TP + FP/2 + FN/2)`` and ``sq`` the mean matched IoU.

    Nothing to match on either side scores 1 and sets ``empty_convention``.
    """
    return _from_counts(match.tp, match.fp, match.fn, sum(p.score for p in match.pairs))


@dataclass
class _Tally:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    iou_sum: float = 0.0

    def result(self) -> PanopticQuality:
        return _from_counts(self.tp, self.fp, self.fn, self.iou_sum)


@dataclass
class PQAccumulator:
    """Set-level PQ: counts and IoU sums are pooled over images before dividing.

    Class 0 is the background/unknown type and never gets a per-class score.
    """

    num_classes: int
    binary: _Tally = field(default_factory=_Tally)
    per_class: dict[int, _Tally] = field(default_factory=dict)
    images: int = 0

    def add(self, gt: InstanceMap, pred: InstanceMap) -> MatchResult:
        match = match_segments(gt, pred)
        self.add_match(match, gt, pred)
        return match

    def add_match(self, match: MatchResult, gt: InstanceMap, pred: InstanceMap) -> None:
        self.images += 1
        self.binary.tp += match.tp
        self.binary.fp += match.fp
        self.binary.fn += match.fn
        self.binary.iou_sum += sum(p.score for p in match.pairs)
        # IoU depends only on the two pixel sets, so class-filtered matching
        # keeps exactly the binary pairs whose classes agree
        matched_gt: set[int] = set()
        matched_pred: set[int] = set()
        for pair in match.pairs:
            g = gt.class_of(pair.gt_id)
            if g == pred.class_of(pair.pred_id) and g > 0:
                tally = self._tally(g)
                tally.tp += 1
                tally.iou_sum += pair.score
                matched_gt.add(pair.gt_id)
                matched_pred.add(pair.pred_id)
        for inst_id in _ids(gt):
            c = gt.class_of(inst_id)
            if c > 0 and inst_id not in matched_gt:
                self._tally(c).fn += 1
        for inst_id in _ids(pred):
            c = pred.class_of(inst_id)
            if c > 0 and inst_id not in matched_pred:
                self._tally(c).fp += 1

    def _tally(self, class_id: int) -> _Tally:
        if class_id >= self.num_classes:
            raise IndexOutOfRange(f"class {class_id} outside [0, {self.num_classes})")
        if class_id not in self.per_class:
            self.per_class[class_id] = _Tally()
        return self.per_class[class_id]

    def bpq(self) -> PanopticQuality:
        return self.binary.result()

    def empty_classes(self) -> tuple[int, ...]:
        """Nucleus classes absent from both sides everywhere; they stay out of mPQ."""
        return tuple(c for c in range(1, self.num_classes) if c not in self.per_class)

    def class_results(self) -> dict[int, PanopticQuality]:
        """PQ for every class seen in ground truth or prediction."""
        return {c: self.per_class[c].result() for c in sorted(self.per_class)}

    def mpq(self) -> float:
        """Unweighted class mean; falls back to bPQ when no nucleus carries a type."""
        results = self.class_results()
        if not results:
            return self.bpq().pq
        return sum(r.pq for r in results.values()) / len(results)


def _ids(inst: InstanceMap) -> list[int]:
    return [int(i) for i in np.unique(inst.labels) if i > 0]


@dataclass(frozen=True)
class MultiClassPQ:
    bpq: float
    mpq: float
    per_class: dict[int, PanopticQuality]
    binary: PanopticQuality
    empty_classes: tuple[int, ...] = ()


def multiclass_pq(
    gt: InstanceMap | Sequence[InstanceMap],
    pred: InstanceMap | Sequence[InstanceMap],
    num_classes: int,
) -> MultiClassPQ:
    """Binary PQ over class-erased maps and the mean of per-class PQ.

    A class enters the mean when it occurs in ground truth or prediction
    anywhere in the evaluation set; prediction-only classes score 0.
    """
    gts = [gt] if isinstance(gt, InstanceMap) else list(gt)
    preds = [pred] if isinstance(pred, InstanceMap) else list(pred)
    if len(gts) != len(preds):
        raise ShapeMismatch(f"{len(gts)} ground-truth maps but {len(preds)} predictions")
    acc = PQAccumulator(num_classes)
    for g, p in zip(gts, preds, strict=True):
        acc.add(g, p)
    return accumulate_result(acc)


def accumulate_result(acc: PQAccumulator) -> MultiClassPQ:
    binary = acc.bpq()
    out = MultiClassPQ(
        bpq=binary.pq,
        mpq=acc.mpq(),
        per_class=acc.class_results(),
        binary=binary,
        empty_classes=acc.empty_classes(),
    )
    log.debug("multiclass_pq", images=acc.images, bpq=out.bpq, mpq=out.mpq)
    return out


__all__ = [
    "MultiClassPQ",
    "PQAccumulator",
    "PanopticQuality",
    "accumulate_result",
    "multiclass_pq",
    "panoptic_quality",
]
