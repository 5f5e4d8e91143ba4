"""Distance-map instance separation and per-instance type voting."""

from __future__ import annotations

import math
import warnings

import numpy as np
import pytest

from engine.lib.errors import ShapeMismatch
from engine.m01_model.bundle import PredictionBundle
from engine.m04_postproc import (
    HoverNetParams,
    InstanceMap,
    bundle_from_instances,
    edge_strength,
    hovernet_separate,
    hv_maps_from_instances,
    majority_vote_types,
    paint_discs,
)


def _ideal(labels: np.ndarray) -> PredictionBundle:
    return bundle_from_instances(InstanceMap(labels=labels), num_classes=6)


def _best_iou(gt: np.ndarray, pred: np.ndarray) -> list[float]:
    out = []
    for g in range(1, int(gt.max()) + 1):
        gm = gt == g
        best = 0.0
        for p in np.unique(pred[gm]):
            if p == 0:
                continue
            pm = pred == p
            best = max(best, float((gm & pm).sum() / (gm | pm).sum()))
        out.append(best)
    return out


class TestDistanceMaps:
    def test_background_is_zero_and_range_is_unit(self) -> None:
        labels = paint_discs((32, 32), [(15, 15)], [8])
        hv = hv_maps_from_instances(labels)
        assert hv.shape == (32, 32, 2)
        assert np.all(hv[labels == 0] == 0.0)
        assert hv.min() == pytest.approx(-1.0)
        assert hv.max() == pytest.approx(1.0)

    def test_sign_follows_side_of_centre(self) -> None:
        labels = paint_discs((32, 32), [(15, 15)], [8])
        hv = hv_maps_from_instances(labels)
        assert hv[15, 10, 0] < 0 < hv[15, 20, 0]
        assert hv[10, 15, 1] < 0 < hv[20, 15, 1]

    def test_edge_strength_flat_map(self) -> None:
        assert np.all(edge_strength(np.zeros((8, 8, 2))) == 0.0)


class TestSeparation:
    def test_empty_foreground(self) -> None:
        labels = np.zeros((24, 24), dtype=np.int32)
        inst = hovernet_separate(_ideal(labels))
        assert inst.count == 0
        assert inst.shape == (24, 24)

    def test_disjoint_nuclei(self) -> None:
        labels = paint_discs((32, 64), [(16, 16), (16, 44)], [8, 8])
        inst = hovernet_separate(_ideal(labels))
        assert inst.count == 2
        assert min(_best_iou(labels, inst.labels)) >= 0.95

    def test_touching_nuclei_are_split(self) -> None:
        labels = paint_discs((40, 48), [(20, 15), (20, 32)], [9, 9])
        inst = hovernet_separate(_ideal(labels))
        assert inst.count == 2
        assert min(_best_iou(labels, inst.labels)) >= 0.9

    @pytest.mark.parametrize("n", [1, 2, 3, 5, 6])
    def test_count_matches_separated_nuclei(self, n: int) -> None:
        centers = [(12 + 24 * (i // 3), 12 + 24 * (i % 3)) for i in range(n)]
        labels = paint_discs((48, 72), centers, [7] * n)
        inst = hovernet_separate(_ideal(labels))
        assert inst.count == n
        assert inst.is_contiguous()

    @pytest.mark.parametrize(
        ("size", "radius"), [(32, 6), (40, 6), (64, 8), (24, 4), (20, 3), (48, 9)]
    )
    def test_lone_nucleus_survives(self, size: int, radius: int) -> None:
        labels = paint_discs((size, size), [(size // 2, size // 2)], [radius])
        inst = hovernet_separate(_ideal(labels))
        assert inst.count == 1
        assert np.array_equal(inst.labels > 0, labels > 0)

    def test_components_without_markers_become_instances(self) -> None:
        labels = paint_discs((32, 64), [(16, 16), (16, 44)], [8, 6])
        inst = hovernet_separate(_ideal(labels), HoverNetParams(min_marker_px=10_000))
        assert inst.count == 2
        assert min(_best_iou(labels, inst.labels)) == 1.0

    def test_single_label_raises_no_warning(self) -> None:
        labels = paint_discs((32, 32), [(16, 16)], [7])
        with warnings.catch_warnings():
            warnings.simplefilter("error", UserWarning)
            inst = hovernet_separate(_ideal(labels), HoverNetParams(min_instance_px=20))
        assert inst.count == 1

    def test_threshold_above_every_probability(self) -> None:
        labels = paint_discs((32, 32), [(16, 16)], [8])
        inst = hovernet_separate(_ideal(labels), HoverNetParams(np_thresh=1.0))
        # ideal foreground is exactly 1.0
        assert inst.count == 1

    def test_small_instances_removed(self) -> None:
        labels = paint_discs((32, 32), [(16, 16)], [8])
        inst = hovernet_separate(_ideal(labels), HoverNetParams(min_instance_px=10_000))
        assert inst.count == 0

    def test_shape_mismatch(self) -> None:
        bundle = PredictionBundle(
            np_map=np.zeros((8, 8, 2)),
            hv_map=np.zeros((8, 9, 2)),
            nt_map=np.zeros((8, 8, 6)),
            tissue_logits=np.zeros(19),
            tokens_final=np.zeros((1, 1)),
        )
        with pytest.raises(ShapeMismatch):
            hovernet_separate(bundle)

    def test_invalid_params(self) -> None:
        with pytest.raises(ValueError):
            HoverNetParams(edge_thresh=1.5)


def _votes(labels: np.ndarray, classes: list[int], n_classes: int = 6) -> np.ndarray:
    pixel_class = np.zeros(labels.shape, dtype=np.int64)
    rr, cc = np.nonzero(labels)
    pixel_class[rr, cc] = classes
    return np.eye(n_classes)[pixel_class]


class TestMajorityVote:
    def _single(self) -> InstanceMap:
        labels = np.zeros((4, 5), dtype=np.int32)
        labels[1:3, :] = 1
        return InstanceMap(labels=labels)

    def test_sixty_forty(self) -> None:
        inst = self._single()
        out = majority_vote_types(inst, _votes(inst.labels, [2] * 6 + [3] * 4))
        assert out.class_of(1) == 2

    def test_tie_goes_to_lower_class(self) -> None:
        inst = self._single()
        out = majority_vote_types(inst, _votes(inst.labels, [3] * 5 + [2] * 5))
        assert out.class_of(1) == 2

    def test_background_votes_ignored(self) -> None:
        inst = self._single()
        out = majority_vote_types(inst, _votes(inst.labels, [0] * 7 + [4] * 3))
        assert out.class_of(1) == 4

    def test_all_background_is_unknown(self) -> None:
        inst = self._single()
        out = majority_vote_types(inst, _votes(inst.labels, [0] * 10), unknown_class=0)
        assert out.class_of(1) == 0

    def test_idempotent(self) -> None:
        labels = paint_discs((24, 24), [(6, 6), (16, 16)], [4, 5])
        rng = np.random.default_rng(3)
        nt = rng.random((24, 24, 6))
        once = majority_vote_types(InstanceMap(labels=labels), nt)
        twice = majority_vote_types(once, nt)
        assert dict(once.classes) == dict(twice.classes)
        assert np.array_equal(once.labels, labels)

    def test_empty_instances(self) -> None:
        out = majority_vote_types(InstanceMap.empty((4, 4)), np.zeros((4, 4, 6)))
        assert dict(out.classes) == {}

    def test_shape_mismatch(self) -> None:
        with pytest.raises(ShapeMismatch):
            majority_vote_types(self._single(), np.zeros((3, 3, 6)))


def _fixture(seed: int, touching: bool, size: int = 96) -> np.ndarray:
    """2 to 6 discs; with ``touching`` the first two share a short boundary."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7))
    centers: list[tuple[float, float]] = []
    radii: list[float] = []

    def inside(r: float, c: float, rad: float) -> bool:
        return rad + 1 <= r <= size - rad - 2 and rad + 1 <= c <= size - rad - 2

    def anywhere(rad: float) -> tuple[float, float]:
        lo, hi = rad + 1, size - rad - 2
        return (float(rng.uniform(lo, hi)), float(rng.uniform(lo, hi)))

    if touching:
        while True:
            ra, rb = (float(x) for x in rng.integers(7, 11, size=2))
            a = anywhere(ra)
            theta = float(rng.uniform(0.0, 2.0 * math.pi))
            d = ra + rb - 1
            b = (a[0] + d * math.sin(theta), a[1] + d * math.cos(theta))
            if inside(*b, rb):
                break
        centers += [a, b]
        radii += [ra, rb]
    while len(centers) < n:
        rad = float(rng.integers(4, 10))
        cand = anywhere(rad)
        if all(
            math.dist(cand, other) >= rad + r_other + 3
            for other, r_other in zip(centers, radii, strict=True)
        ):
            centers.append(cand)
            radii.append(rad)
    return paint_discs((size, size), centers, radii)


@pytest.mark.slow
def test_seeded_fixtures_recover_counts_and_shapes() -> None:
    """Exact counts on at least 95 of 100 fixtures; mean best IoU of at least 0.9."""
    exact = 0
    ious: list[float] = []
    touching_fixtures = 0
    for seed in range(100):
        touching = seed % 3 == 0
        touching_fixtures += touching
        labels = _fixture(seed, touching)
        inst = hovernet_separate(_ideal(labels))
        exact += inst.count == int(labels.max())
        ious += _best_iou(labels, inst.labels)
    assert touching_fixtures >= 30
    assert exact >= 95
    assert float(np.mean(ious)) >= 0.9
