"""Per-instance records: bounding boxes, centroids, contours and classes."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from engine.m04_postproc import (
    InstanceMap,
    class_name,
    extract_records,
    fill_contour,
    paint_discs,
    trace_contour,
)


class TestTraceContour:
    def test_single_pixel(self) -> None:
        mask = np.zeros((5, 5), dtype=bool)
        mask[2, 3] = True
        assert trace_contour(mask) == [(2, 3)]

    def test_square_is_clockwise_from_top_left(self) -> None:
        mask = np.zeros((8, 8), dtype=bool)
        mask[2:5, 3:6] = True
        assert trace_contour(mask) == [
            (2, 3),
            (2, 4),
            (2, 5),
            (3, 5),
            (4, 5),
            (4, 4),
            (4, 3),
            (3, 3),
        ]

    def test_horizontal_pair(self) -> None:
        mask = np.zeros((3, 4), dtype=bool)
        mask[1, 1:3] = True
        assert trace_contour(mask) == [(1, 1), (1, 2)]

    def test_empty(self) -> None:
        assert trace_contour(np.zeros((3, 3), dtype=bool)) == []

    def test_touches_image_border(self) -> None:
        mask = np.ones((3, 3), dtype=bool)
        contour = trace_contour(mask)
        assert contour[0] == (0, 0)
        assert len(contour) == 8
        assert (1, 1) not in contour

    def test_disc_fill_round_trip(self) -> None:
        mask = paint_discs((32, 32), [(15.3, 16.7)], [9]) > 0
        assert np.array_equal(fill_contour(trace_contour(mask), mask.shape), mask)


class TestExtractRecords:
    def test_empty_map(self) -> None:
        assert extract_records(InstanceMap.empty((4, 4))) == []

    def test_one_pixel_instance(self) -> None:
        labels = np.zeros((6, 6), dtype=np.int32)
        labels[4, 1] = 1
        (rec,) = extract_records(InstanceMap(labels=labels, classes={1: 3}))
        assert rec.id == 1
        assert rec.bbox == (4, 1, 4, 1)
        assert rec.centroid == (4.0, 1.0)
        assert rec.contour == ((4, 1),)
        assert rec.area == 1
        assert rec.class_id == 3

    def test_square_instance(self) -> None:
        labels = np.zeros((8, 8), dtype=np.int32)
        labels[2:5, 3:6] = 1
        (rec,) = extract_records(InstanceMap(labels=labels))
        assert rec.bbox == (2, 3, 4, 5)
        assert rec.centroid == pytest.approx((3.0, 4.0))
        assert rec.area == 9
        assert rec.contour[0] == (2, 3)
        assert rec.class_id == 0

    def test_missing_class_uses_unknown(self) -> None:
        labels = np.zeros((4, 4), dtype=np.int32)
        labels[1, 1] = 1
        (rec,) = extract_records(InstanceMap(labels=labels), unknown_class=5)
        assert rec.class_id == 5

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**16), n=st.integers(1, 6))
    def test_matches_pixel_statistics(self, seed: int, n: int) -> None:
        rng = np.random.default_rng(seed)
        centers = [(float(rng.uniform(4, 28)), float(rng.uniform(4, 28))) for _ in range(n)]
        radii = [float(rng.uniform(1.5, 5)) for _ in range(n)]
        labels = paint_discs((32, 32), centers, radii)
        inst = InstanceMap(labels=labels)
        records = extract_records(inst)
        present = [i for i in inst.ids() if (labels == i).any()]
        assert [r.id for r in records] == present
        for rec in records:
            rr, cc = np.nonzero(labels == rec.id)
            assert rec.area == rr.size
            assert rec.centroid == pytest.approx((rr.mean(), cc.mean()))
            assert rec.bbox == (rr.min(), cc.min(), rr.max(), cc.max())
            top = rr.min()
            assert rec.contour[0] == (top, cc[rr == top].min())
            assert all(labels[r, c] == rec.id for r, c in rec.contour)

    def test_shifted(self) -> None:
        labels = np.zeros((4, 4), dtype=np.int32)
        labels[1, 2] = 1
        (rec,) = extract_records(InstanceMap(labels=labels))
        moved = rec.shifted(10, 20)
        assert moved.bbox == (11, 22, 11, 22)
        assert moved.centroid == (11.0, 22.0)
        assert moved.contour == ((11, 22),)


def test_class_names() -> None:
    assert class_name(1) == "Neoplastic"
    assert class_name(9) == "class_9"
