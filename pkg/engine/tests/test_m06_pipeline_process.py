"""Per-tile processing, embedding association and cross-tile merging."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from engine.lib.errors import ConfigError, GridMismatch, ShapeMismatch
from engine.m04_postproc import (
    InstanceMap,
    NucleusRecord,
    bundle_from_instances,
    extract_records,
    fill_contour,
    paint_discs,
)
from engine.m06_pipeline import (
    OraclePredictor,
    PostprocSettings,
    TileOutput,
    associate_embeddings,
    merge_tiles,
    nucleus_color,
    plan_tiles,
    process_bundle,
    process_tile,
    token_footprints,
)
from engine.m06_pipeline.process import PAD_VALUE
from engine.m06_pipeline.synthetic import BACKGROUND

Disc = tuple[int, int, int, int]


def _tile(shape: tuple[int, int], discs: list[Disc]) -> np.ndarray:
    img = np.empty(shape + (3,), dtype=np.float32)
    img[...] = BACKGROUND
    rr, cc = np.mgrid[0 : shape[0], 0 : shape[1]]
    for r, c, rad, cls in discs:
        img[(rr - r) ** 2 + (cc - c) ** 2 <= rad**2] = nucleus_color(cls)
    return img


def _key(rec: NucleusRecord) -> tuple[object, ...]:
    return (rec.bbox, rec.centroid, rec.contour, rec.class_id, rec.area, rec.tile)


class TestEmbeddings:
    def test_nucleus_inside_one_token(self) -> None:
        labels = np.zeros((32, 32), dtype=np.int32)
        labels[3:9, 20:25] = 1
        tokens = np.arange(4 * 5, dtype=np.float32).reshape(4, 5)
        emb = associate_embeddings(InstanceMap(labels=labels), tokens, 16)
        assert np.array_equal(emb[1], tokens[1])

    def test_nucleus_spanning_two_tokens(self) -> None:
        labels = np.zeros((32, 32), dtype=np.int32)
        labels[20:24, 12:20] = 1
        tokens = np.array([[0, 0], [0, 0], [1.5, -2.0], [0.25, 4.0]], dtype=np.float32)
        emb = associate_embeddings(InstanceMap(labels=labels), tokens, 16)
        assert np.array_equal(emb[1], (tokens[2] + tokens[3]) / 2)

    def test_membership_is_not_pixel_weighted(self) -> None:
        labels = np.zeros((16, 32), dtype=np.int32)
        labels[0:16, 0:16] = 1
        labels[0, 16] = 1
        tokens = np.array([[2.0], [4.0]], dtype=np.float32)
        emb = associate_embeddings(InstanceMap(labels=labels), tokens, 16)
        assert emb[1][0] == 3.0

    def test_token_count_checked(self) -> None:
        with pytest.raises(ShapeMismatch):
            associate_embeddings(
                InstanceMap(labels=np.zeros((32, 32), dtype=np.int32)),
                np.zeros((3, 2), dtype=np.float32),
                16,
            )

    def test_grid_must_tile(self) -> None:
        with pytest.raises(ShapeMismatch):
            token_footprints(InstanceMap(labels=np.zeros((20, 32), dtype=np.int32)), 16)

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=60, deadline=None)
    def test_footprints_match_scalar_oracle(self, seed: int) -> None:
        rng = np.random.default_rng(seed)
        labels = (rng.random((48, 64)) < 0.05).astype(np.int32)
        labels[rng.integers(0, 48), rng.integers(0, 64)] = 2
        found = token_footprints(InstanceMap(labels=labels), 16)
        expected: dict[int, set[int]] = {}
        for r in range(48):
            for c in range(64):
                if labels[r, c]:
                    expected.setdefault(int(labels[r, c]), set()).add((r // 16) * 4 + c // 16)
        assert {k: set(v.tolist()) for k, v in found.items()} == expected


class TestProcessTile:
    def test_blank_tile(self) -> None:
        out = process_tile(_tile((64, 64), []), OraclePredictor())
        assert out.records == ()
        assert out.inst.count == 0

    def test_ideal_bundle_three_nuclei(self) -> None:
        labels = paint_discs((64, 64), [(15, 15), (15, 45), (45, 30)], [7, 8, 9])
        inst = InstanceMap(labels=labels, classes={1: 1, 2: 2, 3: 5})
        out = process_bundle(bundle_from_instances(inst, 6), PostprocSettings(), 16, False)
        assert len(out.records) == 3
        assert sorted(r.class_id for r in out.records) == [1, 2, 5]
        assert all(r.embedding is None for r in out.records)

    def test_deterministic(self) -> None:
        tile = _tile((64, 64), [(20, 20, 8, 1), (44, 40, 7, 3)])
        first = process_tile(tile, OraclePredictor())
        second = process_tile(tile, OraclePredictor())
        assert [_key(r) for r in first.records] == [_key(r) for r in second.records]
        for a, b in zip(first.records, second.records, strict=True):
            assert a.embedding is not None and b.embedding is not None
            assert np.array_equal(a.embedding, b.embedding)

    def test_classes_from_tile(self) -> None:
        tile = _tile((64, 64), [(16, 16, 8, 4), (44, 44, 8, 2)])
        out = process_tile(tile, OraclePredictor())
        assert [r.class_id for r in out.records] == [4, 2]

    def test_partial_token_tile_is_padded(self) -> None:
        tile = _tile((40, 40), [(30, 30, 6, 1)])
        out = process_tile(tile, OraclePredictor(token_size=16))
        assert out.inst.shape == (40, 40)
        (rec,) = out.records
        assert rec.bbox == (24, 24, 36, 36)
        padded = np.pad(tile, ((0, 8), (0, 8), (0, 0)), constant_values=PAD_VALUE)
        means = padded.reshape(3, 16, 3, 16, 3).mean(axis=(1, 3), dtype=np.float64)
        expected = means[1:3, 1:3].reshape(-1, 3).astype(np.float32).astype(np.float64)
        assert rec.embedding is not None
        np.testing.assert_allclose(rec.embedding, expected.mean(axis=0), rtol=1e-6)

    def test_embeddings_can_be_skipped(self) -> None:
        tile = _tile((32, 32), [(16, 16, 6, 1)])
        out = process_tile(tile, OraclePredictor(), include_embeddings=False)
        assert out.records[0].embedding is None

    @pytest.mark.parametrize("mode", ["stardist", "cppnet"])
    def test_star_modes(self, mode: str) -> None:
        tile = _tile((96, 96), [(20, 20, 8, 1), (20, 70, 8, 2), (70, 45, 8, 3)])
        settings_ = PostprocSettings(mode=mode)  # type: ignore[arg-type]
        out = process_tile(tile, OraclePredictor(n_rays=32), settings_)
        assert sorted(r.class_id for r in out.records) == [1, 2, 3]

    def test_star_mode_needs_ray_maps(self) -> None:
        tile = _tile((32, 32), [(16, 16, 6, 1)])
        with pytest.raises(ConfigError):
            process_tile(tile, OraclePredictor(), PostprocSettings(mode="stardist"))


# two tiles, columns 0..119 and 80..199, sharing columns 80..119
GRID = plan_tiles(200, 100, 120, 40)


def _output(index: int, discs: list[Disc]) -> TileOutput:
    r0, c0, r1, c1 = GRID.box(index)
    shape = (r1 - r0, c1 - c0)
    labels = paint_discs(shape, [(r - r0, c - c0) for r, c, _, _ in discs], [d[2] for d in discs])
    classes = {i + 1: d[3] for i, d in enumerate(discs)}
    records = extract_records(InstanceMap(labels=labels, classes=classes))
    return TileOutput(index, (r0, c0), shape[0], shape[1], tuple(records))


def _merge(discs_a: list[Disc], discs_b: list[Disc]) -> tuple[NucleusRecord, ...]:
    return merge_tiles([_output(0, discs_a), _output(1, discs_b)], GRID).records


def _iou(a: NucleusRecord, b: NucleusRecord) -> float:
    ma = fill_contour(a.contour, (100, 200))
    mb = fill_contour(b.contour, (100, 200))
    return float((ma & mb).sum() / (ma | mb).sum())


class TestMerge:
    def test_seam_nucleus_detected_twice_survives_once(self) -> None:
        disc = [(50, 100, 8, 2)]
        (rec,) = _merge(disc, disc)
        assert rec.id == 1
        assert rec.tile == (0, 0)
        assert rec.class_id == 2

    def test_core_nucleus_kept(self) -> None:
        (rec,) = _merge([(50, 30, 8, 1)], [])
        assert rec.centroid == pytest.approx((50.0, 30.0))

    def test_cut_off_copy_loses_to_full_copy(self) -> None:
        disc = [(50, 116, 8, 3)]
        (rec,) = _merge(disc, disc)
        assert rec.tile == (0, 80)
        assert rec.bbox == (42, 108, 58, 124)

    def test_distinct_seam_nuclei_kept(self) -> None:
        discs = [(20, 100, 6, 1), (60, 100, 6, 2)]
        records = _merge(discs, discs)
        assert sorted(r.class_id for r in records) == [1, 2]

    def test_larger_area_wins(self) -> None:
        (rec,) = _merge([(50, 100, 7, 1)], [(50, 100, 8, 2)])
        assert rec.class_id == 2
        (rec,) = _merge([(50, 100, 8, 1)], [(50, 100, 7, 2)])
        assert rec.class_id == 1

    def test_low_overlap_pair_kept(self) -> None:
        records = _merge([(50, 96, 8, 1)], [(50, 110, 8, 2)])
        assert len(records) == 2
        assert _iou(records[0], records[1]) <= 0.25

    def test_fragment_of_a_whole_nucleus_dropped(self) -> None:
        records = _merge([(50, 100, 8, 1)], [(50, 104, 3, 2)])
        assert [r.class_id for r in records] == [1]
        assert records[0].tile == (0, 0)

    def test_full_slide_ids_and_no_duplicates(self) -> None:
        discs = [(50, 30, 8, 1), (20, 100, 6, 2), (60, 100, 6, 3), (50, 116, 5, 5), (50, 160, 8, 4)]
        records = _merge(discs, discs)
        assert [r.id for r in records] == list(range(1, 6))
        assert sorted(r.class_id for r in records) == [1, 2, 3, 4, 5]
        for i, a in enumerate(records):
            for b in records[i + 1 :]:
                assert _iou(a, b) <= 0.25

    def test_records_in_slide_coordinates(self) -> None:
        (rec,) = _merge([], [(50, 160, 8, 4)])
        assert rec.bbox == (42, 152, 58, 168)
        assert all(80 <= c < 200 for _, c in rec.contour)

    def test_grid_mismatch(self) -> None:
        with pytest.raises(GridMismatch):
            merge_tiles([_output(0, [])], GRID)
        moved = TileOutput(1, (0, 70), 100, 120, ())
        with pytest.raises(GridMismatch):
            merge_tiles([_output(0, []), moved], GRID)
