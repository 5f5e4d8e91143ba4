"""Result JSON and GeoJSON export: structure, round trips and byte stability."""

from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from engine.lib.contracts import RESULT_SCHEMA
from engine.lib.errors import IoError
from engine.m04_postproc import InstanceMap, NucleusRecord, extract_records, paint_discs
from engine.m06_pipeline import (
    InMemoryTileSource,
    OraclePredictor,
    RunConfig,
    WsiResult,
    export_geojson,
    export_json,
    geojson_document,
    load_result_json,
    plan_tiles,
    records_to_instance_map,
    run_wsi,
    synthesize_slide,
)


def _disc_result() -> WsiResult:
    labels = paint_discs((64, 64), [(20, 30)], [7])
    (rec,) = extract_records(InstanceMap(labels=labels, classes={1: 2}))
    rec = replace(rec, embedding=np.array([0.1234567, -2.5, 3.0], dtype=np.float32))
    return WsiResult(records=(rec,), grid=plan_tiles(64, 64, 64, 0))


def _shoelace(ring: list[list[float]]) -> float:
    return 0.5 * sum(
        x0 * y1 - x1 * y0 for (x0, y0), (x1, y1) in zip(ring[:-1], ring[1:], strict=True)
    )


class TestResultJson:
    def test_empty_result(self, tmp_path: Path) -> None:
        result = WsiResult(records=(), grid=plan_tiles(64, 48, 64, 0))
        path = export_json(result, tmp_path / "r.json", mpp=0.5, model="tiny")
        doc = json.loads(path.read_text())
        assert doc["nuclei"] == []
        assert doc["schema"] == RESULT_SCHEMA
        assert (doc["wsi_width"], doc["wsi_height"]) == (64, 48)
        assert (doc["mpp"], doc["model"]) == (0.5, "tiny")
        assert doc["classes"]["0"] == "Unknown"

    def test_single_nucleus_round_trip(self, tmp_path: Path) -> None:
        result = _disc_result()
        original = result.records[0]
        path = export_json(result, tmp_path / "r.json", mpp=0.25, model="oracle")
        loaded, header = load_result_json(path)
        (rec,) = loaded.records
        assert header["model"] == "oracle"
        assert (rec.id, rec.bbox, rec.contour, rec.class_id) == (
            original.id,
            original.bbox,
            original.contour,
            original.class_id,
        )
        assert rec.centroid == pytest.approx(original.centroid, abs=1e-4)
        assert rec.area == original.area
        assert rec.embedding is not None
        assert rec.embedding.tolist() == [0.123457, -2.5, 3.0]
        assert loaded.grid.tiles == result.grid.tiles

    def test_type_name_and_keys(self, tmp_path: Path) -> None:
        path = export_json(_disc_result(), tmp_path / "r.json", mpp=0.25, model="m")
        (nucleus,) = json.loads(path.read_text())["nuclei"]
        assert nucleus["type_name"] == "Inflammatory"
        assert set(nucleus) == {
            "id",
            "bbox",
            "centroid",
            "contour",
            "type",
            "type_name",
            "tile",
            "embedding",
        }

    def test_embeddings_optional(self, tmp_path: Path) -> None:
        path = export_json(
            _disc_result(), tmp_path / "r.json", mpp=0.25, model="m", include_embeddings=False
        )
        (nucleus,) = json.loads(path.read_text())["nuclei"]
        assert "embedding" not in nucleus

    def test_re_export_is_byte_identical(self, tmp_path: Path) -> None:
        slide = synthesize_slide(384, 320, seed=11, density=1.5e-3)
        result = run_wsi(
            InMemoryTileSource(slide.image, slide.mpp),
            OraclePredictor(),
            RunConfig(tile_size=128, overlap=32),
        )
        assert len(result.records) > 20
        first = export_json(result, tmp_path / "a.json", mpp=slide.mpp, model="oracle")
        loaded, header = load_result_json(first)
        second = export_json(loaded, tmp_path / "b.json", mpp=header["mpp"], model=header["model"])
        assert first.read_bytes() == second.read_bytes()
        geo_a = export_geojson(result, tmp_path / "a.geojson")
        geo_b = export_geojson(loaded, tmp_path / "b.geojson")
        assert geo_a.read_bytes() == geo_b.read_bytes()

    def test_rejects_foreign_documents(self, tmp_path: Path) -> None:
        path = tmp_path / "other.json"
        path.write_text('{"schema": "something-else"}')
        with pytest.raises(IoError):
            load_result_json(path)
        with pytest.raises(IoError):
            load_result_json(tmp_path / "missing.json")

    def test_malformed_nucleus(self, tmp_path: Path) -> None:
        path = export_json(_disc_result(), tmp_path / "r.json", mpp=0.25, model="m")
        doc = json.loads(path.read_text())
        del doc["nuclei"][0]["bbox"]
        path.write_text(json.dumps(doc))
        with pytest.raises(IoError):
            load_result_json(path)


class TestGeoJson:
    def test_feature_collection_structure(self) -> None:
        labels = paint_discs((64, 64), [(16, 16), (40, 44)], [6, 8])
        records = extract_records(InstanceMap(labels=labels, classes={1: 1, 2: 5}))
        doc = geojson_document(WsiResult(tuple(records), plan_tiles(64, 64, 64, 0)))
        assert doc["type"] == "FeatureCollection"
        assert len(doc["features"]) == 2
        for feature, rec in zip(doc["features"], records, strict=True):
            assert feature["type"] == "Feature"
            assert feature["geometry"]["type"] == "Polygon"
            (ring,) = feature["geometry"]["coordinates"]
            assert ring[0] == ring[-1]
            assert len(ring) >= 4
            assert ring[0] == [float(rec.contour[0][1]), float(rec.contour[0][0])]
            assert _shoelace(ring) > 0
        names = [f["properties"]["classification"]["name"] for f in doc["features"]]
        assert names == ["Neoplastic", "Epithelial"]

    def test_single_pixel_ring_is_padded(self) -> None:
        rec = NucleusRecord(
            id=1, bbox=(3, 4, 3, 4), centroid=(3.0, 4.0), contour=((3, 4),), class_id=0, area=1
        )
        doc = geojson_document(WsiResult((rec,), plan_tiles(8, 8, 8, 0)))
        (ring,) = doc["features"][0]["geometry"]["coordinates"]
        assert ring == [[4.0, 3.0]] * 4
        assert doc["features"][0]["properties"]["classification"]["name"] == "Unknown"


class TestRecordsToInstanceMap:
    def test_repaints_instances(self) -> None:
        labels = paint_discs((48, 48), [(12, 12), (30, 34)], [6, 9])
        records = extract_records(InstanceMap(labels=labels, classes={1: 3, 2: 4}))
        inst = records_to_instance_map(records, (48, 48))
        assert np.array_equal(inst.labels, labels)
        assert dict(inst.classes) == {1: 3, 2: 4}
