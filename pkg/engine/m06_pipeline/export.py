"""Result JSON and GeoJSON documents for a merged slide."""

from __future__ import annotations

from pathlib import Path
from typing import Any

import numpy as np
import structlog

from engine.lib.contracts import RESULT_SCHEMA, NucleusDoc, ResultDoc
from engine.lib.errors import IoError
from engine.m04_postproc.records import fill_contour
from engine.m04_postproc.types import PANNUKE_CLASSES, InstanceMap, NucleusRecord, class_name
from engine.m06_pipeline.merge import WsiResult
from engine.m06_pipeline.tiles import plan_tiles
from engine.m07_persist.json_store import dumps_stable, read_json, write_text_atomic

log = structlog.get_logger(__name__)

COORD_DECIMALS = 4
EMBEDDING_DECIMALS = 6


def _coord(x: float) -> float:
    return round(float(x), COORD_DECIMALS)


def nucleus_doc(rec: NucleusRecord, include_embeddings: bool) -> NucleusDoc:
    doc: NucleusDoc = {
        "id": rec.id,
        "type": rec.class_id,
        "type_name": class_name(rec.class_id),
        "bbox": [int(v) for v in rec.bbox],
        "centroid": [_coord(rec.centroid[0]), _coord(rec.centroid[1])],
        "contour": [[int(r), int(c)] for r, c in rec.contour],
        "tile": [int(rec.tile[0]), int(rec.tile[1])],
    }
    if include_embeddings and rec.embedding is not None:
        doc["embedding"] = [round(float(v), EMBEDDING_DECIMALS) for v in rec.embedding]
    return doc


def result_document(
    result: WsiResult, mpp: float, model: str, include_embeddings: bool = True
) -> ResultDoc:
    g = result.grid
    return {
        "schema": RESULT_SCHEMA,
        "mpp": float(mpp),
        "model": model,
        "tile_size": g.tile_size,
        "overlap": g.overlap,
        "wsi_width": g.wsi_width,
        "wsi_height": g.wsi_height,
        "classes": {str(k): v for k, v in PANNUKE_CLASSES.items()},
        "nuclei": [nucleus_doc(r, include_embeddings) for r in result.records],
    }


def export_json(
    result: WsiResult,
    path: str | Path,
    *,
    mpp: float,
    model: str,
    include_embeddings: bool = True,
) -> Path:
    doc = result_document(result, mpp, model, include_embeddings)
    out = write_text_atomic(path, dumps_stable(doc))
    log.info("result_written", path=str(out), nuclei=len(doc["nuclei"]))
    return out


def _ring(contour: tuple[tuple[int, int], ...]) -> list[list[float]]:
    """Closed ``[col, row]`` ring with at least four positions."""
    pts = [[float(c), float(r)] for r, c in contour]
    ring = pts + [pts[0]]
    while len(ring) < 4:
        ring.append(pts[0])
    return ring


def geojson_document(result: WsiResult) -> dict[str, Any]:
    features = []
    for rec in result.records:
        if not rec.contour:
            continue
        features.append(
            {
                "type": "Feature",
                "id": rec.id,
                "geometry": {"type": "Polygon", "coordinates": [_ring(rec.contour)]},
                "properties": {
                    "objectType": "detection",
                    "classification": {"name": class_name(rec.class_id)},
                    "type": rec.class_id,
                },
            }
        )
    return {"type": "FeatureCollection", "features": features}


def export_geojson(result: WsiResult, path: str | Path) -> Path:
    doc = geojson_document(result)
    out = write_text_atomic(path, dumps_stable(doc))
    log.info("geojson_written", path=str(out), features=len(doc["features"]))
    return out


def _area(contour: tuple[tuple[int, int], ...], bbox: tuple[int, int, int, int]) -> int:
    if not contour:
        return 0
    shape = (bbox[2] - bbox[0] + 1, bbox[3] - bbox[1] + 1)
    local = [(r - bbox[0], c - bbox[1]) for r, c in contour]
    return int(np.count_nonzero(fill_contour(local, shape)))


def _record(doc: dict[str, Any]) -> NucleusRecord:
    contour = tuple((int(r), int(c)) for r, c in doc["contour"])
    r0, c0, r1, c1 = (int(v) for v in doc["bbox"])
    emb = doc.get("embedding")
    return NucleusRecord(
        id=int(doc["id"]),
        bbox=(r0, c0, r1, c1),
        centroid=(float(doc["centroid"][0]), float(doc["centroid"][1])),
        contour=contour,
        class_id=int(doc["type"]),
        area=_area(contour, (r0, c0, r1, c1)),
        embedding=None if emb is None else np.asarray(emb, dtype=np.float64),
        tile=(int(doc["tile"][0]), int(doc["tile"][1])),
    )


def records_to_instance_map(
    records: tuple[NucleusRecord, ...] | list[NucleusRecord], shape: tuple[int, int]
) -> InstanceMap:
    """Paint record contours into a label image; ids follow record order, later records win."""
    labels = np.zeros(shape, dtype=np.int32)
    classes: dict[int, int] = {}
    for k, rec in enumerate(records, start=1):
        if not rec.contour:
            continue
        r0, c0 = max(rec.bbox[0], 0), max(rec.bbox[1], 0)
        r1, c1 = min(rec.bbox[2] + 1, shape[0]), min(rec.bbox[3] + 1, shape[1])
        if r0 >= r1 or c0 >= c1:
            continue
        local = [(r - r0, c - c0) for r, c in rec.contour]
        mask = fill_contour(local, (r1 - r0, c1 - c0))
        labels[r0:r1, c0:c1][mask] = k
        classes[k] = rec.class_id
    return InstanceMap(labels=labels, classes=classes)


def load_result_json(path: str | Path) -> tuple[WsiResult, dict[str, Any]]:
    """Read a result file back; the second item holds the document header."""
    doc = read_json(path)
    if not isinstance(doc, dict) or doc.get("schema") != RESULT_SCHEMA:
        raise IoError(f"{path} is not a {RESULT_SCHEMA} document")
    try:
        grid = plan_tiles(
            int(doc["wsi_width"]),
            int(doc["wsi_height"]),
            int(doc["tile_size"]),
            int(doc["overlap"]),
        )
        records = tuple(_record(n) for n in doc["nuclei"])
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise IoError(f"{path} is malformed: {exc}") from exc
    header = {k: v for k, v in doc.items() if k != "nuclei"}
    return WsiResult(records=records, grid=grid), header


__all__ = [
    "COORD_DECIMALS",
    "EMBEDDING_DECIMALS",
    "export_geojson",
    "export_json",
    "geojson_document",
    "load_result_json",
    "nucleus_doc",
    "records_to_instance_map",
    "result_document",
]
