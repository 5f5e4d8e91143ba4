from __future__ import annotations

from typing import TYPE_CHECKING, Protocol, TypedDict

import numpy as np

if TYPE_CHECKING:
    from engine.m01_model.bundle import PredictionBundle

RESULT_SCHEMA = "cellvit-result/1"
MANIFEST_SCHEMA = "cellvit-tiles/1"
REPORT_SCHEMA = "cellvit-report/1"
WEIGHTS_MAGIC = b"CVTW"
TILE_MAGIC = b"CVTF"


class NucleusDoc(TypedDict, total=False):
    id: int
    bbox: list[int]
    centroid: list[float]
    contour: list[list[int]]
    type: int
    type_name: str
    tile: list[int]
    embedding: list[float]


class ResultDoc(TypedDict):
    schema: str
    mpp: float
    model: str
    tile_size: int
    overlap: int
    wsi_width: int
    wsi_height: int
    classes: dict[str, str]
    nuclei: list[NucleusDoc]


class Predictor(Protocol):
    """Anything that turns an RGB tile into dense head outputs."""

    @property
    def token_size(self) -> int: ...

    def predict(self, tile: np.ndarray) -> PredictionBundle: ...


class TileSource(Protocol):
    """Random access to slide pixels, addressed in level-0 coordinates."""

    @property
    def width(self) -> int: ...

    @property
    def height(self) -> int: ...

    @property
    def mpp(self) -> float: ...

    def read_region(self, row: int, col: int, height: int, width: int) -> np.ndarray: ...


__all__ = [
    "MANIFEST_SCHEMA",
    "NucleusDoc",
    "Predictor",
    "REPORT_SCHEMA",
    "RESULT_SCHEMA",
    "ResultDoc",
    "TILE_MAGIC",
    "TileSource",
    "WEIGHTS_MAGIC",
]
