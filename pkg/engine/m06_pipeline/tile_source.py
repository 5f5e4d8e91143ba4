"""Slide pixel access: a directory of stored CVTF tiles or an in-memory array."""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from engine.lib.contracts import MANIFEST_SCHEMA
from engine.lib.errors import ConfigError, IoError, ShapeMismatch
from engine.m07_persist.binary import load_tensor
from engine.m07_persist.json_store import read_json

log = structlog.get_logger(__name__)


class TileEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    row: int = Field(ge=0)
    col: int = Field(ge=0)
    file: str


class TileManifest(BaseModel):
    """Layout of a tile directory; tile ``(row, col)`` is the pixel origin."""

    model_config = ConfigDict(frozen=True)

    schema_: str = Field(default=MANIFEST_SCHEMA, alias="schema")
    wsi_width: int = Field(gt=0)
    wsi_height: int = Field(gt=0)
    tile_size: int = Field(gt=0)
    overlap: int = Field(ge=0)
    mpp: float = Field(gt=0.0)
    tiles: list[TileEntry]

    @field_validator("tiles")
    @classmethod
    def _not_empty(cls, v: list[TileEntry]) -> list[TileEntry]:
        if not v:
            raise ValueError("manifest lists no tiles")
        return v

    @model_validator(mode="after")
    def _inside_slide(self) -> TileManifest:
        for t in self.tiles:
            if t.row >= self.wsi_height or t.col >= self.wsi_width:
                raise ValueError(f"tile origin ({t.row}, {t.col}) lies outside the slide")
        return self


def parse_manifest(payload: object) -> TileManifest:
    try:
        return TileManifest.model_validate(payload)
    except ValidationError as exc:
        raise ConfigError(f"invalid tile manifest: {exc}") from exc


def load_manifest(path: str | Path) -> TileManifest:
    return parse_manifest(read_json(path))


class InMemoryTileSource:
    """An ``(H, W, C)`` array served as a slide."""

    def __init__(self, image: np.ndarray, mpp: float = 0.25) -> None:
        if image.ndim != 3:
            raise ShapeMismatch(f"slide image must be (H, W, C), got {image.shape}")
        self._image = image
        self._mpp = mpp

    @property
    def width(self) -> int:
        return int(self._image.shape[1])

    @property
    def height(self) -> int:
        return int(self._image.shape[0])

    @property
    def mpp(self) -> float:
        return self._mpp

    def read_region(self, row: int, col: int, height: int, width: int) -> np.ndarray:
        if row < 0 or col < 0 or row + height > self.height or col + width > self.width:
            raise ShapeMismatch(f"region ({row}, {col}, {height}, {width}) leaves the slide")
        return np.array(self._image[row : row + height, col : col + width], dtype=np.float32)


class DirectoryTileSource:
    """Slide assembled on demand from the CVTF tiles listed in a manifest.

    Regions may span several stored tiles; recently used tiles stay cached.
    """

    def __init__(self, manifest_path: str | Path, cache_tiles: int = 16) -> None:
        self._manifest_path = Path(manifest_path)
        self.manifest = load_manifest(self._manifest_path)
        self._root = self._manifest_path.parent
        self._load = lru_cache(maxsize=cache_tiles)(self._load_uncached)

    @property
    def width(self) -> int:
        return self.manifest.wsi_width

    @property
    def height(self) -> int:
        return self.manifest.wsi_height

    @property
    def mpp(self) -> float:
        return self.manifest.mpp

    def _load_uncached(self, name: str) -> np.ndarray:
        path = self._root / name
        if not path.exists():
            raise IoError(f"tile file not found: {path}")
        tile = load_tensor(path)
        if tile.ndim != 3:
            raise ShapeMismatch(f"{name}: tiles must be (H, W, C), got {tile.shape}")
        return tile

    def read_region(self, row: int, col: int, height: int, width: int) -> np.ndarray:
        if row < 0 or col < 0 or row + height > self.height or col + width > self.width:
            raise ShapeMismatch(f"region ({row}, {col}, {height}, {width}) leaves the slide")
        out: np.ndarray | None = None
        filled = np.zeros((height, width), dtype=bool)
        size = self.manifest.tile_size
        for entry in self.manifest.tiles:
            r0, c0 = max(row, entry.row), max(col, entry.col)
            r1 = min(row + height, entry.row + size)
            c1 = min(col + width, entry.col + size)
            if r0 >= r1 or c0 >= c1:
                continue
            tile = self._load(entry.file)
            if out is None:
                out = np.zeros((height, width, tile.shape[2]), dtype=np.float32)
            src = tile[r0 - entry.row : r1 - entry.row, c0 - entry.col : c1 - entry.col]
            out[r0 - row : r0 - row + src.shape[0], c0 - col : c0 - col + src.shape[1]] = src
            filled[r0 - row : r0 - row + src.shape[0], c0 - col : c0 - col + src.shape[1]] = True
        if out is None or not filled.all():
            raise IoError(f"stored tiles do not cover region ({row}, {col}, {height}, {width})")
        log.debug("read_region", row=row, col=col, height=height, width=width)
        return out


__all__ = [
    "DirectoryTileSource",
    "InMemoryTileSource",
    "TileEntry",
    "TileManifest",
    "load_manifest",
    "parse_manifest",
]
