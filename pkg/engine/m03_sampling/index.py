from __future__ import annotations

from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from engine.lib.config import SamplingDefaults
from engine.lib.errors import ConfigError
from engine.m07_persist.json_store import read_json

_DEFAULTS = SamplingDefaults()


class DatasetEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    tissue: int
    cells: tuple[int, ...]

    @field_validator("tissue")
    @classmethod
    def _tissue_range(cls, v: int) -> int:
        if not 0 <= v < _DEFAULTS.num_tissue_classes:
            raise ValueError(f"tissue class must be in [0, {_DEFAULTS.num_tissue_classes})")
        return v

    @field_validator("cells")
    @classmethod
    def _binary(cls, v: tuple[int, ...]) -> tuple[int, ...]:
        if any(c not in (0, 1) for c in v):
            raise ValueError("cell presence entries must be 0 or 1")
        return v


class DatasetIndex(BaseModel):
    """Training patches with one tissue class and a nucleus-class presence vector."""

    model_config = ConfigDict(frozen=True)

    entries: tuple[DatasetEntry, ...] = Field(default_factory=tuple)

    @model_validator(mode="after")
    def _same_width(self) -> DatasetIndex:
        widths = {len(e.cells) for e in self.entries}
        if len(widths) > 1:
            raise ValueError("all entries must list the same number of nucleus classes")
        return self

    @property
    def n_train(self) -> int:
        return len(self.entries)

    @property
    def n_cell(self) -> int:
        return int(sum(sum(e.cells) for e in self.entries))

    def tissue_ids(self) -> np.ndarray:
        return np.array([e.tissue for e in self.entries], dtype=np.int64)

    def presence(self) -> np.ndarray:
        if not self.entries:
            return np.zeros((0, 0), dtype=np.float64)
        return np.array([e.cells for e in self.entries], dtype=np.float64)


def parse_index(payload: object) -> DatasetIndex:
    try:
        return DatasetIndex.model_validate(payload)
    except ValidationError as exc:
        raise ConfigError(f"malformed dataset index: {exc}") from exc


def load_index(path: str | Path) -> DatasetIndex:
    return parse_index(read_json(path))


__all__ = ["DatasetEntry", "DatasetIndex", "load_index", "parse_index"]
