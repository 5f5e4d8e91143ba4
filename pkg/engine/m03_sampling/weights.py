"""Oversampling weights that balance tissue classes and rare nucleus classes.

Each patch gets a tissue weight and a cell weight; both are normalised by
their maximum and summed. ``gamma_s = 0`` gives uniform sampling and
``gamma_s = 1`` full balancing.
"""

from __future__ import annotations

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator

from engine.lib.config import SamplingDefaults
from engine.lib.errors import ConfigError, DegenerateMax, IndexOutOfRange
from engine.m03_sampling.index import DatasetIndex


class SamplingConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    gamma_s: float = SamplingDefaults().gamma_s

    @field_validator("gamma_s")
    @classmethod
    def _unit_interval(cls, v: float) -> float:
        if not 0.0 <= v <= 1.0:
            raise ValueError("gamma_s must lie in [0, 1]")
        return v


def _check_gamma(gamma_s: float) -> float:
    try:
        return SamplingConfig(gamma_s=gamma_s).gamma_s
    except ValidationError as exc:
        raise ConfigError(f"invalid gamma_s {gamma_s!r}") from exc


def tissue_weights(index: DatasetIndex, gamma_s: float) -> np.ndarray:
    g = _check_gamma(gamma_s)
    tissues = index.tissue_ids()
    n = float(index.n_train)
    if tissues.size == 0:
        return np.zeros(0)
    counts = np.bincount(tissues)[tissues].astype(np.float64)
    return n / (g * counts + (1.0 - g) * n)


def cell_weights(index: DatasetIndex, gamma_s: float) -> np.ndarray:
    g = _check_gamma(gamma_s)
    presence = index.presence()
    if presence.size == 0:
        return np.full(index.n_train, 1.0 - g)
    n_cell = float(index.n_cell)
    denom = g * presence.sum(axis=0) + (1.0 - g) * n_cell
    ratio = np.divide(n_cell, denom, out=np.zeros_like(denom), where=denom > 0)
    return (1.0 - g) + g * (presence @ ratio)


def _checked(index: DatasetIndex, i: int) -> int:
    if not 0 <= i < index.n_train:
        raise IndexOutOfRange(f"entry {i} outside [0, {index.n_train})")
    return i


def tissue_weight(index: DatasetIndex, i: int, gamma_s: float) -> float:
    return float(tissue_weights(index, gamma_s)[_checked(index, i)])


def cell_weight(index: DatasetIndex, i: int, gamma_s: float) -> float:
    return float(cell_weights(index, gamma_s)[_checked(index, i)])


def sampling_weights(index: DatasetIndex, gamma_s: float) -> np.ndarray:
    """``w_tissue / max(w_tissue) + w_cell / max(w_cell)`` per entry."""
    wt = tissue_weights(index, gamma_s)
    wc = cell_weights(index, gamma_s)
    if wt.size == 0:
        raise DegenerateMax("dataset index is empty")
    t_max = float(wt.max())
    c_max = float(wc.max())
    if t_max <= 0.0:
        raise DegenerateMax("all tissue weights are zero")
    if c_max <= 0.0:
        raise DegenerateMax("all cell weights are zero")
    return wt / t_max + wc / c_max


__all__ = [
    "SamplingConfig",
    "cell_weight",
    "cell_weights",
    "sampling_weights",
    "tissue_weight",
    "tissue_weights",
]
