"""Tissue- and cell-balanced oversampling weights and a seeded sampler."""

from engine.m03_sampling.index import DatasetEntry, DatasetIndex, load_index, parse_index
from engine.m03_sampling.sampler import AliasSampler, draw_epoch
from engine.m03_sampling.weights import (
    SamplingConfig,
    cell_weight,
    cell_weights,
    sampling_weights,
    tissue_weight,
    tissue_weights,
)

__all__ = [
    "AliasSampler",
    "DatasetEntry",
    "DatasetIndex",
    "SamplingConfig",
    "cell_weight",
    "cell_weights",
    "draw_epoch",
    "load_index",
    "parse_index",
    "sampling_weights",
    "tissue_weight",
    "tissue_weights",
]
