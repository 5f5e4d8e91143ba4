from __future__ import annotations

import os
from dataclasses import dataclass

from engine.lib.errors import ConfigError

WORKERS_ENV = "CELLVIT_WORKERS"


@dataclass(frozen=True)
class TilingDefaults:
    tile_size: int = 1024
    overlap: int = 64
    merge_iou: float = 0.25
    in_flight_per_worker: int = 2


@dataclass(frozen=True)
class PostprocDefaults:
    np_thresh: float = 0.5
    edge_thresh: float = 0.4
    min_marker_px: int = 10
    min_instance_px: int = 10
    prob_thresh: float = 0.5
    nms_thresh: float = 0.3
    n_rays: int = 32
    unknown_class: int = 0


@dataclass(frozen=True)
class LossDefaults:
    alpha: float = 0.7
    beta: float = 0.3
    gamma: float = 4.0 / 3.0
    eps: float = 1e-6


@dataclass(frozen=True)
class SamplingDefaults:
    gamma_s: float = 0.85
    num_tissue_classes: int = 19


@dataclass(frozen=True)
class TrainingConstants:
    """Optimizer settings documented for reproduction; not executed here."""

    optimizer: str = "AdamW"
    learning_rate: float = 3e-4
    weight_decay: float = 1e-4
    beta1: float = 0.85
    beta2: float = 0.85
    epochs: int = 130
    batch_size: int = 16
    lr_decay: float = 0.85
    frozen_encoder_epochs: int = 25


@dataclass(frozen=True)
class MetricDefaults:
    match_iou: float = 0.5
    centroid_radius_um: float = 3.0


def workers_from_env(default: int = 1) -> int:
    """Worker count from ``CELLVIT_WORKERS`` or ``default``."""
    raw = os.environ.get(WORKERS_ENV)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from exc
    if value < 1:
        raise ConfigError(f"{WORKERS_ENV} must be >= 1, got {value}")
    return value


__all__ = [
    "LossDefaults",
    "MetricDefaults",
    "PostprocDefaults",
    "SamplingDefaults",
    "TilingDefaults",
    "TrainingConstants",
    "WORKERS_ENV",
    "workers_from_env",
]
