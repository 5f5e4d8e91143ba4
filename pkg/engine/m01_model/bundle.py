from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PredictionBundle:
    """Dense head outputs for one image plus the final token sequence.

    ``np_map`` and ``nt_map`` are per-pixel softmax outputs, ``hv_map`` holds
    horizontal then vertical distances clamped to [-1, 1]. ``tokens_final``
    excludes the class token and is laid out in row-major token order. The
    star-convex fields are only populated by configurations that produce them.
    """

    np_map: np.ndarray
    hv_map: np.ndarray
    nt_map: np.ndarray
    tissue_logits: np.ndarray
    tokens_final: np.ndarray
    pd_map: np.ndarray | None = None
    rd_map: np.ndarray | None = None
    rd_refined: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return (int(self.np_map.shape[0]), int(self.np_map.shape[1]))

    @property
    def foreground(self) -> np.ndarray:
        return self.np_map[..., 1]


__all__ = ["PredictionBundle"]
