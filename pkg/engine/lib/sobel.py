"""3x3 Sobel derivatives with edge-replicated borders and their adjoints.

``sobel_h`` differentiates along columns (the horizontal direction) and
``sobel_v`` along rows. A linear ramp of slope ``s`` has an interior response
of ``SOBEL_GAIN * s``; constant maps respond with exactly zero everywhere.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

SOBEL_GAIN = 8.0

KERNEL_H = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
KERNEL_V = KERNEL_H.T.copy()


def _apply(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    return ndimage.correlate(np.asarray(x, dtype=np.float64), kernel, mode="nearest")


def _apply_adjoint(r: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    h, w = r.shape
    padded = np.zeros((h + 2, w + 2), dtype=np.float64)
    for a in range(3):
        for b in range(3):
            k = kernel[a, b]
            if k != 0.0:
                padded[a : a + h, b : b + w] += k * r
    # edge replication copies border rows/cols outward; fold them back in
    padded[1, :] += padded[0, :]
    padded[-2, :] += padded[-1, :]
    padded[:, 1] += padded[:, 0]
    padded[:, -2] += padded[:, -1]
    return padded[1:-1, 1:-1]


def sobel_h(x: np.ndarray) -> np.ndarray:
    return _apply(x, KERNEL_H)


def sobel_v(x: np.ndarray) -> np.ndarray:
    return _apply(x, KERNEL_V)


def sobel_h_adjoint(r: np.ndarray) -> np.ndarray:
    return _apply_adjoint(r, KERNEL_H)


def sobel_v_adjoint(r: np.ndarray) -> np.ndarray:
    return _apply_adjoint(r, KERNEL_V)


__all__ = [
    "KERNEL_H",
    "KERNEL_V",
    "SOBEL_GAIN",
    "sobel_h",
    "sobel_h_adjoint",
    "sobel_v",
    "sobel_v_adjoint",
]
