from __future__ import annotations

from typing import TypeAlias

import numpy as np
import numpy.typing as npt

from engine.lib.errors import ShapeMismatch

TensorF32: TypeAlias = npt.NDArray[np.float32]
LabelMap: TypeAlias = npt.NDArray[np.int32]


def as_f32(arr: npt.ArrayLike, *, rank: int | None = None, name: str = "tensor") -> TensorF32:
    """Return ``arr`` as a C-contiguous float32 array, checking its rank."""
    out = np.ascontiguousarray(arr, dtype=np.float32)
    if rank is not None and out.ndim != rank:
        raise ShapeMismatch(f"{name} must have rank {rank}, got shape {out.shape}")
    return out


def require_same_shape(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape != b.shape:
        raise ShapeMismatch(f"{what}: {a.shape} != {b.shape}")


def float_work(arr: np.ndarray) -> npt.NDArray[np.float64]:
    """Widen to float64 for accumulation-heavy arithmetic."""
    return np.asarray(arr, dtype=np.float64)


def grad_like(grad: np.ndarray, pred: np.ndarray) -> np.ndarray:
    """Cast a float64 gradient back to the prediction's float width."""
    if pred.dtype == np.float64:
        return grad
    return grad.astype(np.float32)


__all__ = ["LabelMap", "TensorF32", "as_f32", "float_work", "grad_like", "require_same_shape"]
