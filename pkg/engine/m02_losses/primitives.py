"""Scalar losses with analytic gradients.

All functions take predictions and targets of equal shape with classes on the
last axis and return the value together with d(value)/d(pred). Arithmetic is
done in float64; the gradient comes back in the prediction's float width.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from engine.lib.config import LossDefaults
from engine.lib.errors import DomainError, IndexOutOfRange, ShapeMismatch
from engine.lib.sobel import sobel_h, sobel_h_adjoint, sobel_v, sobel_v_adjoint
from engine.lib.tensor import float_work, grad_like, require_same_shape

_DEFAULTS = LossDefaults()


@dataclass(frozen=True)
class LossValueWithGrad:
    value: float
    grad: np.ndarray


def _flat_classes(arr: np.ndarray) -> np.ndarray:
    if arr.ndim == 0:
        raise ShapeMismatch("loss inputs need at least one axis")
    return arr.reshape(-1, arr.shape[-1])


def bce_loss(pred: np.ndarray, gt: np.ndarray) -> LossValueWithGrad:
    """Categorical cross-entropy ``-(1/n) sum y log p`` over ``n`` pixels."""
    require_same_shape(pred, gt, "bce")
    p = _flat_classes(float_work(pred))
    y = _flat_classes(float_work(gt))
    active = y > 0
    if np.any(p[active] <= 0.0):
        raise DomainError("prediction is zero where the target is positive")
    n = p.shape[0]
    safe = np.where(active, p, 1.0)
    value = -float(np.sum(y * np.log(safe))) / n
    grad = np.where(active, -y / safe, 0.0) / n
    return LossValueWithGrad(value, grad_like(grad.reshape(pred.shape), pred))


def binary_bce_loss(pred: np.ndarray, gt: np.ndarray) -> LossValueWithGrad:
    """Mean binary cross-entropy for a single probability channel."""
    require_same_shape(pred, gt, "binary bce")
    p = float_work(pred)
    y = float_work(gt)
    pos = y > 0
    neg = y < 1
    if np.any(p[pos] <= 0.0) or np.any(p[neg] >= 1.0):
        raise DomainError("probability hits 0 or 1 against a disagreeing target")
    n = p.size
    log_p = np.log(np.where(pos, p, 1.0))
    log_q = np.log(np.where(neg, 1.0 - p, 1.0))
    value = -float(np.sum(y * log_p + (1.0 - y) * log_q)) / n
    grad = (
        np.where(pos, -y / np.where(pos, p, 1.0), 0.0)
        + np.where(neg, (1.0 - y) / np.where(neg, 1.0 - p, 1.0), 0.0)
    ) / n
    return LossValueWithGrad(value, grad_like(grad, pred))


def dice_loss(pred: np.ndarray, gt: np.ndarray, eps: float = _DEFAULTS.eps) -> LossValueWithGrad:
    """Soft Dice, one term per class, summed."""
    require_same_shape(pred, gt, "dice")
    p = _flat_classes(float_work(pred))
    y = _flat_classes(float_work(gt))
    inter = np.sum(p * y, axis=0)
    total = np.sum(p, axis=0) + np.sum(y, axis=0)
    num = 2.0 * inter + eps
    den = total + eps
    value = float(np.sum(1.0 - num / den))
    grad = -(2.0 * y * den - num) / den**2
    return LossValueWithGrad(value, grad_like(grad.reshape(pred.shape), pred))


def focal_tversky_loss(
    pred: np.ndarray,
    gt: np.ndarray,
    alpha: float = _DEFAULTS.alpha,
    beta: float = _DEFAULTS.beta,
    gamma: float = _DEFAULTS.gamma,
    eps: float = _DEFAULTS.eps,
) -> LossValueWithGrad:
    """Sum over classes of ``(1 - TI_c) ** (1 / gamma)``.

    ``alpha`` weighs false negatives and ``beta`` false positives. With
    ``alpha == beta == 0.5`` and ``gamma == 1`` each term equals soft Dice.
    """
    require_same_shape(pred, gt, "focal tversky")
    p = _flat_classes(float_work(pred))
    y = _flat_classes(float_work(gt))
    tp = np.sum(p * y, axis=0)
    fn = np.sum((1.0 - p) * y, axis=0)
    fp = np.sum(p * (1.0 - y), axis=0)
    num = tp + eps
    den = tp + alpha * fn + beta * fp + eps
    ti = num / den
    slack = np.maximum(1.0 - ti, 0.0)
    value = float(np.sum(slack ** (1.0 / gamma)))
    # d slack^(1/g) / d slack is unbounded at slack == 0; treat it as flat there
    live = slack > 0.0
    outer = np.where(live, np.where(live, slack, 1.0) ** (1.0 / gamma - 1.0) / gamma, 0.0)
    d_num = y
    d_den = y - alpha * y + beta * (1.0 - y)
    d_ti = (d_num * den - num * d_den) / den**2
    grad = -outer * d_ti
    return LossValueWithGrad(value, grad_like(grad.reshape(pred.shape), pred))


def mse_loss(pred: np.ndarray, gt: np.ndarray) -> LossValueWithGrad:
    require_same_shape(pred, gt, "mse")
    diff = float_work(pred) - float_work(gt)
    n = diff.size
    return LossValueWithGrad(float(np.sum(diff**2)) / n, grad_like(2.0 * diff / n, pred))


def weighted_mse_loss(
    pred: np.ndarray, gt: np.ndarray, weight: np.ndarray
) -> LossValueWithGrad:
    """Per-pixel weighted squared error on ``(..., K)`` maps, mean over K.

    ``weight`` has the leading shape of ``pred``. Zero total weight gives a
    zero loss.
    """
    require_same_shape(pred, gt, "weighted mse")
    if weight.shape != pred.shape[:-1]:
        raise ShapeMismatch(f"weight {weight.shape} does not match {pred.shape[:-1]}")
    diff = float_work(pred) - float_work(gt)
    w = float_work(weight)[..., None]
    k = pred.shape[-1]
    norm = float(np.sum(w)) * k
    if norm == 0.0:
        return LossValueWithGrad(0.0, grad_like(np.zeros_like(diff), pred))
    value = float(np.sum(w * diff**2)) / norm
    return LossValueWithGrad(value, grad_like(2.0 * w * diff / norm, pred))


def msge_loss(pred: np.ndarray, gt: np.ndarray, focus: np.ndarray) -> LossValueWithGrad:
    """Squared Sobel-gradient error on the two distance maps inside ``focus``.

    Channel 0 is differentiated horizontally and channel 1 vertically; the two
    masked means are added. An empty mask gives a zero loss and gradient.
    """
    require_same_shape(pred, gt, "msge")
    if pred.ndim != 3 or pred.shape[-1] != 2:
        raise ShapeMismatch(f"distance maps must be (H, W, 2), got {pred.shape}")
    if focus.shape != pred.shape[:2]:
        raise ShapeMismatch(f"focus mask {focus.shape} does not match {pred.shape[:2]}")
    mask = np.asarray(focus, dtype=bool)
    m = int(mask.sum())
    if m == 0:
        return LossValueWithGrad(0.0, grad_like(np.zeros(pred.shape), pred))
    p = float_work(pred)
    g = float_work(gt)
    d_h = np.where(mask, sobel_h(p[..., 0]) - sobel_h(g[..., 0]), 0.0)
    d_v = np.where(mask, sobel_v(p[..., 1]) - sobel_v(g[..., 1]), 0.0)
    value = float(np.sum(d_h**2) + np.sum(d_v**2)) / m
    grad = np.stack(
        [sobel_h_adjoint(2.0 * d_h / m), sobel_v_adjoint(2.0 * d_v / m)], axis=-1
    )
    return LossValueWithGrad(value, grad_like(grad, pred))


def tissue_ce_loss(logits: np.ndarray, class_id: int) -> LossValueWithGrad:
    """Cross-entropy of a single logit vector against one class."""
    if logits.ndim != 1:
        raise ShapeMismatch(f"logits must be a vector, got {logits.shape}")
    if not 0 <= class_id < logits.shape[0]:
        raise IndexOutOfRange(f"class {class_id} outside [0, {logits.shape[0]})")
    z = float_work(logits)
    shifted = z - z.max()
    lse = float(np.log(np.sum(np.exp(shifted))))
    value = lse - float(shifted[class_id])
    grad = np.exp(shifted - lse)
    grad[class_id] -= 1.0
    return LossValueWithGrad(value, grad_like(grad, logits))


__all__ = [
    "LossValueWithGrad",
    "bce_loss",
    "binary_bce_loss",
    "dice_loss",
    "focal_tversky_loss",
    "msge_loss",
    "mse_loss",
    "tissue_ce_loss",
    "weighted_mse_loss",
]
