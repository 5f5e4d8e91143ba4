from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from engine.lib.config import LossDefaults
from engine.lib.errors import ConfigError, ShapeMismatch
from engine.m01_model.bundle import PredictionBundle
from engine.m02_losses.primitives import (
    LossValueWithGrad,
    bce_loss,
    binary_bce_loss,
    dice_loss,
    focal_tversky_loss,
    msge_loss,
    mse_loss,
    tissue_ce_loss,
    weighted_mse_loss,
)

StarVariant = Literal["stardist", "cppnet"]

_DEFAULTS = LossDefaults()


class LossWeights(BaseModel):
    """Coefficients of the composite objective; unit weights unless noted.

    ``alpha_ft``, ``beta_ft`` and ``gamma_ft`` shape every focal Tversky term and
    ``epsilon`` smooths both the Tversky and the Dice ratios.
    """

    model_config = ConfigDict(frozen=True)

    np_ft: float = 1.0
    np_dice: float = 1.0
    hv_mse: float = 2.5
    hv_msge: float = 8.0
    nt_ft: float = 0.5
    nt_dice: float = 0.2
    nt_bce: float = 0.5
    tc_ce: float = 0.1
    alpha_ft: float = _DEFAULTS.alpha
    beta_ft: float = _DEFAULTS.beta
    gamma_ft: float = _DEFAULTS.gamma
    epsilon: float = _DEFAULTS.eps

    @field_validator("*")
    @classmethod
    def _non_negative(cls, v: float) -> float:
        if v < 0.0:
            raise ValueError("loss weights must be non-negative")
        return v

    @field_validator("gamma_ft", "epsilon")
    @classmethod
    def _positive(cls, v: float) -> float:
        if v <= 0.0:
            raise ValueError("gamma_ft and epsilon must be positive")
        return v

    def focal_tversky(self, pred: np.ndarray, gt: np.ndarray) -> LossValueWithGrad:
        return focal_tversky_loss(
            pred, gt, alpha=self.alpha_ft, beta=self.beta_ft, gamma=self.gamma_ft, eps=self.epsilon
        )

    def dice(self, pred: np.ndarray, gt: np.ndarray) -> LossValueWithGrad:
        return dice_loss(pred, gt, eps=self.epsilon)


@dataclass(frozen=True)
class HoverNetTargets:
    """Ground truth for the NP/HV/NT/TC objective.

    ``np_onehot`` is ``(H, W, 2)`` background/foreground, ``hv`` the two
    distance maps, ``nt_onehot`` ``(H, W, C)`` and ``tissue`` a class index.
    The foreground channel doubles as the gradient-loss focus mask.
    """

    np_onehot: np.ndarray
    hv: np.ndarray
    nt_onehot: np.ndarray
    tissue: int


@dataclass(frozen=True)
class StarTargets:
    pd: np.ndarray
    rd: np.ndarray
    nt_onehot: np.ndarray


@dataclass(frozen=True)
class StarPredictions:
    pd: np.ndarray
    rd: np.ndarray
    nt: np.ndarray


@dataclass(frozen=True)
class CompositeLoss:
    """Total value plus one gradient per prediction tensor."""

    value: float
    grads: dict[str, np.ndarray]
    terms: dict[str, float]


def _accumulate(
    terms: list[tuple[str, str, float, Callable[[], LossValueWithGrad]]],
    shapes: dict[str, tuple[int, ...]],
) -> CompositeLoss:
    grads = {key: np.zeros(shape, dtype=np.float64) for key, shape in shapes.items()}
    values: dict[str, float] = {}
    total = 0.0
    for label, key, weight, fn in terms:
        if weight == 0.0:
            continue
        res = fn()
        values[label] = res.value
        total += weight * res.value
        grads[key] = grads[key] + weight * np.asarray(res.grad, dtype=np.float64)
    return CompositeLoss(value=total, grads=grads, terms=values)


def total_loss_hovernet_grad(
    bundle: PredictionBundle, gt: HoverNetTargets, weights: LossWeights | None = None
) -> CompositeLoss:
    lw = weights or LossWeights()
    if bundle.np_map.shape != gt.np_onehot.shape or bundle.nt_map.shape != gt.nt_onehot.shape:
        raise ShapeMismatch("prediction and target maps differ in shape")
    focus = gt.np_onehot[..., 1] > 0.5
    terms: list[tuple[str, str, float, Callable[[], LossValueWithGrad]]] = [
        ("np_ft", "np", lw.np_ft, lambda: lw.focal_tversky(bundle.np_map, gt.np_onehot)),
        ("np_dice", "np", lw.np_dice, lambda: lw.dice(bundle.np_map, gt.np_onehot)),
        ("hv_mse", "hv", lw.hv_mse, lambda: mse_loss(bundle.hv_map, gt.hv)),
        ("hv_msge", "hv", lw.hv_msge, lambda: msge_loss(bundle.hv_map, gt.hv, focus)),
        ("nt_ft", "nt", lw.nt_ft, lambda: lw.focal_tversky(bundle.nt_map, gt.nt_onehot)),
        ("nt_dice", "nt", lw.nt_dice, lambda: lw.dice(bundle.nt_map, gt.nt_onehot)),
        ("nt_bce", "nt", lw.nt_bce, lambda: bce_loss(bundle.nt_map, gt.nt_onehot)),
        ("tc_ce", "tc", lw.tc_ce, lambda: tissue_ce_loss(bundle.tissue_logits, gt.tissue)),
    ]
    shapes = {
        "np": bundle.np_map.shape,
        "hv": bundle.hv_map.shape,
        "nt": bundle.nt_map.shape,
        "tc": bundle.tissue_logits.shape,
    }
    return _accumulate(terms, shapes)


def total_loss_hovernet(
    bundle: PredictionBundle, gt: HoverNetTargets, weights: LossWeights | None = None
) -> float:
    return total_loss_hovernet_grad(bundle, gt, weights).value


def total_loss_stardist_grad(
    pred: StarPredictions,
    gt: StarTargets,
    variant: StarVariant = "stardist",
    weights: LossWeights | None = None,
) -> CompositeLoss:
    """Object-probability BCE, probability-weighted distance MSE and a type loss.

    ``stardist`` uses Dice + BCE on the type map, ``cppnet`` uses
    0.5 FT + 0.2 Dice + 0.5 BCE. Only the shape parameters of ``weights`` apply
    here, the term coefficients are fixed per variant.
    """
    lw = weights or LossWeights()
    if pred.rd.shape != gt.rd.shape or pred.pd.shape != gt.pd.shape:
        raise ShapeMismatch("star prediction and target maps differ in shape")
    terms: list[tuple[str, str, float, Callable[[], LossValueWithGrad]]] = [
        ("pd_bce", "pd", 1.0, lambda: binary_bce_loss(pred.pd, gt.pd)),
        ("rd_mse", "rd", 1.0, lambda: weighted_mse_loss(pred.rd, gt.rd, gt.pd)),
    ]
    if variant == "stardist":
        terms += [
            ("nt_dice", "nt", 1.0, lambda: lw.dice(pred.nt, gt.nt_onehot)),
            ("nt_bce", "nt", 1.0, lambda: bce_loss(pred.nt, gt.nt_onehot)),
        ]
    elif variant == "cppnet":
        terms += [
            ("nt_ft", "nt", 0.5, lambda: lw.focal_tversky(pred.nt, gt.nt_onehot)),
            ("nt_dice", "nt", 0.2, lambda: lw.dice(pred.nt, gt.nt_onehot)),
            ("nt_bce", "nt", 0.5, lambda: bce_loss(pred.nt, gt.nt_onehot)),
        ]
    else:
        raise ConfigError(f"unknown star variant {variant!r}")
    shapes = {"pd": pred.pd.shape, "rd": pred.rd.shape, "nt": pred.nt.shape}
    return _accumulate(terms, shapes)


def total_loss_stardist(
    pred: StarPredictions,
    gt: StarTargets,
    variant: StarVariant = "stardist",
    weights: LossWeights | None = None,
) -> float:
    return total_loss_stardist_grad(pred, gt, variant, weights).value


__all__ = [
    "CompositeLoss",
    "HoverNetTargets",
    "LossWeights",
    "StarPredictions",
    "StarTargets",
    "StarVariant",
    "total_loss_hovernet",
    "total_loss_hovernet_grad",
    "total_loss_stardist",
    "total_loss_stardist_grad",
]
