"""Segmentation and classification losses with analytic gradients."""

from engine.m02_losses.gradcheck import GradcheckReport, gradcheck_suite
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
from engine.m02_losses.totals import (
    CompositeLoss,
    HoverNetTargets,
    LossWeights,
    StarPredictions,
    StarTargets,
    StarVariant,
    total_loss_hovernet,
    total_loss_hovernet_grad,
    total_loss_stardist,
    total_loss_stardist_grad,
)

__all__ = [
    "CompositeLoss",
    "GradcheckReport",
    "HoverNetTargets",
    "LossValueWithGrad",
    "LossWeights",
    "StarPredictions",
    "StarTargets",
    "StarVariant",
    "bce_loss",
    "binary_bce_loss",
    "dice_loss",
    "focal_tversky_loss",
    "gradcheck_suite",
    "msge_loss",
    "mse_loss",
    "tissue_ce_loss",
    "total_loss_hovernet",
    "total_loss_hovernet_grad",
    "total_loss_stardist",
    "total_loss_stardist_grad",
    "weighted_mse_loss",
]
