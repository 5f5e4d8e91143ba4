"""Loss values on hand-computable inputs and the composite objectives."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from engine.lib.errors import DomainError, IndexOutOfRange, ShapeMismatch
from engine.lib.rng import seed_for
from engine.lib.sobel import KERNEL_H, SOBEL_GAIN
from engine.m01_model.bundle import PredictionBundle
from engine.m02_losses import (
    HoverNetTargets,
    LossWeights,
    StarPredictions,
    StarTargets,
    StarVariant,
    bce_loss,
    binary_bce_loss,
    dice_loss,
    focal_tversky_loss,
    msge_loss,
    mse_loss,
    tissue_ce_loss,
    total_loss_hovernet,
    total_loss_hovernet_grad,
    total_loss_stardist,
    weighted_mse_loss,
)


def _onehot(labels: np.ndarray, c: int) -> np.ndarray:
    return np.eye(c)[labels]


def _scalar_sobel_h(x: np.ndarray) -> np.ndarray:
    h, w = x.shape
    out = np.zeros_like(x, dtype=np.float64)
    for r in range(h):
        for c in range(w):
            acc = 0.0
            for a in range(3):
                for b in range(3):
                    rr = min(max(r + a - 1, 0), h - 1)
                    cc = min(max(c + b - 1, 0), w - 1)
                    acc += KERNEL_H[a, b] * x[rr, cc]
            out[r, c] = acc
    return out


class TestCrossEntropy:
    def test_perfect_onehot_is_zero(self) -> None:
        gt = _onehot(np.array([[0, 1], [2, 1]]), 3)
        assert bce_loss(gt.copy(), gt).value == pytest.approx(0.0, abs=1e-12)

    def test_zero_probability_on_target(self) -> None:
        gt = _onehot(np.array([0, 1]), 2)
        pred = np.array([[0.0, 1.0], [0.5, 0.5]])
        with pytest.raises(DomainError):
            bce_loss(pred, gt)

    def test_shape_mismatch(self) -> None:
        with pytest.raises(ShapeMismatch):
            bce_loss(np.full((2, 2), 0.5), np.ones((2, 3)))

    def test_uniform_prediction(self) -> None:
        gt = _onehot(np.array([0, 1, 2, 3]), 4)
        assert bce_loss(np.full((4, 4), 0.25), gt).value == pytest.approx(math.log(4))

    def test_binary_perfect_and_domain(self) -> None:
        gt = np.array([[1.0, 0.0], [0.0, 1.0]])
        assert binary_bce_loss(gt.copy(), gt).value == pytest.approx(0.0, abs=1e-12)
        with pytest.raises(DomainError):
            binary_bce_loss(np.array([1.0, 0.5]), np.array([0.0, 1.0]))


class TestDice:
    def test_identical_binary_mask(self) -> None:
        mask = (seed_for(3, "dice").random((8, 8, 1)) < 0.5).astype(np.float64)
        assert dice_loss(mask.copy(), mask).value == pytest.approx(0.0, abs=1e-12)

    def test_empty_prediction(self) -> None:
        gt = np.zeros((4, 4, 1))
        gt[:2, :2] = 1.0
        eps = 1e-6
        assert dice_loss(np.zeros_like(gt), gt, eps=eps).value == pytest.approx(
            1.0 - eps / (4.0 + eps)
        )


class TestFocalTversky:
    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=10_000))
    def test_reduces_to_dice(self, seed: int) -> None:
        rng = seed_for(seed, "ft")
        gt = (rng.random((5, 6, 3)) < 0.5).astype(np.float64)
        pred = rng.uniform(0.01, 0.99, size=gt.shape)
        ft = focal_tversky_loss(pred, gt, alpha=0.5, beta=0.5, gamma=1.0, eps=1e-9)
        dice = dice_loss(pred, gt, eps=1e-9)
        assert ft.value == pytest.approx(dice.value, abs=1e-6)

    def test_perfect_prediction(self) -> None:
        gt = _onehot(np.array([[0, 1, 1], [1, 0, 0]]), 2)
        res = focal_tversky_loss(gt.copy(), gt)
        assert res.value == pytest.approx(0.0, abs=1e-9)
        assert np.all(np.isfinite(res.grad))


class TestDistanceMapLosses:
    def test_mse_example(self) -> None:
        pred = np.zeros((2, 2, 2))
        gt = np.zeros((2, 2, 2))
        gt[0, 0, 0] = 1.0
        assert mse_loss(pred, gt).value == pytest.approx(1.0 / 8.0)

    def test_msge_constant_maps(self) -> None:
        pred = np.full((6, 7, 2), 0.3)
        gt = np.full((6, 7, 2), -0.8)
        mask = seed_for(1, "m").random((6, 7)) < 0.5
        mask[0, 0] = True
        res = msge_loss(pred, gt, mask)
        assert res.value == pytest.approx(0.0, abs=1e-12)
        assert np.allclose(res.grad, 0.0)

    def test_msge_ramp_interior(self) -> None:
        slope = 0.1
        h, w = 6, 8
        pred = np.zeros((h, w, 2))
        pred[..., 0] = slope * np.arange(w)[None, :]
        gt = np.zeros_like(pred)
        mask = np.zeros((h, w), dtype=bool)
        mask[:, 1:-1] = True
        expected = (SOBEL_GAIN * slope) ** 2
        assert msge_loss(pred, gt, mask).value == pytest.approx(expected)

    def test_msge_matches_scalar_sobel(self) -> None:
        rng = seed_for(4, "msge")
        pred = rng.uniform(-1, 1, size=(5, 6, 2))
        gt = np.zeros_like(pred)
        gt[..., 1] = pred[..., 1]
        mask = np.ones((5, 6), dtype=bool)
        expected = float(np.mean(_scalar_sobel_h(pred[..., 0]) ** 2))
        assert msge_loss(pred, gt, mask).value == pytest.approx(expected)

    def test_msge_empty_mask_is_zero(self) -> None:
        res = msge_loss(np.ones((3, 3, 2)), np.zeros((3, 3, 2)), np.zeros((3, 3), dtype=bool))
        assert res.value == 0.0
        assert not res.grad.any()

    def test_weighted_mse_zero_weight(self) -> None:
        res = weighted_mse_loss(np.ones((2, 2, 4)), np.zeros((2, 2, 4)), np.zeros((2, 2)))
        assert res.value == 0.0

    def test_weighted_mse_weights_pixels(self) -> None:
        pred = np.zeros((1, 2, 2))
        gt = np.zeros((1, 2, 2))
        gt[0, 1] = 2.0
        weight = np.array([[3.0, 1.0]])
        assert weighted_mse_loss(pred, gt, weight).value == pytest.approx(4.0 / 4.0)


class TestTissueCE:
    def test_uniform_logits(self) -> None:
        assert tissue_ce_loss(np.zeros(19), 4).value == pytest.approx(math.log(19))

    def test_index_out_of_range(self) -> None:
        with pytest.raises(IndexOutOfRange):
            tissue_ce_loss(np.zeros(19), 19)


class TestComposites:
    def _perfect_hovernet(self) -> tuple[PredictionBundle, HoverNetTargets]:
        rng = seed_for(11, "hv")
        labels = rng.integers(0, 2, size=(8, 8))
        np_onehot = _onehot(labels, 2)
        hv = rng.uniform(-1, 1, size=(8, 8, 2))
        nt = _onehot(labels * rng.integers(1, 4, size=(8, 8)), 4)
        logits = np.zeros(19)
        logits[7] = 60.0
        bundle = PredictionBundle(
            np_map=np_onehot.copy(),
            hv_map=hv.copy(),
            nt_map=nt.copy(),
            tissue_logits=logits,
            tokens_final=np.zeros((4, 2)),
        )
        return bundle, HoverNetTargets(np_onehot=np_onehot, hv=hv, nt_onehot=nt, tissue=7)

    def test_hovernet_perfect_is_near_zero(self) -> None:
        bundle, gt = self._perfect_hovernet()
        assert total_loss_hovernet(bundle, gt) == pytest.approx(0.0, abs=1e-6)

    def test_hovernet_weights_scale_terms(self) -> None:
        bundle, gt = self._perfect_hovernet()
        shifted = PredictionBundle(
            np_map=bundle.np_map,
            hv_map=np.zeros_like(bundle.hv_map),
            nt_map=bundle.nt_map,
            tissue_logits=bundle.tissue_logits,
            tokens_final=bundle.tokens_final,
        )
        res = total_loss_hovernet_grad(shifted, gt, LossWeights())
        expected = 2.5 * res.terms["hv_mse"] + 8.0 * res.terms["hv_msge"]
        assert res.value == pytest.approx(expected, abs=1e-6)
        assert set(res.grads) == {"np", "hv", "nt", "tc"}

    @pytest.mark.parametrize("variant", ["stardist", "cppnet"])
    def test_star_perfect_is_near_zero(self, variant: StarVariant) -> None:
        rng = seed_for(12, "star")
        pd = (rng.random((6, 6)) < 0.5).astype(np.float64)
        rd = rng.uniform(0, 5, size=(6, 6, 8))
        nt = _onehot(rng.integers(0, 3, size=(6, 6)), 3)
        gt = StarTargets(pd=pd, rd=rd, nt_onehot=nt)
        preds = StarPredictions(pd=pd.copy(), rd=rd.copy(), nt=nt.copy())
        assert total_loss_stardist(preds, gt, variant) == pytest.approx(0.0, abs=1e-9)

    def test_loss_weights_reject_negative(self) -> None:
        with pytest.raises(ValueError):
            LossWeights(hv_mse=-1.0)

    def _blurred_hovernet(self) -> tuple[PredictionBundle, HoverNetTargets]:
        bundle, gt = self._perfect_hovernet()
        blurred = PredictionBundle(
            np_map=0.7 * gt.np_onehot + 0.15,
            hv_map=bundle.hv_map,
            nt_map=0.6 * gt.nt_onehot + 0.1,
            tissue_logits=bundle.tissue_logits,
            tokens_final=bundle.tokens_final,
        )
        return blurred, gt

    def test_tversky_shape_reaches_the_total(self) -> None:
        bundle, gt = self._blurred_hovernet()
        tuned = LossWeights(alpha_ft=0.5, beta_ft=0.5, gamma_ft=1.0)
        res = total_loss_hovernet_grad(bundle, gt, tuned)
        assert res.value != pytest.approx(total_loss_hovernet(bundle, gt), rel=1e-6)
        expected = focal_tversky_loss(bundle.np_map, gt.np_onehot, alpha=0.5, beta=0.5, gamma=1.0)
        assert res.terms["np_ft"] == pytest.approx(expected.value, rel=1e-12)
        # balanced Tversky at gamma 1 is soft Dice
        assert res.terms["np_ft"] == pytest.approx(res.terms["np_dice"], rel=1e-4)
        assert res.terms["nt_ft"] == pytest.approx(res.terms["nt_dice"], rel=1e-4)

    def test_default_shape_matches_primitive_defaults(self) -> None:
        bundle, gt = self._blurred_hovernet()
        res = total_loss_hovernet_grad(bundle, gt)
        assert res.terms["nt_ft"] == pytest.approx(
            focal_tversky_loss(bundle.nt_map, gt.nt_onehot).value, rel=1e-12
        )

    def test_epsilon_reaches_dice_terms(self) -> None:
        bundle, gt = self._blurred_hovernet()
        loose = total_loss_hovernet_grad(bundle, gt, LossWeights(epsilon=10.0))
        expected = dice_loss(bundle.np_map, gt.np_onehot, eps=10.0).value
        assert loose.terms["np_dice"] == pytest.approx(expected, rel=1e-12)

    def test_star_cppnet_uses_tversky_shape(self) -> None:
        rng = seed_for(13, "star")
        pd = (rng.random((6, 6)) < 0.5).astype(np.float64)
        rd = rng.uniform(0, 5, size=(6, 6, 8))
        nt = _onehot(rng.integers(0, 3, size=(6, 6)), 3)
        gt = StarTargets(pd=pd, rd=rd, nt_onehot=nt)
        preds = StarPredictions(pd=0.8 * pd + 0.1, rd=rd + 0.5, nt=0.7 * nt + 0.1)
        base = total_loss_stardist(preds, gt, "cppnet")
        tuned = total_loss_stardist(preds, gt, "cppnet", LossWeights(alpha_ft=0.2, beta_ft=0.8))
        assert tuned != pytest.approx(base, rel=1e-6)

    @pytest.mark.parametrize("field", ["epsilon", "gamma_ft"])
    def test_loss_weights_reject_zero_shape(self, field: str) -> None:
        with pytest.raises(ValueError):
            LossWeights(**{field: 0.0})
