"""Central finite-difference check of every analytic loss gradient.

Each case draws a small random tensor (at most 8x8 spatial, 4 channels) from a
generator keyed on ``(seed, loss, case)``. Probabilities are kept at least
1e-3 away from 0 and 1 so perturbations stay inside the loss domain. The
error of a case is ``|a - n| / max(|a|, |n|)`` over a sample of coordinates,
with ``a`` the analytic and ``n`` the numeric gradient.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
import structlog
from pydantic import BaseModel

from engine.lib.rng import seed_for
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
from engine.m02_losses.totals import (
    HoverNetTargets,
    StarPredictions,
    StarTargets,
    StarVariant,
    total_loss_hovernet_grad,
    total_loss_stardist_grad,
)

log = structlog.get_logger(__name__)

TOLERANCE = 1e-4
STEP = 1e-6
COORDS_PER_CASE = 24
_FLOOR = 1e-12

Params = dict[str, np.ndarray]
Objective = Callable[[Params], tuple[float, Params]]


@dataclass(frozen=True)
class _Case:
    params: Params
    objective: Objective


class GradcheckEntry(BaseModel):
    loss: str
    cases: int
    worst_rel_error: float
    worst_case: int
    passed: bool


class GradcheckReport(BaseModel):
    seed: int
    n_cases: int
    tolerance: float
    entries: list[GradcheckEntry]

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)


def _probs(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    logits = rng.uniform(-2.0, 2.0, size=shape)
    e = np.exp(logits - logits.max(axis=-1, keepdims=True))
    soft = e / e.sum(axis=-1, keepdims=True)
    c = shape[-1]
    return 0.9 * soft + 0.1 / c


def _onehot(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    labels = rng.integers(0, shape[-1], size=shape[:-1])
    return np.eye(shape[-1])[labels]


def _spatial(rng: np.random.Generator) -> tuple[int, int]:
    return int(rng.integers(2, 9)), int(rng.integers(2, 9))


def _single(fn: Callable[[np.ndarray], LossValueWithGrad]) -> Objective:
    def objective(params: Params) -> tuple[float, Params]:
        res = fn(params["x"])
        return res.value, {"x": np.asarray(res.grad, dtype=np.float64)}

    return objective


def _case_bce(rng: np.random.Generator) -> _Case:
    shape = (*_spatial(rng), int(rng.integers(2, 5)))
    gt = _onehot(rng, shape)
    return _Case({"x": _probs(rng, shape)}, _single(lambda x: bce_loss(x, gt)))


def _case_dice(rng: np.random.Generator) -> _Case:
    shape = (*_spatial(rng), int(rng.integers(1, 5)))
    gt = (rng.random(shape) < 0.4).astype(np.float64)
    pred = rng.uniform(1e-3, 1.0 - 1e-3, size=shape)
    return _Case({"x": pred}, _single(lambda x: dice_loss(x, gt)))


def _case_focal_tversky(rng: np.random.Generator) -> _Case:
    shape = (*_spatial(rng), int(rng.integers(1, 5)))
    gt = (rng.random(shape) < 0.5).astype(np.float64)
    pred = rng.uniform(1e-3, 1.0 - 1e-3, size=shape)
    return _Case({"x": pred}, _single(lambda x: focal_tversky_loss(x, gt)))


def _case_binary_bce(rng: np.random.Generator) -> _Case:
    shape = _spatial(rng)
    gt = (rng.random(shape) < 0.5).astype(np.float64)
    pred = rng.uniform(0.02, 0.98, size=shape)
    return _Case({"x": pred}, _single(lambda x: binary_bce_loss(x, gt)))


def _case_mse(rng: np.random.Generator) -> _Case:
    shape = (*_spatial(rng), 2)
    gt = rng.uniform(-1.0, 1.0, size=shape)
    return _Case({"x": rng.uniform(-1.0, 1.0, size=shape)}, _single(lambda x: mse_loss(x, gt)))


def _case_msge(rng: np.random.Generator) -> _Case:
    shape = (*_spatial(rng), 2)
    gt = rng.uniform(-1.0, 1.0, size=shape)
    focus = rng.random(shape[:2]) < 0.6
    focus.flat[int(rng.integers(0, focus.size))] = True
    pred = rng.uniform(-1.0, 1.0, size=shape)
    return _Case({"x": pred}, _single(lambda x: msge_loss(x, gt, focus)))


def _case_weighted_mse(rng: np.random.Generator) -> _Case:
    shape = (*_spatial(rng), int(rng.integers(1, 5)))
    gt = rng.uniform(0.0, 5.0, size=shape)
    weight = rng.uniform(0.0, 1.0, size=shape[:-1])
    pred = rng.uniform(0.0, 5.0, size=shape)
    return _Case({"x": pred}, _single(lambda x: weighted_mse_loss(x, gt, weight)))


def _case_tissue_ce(rng: np.random.Generator) -> _Case:
    t = int(rng.integers(2, 20))
    cls = int(rng.integers(0, t))
    logits = rng.normal(size=t)
    return _Case({"x": logits}, _single(lambda x: tissue_ce_loss(x, cls)))


def _case_hovernet_total(rng: np.random.Generator) -> _Case:
    h, w = _spatial(rng)
    c = int(rng.integers(2, 5))
    t = int(rng.integers(2, 6))
    gt = HoverNetTargets(
        np_onehot=_onehot(rng, (h, w, 2)),
        hv=rng.uniform(-1.0, 1.0, size=(h, w, 2)),
        nt_onehot=_onehot(rng, (h, w, c)),
        tissue=int(rng.integers(0, t)),
    )
    params = {
        "np": _probs(rng, (h, w, 2)),
        "hv": rng.uniform(-1.0, 1.0, size=(h, w, 2)),
        "nt": _probs(rng, (h, w, c)),
        "tc": rng.normal(size=t),
    }

    def objective(p: Params) -> tuple[float, Params]:
        bundle = PredictionBundle(
            np_map=p["np"],
            hv_map=p["hv"],
            nt_map=p["nt"],
            tissue_logits=p["tc"],
            tokens_final=np.zeros((1, 1)),
        )
        res = total_loss_hovernet_grad(bundle, gt)
        return res.value, res.grads

    return _Case(params, objective)


def _star_case(variant: StarVariant) -> Callable[[np.random.Generator], _Case]:
    def build(rng: np.random.Generator) -> _Case:
        h, w = _spatial(rng)
        k = int(rng.integers(3, 6))
        c = int(rng.integers(2, 5))
        gt = StarTargets(
            pd=(rng.random((h, w)) < 0.5).astype(np.float64),
            rd=rng.uniform(0.0, 4.0, size=(h, w, k)),
            nt_onehot=_onehot(rng, (h, w, c)),
        )
        params = {
            "pd": rng.uniform(0.02, 0.98, size=(h, w)),
            "rd": rng.uniform(0.0, 4.0, size=(h, w, k)),
            "nt": _probs(rng, (h, w, c)),
        }

        def objective(p: Params) -> tuple[float, Params]:
            preds = StarPredictions(pd=p["pd"], rd=p["rd"], nt=p["nt"])
            res = total_loss_stardist_grad(preds, gt, variant)
            return res.value, res.grads

        return _Case(params, objective)

    return build


CASES: dict[str, Callable[[np.random.Generator], _Case]] = {
    "bce": _case_bce,
    "binary_bce": _case_binary_bce,
    "dice": _case_dice,
    "focal_tversky": _case_focal_tversky,
    "mse_hv": _case_mse,
    "msge_hv": _case_msge,
    "weighted_mse": _case_weighted_mse,
    "tissue_ce": _case_tissue_ce,
    "total_hovernet": _case_hovernet_total,
    "total_stardist": _star_case("stardist"),
    "total_cppnet": _star_case("cppnet"),
}


def _check_case(case: _Case, rng: np.random.Generator, perturb_analytic: bool) -> float:
    _, analytic = case.objective(case.params)
    if perturb_analytic:
        analytic = {k: v * 1.01 + 1e-3 for k, v in analytic.items()}
    coords = [
        (key, idx)
        for key, arr in case.params.items()
        for idx in np.ndindex(*arr.shape)
    ]
    pick = rng.choice(len(coords), size=min(COORDS_PER_CASE, len(coords)), replace=False)
    a = np.empty(len(pick))
    n = np.empty(len(pick))
    for slot, pos in enumerate(sorted(int(i) for i in pick)):
        key, idx = coords[pos]
        shifted = {k: v.copy() for k, v in case.params.items()}
        base = shifted[key][idx]
        shifted[key][idx] = base + STEP
        up, _ = case.objective(shifted)
        shifted[key][idx] = base - STEP
        down, _ = case.objective(shifted)
        n[slot] = (up - down) / (2.0 * STEP)
        a[slot] = analytic[key][idx]
    scale = max(float(np.linalg.norm(a)), float(np.linalg.norm(n)), _FLOOR)
    return float(np.linalg.norm(a - n)) / scale


def gradcheck_suite(
    seed: int,
    n_cases: int = 50,
    *,
    perturb_analytic: bool = False,
    losses: list[str] | None = None,
) -> GradcheckReport:
    """Check every loss on ``n_cases`` random inputs and report the worst error."""
    entries: list[GradcheckEntry] = []
    for name in losses or list(CASES):
        worst, worst_case = 0.0, 0
        for k in range(n_cases):
            rng = seed_for(seed, "gradcheck", name, k)
            err = _check_case(CASES[name](rng), rng, perturb_analytic)
            if err > worst:
                worst, worst_case = err, k
        entry = GradcheckEntry(
            loss=name,
            cases=n_cases,
            worst_rel_error=worst,
            worst_case=worst_case,
            passed=worst < TOLERANCE,
        )
        log.debug("gradcheck_loss", loss=name, worst=worst, passed=entry.passed)
        entries.append(entry)
    return GradcheckReport(seed=seed, n_cases=n_cases, tolerance=TOLERANCE, entries=entries)


__all__ = ["CASES", "GradcheckEntry", "GradcheckReport", "TOLERANCE", "gradcheck_suite"]
