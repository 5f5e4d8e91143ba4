from __future__ import annotations

from pydantic import BaseModel, ConfigDict, field_validator

from engine.lib.config import PostprocDefaults

_D = PostprocDefaults()


class HoverNetParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    np_thresh: float = _D.np_thresh
    edge_thresh: float = _D.edge_thresh
    min_marker_px: int = _D.min_marker_px
    min_instance_px: int = _D.min_instance_px
    unknown_class: int = _D.unknown_class

    @field_validator("np_thresh", "edge_thresh")
    @classmethod
    def _unit(cls, v: float) -> float:
        if not 0.0 <= v <= 1.0:
            raise ValueError("thresholds must lie in [0, 1]")
        return v

    @field_validator("min_marker_px", "min_instance_px")
    @classmethod
    def _sizes(cls, v: int) -> int:
        if v < 0:
            raise ValueError("minimum sizes must be non-negative")
        return v


class StarParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    prob_thresh: float = _D.prob_thresh
    nms_thresh: float = _D.nms_thresh
    n_rays: int = _D.n_rays
    unknown_class: int = _D.unknown_class

    @field_validator("prob_thresh", "nms_thresh")
    @classmethod
    def _unit(cls, v: float) -> float:
        if not 0.0 <= v <= 1.0:
            raise ValueError("thresholds must lie in [0, 1]")
        return v

    @field_validator("n_rays")
    @classmethod
    def _rays(cls, v: int) -> int:
        if v < 3:
            raise ValueError("n_rays must be >= 3")
        return v


__all__ = ["HoverNetParams", "StarParams"]
