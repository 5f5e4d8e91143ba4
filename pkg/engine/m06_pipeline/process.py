"""One tile from pixels to nucleus records."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Literal

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field

from engine.lib.contracts import Predictor
from engine.lib.errors import ConfigError
from engine.m01_model.bundle import PredictionBundle
from engine.m04_postproc.hovernet import hovernet_separate, majority_vote_types
from engine.m04_postproc.params import HoverNetParams, StarParams
from engine.m04_postproc.records import extract_records
from engine.m04_postproc.star import cppnet_nms, star_candidates_from_maps, stardist_nms
from engine.m04_postproc.types import InstanceMap, NucleusRecord
from engine.m06_pipeline.embeddings import associate_embeddings

log = structlog.get_logger(__name__)

Mode = Literal["hovernet", "stardist", "cppnet"]

# padding value for tiles that do not tile into whole tokens: bright glass
PAD_VALUE = 1.0


class PostprocSettings(BaseModel):
    model_config = ConfigDict(frozen=True)

    mode: Mode = "hovernet"
    hovernet: HoverNetParams = Field(default_factory=HoverNetParams)
    star: StarParams = Field(default_factory=StarParams)


@dataclass(frozen=True)
class TileResult:
    """Instances and records of one tile in tile-local coordinates."""

    inst: InstanceMap
    records: tuple[NucleusRecord, ...]
    tokens_final: np.ndarray


def separate(bundle: PredictionBundle, settings: PostprocSettings) -> InstanceMap:
    """Instance map for the configured postprocessing mode, types assigned."""
    if settings.mode == "hovernet":
        inst = hovernet_separate(bundle, settings.hovernet)
    else:
        if bundle.pd_map is None or bundle.rd_map is None:
            raise ConfigError(f"mode {settings.mode!r} needs object probability and ray maps")
        p = settings.star
        if settings.mode == "cppnet":
            if bundle.rd_refined is None:
                raise ConfigError("mode 'cppnet' needs refined ray distances")
            polys = star_candidates_from_maps(
                bundle.pd_map, bundle.rd_map, p.prob_thresh, refined=bundle.rd_refined
            )
            inst = cppnet_nms(polys, p.prob_thresh, p.nms_thresh)
        else:
            polys = star_candidates_from_maps(bundle.pd_map, bundle.rd_map, p.prob_thresh)
            inst = stardist_nms(polys, p.prob_thresh, p.nms_thresh)
    return majority_vote_types(inst, bundle.nt_map, _unknown(settings))


def process_bundle(
    bundle: PredictionBundle,
    settings: PostprocSettings,
    token_size: int,
    include_embeddings: bool = True,
    token_pad: tuple[int, int] = (0, 0),
) -> TileResult:
    """Postprocess dense outputs; ``token_pad`` is how far the token grid extends past the maps."""
    inst = separate(bundle, settings)
    records = extract_records(inst, _unknown(settings))
    if include_embeddings and records and bundle.tokens_final.size:
        grid = InstanceMap(labels=np.pad(inst.labels, ((0, token_pad[0]), (0, token_pad[1]))))
        emb = associate_embeddings(grid, bundle.tokens_final, token_size)
        records = [replace(r, embedding=emb.get(r.id)) for r in records]
    return TileResult(inst=inst, records=tuple(records), tokens_final=bundle.tokens_final)


def _unknown(settings: PostprocSettings) -> int:
    if settings.mode == "hovernet":
        return settings.hovernet.unknown_class
    return settings.star.unknown_class


def _crop(bundle: PredictionBundle, h: int, w: int) -> PredictionBundle:
    def cut(a: np.ndarray | None) -> np.ndarray | None:
        return None if a is None else a[:h, :w]

    return replace(
        bundle,
        np_map=bundle.np_map[:h, :w],
        hv_map=bundle.hv_map[:h, :w],
        nt_map=bundle.nt_map[:h, :w],
        pd_map=cut(bundle.pd_map),
        rd_map=cut(bundle.rd_map),
        rd_refined=cut(bundle.rd_refined),
    )


def process_tile(
    tile: np.ndarray,
    predictor: Predictor,
    settings: PostprocSettings | None = None,
    include_embeddings: bool = True,
) -> TileResult:
    """Predict, separate, type and describe the nuclei of one ``(H, W, C)`` tile.

    Tiles whose sides are not whole tokens are padded on the bottom and right
    with :data:`PAD_VALUE`; maps are cropped back before postprocessing and
    embeddings are looked up on the padded token grid.
    """
    s = settings or PostprocSettings()
    h, w = tile.shape[:2]
    p = predictor.token_size
    pad_h, pad_w = (-h) % p, (-w) % p
    if pad_h or pad_w:
        padded = np.pad(
            tile, ((0, pad_h), (0, pad_w), (0, 0)), mode="constant", constant_values=PAD_VALUE
        )
        bundle = _crop(predictor.predict(padded), h, w)
    else:
        bundle = predictor.predict(tile)
    out = process_bundle(bundle, s, p, include_embeddings, token_pad=(pad_h, pad_w))
    log.debug("tile_processed", height=h, width=w, nuclei=len(out.records), mode=s.mode)
    return out


__all__ = [
    "Mode",
    "PAD_VALUE",
    "PostprocSettings",
    "TileResult",
    "process_bundle",
    "process_tile",
    "separate",
]
