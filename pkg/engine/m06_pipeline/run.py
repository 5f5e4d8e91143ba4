"""Whole-slide inference: plan, process tiles on a pool, merge."""

from __future__ import annotations

import time
from collections.abc import Callable

import structlog
from pydantic import BaseModel, ConfigDict, Field

from engine.lib.config import TilingDefaults
from engine.lib.contracts import Predictor, TileSource
from engine.lib.errors import TileFailure
from engine.lib.result import Err
from engine.m04_postproc.params import HoverNetParams, StarParams
from engine.m06_pipeline.merge import TileOutput, WsiResult, merge_tiles
from engine.m06_pipeline.process import Mode, PostprocSettings, process_tile
from engine.m06_pipeline.tiles import TileGrid, plan_tiles
from engine.workers.tile_pool import TilePool

log = structlog.get_logger(__name__)

_T = TilingDefaults()


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    tile_size: int = Field(default=_T.tile_size, gt=0)
    overlap: int = Field(default=_T.overlap, ge=0)
    merge_iou: float = Field(default=_T.merge_iou, ge=0.0, le=1.0)
    mode: Mode = "hovernet"
    hovernet: HoverNetParams = Field(default_factory=HoverNetParams)
    star: StarParams = Field(default_factory=StarParams)
    workers: int = Field(default=1, ge=1)
    in_flight_per_worker: int = Field(default=_T.in_flight_per_worker, ge=1)
    include_embeddings: bool = True
    model: str = "cellvit"

    @property
    def postproc(self) -> PostprocSettings:
        return PostprocSettings(mode=self.mode, hovernet=self.hovernet, star=self.star)

    def snapshot(self) -> dict[str, object]:
        return self.model_dump(mode="json")


def _tile_job(
    source: TileSource,
    predictor: Predictor,
    grid: TileGrid,
    config: RunConfig,
) -> Callable[[int], TileOutput]:
    settings = config.postproc

    def job(index: int) -> TileOutput:
        r0, c0, r1, c1 = grid.box(index)
        tile = source.read_region(r0, c0, r1 - r0, c1 - c0)
        result = process_tile(tile, predictor, settings, config.include_embeddings)
        return TileOutput(
            index=index,
            origin=(r0, c0),
            height=r1 - r0,
            width=c1 - c0,
            records=result.records,
        )

    return job


def run_wsi(
    source: TileSource, predictor: Predictor, config: RunConfig | None = None
) -> WsiResult:
    """Segment a whole slide tile by tile.

    Tiles run on a bounded pool and only their records are kept, never their
    dense maps. The first failing tile in raster order aborts the run with a
    :class:`TileFailure` naming its origin.
    """
    cfg = config or RunConfig()
    grid = plan_tiles(source.width, source.height, cfg.tile_size, cfg.overlap)
    log.info(
        "wsi_started",
        tiles=len(grid),
        width=source.width,
        height=source.height,
        workers=cfg.workers,
        mode=cfg.mode,
    )
    started = time.perf_counter()
    job = _tile_job(source, predictor, grid, cfg)
    outputs: list[TileOutput] = []
    with TilePool(cfg.workers, cfg.in_flight_per_worker) as pool:
        for index, res in enumerate(pool.map(job, range(len(grid)))):
            if isinstance(res, Err):
                origin = grid.tiles[index]
                log.error("tile_failed", origin=origin, error=str(res.error))
                raise TileFailure(origin, res.error) from res.error
            outputs.append(res.value)
            log.debug("tile_done", origin=res.value.origin, nuclei=len(res.value.records))
    merged = merge_tiles(outputs, grid, cfg.merge_iou)
    result = WsiResult(records=merged.records, grid=grid, config=cfg.snapshot())
    log.info(
        "wsi_finished",
        tiles=len(grid),
        nuclei=len(result.records),
        seconds=round(time.perf_counter() - started, 3),
    )
    return result


__all__ = ["RunConfig", "run_wsi"]
