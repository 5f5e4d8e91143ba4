"""Tiled whole-slide inference, merging and export."""

from engine.m06_pipeline.embeddings import associate_embeddings, token_footprints
from engine.m06_pipeline.export import (
    export_geojson,
    export_json,
    geojson_document,
    load_result_json,
    records_to_instance_map,
    result_document,
)
from engine.m06_pipeline.merge import TileOutput, WsiResult, merge_tiles
from engine.m06_pipeline.predictors import OraclePredictor, nucleus_color
from engine.m06_pipeline.process import (
    PostprocSettings,
    TileResult,
    process_bundle,
    process_tile,
    separate,
)
from engine.m06_pipeline.run import RunConfig, run_wsi
from engine.m06_pipeline.synthetic import SyntheticSlide, synthesize_slide, write_tile_directory
from engine.m06_pipeline.tile_source import (
    DirectoryTileSource,
    InMemoryTileSource,
    TileManifest,
    load_manifest,
    parse_manifest,
)
from engine.m06_pipeline.tiles import PixelCount, TileGrid, pixel_redundancy, plan_tiles

__all__ = [
    "DirectoryTileSource",
    "InMemoryTileSource",
    "OraclePredictor",
    "PixelCount",
    "PostprocSettings",
    "RunConfig",
    "SyntheticSlide",
    "TileGrid",
    "TileManifest",
    "TileOutput",
    "TileResult",
    "WsiResult",
    "associate_embeddings",
    "export_geojson",
    "export_json",
    "geojson_document",
    "load_manifest",
    "load_result_json",
    "merge_tiles",
    "nucleus_color",
    "parse_manifest",
    "pixel_redundancy",
    "plan_tiles",
    "process_bundle",
    "process_tile",
    "records_to_instance_map",
    "result_document",
    "run_wsi",
    "separate",
    "synthesize_slide",
    "token_footprints",
    "write_tile_directory",
]
