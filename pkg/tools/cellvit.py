"""Command-line entry points for segmentation, evaluation and verification runs.

Every command prints one JSON summary line on stdout; logs go to stderr as
JSON. Engine and I/O errors exit with status 1 and ``ErrorName: message`` on
stderr, usage errors with status 2.
"""

from __future__ import annotations

import logging
import sys
import time
from collections.abc import Callable, Iterator
from contextlib import contextmanager
from enum import Enum
from pathlib import Path
from typing import Any, NoReturn

import numpy as np
import structlog
import typer
from pydantic import ValidationError

from engine.lib.config import TilingDefaults, workers_from_env
from engine.lib.contracts import Predictor
from engine.lib.errors import CellVitError, ConfigError, IoError
from engine.m01_model import (
    ModelConfig,
    ModelPredictor,
    build_config,
    init_weights,
    load_model_weights,
    preset,
    save_model_weights,
)
from engine.m02_losses import gradcheck_suite
from engine.m03_sampling import draw_epoch, load_index, sampling_weights
from engine.m04_postproc import HoverNetParams, InstanceMap, StarParams, majority_vote_types
from engine.m05_metrics import build_report, centroid_radius_px
from engine.m06_pipeline import (
    DirectoryTileSource,
    InMemoryTileSource,
    OraclePredictor,
    RunConfig,
    export_geojson,
    export_json,
    load_result_json,
    pixel_redundancy,
    plan_tiles,
    records_to_instance_map,
    run_wsi,
    synthesize_slide,
    write_tile_directory,
)
from engine.m07_persist.binary import load_tensor
from engine.m07_persist.json_store import dumps_stable, read_json, write_json_atomic

_T = TilingDefaults()

log = structlog.get_logger("cellvit")

app = typer.Typer(add_completion=False, no_args_is_help=True)


class ModeChoice(str, Enum):
    hovernet = "hovernet"
    stardist = "stardist"
    cppnet = "cppnet"


class PredictorChoice(str, Enum):
    model = "model"
    oracle = "oracle"


def configure_logging(verbose: bool = False) -> None:
    structlog.configure(
        processors=[
            structlog.processors.add_log_level,
            structlog.processors.JSONRenderer(sort_keys=True),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(
            logging.DEBUG if verbose else logging.INFO
        ),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )


@app.callback()
def main(verbose: bool = typer.Option(False, "--verbose", "-v", help="Log debug events.")) -> None:
    configure_logging(verbose)


@contextmanager
def _failures() -> Iterator[None]:
    try:
        yield
    except ValidationError as exc:
        _fail(ConfigError(str(exc)))
    except (CellVitError, OSError) as exc:
        _fail(exc)


def _fail(exc: BaseException) -> NoReturn:
    typer.echo(f"{type(exc).__name__}: {exc}", err=True)
    raise typer.Exit(code=1)


def _emit(summary: dict[str, Any]) -> None:
    sys.stdout.write(dumps_stable(summary))
    sys.stdout.flush()


def sidecar_path(weights: Path) -> Path:
    return weights.with_name(weights.name + ".json")


def _model_config(weights: Path, preset_name: str) -> ModelConfig:
    side = sidecar_path(weights)
    if side.exists():
        payload = read_json(side)
        if not isinstance(payload, dict):
            raise ConfigError(f"{side} must hold a JSON object")
        return build_config(**payload)
    log.info("weights_sidecar_missing", path=str(side), preset=preset_name)
    return preset(preset_name)


def _predictor(
    kind: PredictorChoice,
    weights: Path | None,
    preset_name: str,
    mode: ModeChoice,
    n_rays: int,
) -> tuple[Predictor, str]:
    if kind is PredictorChoice.oracle:
        rays = None if mode is ModeChoice.hovernet else n_rays
        return OraclePredictor(n_rays=rays), "oracle"
    if weights is None:
        raise ConfigError("--weights is required for the model predictor")
    if not weights.exists():
        raise IoError(f"weights not found: {weights}")
    cfg = _model_config(weights, preset_name)
    if mode is not ModeChoice.hovernet and cfg.star_rays is None:
        raise ConfigError(f"mode {mode.value!r} needs a model built with star_rays")
    if mode is ModeChoice.cppnet:
        raise ConfigError("mode 'cppnet' needs refined ray distances the model does not emit")
    return ModelPredictor(load_model_weights(weights, cfg), cfg), cfg.name


@app.command()
def infer(
    manifest: Path = typer.Option(..., "--manifest", help="Tile manifest JSON."),
    out: Path = typer.Option(..., "--out", help="Result JSON to write."),
    weights: Path | None = typer.Option(None, "--weights", help="CVTW weight file."),
    geojson: Path | None = typer.Option(None, "--geojson", help="Also write GeoJSON here."),
    tile_size: int = typer.Option(_T.tile_size, "--tile-size"),
    overlap: int = typer.Option(_T.overlap, "--overlap"),
    merge_iou: float = typer.Option(_T.merge_iou, "--merge-iou"),
    mode: ModeChoice = typer.Option(ModeChoice.hovernet, "--mode"),
    predictor: PredictorChoice = typer.Option(PredictorChoice.model, "--predictor"),
    preset_name: str = typer.Option("tiny", "--preset", help="Used when weights lack a sidecar."),
    workers: int = typer.Option(1, "--workers", help="Overridden by CELLVIT_WORKERS."),
    embeddings: bool = typer.Option(True, "--embeddings/--no-embeddings"),
    np_thresh: float = typer.Option(HoverNetParams().np_thresh, "--np-thresh"),
    edge_thresh: float = typer.Option(HoverNetParams().edge_thresh, "--edge-thresh"),
    prob_thresh: float = typer.Option(StarParams().prob_thresh, "--prob-thresh"),
    nms_thresh: float = typer.Option(StarParams().nms_thresh, "--nms-thresh"),
) -> None:
    """Segment every nucleus of a tiled slide."""
    with _failures():
        started = time.perf_counter()
        source = DirectoryTileSource(manifest)
        grid = plan_tiles(source.width, source.height, tile_size, overlap)
        star = StarParams(prob_thresh=prob_thresh, nms_thresh=nms_thresh)
        model, model_name = _predictor(predictor, weights, preset_name, mode, star.n_rays)
        cfg = RunConfig(
            tile_size=tile_size,
            overlap=overlap,
            merge_iou=merge_iou,
            mode=mode.value,
            hovernet=HoverNetParams(np_thresh=np_thresh, edge_thresh=edge_thresh),
            star=star,
            workers=workers_from_env(workers),
            include_embeddings=embeddings,
            model=model_name,
        )
        result = run_wsi(source, model, cfg)
        export_json(result, out, mpp=source.mpp, model=model_name, include_embeddings=embeddings)
        if geojson is not None:
            export_geojson(result, geojson)
        _emit(
            {
                "command": "infer",
                "tiles": len(grid),
                "nuclei": len(result.records),
                "workers": cfg.workers,
                "out": str(out),
                "seconds": round(time.perf_counter() - started, 3),
            }
        )


def _instances(path: Path, num_classes: int) -> tuple[InstanceMap, float | None]:
    """Instance map from a result JSON or a CVTF integer map, plus the file's mpp if known."""
    if path.suffix == ".json":
        result, header = load_result_json(path)
        shape = (result.grid.wsi_height, result.grid.wsi_width)
        return records_to_instance_map(result.records, shape), float(header["mpp"])
    arr = load_tensor(path)
    if not np.issubdtype(arr.dtype, np.integer):
        raise ConfigError(f"{path} must hold an integer instance map")
    if arr.ndim == 2:
        return InstanceMap(labels=arr.astype(np.int32)), None
    if arr.ndim == 3 and arr.shape[2] == 2:
        types = np.clip(arr[..., 1], 0, num_classes - 1)
        votes = np.eye(num_classes, dtype=np.float32)[types]
        return majority_vote_types(InstanceMap(labels=arr[..., 0].astype(np.int32)), votes), None
    raise ConfigError(f"{path}: expected (H, W) or (H, W, 2), got {arr.shape}")


@app.command("eval")
def evaluate(
    gt: list[Path] = typer.Option(..., "--gt", help="Ground truth; repeat for several images."),
    pred: list[Path] = typer.Option(..., "--pred", help="Predictions, same order as --gt."),
    out: Path | None = typer.Option(None, "--out", help="Write the metric report here."),
    mpp: float | None = typer.Option(None, "--mpp", help="Default: from result files, else 0.25."),
    radius: float | None = typer.Option(None, "--radius", help="Centroid radius in pixels."),
    num_classes: int = typer.Option(6, "--num-classes"),
) -> None:
    """Score predicted instance maps against ground truth."""
    with _failures():
        if len(gt) != len(pred):
            raise ConfigError(f"{len(gt)} --gt files but {len(pred)} --pred files")
        gts, preds, seen_mpp = [], [], []
        for g, p in zip(gt, pred, strict=True):
            g_map, g_mpp = _instances(g, num_classes)
            p_map, p_mpp = _instances(p, num_classes)
            if g_map.shape != p_map.shape:
                raise ConfigError(f"{g} is {g_map.shape} but {p} is {p_map.shape}")
            gts.append(g_map)
            preds.append(p_map)
            seen_mpp += [m for m in (g_mpp, p_mpp) if m is not None]
        scale = mpp if mpp is not None else (seen_mpp[0] if seen_mpp else 0.25)
        radius_px = radius if radius is not None else centroid_radius_px(scale)
        report = build_report(gts, preds, num_classes, radius_px)
        if out is not None:
            write_json_atomic(out, report.to_json_dict())
        _emit(
            {
                "command": "eval",
                "images": report.images,
                "radius_px": radius_px,
                "bpq": report.bpq,
                "mpq": report.mpq,
                "f1": report.detection.f1,
            }
        )


@app.command("sample-weights")
def sample_weights(
    index: Path = typer.Option(..., "--index", help="Dataset index JSON."),
    out: Path = typer.Option(..., "--out"),
    gamma: float = typer.Option(0.85, "--gamma", help="Oversampling strength in [0, 1]."),
    draws: int = typer.Option(0, "--draws", help="Also draw this many indices."),
    seed: int = typer.Option(0, "--seed"),
) -> None:
    """Per-patch sampling weights for class-balanced training."""
    with _failures():
        ds = load_index(index)
        weights = sampling_weights(ds, gamma)
        payload: dict[str, Any] = {
            "gamma_s": gamma,
            "ids": [e.id for e in ds.entries],
            "weights": [float(w) for w in weights],
        }
        if draws > 0:
            payload["draws"] = draw_epoch(weights, draws, seed)
        write_json_atomic(out, payload)
        _emit({"command": "sample-weights", "entries": len(ds.entries), "out": str(out)})


@app.command()
def gradcheck(
    seed: int = typer.Option(0, "--seed"),
    cases: int = typer.Option(50, "--cases", help="Random inputs per loss."),
    out: Path | None = typer.Option(None, "--out", help="Write the full report here."),
    perturb_analytic: bool = typer.Option(
        False, "--perturb-analytic", help="Corrupt analytic gradients (negative control)."
    ),
) -> None:
    """Compare every analytic loss gradient with central finite differences."""
    with _failures():
        report = gradcheck_suite(seed, cases, perturb_analytic=perturb_analytic)
        if out is not None:
            write_json_atomic(out, report.model_dump(mode="json"))
        _emit(
            {
                "command": "gradcheck",
                "passed": report.passed,
                "tolerance": report.tolerance,
                "worst": {e.loss: e.worst_rel_error for e in report.entries},
            }
        )
        if not report.passed:
            failed = [e.loss for e in report.entries if not e.passed]
            typer.echo(f"gradcheck failed for: {', '.join(failed)}", err=True)
            raise typer.Exit(code=1)


def _timed(fn: Callable[[], Any]) -> tuple[Any, float]:
    started = time.perf_counter()
    value = fn()
    return value, time.perf_counter() - started


@app.command()
def bench(
    size: int = typer.Option(4096, "--size", help="Side of the synthetic slide."),
    seed: int = typer.Option(0, "--seed"),
    workers: int = typer.Option(1, "--workers", help="Overridden by CELLVIT_WORKERS."),
    predictor: PredictorChoice = typer.Option(PredictorChoice.oracle, "--predictor"),
    weights: Path | None = typer.Option(None, "--weights"),
    preset_name: str = typer.Option("tiny", "--preset"),
    large_tile: int = typer.Option(_T.tile_size, "--large-tile"),
    small_tile: int = typer.Option(256, "--small-tile"),
    overlap: int = typer.Option(_T.overlap, "--overlap"),
) -> None:
    """Time large-tile against small-tile inference on one synthetic slide."""
    with _failures():
        n_workers = workers_from_env(workers)
        model, model_name = _predictor(predictor, weights, preset_name, ModeChoice.hovernet, 32)
        channels = model.config.in_channels if isinstance(model, ModelPredictor) else 3
        slide = synthesize_slide(size, size, seed, channels=channels)
        source = InMemoryTileSource(slide.image, slide.mpp)
        summary: dict[str, Any] = {
            "command": "bench",
            "size": size,
            "workers": n_workers,
            "model": model_name,
        }
        times = {}
        for label, tile in (("large", large_tile), ("small", small_tile)):
            cfg = RunConfig(
                tile_size=tile, overlap=overlap, workers=n_workers, include_embeddings=False
            )
            result, seconds = _timed(lambda cfg=cfg: run_wsi(source, model, cfg))
            pixels = pixel_redundancy(size, size, tile, overlap)
            times[label] = seconds
            summary[label] = {
                "tile_size": tile,
                "overlap": overlap,
                "tiles": pixels.tiles,
                "processed_px": pixels.processed_px,
                "ideal_redundancy": pixels.ideal_redundancy,
                "nuclei": len(result.records),
                "seconds": round(seconds, 3),
            }
        summary["pixel_ratio"] = summary["large"]["processed_px"] / summary["small"]["processed_px"]
        summary["ideal_ratio"] = (
            summary["large"]["ideal_redundancy"] / summary["small"]["ideal_redundancy"]
        )
        summary["speedup"] = round(times["small"] / max(times["large"], 1e-9), 3)
        _emit(summary)


@app.command("init-weights")
def init_weights_cmd(
    out: Path = typer.Option(..., "--out", help="CVTW file to write."),
    preset_name: str = typer.Option("tiny", "--preset"),
    seed: int = typer.Option(0, "--seed"),
    star_rays: int | None = typer.Option(None, "--star-rays", help="Add star-polygon heads."),
) -> None:
    """Write seeded weights for a preset, with the configuration beside them."""
    with _failures():
        overrides: dict[str, object] = {} if star_rays is None else {"star_rays": star_rays}
        cfg = preset(preset_name, **overrides)
        tensors = init_weights(cfg, seed)
        save_model_weights(out, tensors)
        write_json_atomic(sidecar_path(out), cfg.model_dump(mode="json"))
        _emit(
            {
                "command": "init-weights",
                "preset": cfg.name,
                "tensors": len(tensors),
                "parameters": int(sum(t.size for t in tensors.values())),
                "out": str(out),
            }
        )


@app.command()
def synth(
    out: Path = typer.Option(..., "--out", help="Directory for tiles and manifest."),
    width: int = typer.Option(1024, "--width"),
    height: int = typer.Option(1024, "--height"),
    seed: int = typer.Option(0, "--seed"),
    density: float = typer.Option(4e-4, "--density", help="Placement attempts per pixel."),
    tile_size: int = typer.Option(512, "--tile-size", help="Size of the stored tiles."),
    mpp: float = typer.Option(0.25, "--mpp"),
) -> None:
    """Write a synthetic slide with its ground-truth instance map."""
    with _failures():
        slide = synthesize_slide(width, height, seed, density=density, mpp=mpp)
        manifest = write_tile_directory(slide, out, tile_size=tile_size)
        _emit(
            {
                "command": "synth",
                "manifest": str(manifest),
                "nuclei": len(slide.truth.classes),
                "width": width,
                "height": height,
            }
        )


if __name__ == "__main__":
    app()
