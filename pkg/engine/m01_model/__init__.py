"""Vision-transformer encoder with a U-shaped decoder (inference only)."""

from engine.m01_model.bundle import PredictionBundle
from engine.m01_model.config import PRESETS, ModelConfig, build_config, preset
from engine.m01_model.decoder import decode
from engine.m01_model.encoder import SkipFeatures, encode, tissue_probabilities, tokens_to_grid
from engine.m01_model.forward import ModelPredictor, forward
from engine.m01_model.tokens import TokenSequence, embed, interpolate_pos_table, patchify
from engine.m01_model.weights import (
    check_weights,
    init_weights,
    load_model_weights,
    save_model_weights,
    weight_specs,
)

__all__ = [
    "ModelConfig",
    "ModelPredictor",
    "PRESETS",
    "PredictionBundle",
    "SkipFeatures",
    "TokenSequence",
    "build_config",
    "check_weights",
    "decode",
    "embed",
    "encode",
    "forward",
    "init_weights",
    "interpolate_pos_table",
    "load_model_weights",
    "patchify",
    "preset",
    "save_model_weights",
    "tissue_probabilities",
    "tokens_to_grid",
    "weight_specs",
]
