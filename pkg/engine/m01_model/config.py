from __future__ import annotations

from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from engine.lib.errors import ConfigError, DepthNotDivisibleBy4

DEFAULT_DECODER_WIDTHS = (256, 128, 64, 32)
TOKEN_SKIP_STAGES = 3


class ModelConfig(BaseModel):
    """Shape of the encoder/decoder network.

    ``trained_pos_grid`` is the side length of the positional table the
    weights were trained with (plus one class entry). ``star_rays`` adds the
    object-probability and radial-distance branches when set.
    """

    model_config = ConfigDict(frozen=True)

    name: str = "custom"
    patch_size: int = 16
    embed_dim: int = 384
    depth: int = 12
    heads: int = 6
    mlp_ratio: int = 4
    in_channels: int = 3
    num_nuclei_classes: int = 6
    num_tissue_classes: int = 19
    trained_pos_grid: int = 16
    decoder_widths: tuple[int, ...] = DEFAULT_DECODER_WIDTHS
    star_rays: int | None = None
    ln_eps: float = 1e-6
    bn_eps: float = 1e-5

    @field_validator(
        "patch_size",
        "embed_dim",
        "heads",
        "mlp_ratio",
        "in_channels",
        "num_tissue_classes",
        "trained_pos_grid",
    )
    @classmethod
    def _positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be positive")
        return v

    @field_validator("depth")
    @classmethod
    def _depth(cls, v: int) -> int:
        if v < 4 or v % 4:
            raise ValueError("depth must be a positive multiple of 4")
        return v

    @field_validator("patch_size")
    @classmethod
    def _power_of_two(cls, v: int) -> int:
        if v & (v - 1):
            raise ValueError("patch_size must be a power of two")
        return v

    @field_validator("num_nuclei_classes")
    @classmethod
    def _at_least_two(cls, v: int) -> int:
        if v < 2:
            raise ValueError("num_nuclei_classes must include background and one nucleus class")
        return v

    @field_validator("decoder_widths")
    @classmethod
    def _widths(cls, v: tuple[int, ...]) -> tuple[int, ...]:
        if not v or any(w < 1 for w in v):
            raise ValueError("decoder_widths must be a non-empty tuple of positive ints")
        return v

    @field_validator("star_rays")
    @classmethod
    def _rays(cls, v: int | None) -> int | None:
        if v is not None and v < 3:
            raise ValueError("star_rays must be >= 3")
        return v

    @model_validator(mode="after")
    def _heads_divide(self) -> ModelConfig:
        if self.embed_dim % self.heads:
            raise ValueError("embed_dim must be divisible by heads")
        return self

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.heads

    @property
    def n_stages(self) -> int:
        """Number of x2 upsampling stages from token grid to pixel grid."""
        return self.patch_size.bit_length() - 1

    @property
    def skip_depths(self) -> tuple[int, int, int, int]:
        q = self.depth // 4
        return (q, 2 * q, 3 * q, self.depth)

    @property
    def stem_channels(self) -> int:
        return self.decoder_widths[-1]

    def stage_width(self, stage: int) -> int:
        """Channel width after upsampling stage ``stage`` (1-based)."""
        return self.decoder_widths[min(stage - 1, len(self.decoder_widths) - 1)]

    def has_token_skip(self, stage: int) -> bool:
        return stage <= TOKEN_SKIP_STAGES and stage < self.n_stages

    def branch_channels(self) -> dict[str, int]:
        out = {"np": 2, "hv": 2, "nt": self.num_nuclei_classes}
        if self.star_rays is not None:
            out["pd"] = 1
            out["rd"] = self.star_rays
        return out


def build_config(**fields: object) -> ModelConfig:
    """Validate ``fields`` into a :class:`ModelConfig` raising engine errors."""
    depth = fields.get("depth", ModelConfig.model_fields["depth"].default)
    if isinstance(depth, int) and (depth < 4 or depth % 4):
        raise DepthNotDivisibleBy4(f"depth must be a positive multiple of 4, got {depth}")
    try:
        return ModelConfig(**fields)  # type: ignore[arg-type]
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


PRESETS: dict[str, dict[str, object]] = {
    "tiny": {
        "embed_dim": 32,
        "depth": 4,
        "heads": 2,
        "decoder_widths": (16, 16, 8, 8),
        "trained_pos_grid": 4,
    },
    "vit_s": {"embed_dim": 384, "depth": 12, "heads": 6},
    "sam_b": {"embed_dim": 768, "depth": 12, "heads": 12, "trained_pos_grid": 64},
    "sam_l": {"embed_dim": 1024, "depth": 24, "heads": 16, "trained_pos_grid": 64},
    "sam_h": {"embed_dim": 1280, "depth": 32, "heads": 16, "trained_pos_grid": 64},
}


def preset(name: str, **overrides: object) -> ModelConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return build_config(name=name, **{**PRESETS[name], **overrides})


__all__ = ["DEFAULT_DECODER_WIDTHS", "ModelConfig", "PRESETS", "build_config", "preset"]
