"""Named failure kinds raised inside engine boundaries.

Every error derives from :class:`CellVitError` and, where a builtin with the
same meaning exists, from that builtin too so callers may catch either.
"""

from __future__ import annotations


class CellVitError(Exception):
    """Base class for all engine failures."""


class ConfigError(CellVitError, ValueError):
    """A configuration value or file is invalid."""


class NonDivisibleInput(CellVitError, ValueError):
    """Image dimensions are not multiples of the patch size."""


class ShapeMismatch(CellVitError, ValueError):
    """Two tensors that must agree in shape do not."""


class DepthNotDivisibleBy4(ConfigError):
    """Encoder depth must be a multiple of four to provide skip levels."""


class DomainError(CellVitError, ValueError):
    """A value lies outside the domain of a loss function."""


class IndexOutOfRange(CellVitError, IndexError):
    """An index does not address an existing item."""


class DegenerateMax(CellVitError, ValueError):
    """All sampling weights of one kind are zero."""


class BadRayCount(CellVitError, ValueError):
    """A star-convex polygon needs at least three rays."""


class OverlapTooLarge(ConfigError):
    """Tile overlap must be smaller than the tile size."""


class GridMismatch(CellVitError, ValueError):
    """Per-tile outputs do not correspond to the planned tile grid."""


class MatchUniquenessViolation(CellVitError, RuntimeError):
    """An instance was matched to more than one partner."""


class IoError(CellVitError, OSError):
    """A file could not be read or written."""


class BadMagic(IoError):
    """A binary container does not start with the expected magic bytes."""


class VersionUnsupported(IoError):
    """A binary container declares a version this reader does not know."""


class ChecksumMismatch(IoError):
    """A binary container is truncated or its CRC32 does not match."""


class TileFailure(CellVitError, RuntimeError):
    """Processing of one tile failed; carries the tile origin."""

    def __init__(self, origin: tuple[int, int], cause: BaseException | str) -> None:
        self.origin = origin
        self.cause = cause
        super().__init__(f"tile at origin {origin} failed: {cause}")


__all__ = [
    "BadMagic",
    "BadRayCount",
    "CellVitError",
    "ChecksumMismatch",
    "ConfigError",
    "DegenerateMax",
    "DepthNotDivisibleBy4",
    "DomainError",
    "GridMismatch",
    "IndexOutOfRange",
    "IoError",
    "MatchUniquenessViolation",
    "NonDivisibleInput",
    "OverlapTooLarge",
    "ShapeMismatch",
    "TileFailure",
    "VersionUnsupported",
]
