"""Binary containers and atomic JSON files."""

from engine.m07_persist.binary import (
    decode_tensor,
    decode_weights,
    encode_tensor,
    encode_weights,
    load_tensor,
    load_weights,
    save_tensor,
    save_weights,
)
from engine.m07_persist.json_store import dumps_stable, read_json, write_json_atomic

__all__ = [
    "decode_tensor",
    "decode_weights",
    "dumps_stable",
    "encode_tensor",
    "encode_weights",
    "load_tensor",
    "load_weights",
    "read_json",
    "save_tensor",
    "save_weights",
    "write_json_atomic",
]
