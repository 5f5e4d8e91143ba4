from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Any

from engine.lib.errors import IoError


def dumps_stable(payload: Any) -> str:
    """Serialize ``payload`` with sorted keys so equal inputs give equal bytes."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n"


def write_bytes_atomic(path: str | Path, data: bytes) -> Path:
    """Write ``data`` to ``path`` atomically.

    The bytes go to a temporary file in the target directory first, are
    fsynced and then replace the final path, so readers never observe a
    partially written file.
    """
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_path = tempfile.mkstemp(
            dir=target.parent, prefix=f".{target.name}.", suffix=".tmp"
        )
    except OSError as exc:
        raise IoError(f"cannot write {target}: {exc}") from exc
    try:
        with os.fdopen(fd, "wb") as tmp:
            tmp.write(data)
            tmp.flush()
            os.fsync(tmp.fileno())
        os.replace(tmp_path, target)
    except OSError as exc:
        raise IoError(f"cannot write {target}: {exc}") from exc
    finally:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
    return target


def write_json_atomic(path: str | Path, payload: Any) -> Path:
    return write_bytes_atomic(path, dumps_stable(payload).encode("utf-8"))


def write_text_atomic(path: str | Path, text: str) -> Path:
    return write_bytes_atomic(path, text.encode("utf-8"))


def read_json(path: str | Path) -> Any:
    target = Path(path)
    try:
        with target.open(encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read {target}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IoError(f"{target} is not valid JSON: {exc}") from exc


__all__ = [
    "dumps_stable",
    "read_json",
    "write_bytes_atomic",
    "write_json_atomic",
    "write_text_atomic",
]
