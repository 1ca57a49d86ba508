import json
import os
import tempfile
from collections.abc import Iterator
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path
from typing import IO, Any

import pandas as pd

from utils.dtos import Provenance


@contextmanager
def atomic_write(path: str | Path, mode: str = "w") -> Iterator[IO[Any]]:
    """Open a temporary file next to `path` and move it into place on success.

    A crash while writing leaves the previous file (or nothing) behind, never a
    partially written artifact.
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, encoding=None if "b" in mode else "utf-8", newline=None if "b" in mode else "") as f:
            yield f
        os.replace(tmp_path, target)
    finally:
        if os.path.exists(tmp_path):
            try:
                os.remove(tmp_path)
            except OSError:
                pass


def write_json(path: str | Path, payload: Any) -> None:
    with atomic_write(path) as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def read_json(path: str | Path) -> Any:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(
            f"File not found: {path}. Please verify the path is correct and the file exists."
        )
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def write_csv(path: str | Path, frame: pd.DataFrame, index: bool = True) -> None:
    with atomic_write(path) as f:
        frame.to_csv(f, index=index, lineterminator="\n")


def write_metadata(path: str | Path, provenance: Provenance | None, **extra: Any) -> None:
    """Write the `<artifact>.meta.json` sidecar holding provenance and the creation time."""
    payload: dict[str, Any] = {"created_at": datetime.now(timezone.utc).isoformat()}
    if provenance is not None:
        payload["provenance"] = provenance.to_dict()
    payload.update(extra)
    write_json(f"{path}.meta.json", payload)
