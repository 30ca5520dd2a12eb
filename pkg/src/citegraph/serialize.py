"""Little-endian float64 array files with JSON shape sidecars."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


def write_f64le(path: str | Path, array: np.ndarray) -> None:
    np.ascontiguousarray(array, dtype="<f8").tofile(path)


def read_f64le(path: str | Path, shape=None) -> np.ndarray:
    arr = np.fromfile(path, dtype="<f8")
    if shape is not None:
        arr = arr.reshape(shape)
    return arr


def write_json(path: str | Path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path: str | Path):
    return json.loads(Path(path).read_text(encoding="utf-8"))
