"""PNG and CSV exports for renderings, profiles and metric tables."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from PIL import Image


def export_png(path, rgb8: np.ndarray) -> None:
    arr = np.asarray(rgb8)
    if arr.dtype != np.uint8 or arr.ndim not in (2, 3) or (arr.ndim == 3 and arr.shape[2] not in (3, 4)):
        raise ValueError("export_png expects an 8-bit greyscale or RGB(A) array")
    Image.fromarray(arr).save(Path(path), format="PNG")


def export_csv(path, columns: Mapping[str, Sequence[float]]) -> None:
    """Write equal-length columns with a header row; floats keep full precision (repr)."""
    names = list(columns)
    data = [np.asarray(columns[n]).ravel() for n in names]
    if len({len(d) for d in data}) > 1:
        raise ValueError("CSV columns must have equal length")
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in zip(*data):
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else str(v) for v in row])


def read_csv(path) -> dict[str, np.ndarray]:
    with open(Path(path), newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    names, body = rows[0], rows[1:]
    return {n: np.array([float(r[i]) for r in body]) for i, n in enumerate(names)}


def export_profile_csv(path, profile: np.ndarray, name: str = "value") -> None:
    profile = np.asarray(profile, dtype=float)
    export_csv(path, {"column": np.arange(profile.size), name: profile})
