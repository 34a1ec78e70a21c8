"""Embedded colorimetric tables (5 nm sampling, 380-780 nm)."""

from __future__ import annotations

import csv
from functools import lru_cache
from importlib import resources

import numpy as np


def _read(name: str) -> tuple[list[str], np.ndarray]:
    with resources.files("hdrsim.data").joinpath(name).open("r", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return header, np.array([[float(v) for v in r] for r in body])


@lru_cache(maxsize=None)
def cie1931() -> np.ndarray:
    """Columns: wavelength, xbar, ybar, zbar, V(1924)."""
    return _read("cie1931_2deg_5nm.csv")[1]


@lru_cache(maxsize=None)
def d65() -> np.ndarray:
    return _read("d65_5nm.csv")[1]


@lru_cache(maxsize=None)
def colorchecker() -> tuple[tuple[str, ...], np.ndarray]:
    header, table = _read("colorchecker_ohta_5nm.csv")
    return tuple(header[1:]), table


def resample(table: np.ndarray, column: int, wavelengths: np.ndarray) -> np.ndarray:
    """Linear interpolation of one table column, zero outside the tabulated range."""
    return np.interp(wavelengths, table[:, 0], table[:, column], left=0.0, right=0.0)
