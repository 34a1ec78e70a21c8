"""Synthetic HDR test scenes with analytic ground truth."""

from __future__ import annotations

import numpy as np

from . import _tables
from .errors import ConfigurationError, DomainError
from .spectral import (
    LightGroup,
    SpectralImage,
    WavelengthGrid,
    photon_radiance_for_luminance,
)


def _flat(level_map: np.ndarray, grid: WavelengthGrid, spectrum=None) -> np.ndarray:
    """Expand a luminance map (cd/m^2) into photon radiance with a fixed spectral shape."""
    unit = photon_radiance_for_luminance(1.0, grid, spectrum)
    return level_map[:, :, None] * unit[None, None, :]


def gen_point_grid_scene(rows: int = 128, cols: int = 256, grid: WavelengthGrid | None = None,
                         n_sources: int = 4, top_level: float = 1e5, decade_step: float = 10.0,
                         background_level: float = 1e-1, source_size: int = 3,
                         spectrum=None) -> SpectralImage:
    """Dark background with a row of square emitters dimming by ``decade_step`` left to right.

    Levels are luminances in cd/m^2.
    """
    grid = grid or WavelengthGrid()
    if n_sources < 1:
        raise ConfigurationError("need at least one source")
    if not top_level > background_level > 0:
        raise ConfigurationError("need top_level > background_level > 0")
    spacing = cols / n_sources
    if spacing < source_size + 2 or rows < source_size + 2:
        raise ConfigurationError(f"{n_sources} sources of size {source_size} do not fit in {rows}x{cols}")
    lum = np.full((rows, cols), float(background_level))
    levels = [top_level / decade_step**i for i in range(n_sources)]
    r0 = rows // 2 - source_size // 2
    centers = []
    for i, level in enumerate(levels):
        c = int(spacing * (i + 0.5))
        c0 = c - source_size // 2
        lum[r0 : r0 + source_size, c0 : c0 + source_size] = max(level, background_level)
        centers.append((rows // 2, c))
    meta = {"generator": "point_grid", "levels_cd_m2": levels, "centers": centers,
            "background_cd_m2": background_level}
    return SpectralImage(_flat(lum, grid, spectrum), grid, "radiance", meta)


def gen_ramp_scene(rows: int = 64, cols: int = 256, grid: WavelengthGrid | None = None,
                   decades: float = 5.0, min_level: float = 1e-2, spectrum=None) -> SpectralImage:
    """Horizontal log-linear luminance ramp spanning ``decades`` orders of magnitude.

    ``meta['column_luminance']`` holds the exact per-column luminance.
    """
    grid = grid or WavelengthGrid()
    if not decades > 0:
        raise DomainError("decades must be positive")
    if not min_level > 0:
        raise DomainError("min_level must be positive")
    col_lum = min_level * 10.0 ** (decades * np.arange(cols) / max(cols - 1, 1))
    lum = np.broadcast_to(col_lum, (rows, cols))
    meta = {"generator": "ramp", "decades": decades, "min_level": min_level,
            "column_luminance": col_lum.tolist()}
    return SpectralImage(_flat(lum, grid, spectrum), grid, "radiance", meta)


def _texture(rows: int, cols: int, period: int, contrast: float) -> np.ndarray:
    yy, xx = np.mgrid[0:rows, 0:cols]
    return 1 + contrast * np.sin(2 * np.pi * xx / period) * np.sin(2 * np.pi * yy / period)


def gen_tunnel_scene(rows: int = 128, cols: int = 128, grid: WavelengthGrid | None = None,
                     interior_level: float = 0.5, exit_level: float = 5e4, exit_radius: float = 0.18,
                     contrast: float = 0.5, period: int = 8) -> LightGroup:
    """Tunnel interior (streetlights, headlights, tail lights) around a daylit exit (sky).

    The exit is a central disk of radius ``exit_radius * min(rows, cols)``.
    Both regions carry the same multiplicative sinusoidal texture.
    """
    grid = grid or WavelengthGrid()
    if interior_level <= 0 or exit_level < 0:
        raise DomainError("need interior_level > 0 and exit_level >= 0")
    yy, xx = np.mgrid[0:rows, 0:cols]
    cy, cx = (rows - 1) / 2, (cols - 1) / 2
    disk = np.hypot(yy - cy, xx - cx) <= exit_radius * min(rows, cols)
    tex = _texture(rows, cols, period, contrast)

    daylight = _tables.resample(_tables.d65(), 1, grid.wavelengths)
    sky = np.where(disk, exit_level, 0.0) * tex
    street = np.where(disk, 0.0, interior_level) * tex
    # headlight pool on the road surface in the lower third
    road = (yy > rows * 2 / 3) & (np.abs(xx - cx) < cols / 4)
    head = np.where(road & ~disk, 4 * interior_level, 0.0) * tex
    # a pair of tail lights left and right of the exit
    other = np.zeros((rows, cols))
    for sx in (cx - cols * 0.3, cx + cols * 0.3):
        spot = (np.abs(yy - rows * 0.6) <= 1) & (np.abs(xx - sx) <= 1)
        other[spot] = 50 * interior_level

    sodium = np.exp(-0.5 * ((grid.wavelengths - 590) / 25) ** 2) + 0.05
    halogen = np.linspace(0.5, 1.5, grid.count)
    red = np.exp(-0.5 * ((grid.wavelengths - 630) / 15) ** 2) + 1e-3
    members = {
        "sky": SpectralImage(_flat(sky, grid, daylight), grid, "radiance"),
        "headlights": SpectralImage(_flat(head, grid, halogen), grid, "radiance"),
        "streetlights": SpectralImage(_flat(street, grid, sodium), grid, "radiance"),
        "otherlights": SpectralImage(_flat(other, grid, red), grid, "radiance"),
    }
    meta = {"generator": "tunnel", "interior_level": interior_level, "exit_level": exit_level,
            "exit_mask": disk}
    return LightGroup(members, meta)


def gen_macbeth_scene(grid: WavelengthGrid | None = None, patch: int = 16, luminance: float = 100.0,
                      illuminant=None, border: int = 0) -> SpectralImage:
    """4x6 ColorChecker chart under D65 (default) scaled so a perfect white reflector has ``luminance``.

    ``meta['patch_slices']`` lists the (row, col) slice of each patch.
    """
    grid = grid or WavelengthGrid()
    names, table = _tables.colorchecker()
    wl = grid.wavelengths
    illum = _tables.resample(_tables.d65(), 1, wl) if illuminant is None else np.asarray(illuminant, float)
    white = photon_radiance_for_luminance(luminance, grid, illum)
    rows, cols = 4 * patch + 5 * border, 6 * patch + 7 * border
    data = np.zeros((rows, cols, grid.count))
    slices = []
    for k in range(24):
        i, j = divmod(k, 6)
        r0, c0 = border + i * (patch + border), border + j * (patch + border)
        refl = _tables.resample(table, k + 1, wl)
        data[r0 : r0 + patch, c0 : c0 + patch] = white * refl
        slices.append(((r0, r0 + patch), (c0, c0 + patch)))
    meta = {"generator": "macbeth", "patch_names": list(names), "patch_slices": slices,
            "white_luminance": luminance}
    return SpectralImage(data, grid, "radiance", meta)


def gen_flat_scene(rows: int, cols: int, grid: WavelengthGrid | None = None, luminance: float = 1.0,
                   spectrum=None) -> SpectralImage:
    grid = grid or WavelengthGrid()
    lum = np.full((rows, cols), float(luminance))
    return SpectralImage(_flat(lum, grid, spectrum), grid, "radiance", {"generator": "flat", "luminance": luminance})
