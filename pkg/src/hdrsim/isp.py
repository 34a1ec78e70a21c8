"""Baseline demosaicing and colour rendering."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from . import _tables
from .errors import ConfigurationError, StructuralError
from .sensor import ColorFilterArray, SensorSpec
from .spectral import HC, KM, SpectralImage, WavelengthGrid

KNOWN_CHANNELS = ("r", "g", "b", "w")
LUMA = np.array([0.299, 0.587, 0.114])
_BILINEAR = np.array([[0.25, 0.5, 0.25], [0.5, 1.0, 0.5], [0.25, 0.5, 0.25]])

XYZ_TO_SRGB = np.array([
    [3.2404542, -1.5371385, -0.4985314],
    [-0.9692660, 1.8760108, 0.0415560],
    [0.0556434, -0.2040259, 1.0572252],
])
D65_WHITE = np.array([0.95047, 1.0, 1.08883])


def _check(mosaic: np.ndarray, cfa: ColorFilterArray) -> None:
    for ch in cfa.channels:
        if ch not in KNOWN_CHANNELS:
            raise ConfigurationError(f"unknown channel id {ch!r}")
    ty, tx = cfa.tile
    if mosaic.ndim != 2 or mosaic.shape[0] % ty or mosaic.shape[1] % tx:
        raise StructuralError(f"mosaic {mosaic.shape} is not a multiple of the CFA tile {cfa.tile}")


def interpolate_channel(mosaic: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Bilinear fill of one channel from its sample lattice; samples are kept as measured."""
    m = mask.astype(float)
    num = ndimage.convolve(mosaic * m, _BILINEAR, mode="mirror")
    den = ndimage.convolve(m, _BILINEAR, mode="mirror")
    with np.errstate(invalid="ignore", divide="ignore"):
        est = np.where(den > 0, num / den, 0.0)
    return np.where(mask, mosaic, est)


def demosaic_channels(mosaic: np.ndarray, cfa: ColorFilterArray) -> dict[str, np.ndarray]:
    mosaic = np.asarray(mosaic, dtype=float)
    _check(mosaic, cfa)
    rows, cols = mosaic.shape
    return {ch: interpolate_channel(mosaic, cfa.channel_mask(ch, rows, cols)) for ch in cfa.channels}


def demosaic_bilinear(mosaic: np.ndarray, cfa: ColorFilterArray) -> np.ndarray:
    """rows x cols x 3 sensor-native RGB by per-channel bilinear interpolation."""
    planes = demosaic_channels(mosaic, cfa)
    missing = [c for c in "rgb" if c not in planes]
    if missing:
        raise ConfigurationError(f"CFA lacks channels {missing}")
    return np.stack([planes["r"], planes["g"], planes["b"]], axis=-1)


def demosaic_rgbw(mosaic: np.ndarray, cfa: ColorFilterArray, w_gain: float = 1.0,
                  scale_limits: tuple[float, float] = (0.25, 4.0)) -> np.ndarray:
    """Bilinear RGB whose brightness is taken from the interpolated clear channel.

    Each pixel's RGB is multiplied by W / (w_gain * luma(RGB)), clamped to
    ``scale_limits``. ``w_gain`` is the W-to-luma ratio of a neutral
    stimulus (see ``clear_to_luma_gain``); with 1.0 a field where W equals
    the RGB luma passes through unchanged.
    """
    planes = demosaic_channels(mosaic, cfa)
    if "w" not in planes:
        raise ConfigurationError("RGBW demosaic needs a 'w' channel")
    rgb = np.stack([planes["r"], planes["g"], planes["b"]], axis=-1)
    luma = rgb @ LUMA
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = planes["w"] / (w_gain * luma)
    scale = np.where(luma > 0, scale, 1.0)
    scale = np.clip(np.nan_to_num(scale, nan=1.0), *scale_limits)
    return rgb * scale[..., None]


def channel_responses(cfa: ColorFilterArray, grid: WavelengthGrid, photons: np.ndarray) -> dict[str, float]:
    """Sum of QE times photon spectrum for each channel (per unit area and time)."""
    qe = cfa.qe_on(grid)
    return {ch: float(photons @ q) * grid.step_nm for ch, q in qe.items()}


def clear_to_luma_gain(cfa: ColorFilterArray, grid: WavelengthGrid, photons: np.ndarray | None = None) -> float:
    """W / luma(R, G, B) response ratio for a neutral spectrum (flat photons by default)."""
    photons = np.ones(grid.count) if photons is None else photons
    r = channel_responses(cfa, grid, photons)
    return r["w"] / float(np.array([r["r"], r["g"], r["b"]]) @ LUMA)


def cmf_weights(grid: WavelengthGrid) -> np.ndarray:
    """bands x 3 weights mapping a photon spectrum to CIE XYZ (Y in cd/m^2 or lux)."""
    table = _tables.cie1931()
    wl = grid.wavelengths
    cmf = np.stack([_tables.resample(table, i, wl) for i in (1, 2, 3)], axis=-1)
    # Y uses the V(lambda) column so it agrees with luminance_map exactly
    cmf[:, 1] = _tables.resample(table, 4, wl)
    return KM * cmf * (HC / (wl * 1e-9))[:, None] * grid.step_nm


def spectral_to_xyz(img: SpectralImage) -> np.ndarray:
    wl = img.grid.wavelengths
    if wl[0] < 380 or wl[-1] > 780:
        raise StructuralError("wavelength grid leaves the 380-780 nm colour matching support")
    return img.data @ cmf_weights(img.grid)


def color_matrix(cfa: ColorFilterArray, grid: WavelengthGrid) -> np.ndarray:
    """3x3 least-squares map from (R, G, B) channel responses to XYZ.

    Fits the QE curves to the colour-matching weights over the grid, so
    ``xyz = rgb @ M.T`` where rgb holds sum(QE * photons * dlambda).
    """
    qe = cfa.qe_on(grid)
    q = np.stack([qe["r"], qe["g"], qe["b"]], axis=-1) * grid.step_nm  # bands x 3
    target = cmf_weights(grid)  # bands x 3
    m, *_ = np.linalg.lstsq(q, target, rcond=None)
    return m.T


def sensor_rgb_to_xyz(rgb_electrons: np.ndarray, sensor: SensorSpec, grid: WavelengthGrid) -> np.ndarray:
    """Colour-correct demosaiced electron counts into XYZ of the sensor irradiance."""
    px = sensor.pixel
    per_unit = px.fill_factor * (px.pitch * 1e-6) ** 2 * sensor.exposure
    return (rgb_electrons / per_unit) @ color_matrix(sensor.cfa, grid).T


def srgb_encode(linear: np.ndarray) -> np.ndarray:
    v = np.clip(linear, 0.0, 1.0)
    return np.where(v <= 0.0031308, 12.92 * v, 1.055 * np.power(v, 1 / 2.4) - 0.055)


def xyz_to_srgb_linear(xyz: np.ndarray, exposure_scale: float = 1.0) -> np.ndarray:
    if exposure_scale <= 0:
        raise ConfigurationError("exposure_scale must be positive")
    return (np.asarray(xyz, dtype=float) * exposure_scale) @ XYZ_TO_SRGB.T


def xyz_to_srgb_display(xyz: np.ndarray, exposure_scale: float = 1.0) -> np.ndarray:
    """8-bit sRGB for display (D65 white, clip, sRGB transfer curve)."""
    return np.rint(srgb_encode(xyz_to_srgb_linear(xyz, exposure_scale)) * 255).astype(np.uint8)


def grey_world_exposure(xyz: np.ndarray, target_y: float = 0.18) -> float:
    """Scale that maps the mean Y of ``xyz`` to ``target_y``."""
    y = float(np.mean(np.asarray(xyz)[..., 1]))
    return target_y / y if y > 0 else 1.0
