"""Photon -> electron -> voltage -> DN sensor simulation.

Noise order: PRNU -> Poisson shot -> DSNU -> well clip -> read noise ->
gain and swing clip -> ADC. Random numbers come from Philox streams keyed by
(seed, photodetector or read, noise stage, row tile); tiles have a fixed
height, so results do not depend on how many workers process them.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

import numpy as np
import yaml

from ._parallel import parallel_map
from .errors import ConfigurationError, StructuralError
from .spectral import HC, KM, SpectralImage, WavelengthGrid

TILE_ROWS = 64
SATURATION_FRACTION = 0.95
PRESET_DIR = Path(__file__).with_name("presets")

_STREAMS = {"pd_large": 1, "pd_small": 2, "read_main": 3, "read_lphg": 4, "read_lplg": 5, "read_splg": 6}
_STAGES = {"prnu": 1, "shot": 2, "dsnu": 3, "read": 4}


@dataclass(frozen=True)
class PixelSpec:
    pitch: float = 3.0  # um
    fill_factor: float = 0.9
    well_capacity: float = 10000.0  # e-
    read_noise: float = 2.0  # e- rms
    dark_current: float = 10.0  # e-/s
    conversion_gain: float = 1e-4  # V/e-
    prnu: float = 0.0  # fractional sigma
    dsnu: float = 0.0  # e- sigma
    voltage_swing: float = 1.0  # V
    adc_bits: int = 12

    def __post_init__(self):
        if self.pitch <= 0 or self.well_capacity <= 0 or self.conversion_gain <= 0 or self.voltage_swing <= 0:
            raise ConfigurationError("pitch, well capacity, conversion gain and swing must be positive")
        if not 0 < self.fill_factor <= 1:
            raise ConfigurationError("fill_factor must lie in (0, 1]")
        if min(self.read_noise, self.dark_current, self.prnu, self.dsnu) < 0:
            raise ConfigurationError("noise parameters must be nonnegative")
        if not 8 <= int(self.adc_bits) <= 16:
            raise ConfigurationError("adc_bits must lie in [8, 16]")


def gaussian_qe(wavelengths, centers: Mapping[str, float], sigma: float = 40.0, peak: float = 0.8,
                clear: bool = False) -> dict[str, np.ndarray]:
    """Gaussian channel QE curves; ``clear`` adds W as the upper envelope of the others."""
    wl = np.asarray(wavelengths, dtype=float)
    qe = {ch: peak * np.exp(-0.5 * ((wl - c) / sigma) ** 2) for ch, c in centers.items()}
    if clear:
        qe["w"] = np.max(np.stack(list(qe.values())), axis=0)
    return qe


@dataclass(frozen=True, eq=False)
class ColorFilterArray:
    """Repeating tile of channel ids with QE curves sampled at ``wavelengths``."""

    pattern: tuple[tuple[str, ...], ...]
    wavelengths: np.ndarray
    qe: Mapping[str, np.ndarray]

    def __post_init__(self):
        pattern = tuple(tuple(str(c) for c in row) for row in self.pattern)
        if not pattern or len({len(r) for r in pattern}) != 1:
            raise ConfigurationError("CFA pattern must be a non-empty rectangular tile")
        wl = np.asarray(self.wavelengths, dtype=float)
        qe = {k: np.asarray(v, dtype=float) for k, v in self.qe.items()}
        for ch in {c for row in pattern for c in row}:
            if ch not in qe:
                raise ConfigurationError(f"no QE curve for channel {ch!r}")
        for ch, curve in qe.items():
            if curve.shape != wl.shape:
                raise ConfigurationError(f"QE curve {ch!r} does not match its wavelength samples")
            if np.any(curve < 0) or np.any(curve > 1):
                raise ConfigurationError(f"QE curve {ch!r} leaves [0, 1]")
        object.__setattr__(self, "pattern", pattern)
        object.__setattr__(self, "wavelengths", wl)
        object.__setattr__(self, "qe", qe)

    @property
    def tile(self) -> tuple[int, int]:
        return len(self.pattern), len(self.pattern[0])

    @property
    def channels(self) -> tuple[str, ...]:
        seen = []
        for row in self.pattern:
            for c in row:
                if c not in seen:
                    seen.append(c)
        return tuple(seen)

    def qe_on(self, grid: WavelengthGrid) -> dict[str, np.ndarray]:
        return {ch: np.interp(grid.wavelengths, self.wavelengths, q, left=0.0, right=0.0)
                for ch, q in self.qe.items()}

    def channel_mask(self, ch: str, rows: int, cols: int) -> np.ndarray:
        ty, tx = self.tile
        tile = np.array([[c == ch for c in row] for row in self.pattern])
        return np.tile(tile, (rows // ty + 1, cols // tx + 1))[:rows, :cols]

    def channel_index(self, rows: int, cols: int) -> np.ndarray:
        """Per-pixel index into ``channels``."""
        idx = np.zeros((rows, cols), dtype=int)
        for i, ch in enumerate(self.channels):
            idx[self.channel_mask(ch, rows, cols)] = i
        return idx


@dataclass(frozen=True)
class SensorSpec:
    rows: int
    cols: int
    pixel: PixelSpec
    cfa: ColorFilterArray
    exposure: float = 0.016  # s
    analog_gain: float = 1.0
    seed: int = 0
    name: str = "custom"

    def __post_init__(self):
        ty, tx = self.cfa.tile
        if self.rows <= 0 or self.cols <= 0 or self.rows % ty or self.cols % tx:
            raise ConfigurationError(f"sensor {self.rows}x{self.cols} is not a multiple of the CFA tile {ty}x{tx}")
        if self.exposure <= 0 or self.analog_gain <= 0:
            raise ConfigurationError("exposure and analog gain must be positive")

    def with_(self, **changes) -> "SensorSpec":
        return replace(self, **changes)


@dataclass(frozen=True)
class SplitPixelSpec:
    sensitivity_ratio: float = 0.01
    gain_high: float = 4.0
    gain_low: float = 1.0
    area_split: float = 0.9
    small_well_capacity: float | None = None  # e-; defaults to the pixel well

    def __post_init__(self):
        if not 0 < self.sensitivity_ratio < 1:
            raise ConfigurationError("sensitivity_ratio must lie in (0, 1)")
        if not self.gain_high > self.gain_low > 0:
            raise ConfigurationError("need gain_high > gain_low > 0")
        if not 0 < self.area_split <= 1:
            raise ConfigurationError("area_split must lie in (0, 1]")


@dataclass(frozen=True, eq=False)
class SensorImage:
    """One readout: analog volts, ADC codes, collected electrons and saturation mask."""

    volts: np.ndarray
    dn: np.ndarray
    electrons: np.ndarray
    saturated: np.ndarray
    gain: float  # total V/e- of this read
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class CaptureSet:
    lplg: SensorImage
    lphg: SensorImage
    splg: SensorImage
    sensor: SensorSpec
    split: SplitPixelSpec

    @property
    def sat_lplg(self) -> np.ndarray:
        return self.lplg.saturated

    @property
    def sat_lphg(self) -> np.ndarray:
        return self.lphg.saturated

    @property
    def sat_splg(self) -> np.ndarray:
        return self.splg.saturated


def _rng(seed: int, stream: str, stage: str, tile: int) -> np.random.Generator:
    key = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, _STREAMS[stream], _STAGES[stage], tile])
    return np.random.Generator(np.random.Philox(key=key.generate_state(2, np.uint64)))


def _tiled(draw, shape, seed, stream, stage, workers):
    """Fill ``shape`` tile by tile; ``draw(rng, rows_slice)`` returns one tile."""
    rows = shape[0]
    starts = list(range(0, rows, TILE_ROWS))

    def one(t):
        sl = slice(starts[t], min(starts[t] + TILE_ROWS, rows))
        return draw(_rng(seed, stream, stage, t), sl)

    return np.concatenate(parallel_map(one, range(len(starts)), workers), axis=0)


def _crop(irr: SpectralImage, rows: int, cols: int) -> np.ndarray:
    if irr.rows < rows or irr.cols < cols:
        raise StructuralError(f"irradiance {irr.shape} smaller than sensor {(rows, cols)}")
    r0, c0 = (irr.rows - rows) // 2, (irr.cols - cols) // 2
    return irr.data[r0 : r0 + rows, c0 : c0 + cols]


def mean_electrons(irr: SpectralImage, sensor: SensorSpec) -> np.ndarray:
    """Expected photo-electrons per pixel (no dark current, no clipping)."""
    if irr.kind != "irradiance":
        raise StructuralError("sensor exposure needs an irradiance image")
    if irr.grid.count > 1 and (irr.grid.wavelengths[0] < sensor.cfa.wavelengths[0] - 1e-9
                               or irr.grid.wavelengths[-1] > sensor.cfa.wavelengths[-1] + 1e-9):
        raise StructuralError("irradiance grid extends beyond the tabulated QE curves")
    data = _crop(irr, sensor.rows, sensor.cols)
    qe = sensor.cfa.qe_on(irr.grid)
    px = sensor.pixel
    k = px.fill_factor * (px.pitch * 1e-6) ** 2 * sensor.exposure * irr.grid.step_nm
    out = np.empty((sensor.rows, sensor.cols))
    for ch in sensor.cfa.channels:
        m = sensor.cfa.channel_mask(ch, sensor.rows, sensor.cols)
        out[m] = k * (data[m] @ qe[ch])
    return out


def _collect(mu_signal, sensor, noise, stream, well, dark_scale=1.0, workers=1):
    """Electrons held in the photodetector after shot noise, FPN and well clipping."""
    px = sensor.pixel
    mu = mu_signal + px.dark_current * sensor.exposure * dark_scale
    if not noise:
        return np.clip(mu, 0, well)
    shape = mu.shape
    seed = sensor.seed
    if px.prnu > 0:
        gain = 1 + px.prnu * _tiled(lambda g, sl: g.standard_normal((sl.stop - sl.start, shape[1])),
                                    shape, seed, stream, "prnu", workers)
        mu = mu * np.clip(gain, 0, None)
    e = _tiled(lambda g, sl: g.poisson(mu[sl]).astype(float), shape, seed, stream, "shot", workers)
    if px.dsnu > 0:
        e = e + px.dsnu * _tiled(lambda g, sl: g.standard_normal((sl.stop - sl.start, shape[1])),
                                 shape, seed, stream, "dsnu", workers)
    return np.clip(e, 0, well)


def _read(electrons, sensor, gain_mult, noise, stream, well, workers=1):
    px = sensor.pixel
    gain = px.conversion_gain * sensor.analog_gain * gain_mult
    e = electrons
    if noise and px.read_noise > 0:
        e = e + px.read_noise * _tiled(lambda g, sl: g.standard_normal((sl.stop - sl.start, e.shape[1])),
                                       e.shape, sensor.seed, stream, "read", workers)
    volts = np.clip(e * gain, 0, px.voltage_swing)
    levels = 2 ** int(px.adc_bits) - 1
    lsb = px.voltage_swing / levels
    dn = np.clip(np.rint(volts / lsb), 0, levels).astype(np.uint16 if levels < 65536 else np.uint32)
    if noise:
        volts = dn * lsb
    saturated = (electrons >= well) | (volts >= SATURATION_FRACTION * px.voltage_swing)
    meta = {"lsb_volts": lsb, "lsb_electrons": lsb / gain}
    return SensorImage(volts, dn, electrons, saturated, gain, meta)


def expose(irr: SpectralImage, sensor: SensorSpec, noise: bool = True, workers: int = 1) -> SensorImage:
    """Single-capture readout of an irradiance image.

    With ``noise=False`` the result is the expected response: mean electrons,
    well and swing clipping, and unquantized volts (``dn`` is still filled).
    With noise the returned volts are the ADC output.
    """
    mu = mean_electrons(irr, sensor)
    well = sensor.pixel.well_capacity
    e = _collect(mu, sensor, noise, "pd_large", well, workers=workers)
    return _read(e, sensor, 1.0, noise, "read_main", well, workers)


def expose_split(irr: SpectralImage, sensor: SensorSpec, split: SplitPixelSpec, noise: bool = True,
                 workers: int = 1) -> CaptureSet:
    """Three single-shot captures of a split pixel.

    The large photodetector (``area_split`` of the fill area) is read twice,
    at ``gain_high`` and ``gain_low``, with independent read noise. The small
    photodetector collects ``sensitivity_ratio`` times the large one's signal
    (and dark current) in an independent Poisson draw, read at ``gain_low``.
    """
    mu_large = split.area_split * mean_electrons(irr, sensor)
    well_l = sensor.pixel.well_capacity
    well_s = split.small_well_capacity or well_l
    e_large = _collect(mu_large, sensor, noise, "pd_large", well_l, workers=workers)
    e_small = _collect(mu_large * split.sensitivity_ratio, sensor, noise, "pd_small", well_s,
                       dark_scale=split.sensitivity_ratio, workers=workers)
    lphg = _read(e_large, sensor, split.gain_high, noise, "read_lphg", well_l, workers)
    lplg = _read(e_large, sensor, split.gain_low, noise, "read_lplg", well_l, workers)
    splg = _read(e_small, sensor, split.gain_low, noise, "read_splg", well_s, workers)
    return CaptureSet(lplg=lplg, lphg=lphg, splg=splg, sensor=sensor, split=split)


def photon_count_estimate(luminance: float, f_number: float, pitch: float, exposure: float,
                          fill_factor: float = 1.0, wavelength_nm: float = 555.0) -> float:
    """Expected photons per pixel for a scene of given luminance (555 nm equivalent)."""
    args = dict(luminance=luminance, f_number=f_number, pitch=pitch, exposure=exposure, fill_factor=fill_factor)
    bad = [k for k, v in args.items() if not v > 0]
    if bad:
        raise ConfigurationError(f"arguments must be positive: {bad}")
    lam = wavelength_nm * 1e-9
    photon_radiance = luminance / KM * lam / HC
    return photon_radiance * np.pi / (4 * f_number**2) * (pitch * 1e-6) ** 2 * exposure * fill_factor


# presets ---------------------------------------------------------------------

def _cfa_from_dict(d: Mapping) -> ColorFilterArray:
    pattern = d["pattern"]
    qe = d["qe"]
    if qe.get("model") == "gaussian":
        wl = np.arange(qe.get("start_nm", 380.0), qe.get("stop_nm", 780.0) + 1e-9, qe.get("step_nm", 5.0))
        curves = gaussian_qe(wl, qe["centers_nm"], qe.get("sigma_nm", 40.0), qe.get("peak", 0.8),
                             clear=qe.get("clear", False))
    else:
        wl = np.asarray(qe["wavelengths_nm"], dtype=float)
        curves = {k: np.asarray(v, dtype=float) for k, v in qe["curves"].items()}
    return ColorFilterArray(pattern, wl, curves)


_SENSOR_KEYS = {"name", "rows", "cols", "pixel", "cfa", "exposure", "analog_gain", "seed", "split", "description"}


def sensor_from_dict(d: Mapping, rows: int | None = None, cols: int | None = None, seed: int | None = None,
                     **overrides) -> tuple[SensorSpec, SplitPixelSpec | None]:
    unknown = set(d) - _SENSOR_KEYS
    if unknown:
        raise ConfigurationError(f"unknown sensor keys {sorted(unknown)}")
    try:
        pixel = PixelSpec(**d["pixel"])
    except TypeError as exc:
        raise ConfigurationError(f"pixel section: {exc}") from None
    cfa = _cfa_from_dict(d["cfa"])
    sensor = SensorSpec(
        rows=int(rows if rows is not None else d.get("rows", 64)),
        cols=int(cols if cols is not None else d.get("cols", 64)),
        pixel=pixel,
        cfa=cfa,
        exposure=float(overrides.get("exposure", d.get("exposure", 0.016))),
        analog_gain=float(overrides.get("analog_gain", d.get("analog_gain", 1.0))),
        seed=int(seed if seed is not None else d.get("seed", 0)),
        name=str(d.get("name", "custom")),
    )
    split = None
    if d.get("split") is not None:
        try:
            split = SplitPixelSpec(**d["split"])
        except TypeError as exc:
            raise ConfigurationError(f"split section: {exc}") from None
    return sensor, split


def preset_names() -> list[str]:
    return sorted(p.stem for p in PRESET_DIR.glob("*.yaml"))


def load_sensor_preset(name_or_path: str, **kwargs) -> tuple[SensorSpec, SplitPixelSpec | None]:
    """Load a named preset (see ``preset_names``) or a YAML file path."""
    path = Path(name_or_path)
    if not path.suffix:
        path = PRESET_DIR / f"{name_or_path}.yaml"
    if not path.exists():
        raise ConfigurationError(f"unknown sensor preset {name_or_path!r}; known: {preset_names()}")
    with open(path, encoding="utf-8") as fh:
        return sensor_from_dict(yaml.safe_load(fh), **kwargs)
