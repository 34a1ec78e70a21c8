"""Input-referring and fusion of the three split-pixel captures."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, StructuralError
from .sensor import CaptureSet, SensorImage, SplitPixelSpec


@dataclass(frozen=True, eq=False)
class InputReferredImage:
    """Linear estimates in large-photodetector electrons plus a validity mask."""

    values: np.ndarray
    valid: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.values.shape


def input_refer(volts: np.ndarray, conversion_gain: float, analog_gain: float = 1.0,
                sensitivity_scale: float = 1.0, lsb_volts: float | None = None) -> InputReferredImage:
    if conversion_gain <= 0 or analog_gain <= 0 or sensitivity_scale <= 0:
        raise ConfigurationError("gains and sensitivity scale must be positive")
    total = conversion_gain * analog_gain * sensitivity_scale
    values = np.asarray(volts, dtype=float) / total
    meta = {"volts_per_unit": total}
    if lsb_volts is not None:
        meta["quantization_floor"] = lsb_volts / total
    return InputReferredImage(values, np.ones(values.shape, dtype=bool), meta)


def combine_dual_gain(x_hg: InputReferredImage, x_lg: InputReferredImage, sat_hg: np.ndarray) -> InputReferredImage:
    """Average of the two reads; low gain alone where the high-gain read saturated."""
    sat_hg = np.asarray(sat_hg, dtype=bool)
    if x_hg.shape != x_lg.shape or sat_hg.shape != x_lg.shape:
        raise StructuralError("dual-gain inputs differ in shape")
    values = np.where(sat_hg, x_lg.values, 0.5 * (x_hg.values + x_lg.values))
    return InputReferredImage(values, x_lg.valid.copy(), {"source": np.where(sat_hg, 1, 0)})


def _refer(img: SensorImage, scale: float = 1.0) -> InputReferredImage:
    return input_refer(img.volts, img.gain, 1.0, scale, img.meta.get("lsb_volts"))


def combine3(captures: CaptureSet, split: SplitPixelSpec | None = None) -> InputReferredImage:
    """Fuse LPHG, LPLG and SPLG into one HDR estimate.

    Large-photodetector data are used wherever LPLG is unsaturated. Where it
    saturates, the input-referred SPLG value replaces it. Pixels where all
    three captures saturate are clamped to the largest SPLG value and marked
    invalid. ``meta['source']`` records 0 = dual-gain average, 1 = LPLG only,
    2 = SPLG, 3 = clamped.
    """
    split = split or captures.split
    sat_hg, sat_lg, sat_sp = captures.sat_lphg, captures.sat_lplg, captures.sat_splg
    if not (sat_hg.shape == sat_lg.shape == sat_sp.shape):
        raise StructuralError("capture masks differ in shape")
    if np.any(sat_lg & ~sat_hg):
        raise StructuralError("inconsistent masks: LPLG saturated where LPHG is not")
    if np.any(sat_sp & ~sat_lg):
        raise StructuralError("inconsistent masks: SPLG saturated where LPLG is not")

    # each capture's gain already includes conversion, analog and dual-gain factors
    x_hg = _refer(captures.lphg)
    x_lg = _refer(captures.lplg)
    x_sp = _refer(captures.splg, split.sensitivity_ratio)
    large = combine_dual_gain(x_hg, x_lg, sat_hg)

    px = captures.sensor.pixel
    well_s = split.small_well_capacity or px.well_capacity
    sp_max = min(px.voltage_swing / captures.splg.gain, well_s) / split.sensitivity_ratio

    values = np.where(sat_lg, x_sp.values, large.values)
    values = np.where(sat_sp, sp_max, values)
    source = np.select([sat_sp, sat_lg, sat_hg], [3, 2, 1], 0)
    meta = {"source": source, "clamp_value": sp_max, "quantization_floor": x_hg.meta.get("quantization_floor")}
    return InputReferredImage(values, ~sat_sp, meta)


def single_capture(img: SensorImage, floor: float = 1.0) -> InputReferredImage:
    """Input-refer one capture; invalid where saturated or below ``floor`` electrons."""
    x = _refer(img)
    valid = ~img.saturated & (x.values >= floor)
    return InputReferredImage(x.values, valid, x.meta)
