"""Spectral images, light-group composition and photometry.

Spectral samples are photon rates: radiance in photons/(s sr m^2 nm) and
irradiance in photons/(s m^2 nm). Photometric quantities convert through the
photon energy h*c/lambda.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping

import numpy as np

from . import _tables
from .errors import BoundsError, DomainError, StructuralError

HC = 1.98645e-25  # J m
KM = 683.0  # lm/W
GROUP_KEYS = ("sky", "headlights", "streetlights", "otherlights")
KINDS = ("radiance", "irradiance")
_UNITS = {
    "radiance": "photons/s/sr/m^2/nm",
    "irradiance": "photons/s/m^2/nm",
}


@dataclass(frozen=True)
class WavelengthGrid:
    start_nm: float = 400.0
    step_nm: float = 10.0
    count: int = 31

    def __post_init__(self):
        if not self.step_nm > 0:
            raise DomainError("wavelength step must be positive")
        if int(self.count) != self.count or self.count < 1:
            raise DomainError("wavelength count must be a positive integer")
        object.__setattr__(self, "count", int(self.count))
        stop = self.start_nm + self.step_nm * (self.count - 1)
        if self.start_nm < 350 or stop > 780:
            raise DomainError(f"grid {self.start_nm}-{stop} nm leaves [350, 780] nm")

    @property
    def wavelengths(self) -> np.ndarray:
        return self.start_nm + self.step_nm * np.arange(self.count)

    @classmethod
    def from_wavelengths(cls, wavelengths: Iterable[float]) -> "WavelengthGrid":
        wl = np.asarray(list(wavelengths), dtype=float)
        if wl.size == 1:
            return cls(float(wl[0]), 1.0, 1)
        steps = np.diff(wl)
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
            raise StructuralError("wavelength samples are not uniformly spaced")
        return cls(float(wl[0]), float(steps[0]), wl.size)


@dataclass(frozen=True, eq=False)
class SpectralImage:
    """rows x cols x bands array of nonnegative photon rates."""

    data: np.ndarray
    grid: WavelengthGrid = field(default_factory=WavelengthGrid)
    kind: str = "radiance"
    meta: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 2 and self.grid.count == 1:
            data = data[:, :, None]
        if data.ndim != 3 or data.shape[2] != self.grid.count:
            raise StructuralError(
                f"data shape {data.shape} does not match {self.grid.count} wavelength samples"
            )
        if self.kind not in KINDS:
            raise DomainError(f"unknown spectral image kind {self.kind!r}")
        if not np.all(np.isfinite(data)):
            raise DomainError("spectral samples must be finite")
        if np.any(data < 0):
            raise DomainError("spectral samples must be nonnegative")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[:2]

    @property
    def units(self) -> str:
        return _UNITS[self.kind]

    def with_data(self, data: np.ndarray, **changes) -> "SpectralImage":
        return replace(self, data=data, **changes)

    def same_layout(self, other: "SpectralImage") -> bool:
        return self.shape == other.shape and self.grid == other.grid and self.kind == other.kind


@dataclass(frozen=True)
class GroupWeights:
    sky: float = 1.0
    headlights: float = 1.0
    streetlights: float = 1.0
    otherlights: float = 1.0

    def __post_init__(self):
        for key in GROUP_KEYS:
            w = float(getattr(self, key))
            if not np.isfinite(w) or w < 0:
                raise DomainError(f"weight {key}={w} must be finite and nonnegative")
            object.__setattr__(self, key, w)

    def as_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in GROUP_KEYS}

    def scaled(self, factor: float) -> "GroupWeights":
        return GroupWeights(**{k: v * factor for k, v in self.as_dict().items()})

    @classmethod
    def only(cls, key: str, value: float = 1.0) -> "GroupWeights":
        w = dict.fromkeys(GROUP_KEYS, 0.0)
        w[key] = value
        return cls(**w)


class LightGroup:
    """Four radiance renderings of one scene, one per source class."""

    def __init__(self, members: Mapping[str, SpectralImage], meta: Mapping[str, Any] | None = None):
        if set(members) != set(GROUP_KEYS):
            raise StructuralError(f"light group needs exactly the keys {GROUP_KEYS}")
        ref = members["sky"]
        for key in GROUP_KEYS:
            m = members[key]
            if m.kind != "radiance":
                raise StructuralError(f"light group member {key!r} is not radiance")
            if not ref.same_layout(m):
                raise StructuralError(f"light group member {key!r} has a different geometry or grid")
        self.members = {k: members[k] for k in GROUP_KEYS}
        self.meta = dict(meta or {})

    def __getitem__(self, key: str) -> SpectralImage:
        return self.members[key]

    @property
    def grid(self) -> WavelengthGrid:
        return self.members["sky"].grid

    @property
    def shape(self) -> tuple[int, int]:
        return self.members["sky"].shape


def compose_light_groups(group: LightGroup, weights: GroupWeights) -> SpectralImage:
    """Weighted sum of the light-group members, pixel by pixel and band by band."""
    out = np.zeros_like(group["sky"].data)
    for key in GROUP_KEYS:
        w = getattr(weights, key)
        if w:
            out += w * group[key].data
    meta = {"weights": weights.as_dict()}
    return SpectralImage(out, group.grid, "radiance", meta)


def photopic(wavelengths: np.ndarray) -> np.ndarray:
    """CIE 1924 V(lambda), linearly interpolated from the 5 nm table."""
    return _tables.resample(_tables.cie1931(), 4, np.asarray(wavelengths, dtype=float))


def _photometric_weights(grid: WavelengthGrid) -> np.ndarray:
    wl = grid.wavelengths
    return KM * photopic(wl) * (HC / (wl * 1e-9)) * grid.step_nm


def luminance_map(img: SpectralImage) -> np.ndarray:
    """Luminance in cd/m^2 of a radiance image."""
    if img.kind != "radiance":
        raise DomainError("luminance_map needs radiance; use illuminance_map for irradiance")
    return img.data @ _photometric_weights(img.grid)


def illuminance_map(img: SpectralImage) -> np.ndarray:
    """Illuminance in lux of an irradiance image."""
    if img.kind != "irradiance":
        raise DomainError("illuminance_map needs irradiance")
    return img.data @ _photometric_weights(img.grid)


def photon_radiance_for_luminance(
    luminance: float, grid: WavelengthGrid, spectrum: np.ndarray | None = None
) -> np.ndarray:
    """Photon spectrum (flat in photons by default) whose luminance equals ``luminance``."""
    shape = np.ones(grid.count) if spectrum is None else np.asarray(spectrum, dtype=float)
    per_unit = float(shape @ _photometric_weights(grid))
    if per_unit <= 0:
        raise DomainError("spectrum has no photopic content on this grid")
    return shape * (luminance / per_unit)


def dynamic_range(lum: np.ndarray, clip_percentiles: tuple[float, float] = (0.1, 99.9)) -> float:
    """log10 ratio of high to low percentile over the strictly positive samples."""
    values = np.asarray(lum, dtype=float).ravel()
    values = values[values > 0]
    if values.size == 0:
        raise DomainError("dynamic range undefined: no positive samples")
    lo, hi = np.percentile(values, clip_percentiles)
    return float(np.log10(hi / lo))


def line_profile(img: np.ndarray, row: int) -> np.ndarray:
    img = np.asarray(img)
    if not 0 <= row < img.shape[0]:
        raise BoundsError(f"row {row} outside [0, {img.shape[0]})")
    return img[row].copy()


@dataclass(frozen=True)
class WeightFit:
    weights: GroupWeights
    dynamic_range: float
    mean_luminance: float
    reachable: bool


def set_weights_for_target(
    group: LightGroup,
    target_dr: float,
    target_mean_lum: float,
    initial: GroupWeights | None = None,
    fixed: Iterable[str] = (),
    clip_percentiles: tuple[float, float] = (0.1, 99.9),
    max_iter: int = 60,
) -> WeightFit:
    """Pick group weights that hit a dynamic range and a mean luminance.

    The sky weight is bisected (in log space) relative to the summed
    luminance of the other groups, which stay at their ``initial`` values.
    The bisection runs on the bright-sky side of the dynamic-range minimum;
    a final global scale of every weight sets the mean luminance. Because
    dynamic range ignores global scale, the search depends only on weight
    ratios, so re-solving from a returned answer reproduces it.
    """
    fixed = set(fixed)
    if "sky" in fixed:
        raise DomainError("the sky weight must be free")
    unknown = fixed - set(GROUP_KEYS)
    if unknown:
        raise DomainError(f"unknown light-group keys {sorted(unknown)}")
    if target_mean_lum <= 0:
        raise DomainError("target mean luminance must be positive")
    w0 = (initial or GroupWeights()).as_dict()

    lum = {k: luminance_map(group[k]) for k in GROUP_KEYS}
    rest = sum(w0[k] * lum[k] for k in GROUP_KEYS if k != "sky")
    sky = lum["sky"]
    sky_mean, rest_mean = float(sky.mean()), float(np.mean(rest))
    if sky_mean <= 0 and rest_mean <= 0:
        raise DomainError("light group has no luminance")

    if sky_mean <= 0 or rest_mean <= 0:
        # only one contributor: dynamic range cannot be steered
        sky_w = w0["sky"] if sky_mean > 0 else 0.0
        composite = sky_w * sky + rest
        achieved = dynamic_range(composite, clip_percentiles)
        reachable = abs(achieved - target_dr) <= 0.02 * abs(target_dr)
    else:
        # ratio = sky mean luminance / rest mean luminance
        def dr_at(log_ratio):
            return dynamic_range(sky * (10.0**log_ratio / sky_mean) + rest / rest_mean, clip_percentiles)

        # dynamic range is U-shaped in the ratio (either the sky or the rest ends
        # up as the dim tail), so bisect on the branch where the sky dominates
        scan = np.linspace(-12.0, 12.0, 97)
        drs = np.array([dr_at(x) for x in scan])
        i_min = int(np.argmin(drs))
        lo, hi = float(scan[i_min]), 12.0
        f_lo, f_hi = drs[i_min] - target_dr, drs[-1] - target_dr
        if f_lo > 0 or f_hi < 0:
            log_ratio = lo if f_lo > 0 else hi
            reachable = False
        else:
            for _ in range(max_iter):
                mid = 0.5 * (lo + hi)
                f_mid = dr_at(mid) - target_dr
                if f_mid == 0:
                    lo = hi = mid
                    break
                if f_mid < 0:
                    lo = mid
                else:
                    hi = mid
            log_ratio = 0.5 * (lo + hi)
            reachable = True
        sky_w = 10.0**log_ratio * rest_mean / sky_mean
        composite = sky_w * sky + rest
        achieved = dynamic_range(composite, clip_percentiles)
        if reachable:
            reachable = abs(achieved - target_dr) <= 0.02 * abs(target_dr)

    scale = target_mean_lum / float(np.mean(composite))
    weights = GroupWeights(**{**w0, "sky": sky_w}).scaled(scale)
    return WeightFit(weights, achieved, float(np.mean(composite)) * scale, reachable)
