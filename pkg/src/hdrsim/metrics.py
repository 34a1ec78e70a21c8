"""Image-quality metrics: SSIM and CIELAB Delta E (1976)."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .errors import ConfigurationError, StructuralError

K1, K2 = 0.01, 0.03
WINDOW, SIGMA = 11, 1.5
_EPS = (6 / 29) ** 3


def gaussian_window(size: int = WINDOW, sigma: float = SIGMA) -> np.ndarray:
    """Normalized 1-D Gaussian taps."""
    x = np.arange(size) - (size - 1) / 2
    g = np.exp(-0.5 * (x / sigma) ** 2)
    return g / g.sum()


def _filter_valid(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Separable correlation keeping only windows fully inside the image."""
    h = len(g) // 2
    out = ndimage.correlate1d(img, g, axis=0, mode="constant")
    out = ndimage.correlate1d(out, g, axis=1, mode="constant")
    return out[h : img.shape[0] - h, h : img.shape[1] - h]


def ssim_map(a: np.ndarray, b: np.ndarray, data_range: float = 1.0) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2:
        raise StructuralError(f"ssim needs two equal-size greyscale images, got {a.shape} and {b.shape}")
    if min(a.shape) < WINDOW:
        raise StructuralError(f"images must be at least {WINDOW}x{WINDOW}")
    if data_range <= 0:
        raise ConfigurationError("data_range must be positive")
    g = gaussian_window()
    c1, c2 = (K1 * data_range) ** 2, (K2 * data_range) ** 2
    mu_a, mu_b = _filter_valid(a, g), _filter_valid(b, g)
    var_a = _filter_valid(a * a, g) - mu_a * mu_a
    var_b = _filter_valid(b * b, g) - mu_b * mu_b
    cov = _filter_valid(a * b, g) - mu_a * mu_b
    return ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2))


def ssim(a: np.ndarray, b: np.ndarray, data_range: float = 1.0) -> float:
    """Mean local SSIM over all full 11x11 Gaussian (sigma 1.5) windows."""
    return float(np.mean(ssim_map(a, b, data_range)))


def _f(t: np.ndarray) -> np.ndarray:
    return np.where(t > _EPS, np.cbrt(t), t / (3 * (6 / 29) ** 2) + 4 / 29)


def xyz_to_lab(xyz: np.ndarray, white) -> np.ndarray:
    white = np.asarray(white, dtype=float)
    if white.shape != (3,) or np.any(white <= 0):
        raise ConfigurationError("white point must be three positive tristimulus values")
    f = _f(np.asarray(xyz, dtype=float) / white)
    L = 116 * f[..., 1] - 16
    a = 500 * (f[..., 0] - f[..., 1])
    b = 200 * (f[..., 1] - f[..., 2])
    return np.stack([L, a, b], axis=-1)


def delta_e(a: np.ndarray, b: np.ndarray, white) -> tuple[np.ndarray, float]:
    """CIE 1976 Delta E*ab map between two XYZ images and its mean."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape or a.shape[-1] != 3:
        raise StructuralError("delta_e needs two XYZ arrays of equal shape")
    de = np.linalg.norm(xyz_to_lab(a, white) - xyz_to_lab(b, white), axis=-1)
    return de, float(np.mean(de))


def rendering_quality(truth_xyz: np.ndarray, est_xyz: np.ndarray, white=None) -> dict[str, float]:
    """SSIM of display-linear Y and mean Delta E of an estimate against the ideal XYZ.

    Both images are scaled so the truth's 99th-percentile Y maps to 0.5 and
    clipped to [0, 1] before SSIM (data range 1). Delta E uses ``white``, by
    default D65 chromaticity at that 99th-percentile Y.
    """
    y99 = float(np.percentile(truth_xyz[..., 1], 99))
    if y99 <= 0:
        raise ConfigurationError("reference image is black")
    k = 0.5 / y99
    s = ssim(np.clip(truth_xyz[..., 1] * k, 0, 1), np.clip(est_xyz[..., 1] * k, 0, 1), 1.0)
    if white is None:
        white = np.array([0.95047, 1.0, 1.08883]) * y99
    _, de = delta_e(truth_xyz, np.clip(est_xyz, 0, None), white)
    return {"ssim": s, "delta_e": de}
