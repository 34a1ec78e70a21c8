import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hdrsim import isp, metrics, scenes
from hdrsim import sensor as S
from hdrsim.errors import ConfigurationError, StructuralError
from hdrsim.spectral import SpectralImage, luminance_map


@pytest.fixture
def bayer():
    return S.load_sensor_preset("rgb-bayer-like", rows=8, cols=8)[0].cfa


@pytest.fixture
def rgbw():
    return S.load_sensor_preset("rgbw-onsemi-like", rows=8, cols=8)[0].cfa


def _mosaic(cfa, values, rows=8, cols=8):
    out = np.zeros((rows, cols))
    for ch, v in values.items():
        out[cfa.channel_mask(ch, rows, cols)] = v
    return out


def test_constant_field_exact(bayer):
    rgb = isp.demosaic_bilinear(_mosaic(bayer, {"r": 3.0, "g": 5.0, "b": 7.0}), bayer)
    np.testing.assert_allclose(rgb[..., 0], 3.0)
    np.testing.assert_allclose(rgb[..., 1], 5.0)
    np.testing.assert_allclose(rgb[..., 2], 7.0)


def test_single_red_sample_stencil(bayer):
    m = np.zeros((4, 4))
    m[2, 2] = 1.0  # an R site in RGGB
    r = isp.demosaic_bilinear(m, bayer)[..., 0]
    assert r[2, 2] == 1.0
    # interior neighbours (edge ones also see the mirrored sample)
    assert r[2, 1] == pytest.approx(0.5) and r[1, 2] == pytest.approx(0.5)
    assert r[1, 1] == pytest.approx(0.25)
    assert r[0, 1] == 0.0


def test_demosaic_linear(bayer, rng):
    a, b = rng.random((8, 8)), rng.random((8, 8))
    lhs = isp.demosaic_bilinear(2 * a + 3 * b, bayer)
    rhs = 2 * isp.demosaic_bilinear(a, bayer) + 3 * isp.demosaic_bilinear(b, bayer)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_grey_ramp_monotone(bayer):
    ramp = np.tile(np.linspace(1, 100, 16), (8, 1))
    rgb = isp.demosaic_bilinear(ramp, bayer)
    assert np.all(np.diff(rgb, axis=1) >= -1e-12)


def test_tile_mismatch(bayer):
    with pytest.raises(StructuralError):
        isp.demosaic_bilinear(np.zeros((7, 8)), bayer)


def test_unknown_channel_rejected():
    wl = np.array([400.0, 700.0])
    cfa = S.ColorFilterArray([["r", "q"], ["g", "b"]], wl, {c: [0.5, 0.5] for c in "rqgb"})
    with pytest.raises(ConfigurationError):
        isp.demosaic_bilinear(np.zeros((2, 2)), cfa)


def test_rgbw_neutral_guide_passthrough(rgbw):
    r, g, b = 2.0, 4.0, 1.0
    luma = 0.299 * r + 0.587 * g + 0.114 * b
    m = _mosaic(rgbw, {"r": r, "g": g, "b": b, "w": luma})
    np.testing.assert_allclose(isp.demosaic_rgbw(m, rgbw), isp.demosaic_bilinear(m, rgbw), rtol=1e-12)


def test_rgbw_zero_and_clamp(rgbw):
    assert not isp.demosaic_rgbw(np.zeros((8, 8)), rgbw).any()
    m = _mosaic(rgbw, {"r": 1.0, "g": 1.0, "b": 1.0, "w": 100.0})
    np.testing.assert_allclose(isp.demosaic_rgbw(m, rgbw), 4.0)
    with pytest.raises(ConfigurationError):
        isp.demosaic_rgbw(np.zeros((8, 8)), S.load_sensor_preset("rgb-bayer-like")[0].cfa)


def test_equal_energy_chromaticity(grid):
    photons = grid.wavelengths / grid.wavelengths[0]  # equal power per nm in photon units
    xyz = isp.spectral_to_xyz(SpectralImage(np.broadcast_to(photons, (1, 1, grid.count)), grid))[0, 0]
    x, y = xyz[:2] / xyz.sum()
    assert x == pytest.approx(1 / 3, abs=0.01)
    assert y == pytest.approx(1 / 3, abs=0.01)


def test_xyz_y_matches_luminance(grid):
    img = scenes.gen_macbeth_scene(grid, patch=4)
    np.testing.assert_allclose(isp.spectral_to_xyz(img)[..., 1], luminance_map(img), rtol=5e-3)
    assert not isp.spectral_to_xyz(img.with_data(np.zeros_like(img.data))).any()


def test_color_matrix_recovers_grey_luminance(grid):
    sensor, _ = S.load_sensor_preset("rgb-bayer-like", rows=8, cols=8)
    m = isp.color_matrix(sensor.cfa, grid)
    assert m.shape == (3, 3)
    photons = np.ones(grid.count)
    resp = isp.channel_responses(sensor.cfa, grid, photons)
    xyz = np.array([resp["r"], resp["g"], resp["b"]]) @ m.T
    truth = photons @ isp.cmf_weights(grid)
    assert xyz[1] == pytest.approx(truth[1], rel=0.05)


def test_srgb_display():
    assert isp.xyz_to_srgb_display(isp.D65_WHITE).tolist() == [255, 255, 255]
    assert not isp.xyz_to_srgb_display(np.zeros(3)).any()
    lin1 = isp.xyz_to_srgb_linear(np.array([0.1, 0.1, 0.1]), 1.0)
    np.testing.assert_allclose(isp.xyz_to_srgb_linear(np.array([0.1, 0.1, 0.1]), 2.0), 2 * lin1)
    with pytest.raises(ConfigurationError):
        isp.xyz_to_srgb_display(np.zeros(3), 0.0)


def _brute_ssim(a, b, data_range=1.0):
    g = metrics.gaussian_window()
    w = np.outer(g, g)
    c1, c2 = (0.01 * data_range) ** 2, (0.03 * data_range) ** 2
    vals = []
    for i in range(a.shape[0] - 10):
        for j in range(a.shape[1] - 10):
            pa, pb = a[i : i + 11, j : j + 11], b[i : i + 11, j : j + 11]
            ma, mb = (w * pa).sum(), (w * pb).sum()
            va = (w * (pa - ma) ** 2).sum()
            vb = (w * (pb - mb) ** 2).sum()
            cov = (w * (pa - ma) * (pb - mb)).sum()
            vals.append((2 * ma * mb + c1) * (2 * cov + c2) / ((ma**2 + mb**2 + c1) * (va + vb + c2)))
    return float(np.mean(vals))


def test_ssim_brute_force(rng):
    a = rng.random((64, 64))
    b = np.clip(a + 0.1 * rng.standard_normal((64, 64)), 0, 1)
    assert metrics.ssim(a, b) == pytest.approx(_brute_ssim(a, b), abs=1e-12)


def test_ssim_identity_and_anticorrelation(rng):
    a = (rng.random((32, 32)) > 0.5).astype(float)
    assert metrics.ssim(a, a) == 1.0
    assert metrics.ssim(a, 1 - a) < 0
    with pytest.raises(StructuralError):
        metrics.ssim(a, a[:30])


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31))
def test_ssim_symmetric(seed):
    r = np.random.default_rng(seed)
    a, b = r.random((16, 16)), r.random((16, 16))
    assert metrics.ssim(a, b) == pytest.approx(metrics.ssim(b, a), abs=1e-14)
    assert metrics.ssim(a, b) < 1


def test_lab_hand_computed():
    white = [0.95047, 1.0, 1.08883]
    lab = metrics.xyz_to_lab(np.array([[0.5, 0.4, 0.3], [0.004, 0.005, 0.002]]), white)
    np.testing.assert_allclose(lab[0], [69.46953076845696, 35.22415179507282, 17.219386442222294], atol=1e-9)
    np.testing.assert_allclose(lab[1], [4.516481481481481, -3.081936996861989, 4.9263381080813575], atol=1e-9)
    _, de = metrics.delta_e(np.array([[0.5, 0.4, 0.3]]), np.array([[0.004, 0.005, 0.002]]), white)
    assert de == pytest.approx(76.40270994904164, abs=1e-9)


def test_delta_e_identity_and_lightness_step():
    white = np.array([0.95047, 1.0, 1.08883])
    a = np.array([[0.3, 0.3, 0.3]])
    assert metrics.delta_e(a, a, white)[1] == 0.0
    # a neutral pair differing only in L*: raise Y so that L* rises by exactly 1
    l0 = metrics.xyz_to_lab(white * 0.2, white)[0]
    y1 = ((l0 + 1 + 16) / 116) ** 3
    _, de = metrics.delta_e(white * 0.2, white * y1, white)
    assert de == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(ConfigurationError):
        metrics.delta_e(a, a, [0.0, 1.0, 1.0])


@settings(max_examples=20, deadline=None)
@given(st.floats(1e-3, 1e3))
def test_delta_e_scale_invariant(k):
    r = np.random.default_rng(1)
    a, b = r.random((4, 3)), r.random((4, 3))
    white = np.array([0.95, 1.0, 1.09])
    assert metrics.delta_e(a * k, b * k, white * k)[1] == pytest.approx(metrics.delta_e(a, b, white)[1], rel=1e-9)
