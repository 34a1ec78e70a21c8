"""Acceptance suite: thirteen end-to-end checks with their tolerances and time limits.

Each check returns (passed, detail). Under pytest every check is its own test
and a summary line per check is printed at the end of the session; run this
file directly to print the lines without pytest.
"""

from __future__ import annotations

import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent))

from helpers import irradiance_for_electrons  # noqa: E402

from hdrsim import hdr, isp, metrics, optics as O, scenes, sri  # noqa: E402
from hdrsim import sensor as S  # noqa: E402
from hdrsim.config import load_config  # noqa: E402
from hdrsim.errors import SriFormatError  # noqa: E402
from hdrsim.pipeline import canonical_json, run_pipeline  # noqa: E402
from hdrsim.spectral import (  # noqa: E402
    GROUP_KEYS,
    GroupWeights,
    SpectralImage,
    WavelengthGrid,
    compose_light_groups,
)

RESULTS: list[str] = []


def _record(number, title, passed, detail, seconds):
    line = f"[{'PASS' if passed else 'FAIL'}] AC{number:02d} {title}: {detail} ({seconds:.2f} s)"
    RESULTS.append(line)
    return line


def _timed(fn):
    t0 = time.perf_counter()
    passed, detail = fn()
    return passed, detail, time.perf_counter() - t0


# 1 -------------------------------------------------------------------------

def check_psf_correctness():
    t0 = time.perf_counter()
    worst_sum, worst_min = 0.0, 0.0
    grid = WavelengthGrid(400, 50, 7)
    apertures = [O.ApertureSpec(), O.ApertureSpec(n_blades=6, blade_rotation=0.3),
                 O.ApertureSpec(n_blades=5, dust_count=12, scratch_count=3, seed=8),
                 O.ApertureSpec(dust_count=30, occlusion_opacity=0.6, seed=2)]
    wavefronts = [O.WavefrontSpec(), O.WavefrontSpec(((4, 0.3), (6, -0.2), (8, 0.1)))]
    for n in (64, 128, 256):
        for ap in apertures:
            mask = O.synthesize_apodization(ap, n)
            for wf in wavefronts:
                for wl in grid.wavelengths:
                    psf = O.psf_from_pupil(O.build_pupil(mask, wf, wl))
                    worst_sum = max(worst_sum, abs(psf.sum() - 1))
                    worst_min = min(worst_min, psf.min())
                stack = O.compute_psf_stack(mask, wf, grid, target_pitch=1.5)
                worst_sum = max(worst_sum, np.abs(stack.kernels.sum(axis=(1, 2)) - 1).max())
                worst_min = min(worst_min, stack.kernels.min())
    worst_dft = 0.0
    for ap in apertures:
        mask = O.synthesize_apodization(ap, 64)
        for wf in wavefronts:
            pupil = O.build_pupil(mask, wf, 610.0)
            fast = O.psf_from_pupil(pupil)
            worst_dft = max(worst_dft, np.abs(fast - O.psf_direct_dft(pupil)).max() / fast.max())
    dt = time.perf_counter() - t0
    ok = worst_sum <= 1e-6 and worst_min >= 0 and worst_dft <= 1e-9 and dt < 10
    return ok, f"max|sum-1|={worst_sum:.1e}, min={worst_min:.1e}, FFT vs DFT {worst_dft:.1e} of peak"


# 2 -------------------------------------------------------------------------

def check_airy():
    t0 = time.perf_counter()
    wl, f_number = 550.0, 4.0
    mask = O.synthesize_apodization(O.ApertureSpec(), 512, 0.25)
    pupil = O.build_pupil(mask, O.WavefrontSpec(f_number=f_number), wl)
    psf = O.psf_from_pupil(pupil)
    pitch = pupil.psf_pitch_um
    expected = 1.22 * wl * 1e-3 * f_number
    r0 = O.first_zero_radius(psf, pitch)
    k = 61
    c = psf.shape[0] // 2
    crop = psf[c - k // 2 : c + k // 2 + 1, c - k // 2 : c + k // 2 + 1]
    ref = O.airy_reference(f_number, wl, pitch, k)
    bins = np.arange(0, (k // 2) * pitch, pitch)
    measured = O.radial_profile(crop / crop.max(), pitch, bins)
    analytic = O.radial_profile(ref / ref.max(), pitch, bins)
    rms = float(np.sqrt(np.nanmean((measured - analytic) ** 2)))
    dt = time.perf_counter() - t0
    rel = abs(r0 / expected - 1)
    ok = rel < 0.05 and rms < 0.02 and dt < 5
    return ok, f"first zero {r0:.3f} um vs {expected:.3f} um ({rel:.1%}), profile RMS {rms:.1e} of peak"


# 3 -------------------------------------------------------------------------

def check_point_symmetry():
    worst = 0.0
    for seed in range(6):
        for blades in (0, 5, 6, 9):
            ap = O.ApertureSpec(n_blades=blades, dust_count=8, scratch_count=3, seed=seed)
            for n in (64, 128):
                psf = O.psf_from_pupil(O.build_pupil(O.synthesize_apodization(ap, n), O.WavefrontSpec(), 500.0))
                inner = psf[1:, 1:]  # sample n//2 is the origin, so (x, y) -> (-x, -y) is a flip here
                worst = max(worst, np.abs(inner - inner[::-1, ::-1]).max() / psf.max())
    return worst <= 1e-12, f"max |P(x,y) - P(-x,-y)| = {worst:.1e} of peak over 48 pupils"


# 4 -------------------------------------------------------------------------

def check_light_group_linearity():
    t0 = time.perf_counter()
    grid = WavelengthGrid()
    group = scenes.gen_tunnel_scene(128, 128, grid)
    weights = GroupWeights(sky=0.02, headlights=1.7, streetlights=3.0, otherlights=0.4)
    mask = O.synthesize_apodization(O.ApertureSpec(n_blades=6, dust_count=5, seed=1), 128)
    psfs = O.compute_psf_stack(mask, O.WavefrontSpec(), grid, target_pitch=3.0, max_size=33)
    lens = O.OpticsSpec(f_number=4.0, transmission=0.9, relative_illumination=True)
    sensor, _ = S.load_sensor_preset("rgb-bayer-like", rows=128, cols=128)

    def render(radiance):
        irr = O.apply_optics(radiance, psfs, lens, pixel_pitch=3.0)
        return irr.data, S.mean_electrons(irr, sensor)

    irr_a, e_a = render(compose_light_groups(group, weights))
    parts = [render(group[k]) for k in GROUP_KEYS]
    w = weights.as_dict()
    irr_b = sum(w[k] * p[0] for k, p in zip(GROUP_KEYS, parts))
    e_b = sum(w[k] * p[1] for k, p in zip(GROUP_KEYS, parts))
    rel_irr = np.abs(irr_a - irr_b).max() / np.abs(irr_b).max()
    rel_e = np.abs(e_a - e_b).max() / np.abs(e_b).max()
    dt = time.perf_counter() - t0
    ok = max(rel_irr, rel_e) <= 1e-9 and dt < 30
    return ok, f"irradiance {rel_irr:.1e}, electrons {rel_e:.1e} relative on 128x128x31"


# 5 -------------------------------------------------------------------------

def check_photon_budget():
    t0 = time.perf_counter()
    # hand evaluation: (L / Km) W/(sr m^2) at 555 nm divided by the photon energy,
    # times the projected solid angle of an f/4 cone, pixel area and exposure
    oracle = (1 / 683) / (1.98645e-25 / 555e-9) * (np.pi / (4 * 4**2)) * (3e-6) ** 2 * 0.016
    at_one = S.photon_count_estimate(1.0, 4.0, 3.0, 0.016)
    sweep = [S.photon_count_estimate(L, 4.0, 3.0, 0.016) for L in np.linspace(1.0, 2.0, 11)]
    dt = time.perf_counter() - t0
    ok = (abs(at_one - 29) <= 2 and abs(at_one / oracle - 1) < 1e-9
          and all(25 <= n <= 60 for n in sweep) and dt < 1)
    return ok, f"L=1: {at_one:.2f} photons (oracle {oracle:.2f}); L=1-2: {min(sweep):.1f}-{max(sweep):.1f}"


# 6 -------------------------------------------------------------------------

def check_hdr_ramp():
    t0 = time.perf_counter()
    grid = WavelengthGrid()
    rows, cols = 32, 256
    sensor, split = S.load_sensor_preset("splitpixel-3capture", rows=rows, cols=cols)
    ramp = scenes.gen_ramp_scene(rows, cols, grid, decades=5, min_level=1.0)
    irr = O.apply_optics(ramp, O.PsfStack.delta(grid, sensor.pixel.pitch), O.OpticsSpec(f_number=4.0))
    caps = S.expose_split(irr, sensor, split, noise=False)
    truth = split.area_split * S.mean_electrons(irr, sensor) + sensor.pixel.dark_current * sensor.exposure

    lg = caps.lplg
    lg_e = lg.volts / lg.gain
    unusable_px = lg.saturated | (lg_e < 1.0)
    unusable_cols = float(np.mean(unusable_px.mean(axis=0) > 0.5))

    out = hdr.combine3(caps)
    valid = out.valid
    rel_err = float((np.abs(out.values - truth) / truth)[valid].max())
    # monotone along each row within a CFA phase (same channel every other column)
    mono = all(np.all(np.diff(out.values[r, p::2]) >= 0) for r in range(rows) for p in (0, 1))
    # seams: where the source capture changes, the step must match the ramp's own step
    src = out.meta["source"]
    seam = 0.0
    for r in range(rows):
        for p in (0, 1):
            v, t, s, ok = out.values[r, p::2], truth[r, p::2], src[r, p::2], valid[r, p::2]
            for c in np.flatnonzero((s[1:] != s[:-1]) & ok[1:] & ok[:-1]):
                seam = max(seam, abs((v[c + 1] / v[c]) / (t[c + 1] / t[c]) - 1))
    dt = time.perf_counter() - t0
    ok = unusable_cols >= 0.40 and mono and rel_err <= 0.01 and seam < 0.01 and dt < 30
    return ok, (f"LPLG unusable in {unusable_cols:.0%} of columns; combine3 max error {rel_err:.1e}, "
                f"monotone={mono}, worst seam {seam:.1e}")


# 7 -------------------------------------------------------------------------

def check_split_statistics():
    rows, cols = 100, 200  # 10^4 green pixels per level
    sensor, split = S.load_sensor_preset("splitpixel-3capture", rows=rows, cols=cols, seed=17)
    g = sensor.cfa.channel_mask("g", rows, cols)
    dark = sensor.pixel.dark_current * sensor.exposure
    var_ok, total_ok, bias_worst = True, True, 0.0
    notes = []
    for level in (5.0, 20.0, 100.0, 400.0, 1000.0, 3000.0, 3e4, 3e5):
        irr = irradiance_for_electrons(sensor, level, "g", scale=split.area_split)
        caps = S.expose_split(irr, sensor, split, noise=True)
        truth = split.area_split * S.mean_electrons(irr, sensor) + dark
        if not caps.sat_lphg[g].any():
            x_hg = hdr.input_refer(caps.lphg.volts, caps.lphg.gain)
            x_lg = hdr.input_refer(caps.lplg.volts, caps.lplg.gain)
            dual = hdr.combine_dual_gain(x_hg, x_lg, caps.sat_lphg)
            collected = caps.lplg.electrons[g]
            # readout noise about the collected charge, which both reads share
            v_hg = np.var(x_hg.values[g] - collected)
            v_lg = np.var(x_lg.values[g] - collected)
            v_d = np.var(dual.values[g] - collected)
            var_ok &= v_d <= min(v_hg, v_lg)
            if level <= 100:
                # where readout dominates, the total spread must drop as well
                total_ok &= np.var(dual.values[g]) <= min(np.var(x_hg.values[g]), np.var(x_lg.values[g]))
            notes.append(f"{level:g}e: {v_d:.2f}<={min(v_hg, v_lg):.2f}")
        out = hdr.combine3(caps)
        keep = g & out.valid
        if keep.any():
            bias = abs(out.values[keep].mean() - truth[keep].mean()) / truth[keep].mean()
            bias_worst = max(bias_worst, bias)
    ok = var_ok and total_ok and bias_worst < 0.02
    return ok, (f"readout variance dual vs best single [{'; '.join(notes)}]; "
                f"total variance lower at <=100 e: {total_ok}; combine3 worst bias {bias_worst:.2%}")


# 8 -------------------------------------------------------------------------

def check_sensor_physics():
    sensor, _ = S.load_sensor_preset("rgb-bayer-like", rows=2, cols=2)
    px = S.PixelSpec(**{**sensor.pixel.__dict__, "prnu": 0.0, "dsnu": 0.0, "dark_current": 0.0})
    sensor = sensor.with_(pixel=px)
    well = px.well_capacity
    unit = irradiance_for_electrons(sensor, 1.0, "r")
    levels = np.linspace(0, 2 * well, 81)
    got = np.array([S.expose(unit.with_data(unit.data * e), sensor, noise=False).electrons[0, 0] for e in levels])
    below = levels < well
    lin_err = float(np.abs(got[below] - levels[below]).max())
    flat = bool(np.all(got[~below] == well))

    big = sensor.with_(rows=200, cols=200, seed=5)
    mean_target = 2000.0
    img = S.expose(irradiance_for_electrons(big, mean_target, "g"), big, noise=True)
    g = big.cfa.channel_mask("g", 200, 200)
    e = img.volts[g] / img.gain  # 2 * 10^4 samples through the full read chain
    ratio = e.var() / e.mean()
    ok = lin_err < 1e-9 and flat and abs(ratio - 1) < 0.05
    return ok, f"noise-off max deviation {lin_err:.1e} e, flat above well: {flat}; var/mean at 2000 e = {ratio:.3f}"


# 9 -------------------------------------------------------------------------

def _render_quality(preset, irr, truth, grid, trials, n):
    ssim_v, de_v = [], []
    for seed in range(trials):
        sensor, _ = S.load_sensor_preset(preset, rows=n, cols=n, seed=1000 + seed)
        img = S.expose(irr, sensor, noise=True)
        mosaic = img.volts / img.gain
        if "w" in sensor.cfa.channels:
            rgb = isp.demosaic_rgbw(mosaic, sensor.cfa, isp.clear_to_luma_gain(sensor.cfa, grid))
        else:
            rgb = isp.demosaic_bilinear(mosaic, sensor.cfa)
        q = metrics.rendering_quality(truth, isp.sensor_rgb_to_xyz(rgb, sensor, grid))
        ssim_v.append(q["ssim"])
        de_v.append(q["delta_e"])
    return float(np.mean(ssim_v)), float(np.mean(de_v))


def check_rgbw_direction():
    grid = WavelengthGrid()
    n, trials = 64, 100
    lens = O.OpticsSpec(f_number=2.0)
    out = {}
    for label, lux in (("low", 0.1), ("high", 30.0)):
        # grey (white) Lambertian reflector under `lux` illuminance: L = E / pi
        scene = scenes.gen_flat_scene(n, n, grid, lux / np.pi)
        irr = O.apply_optics(scene, O.PsfStack.delta(grid, 3.0), lens)
        truth = isp.spectral_to_xyz(irr)
        out[label] = {p: _render_quality(p, irr, truth, grid, trials, n)
                      for p in ("rgb-bayer-like", "rgbw-onsemi-like")}
    (s_rgb, d_rgb), (s_w, d_w) = out["low"]["rgb-bayer-like"], out["low"]["rgbw-onsemi-like"]
    (hs_rgb, hd_rgb), (hs_w, hd_w) = out["high"]["rgb-bayer-like"], out["high"]["rgbw-onsemi-like"]
    close = abs(hs_w / hs_rgb - 1) <= 0.05 and abs(hd_w / hd_rgb - 1) <= 0.05
    ok = s_w >= s_rgb and d_w <= d_rgb and close
    return ok, (f"0.1 lux SSIM {s_w:.4f} (RGBW) vs {s_rgb:.4f} (RGB), dE {d_w:.1f} vs {d_rgb:.1f}; "
                f"30 lux SSIM {hs_w:.3f} vs {hs_rgb:.3f}, dE {hd_w:.2f} vs {hd_rgb:.2f}")


# 10 ------------------------------------------------------------------------

def _brute_ssim(a, b):
    g = metrics.gaussian_window()
    w = np.outer(g, g)
    c1, c2 = 0.01**2, 0.03**2
    vals = []
    for i in range(a.shape[0] - 10):
        for j in range(a.shape[1] - 10):
            pa, pb = a[i : i + 11, j : j + 11], b[i : i + 11, j : j + 11]
            ma, mb = (w * pa).sum(), (w * pb).sum()
            va, vb = (w * (pa - ma) ** 2).sum(), (w * (pb - mb) ** 2).sum()
            cov = (w * (pa - ma) * (pb - mb)).sum()
            vals.append((2 * ma * mb + c1) * (2 * cov + c2) / ((ma**2 + mb**2 + c1) * (va + vb + c2)))
    return float(np.mean(vals))


def check_metric_oracles():
    rng = np.random.default_rng(10)
    a = rng.random((64, 64))
    b = np.clip(0.8 * a + 0.2 * rng.random((64, 64)), 0, 1)
    self_ssim = metrics.ssim(a, a)
    brute_gap = abs(metrics.ssim(a, b) - _brute_ssim(a, b))
    xyz = rng.random((8, 8, 3))
    white = np.array([0.95047, 1.0, 1.08883])
    self_de = metrics.delta_e(xyz, xyz, white)[0].max()
    # Lab of (0.5, 0.4, 0.3) and (0.004, 0.005, 0.002) under D65, evaluated by hand
    _, de = metrics.delta_e(np.array([0.5, 0.4, 0.3]), np.array([0.004, 0.005, 0.002]), white)
    lab_gap = abs(de - 76.40270994904164)
    ok = self_ssim == 1.0 and brute_gap <= 1e-12 and self_de == 0 and lab_gap <= 1e-9
    return ok, f"ssim(a,a)={self_ssim}, brute-force gap {brute_gap:.1e}, dE(a,a)={self_de}, Lab pair gap {lab_gap:.1e}"


# 11 ------------------------------------------------------------------------

def check_flare_sweep():
    wl, f_number = 550.0, 4.0
    wf = O.WavefrontSpec(f_number=f_number)
    core = 1.22 * wl * 1e-3 * f_number
    counts = (0, 5, 10, 20, 40)
    fractions = []
    for d in counts:
        mask = O.synthesize_apodization(O.ApertureSpec(n_blades=6, dust_count=d, seed=21), 256)
        pupil = O.build_pupil(mask, wf, wl)
        fractions.append(O.off_core_fraction(O.psf_from_pupil(pupil), pupil.psf_pitch_um, core))
    ok = all(b > a for a, b in zip(fractions, fractions[1:]))
    pairs = ", ".join(f"{d}:{f:.4f}" for d, f in zip(counts, fractions))
    return ok, f"off-core energy by dust count {pairs}"


# 12 ------------------------------------------------------------------------

def check_determinism(tmp_dir: Path):
    base = {
        "seed": 2024,
        "scene": {"generator": "tunnel", "params": {"rows": 96, "cols": 96}},
        "compose": {"target_dr": 4.5, "target_mean_luminance": 10.0},
        "optics": {"psf": "flare", "pupil_grid": 128, "aperture": {"n_blades": 6, "dust_count": 6}},
        "sensor": {"preset": "splitpixel-3capture", "rows": 80, "cols": 80, "split": True},
        "reconstruct": "combine3",
        "metrics": ["dynamic_range", "saturation", "profile", "photon_budget"],
        "outputs": {"dir": str(tmp_dir / "run"), "png": True, "csv": True},
    }
    blobs = []
    for workers in (1, 1, 4):
        run_pipeline(load_config(base), workers=workers)
        blobs.append((tmp_dir / "run" / "report.json").read_bytes())
    in_memory = canonical_json(run_pipeline(load_config(base), workers=3, write=False))
    same_runs = blobs[0] == blobs[1]
    same_workers = blobs[0] == blobs[2]
    ok = same_runs and same_workers and len(in_memory) > 0
    return ok, f"two runs identical: {same_runs}; 1 vs 4 workers identical: {same_workers}; {len(blobs[0])} bytes"


# 13 ------------------------------------------------------------------------

def check_sri_format():
    rng = np.random.default_rng(13)
    lossless = 0
    for _ in range(1000):
        grid = WavelengthGrid(float(rng.integers(350, 500)), float(rng.choice([1.0, 2.5, 5.0, 10.0])),
                              int(rng.integers(1, 24)))
        rows, cols = (int(v) for v in rng.integers(1, 12, size=2))
        data = rng.random((rows, cols, grid.count)) * 10.0 ** rng.uniform(-3, 18)
        data = data.astype(np.float32).astype(np.float64)
        data[rng.random(data.shape) < 0.1] = 0.0
        img = SpectralImage(data, grid, str(rng.choice(["radiance", "irradiance"])))
        back = sri.from_bytes(sri.to_bytes(img))
        lossless += bool(np.array_equal(back.data, img.data) and back.grid == grid and back.kind == img.kind)

    template = sri.to_bytes(SpectralImage(np.ones((4, 5, 6)), WavelengthGrid(400, 10, 6)))
    _, header_len = sri.parse_header(template)
    rejected = 0
    for _ in range(1000):
        blob = bytearray(template)
        mode = rng.integers(3)
        if mode == 0:  # flip bytes
            for pos in rng.choice(header_len, size=int(rng.integers(1, 4)), replace=False):
                blob[pos] = (blob[pos] + int(rng.integers(1, 256))) % 256
        elif mode == 1:  # delete a header byte
            del blob[int(rng.integers(header_len))]
        else:  # insert a byte inside the header
            blob.insert(int(rng.integers(header_len)), int(rng.integers(256)))
        try:
            sri.from_bytes(bytes(blob))
        except SriFormatError as exc:
            rejected += bool(str(exc)) and "byte offset" in str(exc)
    ok = lossless == 1000 and rejected == 1000
    return ok, f"{lossless}/1000 lossless round-trips, {rejected}/1000 corrupted headers rejected with offsets"


CHECKS = [
    (1, "PSF correctness", check_psf_correctness),
    (2, "Airy validation", check_airy),
    (3, "Point symmetry", check_point_symmetry),
    (4, "Light-group linearity", check_light_group_linearity),
    (5, "Photon budget", check_photon_budget),
    (6, "HDR reconstruction", check_hdr_ramp),
    (7, "Split-pixel statistics", check_split_statistics),
    (8, "Sensor physics", check_sensor_physics),
    (9, "RGBW direction", check_rgbw_direction),
    (10, "Metric oracles", check_metric_oracles),
    (11, "Flare sweep", check_flare_sweep),
    (12, "Determinism", None),
    (13, "SRI format", check_sri_format),
]


def _run(number, title, fn):
    passed, detail, dt = _timed(fn)
    print(_record(number, title, passed, detail, dt))
    assert passed, detail


def test_ac01_psf_correctness():
    _run(*CHECKS[0])


def test_ac02_airy_validation():
    _run(*CHECKS[1])


def test_ac03_point_symmetry():
    _run(*CHECKS[2])


def test_ac04_light_group_linearity():
    _run(*CHECKS[3])


def test_ac05_photon_budget():
    _run(*CHECKS[4])


def test_ac06_hdr_reconstruction():
    _run(*CHECKS[5])


def test_ac07_split_pixel_statistics():
    _run(*CHECKS[6])


def test_ac08_sensor_physics():
    _run(*CHECKS[7])


def test_ac09_rgbw_direction():
    _run(*CHECKS[8])


def test_ac10_metric_oracles():
    _run(*CHECKS[9])


def test_ac11_flare_sweep():
    _run(*CHECKS[10])


def test_ac12_determinism(tmp_path):
    _run(12, "Determinism", lambda: check_determinism(tmp_path))


def test_ac13_sri_format():
    _run(*CHECKS[12])


if __name__ == "__main__":
    import tempfile

    failures = 0
    for number, title, fn in CHECKS:
        if fn is None:
            tmp = Path(tempfile.mkdtemp())
            fn = lambda tmp=tmp: check_determinism(tmp)  # noqa: E731
        passed, detail, dt = _timed(fn)
        print(_record(number, title, passed, detail, dt))
        failures += not passed
    sys.exit(1 if failures else 0)
