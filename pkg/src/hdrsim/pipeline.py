"""Configuration-driven end-to-end run: scene -> compose -> optics -> sensor -> reconstruct -> metrics."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np
import scipy

from . import __version__, isp, metrics, scenes, sri
from .config import RunConfig, load_config, stage_seed
from .errors import ConfigurationError, HdrSimError, StageError
from .export import export_csv, export_png
from .hdr import combine3
from .optics import (
    ApertureSpec,
    OpticsSpec,
    PsfStack,
    WavefrontSpec,
    apply_optics,
    compute_psf_stack,
    synthesize_apodization,
)
from .sensor import expose, expose_split, load_sensor_preset, photon_count_estimate
from .spectral import (
    GROUP_KEYS,
    GroupWeights,
    LightGroup,
    WavelengthGrid,
    compose_light_groups,
    dynamic_range,
    line_profile,
    luminance_map,
    set_weights_for_target,
)

_GENERATORS = {
    "tunnel": scenes.gen_tunnel_scene,
    "ramp": scenes.gen_ramp_scene,
    "point_grid": scenes.gen_point_grid_scene,
    "macbeth": scenes.gen_macbeth_scene,
    "flat": scenes.gen_flat_scene,
}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, float) and not np.isfinite(x):
        return repr(x)
    return x


def canonical_json(obj) -> bytes:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=1, allow_nan=False).encode("utf-8")


class _Stage:
    def __init__(self, name, path=None):
        self.name, self.path = name, path

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, StageError) and isinstance(exc, (HdrSimError, ValueError, TypeError, OSError, KeyError)):
            raise StageError(self.name, f"{type(exc).__name__}: {exc}", self.path) from exc
        return False


def _load_scene(cfg: RunConfig):
    s = cfg.scene
    grid = WavelengthGrid(**asdict(s.grid))
    if s.generator is not None:
        params = dict(s.params)
        if s.generator != "macbeth" or "grid" not in params:
            params["grid"] = grid
        try:
            return _GENERATORS[s.generator](**params)
        except TypeError as exc:
            raise ConfigurationError(f"bad generator parameters: {exc}") from None
    if set(s.files) == {"radiance"}:
        return sri.read_sri(s.files["radiance"])
    return LightGroup({k: sri.read_sri(s.files[k]) for k in GROUP_KEYS})


def _psfs(cfg: RunConfig, grid: WavelengthGrid, pitch: float, seed: int, workers: int) -> PsfStack:
    o = cfg.optics
    if o.psf == "delta":
        return PsfStack.delta(grid, pitch)
    aperture = dict(o.aperture)
    aperture.setdefault("seed", seed)
    for key in ("dust_radius_range", "scratch_width_range", "scratch_length_range"):
        if key in aperture:
            aperture[key] = tuple(aperture[key])
    wf = dict(o.wavefront)
    wf["zernike_coeffs"] = tuple(tuple(t) for t in wf.get("zernike_coeffs", ()))
    lens = OpticsSpec(**o.lens)
    wf.setdefault("f_number", lens.f_number)
    wf.setdefault("focal_length", lens.focal_length)
    try:
        spec, wfs = ApertureSpec(**aperture), WavefrontSpec(**wf)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from None
    mask = synthesize_apodization(spec, o.pupil_grid, o.pupil_fill)
    return compute_psf_stack(mask, wfs, grid, target_pitch=pitch, crop_energy=o.crop_energy,
                             max_size=o.max_kernel, workers=workers)


def run_pipeline(config, workers: int = 1, write: bool = True) -> dict:
    """Execute one configured run and return its report.

    The report holds the normalized configuration, every derived seed,
    per-stage summaries, metric values, artifact digests and library
    versions. ``workers`` only changes speed; the report is identical for
    any value.
    """
    cfg = config if isinstance(config, RunConfig) else load_config(config)
    seeds = {name: stage_seed(cfg.seed, name) for name in ("optics", "sensor")}
    report = {
        "config": cfg.to_dict(),
        "seeds": {"master": cfg.seed, **seeds},
        "versions": {"hdrsim": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
        "stages": {},
        "metrics": {},
        "artifacts": {},
    }
    out_dir = Path(cfg.outputs.dir) if cfg.outputs.dir else None
    arrays = {}

    with _Stage("scene", "scene"):
        scene = _load_scene(cfg)
        report["stages"]["scene"] = {
            "type": "light_group" if isinstance(scene, LightGroup) else "spectral_image",
            "shape": list(scene.shape),
            "grid": asdict(scene.grid),
        }

    with _Stage("compose", "compose"):
        c = cfg.compose
        if isinstance(scene, LightGroup):
            if c.target_dr is not None:
                fit = set_weights_for_target(scene, c.target_dr, c.target_mean_luminance,
                                             GroupWeights(**(c.weights or {})), c.fixed,
                                             tuple(c.clip_percentiles))
                weights = fit.weights
                report["stages"]["compose"] = {"weights": weights.as_dict(), "reachable": fit.reachable,
                                               "achieved_dr": fit.dynamic_range,
                                               "achieved_mean_luminance": fit.mean_luminance}
            else:
                weights = GroupWeights(**(c.weights or {}))
                report["stages"]["compose"] = {"weights": weights.as_dict()}
            radiance = compose_light_groups(scene, weights)
        else:
            radiance = scene
            report["stages"]["compose"] = {"weights": None}
        arrays["radiance"] = radiance
        lum = luminance_map(radiance)
        report["metrics"]["scene_dynamic_range"] = dynamic_range(lum, tuple(c.clip_percentiles))
        report["metrics"]["scene_mean_luminance"] = float(lum.mean())

    if cfg.sensor.preset in ("", "none"):
        return _finish(report, cfg, out_dir, arrays, write)

    with _Stage("sensor-setup", "sensor"):
        sc = cfg.sensor
        overrides = {k: v for k, v in (("exposure", sc.exposure), ("analog_gain", sc.analog_gain)) if v is not None}
        probe, split = load_sensor_preset(sc.preset, seed=seeds["sensor"], **overrides)
        ty, tx = probe.cfa.tile
        rows = sc.rows if sc.rows is not None else radiance.rows - radiance.rows % ty
        cols = sc.cols if sc.cols is not None else radiance.cols - radiance.cols % tx
        sensor = probe.with_(rows=rows, cols=cols)
        if sc.split and split is None:
            raise ConfigurationError(f"preset {sc.preset!r} has no split-pixel section")

    with _Stage("optics", "optics"):
        psfs = _psfs(cfg, radiance.grid, sensor.pixel.pitch, seeds["optics"], workers)
        lens = OpticsSpec(**cfg.optics.lens)
        irradiance = apply_optics(radiance, psfs, lens, pixel_pitch=sensor.pixel.pitch, workers=workers)
        arrays["irradiance"] = irradiance
        report["stages"]["optics"] = {"psf": cfg.optics.psf, "kernel_size": psfs.size,
                                      "psf_pitch_um": psfs.sample_pitch, "lens": asdict(lens)}

    with _Stage("sensor", "sensor"):
        report["stages"]["sensor"] = {"name": sensor.name, "rows": rows, "cols": cols,
                                      "exposure": sensor.exposure, "analog_gain": sensor.analog_gain,
                                      "pixel": asdict(sensor.pixel), "cfa": [list(r) for r in sensor.cfa.pattern],
                                      "split": asdict(split) if sc.split else None, "noise": sc.noise}
        if sc.split:
            caps = expose_split(irradiance, sensor, split, noise=sc.noise, workers=workers)
            arrays["lplg"] = caps.lplg
            report["metrics"]["saturated_fraction"] = {
                "lphg": float(caps.sat_lphg.mean()), "lplg": float(caps.sat_lplg.mean()),
                "splg": float(caps.sat_splg.mean())}
        else:
            capture = expose(irradiance, sensor, noise=sc.noise, workers=workers)
            arrays["capture"] = capture
            report["metrics"]["saturated_fraction"] = float(capture.saturated.mean())

    with _Stage("reconstruct", "reconstruct"):
        method = cfg.reconstruct
        if method == "combine3":
            combined = combine3(caps)
            arrays["combined"] = combined
            report["stages"]["reconstruct"] = {"method": method, "invalid_fraction": float(1 - combined.valid.mean()),
                                               "clamp_value": combined.meta["clamp_value"]}
        elif method.startswith("demosaic"):
            cap = arrays.get("capture") or caps.lplg
            electrons = cap.volts / cap.gain
            if method == "demosaic_rgbw":
                rgb = isp.demosaic_rgbw(electrons, sensor.cfa, isp.clear_to_luma_gain(sensor.cfa, radiance.grid))
            else:
                rgb = isp.demosaic_bilinear(electrons, sensor.cfa)
            xyz = isp.sensor_rgb_to_xyz(rgb, sensor, radiance.grid)
            arrays["xyz"] = xyz
            report["stages"]["reconstruct"] = {"method": method}
        else:
            report["stages"]["reconstruct"] = {"method": "none"}

    with _Stage("metrics", "metrics"):
        m = report["metrics"]
        row = cfg.profile_row if cfg.profile_row is not None else rows // 2
        if "photon_budget" in cfg.metrics:
            m["photons_per_pixel_estimate"] = photon_count_estimate(
                max(float(lum.mean()), 1e-300), lens.f_number, sensor.pixel.pitch, sensor.exposure,
                sensor.pixel.fill_factor)
        if "profile" in cfg.metrics:
            r0 = (radiance.rows - rows) // 2
            prof = {"row": row, "scene_luminance": line_profile(lum, r0 + row)[(radiance.cols - cols) // 2:][:cols]}
            if sc.split:
                prof["lplg_volts"] = line_profile(caps.lplg.volts, row)
                prof["lplg_saturated"] = line_profile(caps.sat_lplg, row).astype(int)
                if "combined" in arrays:
                    prof["combined_electrons"] = line_profile(arrays["combined"].values, row)
                    prof["combined_valid"] = line_profile(arrays["combined"].valid, row).astype(int)
            else:
                prof["volts"] = line_profile(arrays["capture"].volts, row)
                prof["saturated"] = line_profile(arrays["capture"].saturated, row).astype(int)
            m["profile"] = prof
            arrays["profile"] = prof
        if {"ssim", "delta_e"} & set(cfg.metrics):
            truth = isp.spectral_to_xyz(irradiance)
            r0, c0 = (irradiance.rows - rows) // 2, (irradiance.cols - cols) // 2
            truth = truth[r0 : r0 + rows, c0 : c0 + cols]
            q = metrics.rendering_quality(truth, arrays["xyz"])
            if "ssim" in cfg.metrics:
                m["ssim"] = q["ssim"]
            if "delta_e" in cfg.metrics:
                m["delta_e_mean"] = q["delta_e"]

    return _finish(report, cfg, out_dir, arrays, write)


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _finish(report, cfg, out_dir, arrays, write):
    if "dynamic_range" not in cfg.metrics:
        report["metrics"].pop("scene_dynamic_range", None)
    if out_dir is not None and write:
        with _Stage("outputs", "outputs"):
            out_dir.mkdir(parents=True, exist_ok=True)
            written = []
            if cfg.outputs.csv and "profile" in arrays:
                p = out_dir / "profile.csv"
                prof = {k: v for k, v in arrays["profile"].items() if k != "row"}
                export_csv(p, prof)
                written.append(p)
            if cfg.outputs.sri:
                for key in ("radiance", "irradiance"):
                    if key in arrays:
                        p = out_dir / f"{key}.sri"
                        sri.write_sri(p, arrays[key])
                        written.append(p)
            if cfg.outputs.png:
                if "xyz" in arrays:
                    xyz = arrays["xyz"]
                    img = isp.xyz_to_srgb_display(np.clip(xyz, 0, None), isp.grey_world_exposure(np.clip(xyz, 0, None)))
                elif "combined" in arrays:
                    v = np.log10(np.clip(arrays["combined"].values, 1.0, None))
                    img = np.rint(255 * v / max(v.max(), 1e-12)).astype(np.uint8)
                else:
                    cap = arrays.get("capture") or arrays.get("lplg")
                    img = None if cap is None else np.rint(255 * cap.volts / cap.volts.max()).astype(np.uint8) \
                        if cap.volts.max() > 0 else np.zeros(cap.volts.shape, np.uint8)
                if img is not None:
                    p = out_dir / "render.png"
                    export_png(p, img)
                    written.append(p)
            report["artifacts"] = {p.name: _digest(p) for p in written}
            blob = canonical_json(report)
            (out_dir / cfg.outputs.report).write_bytes(blob)
    return _jsonable(report)


def report_digest(report: dict) -> str:
    return hashlib.sha256(canonical_json(report)).hexdigest()
