"""Command-line front end.

Spectral images travel as SRI files, PSF stacks and sensor captures as .npz
archives. Every subcommand prints a JSON run report that echoes all numeric
options; ``--report PATH`` also writes it to disk. Failures exit with status
1 and a stage-tagged message on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, isp, metrics, scenes, sri
from .errors import HdrSimError
from .export import export_png, export_profile_csv
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
from .pipeline import canonical_json, report_digest, run_pipeline
from .sensor import (
    CaptureSet,
    SensorImage,
    expose,
    expose_split,
    load_sensor_preset,
    preset_names,
)
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


def _grid(a) -> WavelengthGrid:
    return WavelengthGrid(a.grid_start, a.grid_step, a.grid_count)


def _add_grid(p):
    p.add_argument("--grid-start", type=float, default=400.0, help="first wavelength, nm")
    p.add_argument("--grid-step", type=float, default=10.0, help="wavelength step, nm")
    p.add_argument("--grid-count", type=int, default=31, help="number of bands")


def _weights(text: str | None) -> GroupWeights:
    if not text:
        return GroupWeights()
    pairs = dict(item.split("=", 1) for item in text.split(","))
    return GroupWeights(**{k.strip(): float(v) for k, v in pairs.items()})


# capture archives ------------------------------------------------------------

def _save_images(path: Path, images: dict[str, SensorImage], meta: dict) -> None:
    arrays = {}
    for name, img in images.items():
        arrays[f"{name}_volts"] = img.volts
        arrays[f"{name}_dn"] = img.dn
        arrays[f"{name}_electrons"] = img.electrons
        arrays[f"{name}_saturated"] = img.saturated
        arrays[f"{name}_gain"] = np.array(img.gain)
        arrays[f"{name}_lsb_volts"] = np.array(img.meta["lsb_volts"])
    arrays["meta"] = np.array(json.dumps(meta, sort_keys=True))
    np.savez(path, **arrays)


def _load_images(path: Path) -> tuple[dict[str, SensorImage], dict]:
    with np.load(path) as z:
        meta = json.loads(str(z["meta"]))
        images = {}
        for name in meta["captures"]:
            images[name] = SensorImage(z[f"{name}_volts"], z[f"{name}_dn"], z[f"{name}_electrons"],
                                       z[f"{name}_saturated"], float(z[f"{name}_gain"]),
                                       {"lsb_volts": float(z[f"{name}_lsb_volts"])})
    return images, meta


def _sensor_from_meta(meta: dict):
    return load_sensor_preset(meta["preset"], rows=meta["rows"], cols=meta["cols"], seed=meta["seed"],
                              exposure=meta["exposure"], analog_gain=meta["analog_gain"])


# subcommands -----------------------------------------------------------------

def cmd_gen_scene(a) -> dict:
    grid = _grid(a)
    out = Path(a.output)
    if a.kind == "ramp":
        img = scenes.gen_ramp_scene(a.rows, a.cols, grid, a.decades, a.min_level)
    elif a.kind == "point-grid":
        img = scenes.gen_point_grid_scene(a.rows, a.cols, grid, a.n_sources, a.top_level, a.decade_step,
                                          a.background_level)
    elif a.kind == "flat":
        img = scenes.gen_flat_scene(a.rows, a.cols, grid, a.level)
    elif a.kind == "macbeth":
        img = scenes.gen_macbeth_scene(grid, a.patch, a.level)
    else:
        group = scenes.gen_tunnel_scene(a.rows, a.cols, grid, a.interior_level, a.exit_level)
        files = {}
        for key in GROUP_KEYS:
            p = out.with_name(f"{out.stem}_{key}.sri")
            sri.write_sri(p, group[key])
            files[key] = str(p)
        return {"files": files}
    sri.write_sri(out, img)
    return {"files": {"radiance": str(out)},
            "dynamic_range": dynamic_range(luminance_map(img), (0.0, 100.0))}


def cmd_compose(a) -> dict:
    group = LightGroup({k: sri.read_sri(getattr(a, k)) for k in GROUP_KEYS})
    result = {}
    if a.target_dr is not None:
        fit = set_weights_for_target(group, a.target_dr, a.target_mean, _weights(a.weights),
                                     [k for k in (a.fixed or "").split(",") if k])
        weights = fit.weights
        result.update(reachable=fit.reachable, achieved_dr=fit.dynamic_range,
                      achieved_mean_luminance=fit.mean_luminance)
    else:
        weights = _weights(a.weights)
    img = compose_light_groups(group, weights)
    sri.write_sri(a.output, img)
    lum = luminance_map(img)
    result.update(weights=weights.as_dict(), dynamic_range=dynamic_range(lum), mean_luminance=float(lum.mean()))
    return result


def _aperture(a) -> ApertureSpec:
    return ApertureSpec(n_blades=a.n_blades, blade_rotation=a.blade_rotation, pupil_diameter=a.pupil_diameter,
                        dust_count=a.dust_count, scratch_count=a.scratch_count,
                        occlusion_opacity=a.opacity, seed=a.seed)


def cmd_psf(a) -> dict:
    spec = _aperture(a)
    wf = WavefrontSpec(tuple((int(j), float(c)) for j, c in (t.split(":") for t in a.zernike)),
                       a.reference_lambda, a.f_number, a.focal_length)
    mask = synthesize_apodization(spec, a.pupil_grid, a.pupil_fill)
    stack = compute_psf_stack(mask, wf, _grid(a), target_pitch=a.pitch, workers=a.workers)
    np.savez(a.output, kernels=stack.kernels, start_nm=stack.grid.start_nm, step_nm=stack.grid.step_nm,
             count=stack.grid.count, sample_pitch=stack.sample_pitch)
    if a.png:
        k = stack.kernels[stack.grid.count // 2]
        v = np.log10(np.clip(k / k.max(), 1e-8, None))
        export_png(a.png, np.rint(255 * (v + 8) / 8).astype(np.uint8))
    return {"aperture": asdict(spec), "wavefront": asdict(wf), "kernel_size": stack.size,
            "sample_pitch_um": stack.sample_pitch}


def _load_psf(path) -> PsfStack:
    with np.load(path) as z:
        grid = WavelengthGrid(float(z["start_nm"]), float(z["step_nm"]), int(z["count"]))
        return PsfStack(z["kernels"], grid, float(z["sample_pitch"]))


def cmd_optics(a) -> dict:
    radiance = sri.read_sri(a.input)
    psfs = _load_psf(a.psf) if a.psf else PsfStack.delta(radiance.grid, a.pitch)
    lens = OpticsSpec(a.f_number, a.focal_length, a.transmission, a.k1, a.relative_illumination)
    irr = apply_optics(radiance, psfs, lens, pixel_pitch=a.pitch, workers=a.workers)
    sri.write_sri(a.output, irr)
    return {"lens": asdict(lens), "pixel_pitch_um": a.pitch, "psf": a.psf or "delta"}


def cmd_sensor(a) -> dict:
    irr = sri.read_sri(a.input)
    sensor, split = load_sensor_preset(a.preset, rows=a.rows or irr.rows, cols=a.cols or irr.cols, seed=a.seed,
                                       **({"exposure": a.exposure} if a.exposure else {}))
    meta = {"preset": a.preset, "rows": sensor.rows, "cols": sensor.cols, "seed": a.seed,
            "exposure": sensor.exposure, "analog_gain": sensor.analog_gain, "noise": a.noise}
    if a.split:
        caps = expose_split(irr, sensor, split, noise=a.noise, workers=a.workers)
        images = {"lplg": caps.lplg, "lphg": caps.lphg, "splg": caps.splg}
    else:
        images = {"main": expose(irr, sensor, noise=a.noise, workers=a.workers)}
    meta["captures"] = list(images)
    _save_images(Path(a.output), images, meta)
    return {**meta, "saturated_fraction": {k: float(v.saturated.mean()) for k, v in images.items()}}


def cmd_combine(a) -> dict:
    images, meta = _load_images(Path(a.input))
    sensor, split = _sensor_from_meta(meta)
    caps = CaptureSet(lplg=images["lplg"], lphg=images["lphg"], splg=images["splg"], sensor=sensor, split=split)
    combined = combine3(caps)
    np.savez(a.output, values=combined.values, valid=combined.valid, source=combined.meta["source"])
    if a.png:
        v = np.log10(np.clip(combined.values, 1.0, None))
        export_png(a.png, np.rint(255 * v / max(v.max(), 1e-12)).astype(np.uint8))
    return {"invalid_fraction": float(1 - combined.valid.mean()), "clamp_value": combined.meta["clamp_value"],
            "max_value": float(combined.values.max())}


def cmd_demosaic(a) -> dict:
    images, meta = _load_images(Path(a.input))
    sensor, _ = _sensor_from_meta(meta)
    img = images.get("main") or images["lplg"]
    electrons = img.volts / img.gain
    grid = _grid(a)
    if "w" in sensor.cfa.channels:
        rgb = isp.demosaic_rgbw(electrons, sensor.cfa, isp.clear_to_luma_gain(sensor.cfa, grid))
    else:
        rgb = isp.demosaic_bilinear(electrons, sensor.cfa)
    xyz = isp.sensor_rgb_to_xyz(rgb, sensor, grid)
    np.savez(a.output, rgb=rgb, xyz=xyz)
    if a.png:
        xyz_c = np.clip(xyz, 0, None)
        export_png(a.png, isp.xyz_to_srgb_display(xyz_c, isp.grey_world_exposure(xyz_c)))
    return {"method": "rgbw" if "w" in sensor.cfa.channels else "bilinear", "shape": list(rgb.shape)}


def _load_array(path: str, key: str | None):
    p = Path(path)
    if p.suffix == ".sri":
        img = sri.read_sri(p)
        return isp.spectral_to_xyz(img)
    with np.load(p) as z:
        return np.asarray(z[key or z.files[0]])


def cmd_metrics(a) -> dict:
    if a.metric == "dynamic-range":
        img = sri.read_sri(a.a)
        return {"dynamic_range": dynamic_range(luminance_map(img), (a.low, a.high))}
    x, y = _load_array(a.a, a.key), _load_array(a.b, a.key)
    if a.metric == "ssim":
        if x.ndim == 3:
            x, y = x[..., 1], y[..., 1]
        return {"ssim": metrics.ssim(x, y, a.data_range)}
    white = np.array([float(v) for v in a.white.split(",")]) if a.white else None
    if white is None:
        white = np.array([0.95047, 1.0, 1.08883]) * float(np.percentile(x[..., 1], 99))
    _, mean = metrics.delta_e(x, y, white)
    return {"delta_e_mean": mean, "white": white}


def cmd_profile(a) -> dict:
    p = Path(a.input)
    if p.suffix == ".sri":
        values = luminance_map(sri.read_sri(p))
    else:
        with np.load(p) as z:
            values = np.asarray(z[a.key or z.files[0]], dtype=float)
    prof = line_profile(values, a.row)
    export_profile_csv(a.output, prof, a.key or "value")
    return {"row": a.row, "length": int(prof.size), "min": float(prof.min()), "max": float(prof.max())}


def cmd_pipeline(a) -> dict:
    from .config import load_config

    cfg = load_config(Path(a.config))
    if a.out_dir:
        cfg.outputs.dir = a.out_dir
    report = run_pipeline(cfg, workers=a.workers)
    return {"report_sha256": report_digest(report), "metrics": report["metrics"],
            "report": str(Path(cfg.outputs.dir) / cfg.outputs.report) if cfg.outputs.dir else None}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hdrsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"hdrsim {__version__}")
    parser.add_argument("--report", help="also write the JSON run report here")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-scene", help="write a synthetic scene as SRI")
    p.add_argument("kind", choices=["ramp", "point-grid", "tunnel", "macbeth", "flat"])
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--rows", type=int, default=128)
    p.add_argument("--cols", type=int, default=256)
    p.add_argument("--decades", type=float, default=5.0)
    p.add_argument("--min-level", type=float, default=1e-2, help="cd/m^2")
    p.add_argument("--n-sources", type=int, default=4)
    p.add_argument("--top-level", type=float, default=1e5, help="cd/m^2")
    p.add_argument("--decade-step", type=float, default=10.0)
    p.add_argument("--background-level", type=float, default=0.1, help="cd/m^2")
    p.add_argument("--interior-level", type=float, default=0.5, help="cd/m^2")
    p.add_argument("--exit-level", type=float, default=5e4, help="cd/m^2")
    p.add_argument("--level", type=float, default=100.0, help="cd/m^2 (flat, macbeth white)")
    p.add_argument("--patch", type=int, default=16)
    _add_grid(p)
    p.set_defaults(func=cmd_gen_scene)

    p = sub.add_parser("compose", help="weighted sum of four light-group SRI files")
    for key in GROUP_KEYS:
        p.add_argument(f"--{key}", required=True)
    p.add_argument("--weights", help="e.g. sky=1,headlights=0.5,streetlights=1,otherlights=1")
    p.add_argument("--target-dr", type=float)
    p.add_argument("--target-mean", type=float, default=100.0, help="cd/m^2")
    p.add_argument("--fixed", help="comma-separated keys held at their --weights values")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("psf", help="flare PSF stack from an aperture description")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--png")
    p.add_argument("--n-blades", type=int, default=0)
    p.add_argument("--blade-rotation", type=float, default=0.0)
    p.add_argument("--pupil-diameter", type=float, default=2.0, help="mm")
    p.add_argument("--dust-count", type=int, default=0)
    p.add_argument("--scratch-count", type=int, default=0)
    p.add_argument("--opacity", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--zernike", nargs="*", default=[], help="Noll terms as index:waves")
    p.add_argument("--reference-lambda", type=float, default=550.0)
    p.add_argument("--f-number", type=float, default=4.0)
    p.add_argument("--focal-length", type=float, default=8.0)
    p.add_argument("--pupil-grid", type=int, default=256)
    p.add_argument("--pupil-fill", type=float, default=0.5)
    p.add_argument("--pitch", type=float, default=None, help="resample to this pitch, um")
    p.add_argument("--workers", type=int, default=1)
    _add_grid(p)
    p.set_defaults(func=cmd_psf)

    p = sub.add_parser("optics", help="radiance SRI -> irradiance SRI")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--psf", help=".npz from 'psf' (default: ideal delta PSF)")
    p.add_argument("--pitch", type=float, default=3.0, help="sensor-plane sample pitch, um")
    p.add_argument("--f-number", type=float, default=4.0)
    p.add_argument("--focal-length", type=float, default=8.0)
    p.add_argument("--transmission", type=float, default=1.0)
    p.add_argument("--k1", type=float, default=0.0)
    p.add_argument("--relative-illumination", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_optics)

    p = sub.add_parser("sensor", help="irradiance SRI -> capture archive")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--preset", default="rgb-bayer-like", help=f"one of {preset_names()} or a YAML path")
    p.add_argument("--rows", type=int)
    p.add_argument("--cols", type=int)
    p.add_argument("--exposure", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split", action="store_true", help="three split-pixel captures")
    p.add_argument("--noise", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sensor)

    p = sub.add_parser("combine", help="fuse a split-pixel capture archive")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--png")
    p.set_defaults(func=cmd_combine)

    p = sub.add_parser("demosaic", help="bilinear (RGB) or clear-guided (RGBW) demosaic to XYZ")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--png")
    _add_grid(p)
    p.set_defaults(func=cmd_demosaic)

    p = sub.add_parser("metrics", help="ssim, delta-e or dynamic-range")
    p.add_argument("metric", choices=["ssim", "delta-e", "dynamic-range"])
    p.add_argument("a")
    p.add_argument("b", nargs="?")
    p.add_argument("--key", help="array name inside .npz inputs")
    p.add_argument("--data-range", type=float, default=1.0)
    p.add_argument("--white", help="X,Y,Z of the reference white")
    p.add_argument("--low", type=float, default=0.1)
    p.add_argument("--high", type=float, default=99.9)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("profile", help="export one image row as CSV")
    p.add_argument("input", help=".sri (luminance) or .npz")
    p.add_argument("--row", type=int, required=True)
    p.add_argument("--key")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("pipeline", help="run a YAML configuration end to end")
    p.add_argument("config")
    p.add_argument("--out-dir")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    options = {k: v for k, v in vars(args).items() if k not in ("func", "report")}
    try:
        result = args.func(args)
    except HdrSimError as exc:
        print(f"hdrsim {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError) as exc:
        print(f"hdrsim {args.command}: error [{args.command}]: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    report = {"command": args.command, "options": options, "result": result, "version": __version__}
    blob = canonical_json(report)
    if args.report:
        Path(args.report).write_bytes(blob)
    sys.stdout.write(blob.decode() + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
