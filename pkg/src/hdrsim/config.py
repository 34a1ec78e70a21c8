"""Declarative run configuration (YAML) with strict key checking.

Every section is a dataclass; unknown keys anywhere are rejected with the
dotted path of the offending key. See ``docs/config.md`` for the schema.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

import yaml

from .errors import ConfigurationError

GENERATORS = ("tunnel", "ramp", "point_grid", "macbeth", "flat")
RECONSTRUCTIONS = ("none", "combine3", "demosaic_bilinear", "demosaic_rgbw")
METRICS = ("dynamic_range", "profile", "saturation", "photon_budget", "ssim", "delta_e")


@dataclass
class GridConfig:
    start_nm: float = 400.0
    step_nm: float = 10.0
    count: int = 31


@dataclass
class SceneConfig:
    generator: str | None = None
    params: dict = field(default_factory=dict)
    files: dict | None = None
    grid: GridConfig = field(default_factory=GridConfig)


@dataclass
class ComposeConfig:
    weights: dict | None = None
    target_dr: float | None = None
    target_mean_luminance: float | None = None
    fixed: list = field(default_factory=list)
    clip_percentiles: list = field(default_factory=lambda: [0.1, 99.9])


@dataclass
class OpticsConfig:
    psf: str = "delta"
    pupil_grid: int = 256
    pupil_fill: float = 0.5
    crop_energy: float = 1 - 1e-4
    max_kernel: int | None = None
    aperture: dict = field(default_factory=dict)
    wavefront: dict = field(default_factory=dict)
    lens: dict = field(default_factory=dict)


@dataclass
class SensorConfig:
    preset: str = "rgb-bayer-like"
    rows: int | None = None
    cols: int | None = None
    exposure: float | None = None
    analog_gain: float | None = None
    noise: bool = True
    split: bool = False


@dataclass
class OutputConfig:
    dir: str | None = None
    report: str = "report.json"
    png: bool = False
    csv: bool = False
    sri: bool = False


@dataclass
class RunConfig:
    seed: int = 0
    scene: SceneConfig = field(default_factory=SceneConfig)
    compose: ComposeConfig = field(default_factory=ComposeConfig)
    optics: OpticsConfig = field(default_factory=OpticsConfig)
    sensor: SensorConfig = field(default_factory=SensorConfig)
    reconstruct: str = "none"
    metrics: list = field(default_factory=lambda: ["dynamic_range"])
    profile_row: int | None = None
    outputs: OutputConfig = field(default_factory=OutputConfig)

    def to_dict(self) -> dict:
        return asdict(self)


_NESTED = {
    (RunConfig, "scene"): SceneConfig,
    (RunConfig, "compose"): ComposeConfig,
    (RunConfig, "optics"): OpticsConfig,
    (RunConfig, "sensor"): SensorConfig,
    (RunConfig, "outputs"): OutputConfig,
    (SceneConfig, "grid"): GridConfig,
}


def _build(cls, data: Any, path: str):
    if data is None:
        return cls()
    if not isinstance(data, Mapping):
        raise ConfigurationError(f"{path or '<root>'}: expected a mapping, got {type(data).__name__}")
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        where = ", ".join(f"{path + '.' if path else ''}{k}" for k in unknown)
        raise ConfigurationError(f"unknown configuration key(s): {where}")
    kwargs = {}
    for key, value in data.items():
        sub = _NESTED.get((cls, key))
        kwargs[key] = _build(sub, value, f"{path + '.' if path else ''}{key}") if sub else value
    return cls(**kwargs)


def _validate(cfg: RunConfig) -> None:
    def fail(path, msg):
        raise ConfigurationError(f"{path}: {msg}")

    if not isinstance(cfg.seed, int) or cfg.seed < 0:
        fail("seed", "master seed must be a nonnegative integer")
    s = cfg.scene
    if (s.generator is None) == (s.files is None):
        fail("scene", "give exactly one of 'generator' or 'files'")
    if s.generator is not None and s.generator not in GENERATORS:
        fail("scene.generator", f"unknown generator {s.generator!r}; choose from {GENERATORS}")
    if s.files is not None:
        keys = set(s.files)
        if keys not in ({"radiance"}, {"sky", "headlights", "streetlights", "otherlights"}):
            fail("scene.files", "use either {radiance: path} or all four light-group keys")
    c = cfg.compose
    if c.weights is not None and (c.target_dr is not None or c.target_mean_luminance is not None):
        fail("compose", "give either weights or targets, not both")
    if (c.target_dr is None) != (c.target_mean_luminance is None):
        fail("compose", "target_dr and target_mean_luminance go together")
    if cfg.optics.psf not in ("delta", "flare"):
        fail("optics.psf", "must be 'delta' or 'flare'")
    if cfg.reconstruct not in RECONSTRUCTIONS:
        fail("reconstruct", f"must be one of {RECONSTRUCTIONS}")
    if cfg.reconstruct == "combine3" and not cfg.sensor.split:
        fail("reconstruct", "combine3 needs sensor.split: true")
    for m in cfg.metrics:
        if m not in METRICS:
            fail("metrics", f"unknown metric {m!r}; choose from {METRICS}")
    if {"ssim", "delta_e"} & set(cfg.metrics) and not cfg.reconstruct.startswith("demosaic"):
        fail("metrics", "ssim and delta_e need a demosaic reconstruction")


def load_config(source) -> RunConfig:
    """Build a validated RunConfig from a mapping, YAML text or a YAML file path."""
    if isinstance(source, Mapping):
        data = source
    elif isinstance(source, Path) or ("\n" not in str(source) and Path(str(source)).is_file()):
        data = yaml.safe_load(Path(source).read_text(encoding="utf-8"))
    else:
        data = yaml.safe_load(str(source))
    try:
        cfg = _build(RunConfig, data, "")
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from None
    _validate(cfg)
    return cfg


def stage_seed(master_seed: int, stage: str) -> int:
    """64-bit seed for one stage, derived from the master seed and the stage name."""
    digest = hashlib.sha256(f"{master_seed}:{stage}".encode()).digest()
    return int.from_bytes(digest[:8], "little")
