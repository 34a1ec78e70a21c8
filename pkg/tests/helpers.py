"""Shared builders for tests."""

import numpy as np

from hdrsim import scenes
from hdrsim.optics import OpticsSpec, PsfStack, apply_optics
from hdrsim.sensor import mean_electrons
from hdrsim.spectral import WavelengthGrid


def flat_irradiance(rows, cols, grid=None, luminance=1.0, f_number=4.0):
    grid = grid or WavelengthGrid()
    scene = scenes.gen_flat_scene(rows, cols, grid, luminance)
    return apply_optics(scene, PsfStack.delta(grid, 3.0), OpticsSpec(f_number=f_number))


def irradiance_for_electrons(sensor, electrons, channel="g", grid=None, scale=1.0):
    """Flat irradiance giving ``electrons`` mean signal on ``channel`` pixels (times ``scale``)."""
    irr = flat_irradiance(sensor.rows, sensor.cols, grid)
    mu = mean_electrons(irr, sensor)
    mask = sensor.cfa.channel_mask(channel, sensor.rows, sensor.cols)
    k = electrons / (scale * mu[mask].mean())
    return irr.with_data(irr.data * k)
