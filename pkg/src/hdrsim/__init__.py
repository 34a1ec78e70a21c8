"""Physics-based HDR image-systems simulation.

Light-group scene composition, scattering-flare optics, split-pixel and RGBW
sensor models, HDR fusion and image-quality metrics.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BoundsError,
    ConfigurationError,
    DegeneratePupilError,
    DomainError,
    HdrSimError,
    SriFormatError,
    StageError,
    StructuralError,
)
from .spectral import (  # noqa: E402
    GROUP_KEYS,
    GroupWeights,
    LightGroup,
    SpectralImage,
    WavelengthGrid,
    compose_light_groups,
    dynamic_range,
    illuminance_map,
    line_profile,
    luminance_map,
    set_weights_for_target,
)

__all__ = [
    "BoundsError",
    "ConfigurationError",
    "DegeneratePupilError",
    "DomainError",
    "GROUP_KEYS",
    "GroupWeights",
    "HdrSimError",
    "LightGroup",
    "SpectralImage",
    "SriFormatError",
    "StageError",
    "StructuralError",
    "WavelengthGrid",
    "compose_light_groups",
    "dynamic_range",
    "illuminance_map",
    "line_profile",
    "luminance_map",
    "set_weights_for_target",
]
