"""Exception hierarchy shared by all stages."""


class HdrSimError(Exception):
    """Base class for simulator errors."""


class StructuralError(HdrSimError, ValueError):
    """Inputs disagree in shape, geometry or wavelength sampling."""


class DomainError(HdrSimError, ValueError):
    """An argument lies outside the domain where the operation is defined."""


class ConfigurationError(HdrSimError, ValueError):
    """Invalid parameters or configuration document."""


class BoundsError(HdrSimError, IndexError):
    pass


class DegeneratePupilError(HdrSimError, ValueError):
    pass


class SriFormatError(HdrSimError, ValueError):
    """Malformed SRI container. ``offset`` is the byte position of the fault."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class StageError(HdrSimError):
    """Failure inside a pipeline stage, tagged with the stage name."""

    def __init__(self, stage, message, config_path=None):
        where = f" [{config_path}]" if config_path else ""
        super().__init__(f"stage '{stage}'{where}: {message}")
        self.stage = stage
        self.config_path = config_path
