"""Exception types and the process exit codes they map to."""


class IlvsError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(IlvsError):
    """Invalid configuration, scenario, or model file. CLI exit code 2."""


class ModelFormatError(ConfigError):
    """Model file is malformed or violates a model invariant."""


class SimulationAbort(IlvsError):
    """An episode could not continue. CLI exit code 3."""


class BehindCameraError(SimulationAbort):
    """A feature point has non-positive depth in the camera frame."""


class OutOfViewError(SimulationAbort):
    """The marker left the image during a recording that requires visibility."""


class NumericError(IlvsError):
    """A numerical routine failed. CLI exit code 4."""


class SingularFitError(NumericError):
    """Mixture fitting collapsed onto degenerate data."""


EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SIM_ABORT = 3
EXIT_NUMERIC = 4


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the CLI exit code contract."""
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, SimulationAbort):
        return EXIT_SIM_ABORT
    if isinstance(exc, NumericError):
        return EXIT_NUMERIC
    return 1
