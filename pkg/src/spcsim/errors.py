"""Exception types shared across the simulator.

The CLI maps these onto exit codes: parameter/config problems exit 1,
file-format and persistence problems exit 2.
"""


class ParameterError(ValueError):
    """A scalar argument is outside its documented range."""


class ShapeMismatchError(ValueError):
    """Arrays or masks that must share dimensions do not."""


class PgmFormatError(ValueError):
    """A portable-graymap file has a malformed or unsupported header."""


class SetCorruptionError(RuntimeError):
    """An on-disk measurement set is incomplete or inconsistent."""


class DataError(ValueError):
    """Measurement data is unusable (non-finite values)."""


class FlatSpectrumError(RuntimeError):
    """A radial spectrum has no steep initial segment to fit."""


class ConfigError(ValueError):
    """An experiment config file failed to parse or is missing keys."""
