"""Exception types shared across the toolkit.

The CLI maps these onto exit codes, so raising the right class matters:
ConfigurationError -> 2, DataError -> 3, NumericsError -> 4, OSError -> 5.
"""


class DatseError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(DatseError):
    """Invalid or inconsistent configuration (bad STFT geometry, unknown keys, ...)."""


class DataError(DatseError):
    """Problem with supplied data (bad WAV, malformed manifest row, ...)."""


class DegenerateInputError(DataError):
    """Input is structurally valid but unusable (zero-power signal, all-silent frames)."""


class NumericsError(DatseError):
    """Training produced NaN/Inf; carries a path to the diagnostic dump when available."""

    def __init__(self, message, dump_path=None):
        super().__init__(message)
        self.dump_path = dump_path


class CheckpointError(DataError):
    """Checkpoint file is truncated, corrupt, or has an unsupported version."""
