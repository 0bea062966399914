"""Exception types shared across the package."""


class MelbindError(Exception):
    """Base class for all package errors."""


class AudioFormatError(MelbindError):
    """Raised for malformed or unreadable audio containers."""


class UnsupportedAudioError(MelbindError):
    """Raised for audio encodings the codec does not handle."""


class DomainError(MelbindError, ValueError):
    """Raised when an argument is outside an operation's domain."""


class DegenerateInputError(MelbindError, ValueError):
    """Raised when an input is structurally valid but unusable (e.g. zero-power noise)."""


class ConflictError(MelbindError):
    """Raised when a registration collides with existing state."""


class NumericsError(MelbindError, RuntimeError):
    """Raised when a computation produces non-finite values."""


class ManifestError(MelbindError):
    """Raised for missing or schema-violating dataset manifests."""


class FileFormatError(MelbindError):
    """Raised for malformed data files (embedding files, checkpoints, reports)."""


class ConfigError(MelbindError):
    """Raised for invalid run configurations."""
