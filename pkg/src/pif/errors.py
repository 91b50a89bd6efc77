"""Exception types raised across the package."""


class PifError(Exception):
    """Base class for all package errors."""


class DegenerateSample(PifError, ValueError):
    """A minimal sample does not determine a unique model."""


class PoolExhausted(PifError, RuntimeError):
    """Too many degenerate draws while filling one slot of the model pool."""


class DimensionMismatch(PifError, ValueError):
    pass


class NonBinaryInput(PifError, ValueError):
    pass


class KTooLarge(PifError, ValueError):
    """LOF neighbourhood size is not smaller than the number of samples."""


class DegenerateLabels(PifError, ValueError):
    """Only one class is present, so AUC is undefined."""


class InvalidRatio(PifError, ValueError):
    pass


class ZeroVarianceWarning(RuntimeWarning):
    """All paired differences are identical; the t statistic is a sentinel."""


class ArtifactError(PifError):
    pass


class ArtifactIOError(ArtifactError, OSError):
    """An artifact file could not be read or written."""


class VersionMismatch(ArtifactError):
    pass


class CorruptArtifact(ArtifactError):
    pass
