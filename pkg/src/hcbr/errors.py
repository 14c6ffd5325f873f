"""Exception hierarchy.  Data problems and configuration problems are kept
apart so the command line can map them to different exit codes."""


class HCBRError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(HCBRError, ValueError):
    pass


class DataError(HCBRError):
    """Problem with input data rather than with how the tool was invoked."""


class IngestionError(DataError):
    pass


class StratificationError(DataError):
    pass


class BuildError(DataError):
    pass


class ProjectionError(DataError):
    pass


class DegenerateNormalizationError(DataError):
    """One class is absent from the training set, so its strengths cannot be normalized."""


class ModelFormatError(DataError):
    pass


class MetricsError(DataError):
    pass


class ProbeError(DataError):
    pass
