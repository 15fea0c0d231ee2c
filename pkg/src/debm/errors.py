"""Exception hierarchy shared across the package.

Two families matter for callers: `DataError` covers malformed input
(tables, schemas, configs), `FitError` covers numerical failures during
model estimation. The command line maps them to exit codes 2 and 3.
"""


class DebmError(Exception):
    """Base class for all package-specific errors."""


class DataError(DebmError):
    """Malformed or insufficient input data / configuration."""


class SchemaError(DataError):
    """Column-role schema is inconsistent with the data file."""


class FitError(DebmError):
    """A model fit failed numerically."""


class DegenerateTimelineError(FitError):
    """Event-center computation produced no usable timeline."""


class StagingError(FitError):
    """A subject could not be placed on the timeline."""
