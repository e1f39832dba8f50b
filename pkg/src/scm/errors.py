"""Exception types raised across the package."""


class SCMError(Exception):
    """Base class for all package errors."""


class SizeError(SCMError, ValueError):
    """Raster too small for the feature pyramid."""


class ConfigurationError(SCMError):
    """Adapter or run configuration is unusable (e.g. missing weights)."""


class InferenceError(SCMError):
    """A pretrained model adapter failed while running inference."""


class IngestionError(SCMError):
    """Dataset files are missing or malformed."""


class DegenerateInputError(SCMError, ValueError):
    """No separating threshold exists (all values zero or constant)."""
