"""Exception hierarchy shared across the pipeline."""


class BsodiagError(Exception):
    """Base class for all errors raised by this package."""


class SnapshotParseError(BsodiagError):
    """A snapshot bundle file is malformed (names file, line and field)."""


class SnapshotValidationError(BsodiagError):
    """A record violates a snapshot invariant (window bounds, unknown type)."""


class ConfigurationError(BsodiagError):
    """A configuration value is out of range or inconsistent."""


class IntensityExtractionError(BsodiagError):
    """A numeric alert's description did not yield a value."""


class CmdbLookupError(BsodiagError):
    """A device serial number is not present in the CMDB."""


class NoCandidatesError(BsodiagError):
    """Failure detection produced no candidate events; diagnosis aborts."""


class UndefinedMetricError(BsodiagError):
    """A metric was requested over an empty case list."""


class UndefinedConfidenceError(BsodiagError):
    """Confidence is undefined because the antecedent never occurs."""


class GenerationError(BsodiagError):
    """A topology or scenario cannot be materialized as specified."""
