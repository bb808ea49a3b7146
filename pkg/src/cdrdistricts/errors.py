"""Exception types shared across the pipeline stages."""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


# --- record validation -------------------------------------------------------

class ValidationError(PipelineError):
    """A CDR row failed validation. ``row`` is the 1-based data row number."""

    category = "invalid"

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class MalformedTimestamp(ValidationError):
    category = "malformed_timestamp"


class NegativeDuration(ValidationError):
    category = "negative_duration"


class MalformedDuration(ValidationError):
    category = "malformed_duration"


class UnknownActivityType(ValidationError):
    category = "unknown_activity_type"


class UnknownDirection(ValidationError):
    category = "unknown_direction"


class TimestampOutOfWindow(ValidationError):
    category = "timestamp_out_of_window"


# --- ingest ------------------------------------------------------------------

class FatalSchemaError(PipelineError):
    """Input file header lacks a required column."""


class DuplicateTowerId(PipelineError):
    pass


class CoordinateOutOfRange(PipelineError):
    pass


class MissingAttribute(PipelineError):
    pass


class InvalidGeometry(PipelineError):
    pass


# --- geometry ----------------------------------------------------------------

class DuplicateTowerLocation(PipelineError):
    pass


class EmptyBound(PipelineError):
    pass


class EmptyZoneList(PipelineError):
    pass


class ZeroPopulationDistrict(PipelineError):
    """Penetration rate is undefined for a zero-population district."""


# --- indicators --------------------------------------------------------------

class MissingDirectionField(PipelineError):
    """Dataset lacks counterpart/direction columns needed for social indicators."""


class SpillError(PipelineError):
    """Writing an external-sort spill file failed."""


# --- statistics / models -----------------------------------------------------

class ZeroVarianceColumn(PipelineError):
    pass


class EmptyInput(PipelineError):
    pass


class InsufficientData(PipelineError):
    pass


class NonPositiveValue(PipelineError):
    pass


class SingularDesign(PipelineError):
    pass


class DimensionMismatch(PipelineError):
    pass


class IllConditionedKernel(PipelineError):
    pass


class ConfigError(PipelineError):
    pass
