"""Exception types shared across the pipeline.

Each operation's documented failure mode gets its own class so callers
(and the CLI's exit-code mapping) can dispatch on type rather than on
message text.
"""


class PipelineError(ValueError):
    """Base class for all driveratt errors."""


class EmptyInput(PipelineError):
    pass


class EmptyDataset(PipelineError):
    pass


class LengthMismatch(PipelineError):
    pass


class ShapeMismatch(PipelineError):
    pass


class DimensionMismatch(PipelineError):
    pass


class WindowOutOfBounds(PipelineError):
    pass


class SingleClassInput(PipelineError):
    pass


class EmptyBand(PipelineError):
    pass


class InvalidBand(PipelineError):
    pass


class NotForwarded(PipelineError):
    pass


class EmptySpace(PipelineError):
    pass


class TooFewRows(PipelineError):
    pass


class TooFewSubjects(PipelineError):
    pass


class TooFewPairs(PipelineError):
    pass


class TooFewTrials(PipelineError):
    pass


class AllZeroDifferences(PipelineError):
    pass


class ZeroVariance(PipelineError):
    pass


class MissingCell(PipelineError):
    pass


class SubjectMismatch(PipelineError):
    pass


class ConfigInvalid(PipelineError):
    pass


class FormatError(PipelineError):
    """Malformed container file (bad magic, truncated payload, shape lies)."""
