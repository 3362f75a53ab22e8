"""Exception types shared across the toolkit."""

from __future__ import annotations


class FreqsightError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(FreqsightError, ValueError):
    """An operation was called with inputs violating its preconditions."""


class IncompleteMatrixError(FreqsightError):
    """The runtime matrix is missing cells an indicator needs.

    ``missing`` lists the absent (mode, scheme) cells.
    """

    def __init__(self, message, missing=()):
        super().__init__(message)
        self.missing = tuple(missing)


class UnmatchedRecordError(FreqsightError):
    """Run records could not be matched to any design cell."""

    def __init__(self, message, records=()):
        super().__init__(message)
        self.records = tuple(records)


class ParseError(FreqsightError):
    """An input file violates its documented schema."""


class DegenerateFitError(FreqsightError):
    """The scale-model fit has no unique nonnegative solution."""


class FrequencyControlError(FreqsightError):
    """The frequency-scaling interface could not be driven."""


class UnsupportedFrequencyError(FrequencyControlError):
    """A requested frequency is not offered by the controller.

    ``available`` lists the frequencies the controller does support.
    """

    def __init__(self, message, available=()):
        super().__init__(message)
        self.available = tuple(available)


class WorkloadCommandError(FreqsightError):
    """A workload command exited nonzero; ``output`` holds captured output."""

    def __init__(self, message, output=""):
        super().__init__(message)
        self.output = output


class PauseRequiredError(FreqsightError):
    """A plan step needs interactive confirmation that is unavailable."""


class TaintedRunError(FreqsightError):
    """Cache clearing failed; the surrounding measurements are suspect."""
