"""Exception types shared across the solver library."""


class MinimaxPIError(Exception):
    """Base class for all library errors."""


class MaxItersExceeded(MinimaxPIError):
    """An iterative solve did not reach its tolerance within the sweep budget."""


class MaxStepsExceeded(MinimaxPIError):
    """The asynchronous run exhausted its step budget before the stopping rule fired.

    Carries the last state and trace so callers can still inspect the run.
    """

    def __init__(self, message, state=None, trace=None):
        super().__init__(message)
        self.state = state
        self.trace = trace


class DegeneratePair(MinimaxPIError):
    """Every sampled pair in a modulus estimate had zero distance."""


class LPNumericalFailure(MinimaxPIError):
    """The simplex method lost feasibility, failed to terminate, or duality broke."""


class InvalidBeta(MinimaxPIError):
    """A two-stage scaling factor violates beta > 1 or alpha * beta < 1."""


class ContractionViolation(MinimaxPIError):
    """A sampled pair contracted by more than the asserted modulus.

    Carries the offending pair for diagnosis.
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class ParseError(MinimaxPIError):
    """A problem file could not be parsed."""


class ValidationError(MinimaxPIError):
    """A problem file parsed but violated a schema or model invariant."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class NonContractive(MinimaxPIError):
    """A terminating game failed the contraction screen at load time."""


class MissingAggregationRow(MinimaxPIError):
    """A reachable state has no aggregation-probability row."""


class SearchFailed(MinimaxPIError):
    """The oscillation-instance grid search exhausted the grid without a hit."""
