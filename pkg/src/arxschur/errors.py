"""Exception hierarchy shared by every module."""


class ArxError(Exception):
    """Base class for all errors raised by arxschur."""


class RejectedInputError(ArxError, ValueError):
    """Malformed input: wrong shapes, non-finite entries, bad parameters."""


class SingularMatrixError(ArxError):
    def __init__(self, message, pivot_index=None):
        super().__init__(message)
        self.pivot_index = pivot_index


class NotPositiveDefiniteError(ArxError):
    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class ConvergenceError(ArxError):
    pass


class DivergentSeriesError(ArxError):
    """Raised when a series in the P_k coefficients cannot converge (B not causal)."""


class InconsistencyError(ArxError):
    """Schur complement singular although the controllability test passed."""


class NumericalBreakdownError(ArxError):
    pass


class InstabilityError(ArxError):
    def __init__(self, message, step=None, realization=None):
        super().__init__(message)
        self.step = step
        self.realization = realization


class ModelRejectedError(ArxError):
    """Model fails causality or strong controllability where it is required."""
