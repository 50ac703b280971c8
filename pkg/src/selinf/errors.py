"""Exception hierarchy.

Every error raised on purpose by the package derives from
``SelectiveInferenceError`` so callers can catch them in one place. The CLI
maps ``ValidationError`` to exit code 2 and ``NumericalError`` to exit code 3.
"""


class SelectiveInferenceError(Exception):
    pass


class ValidationError(SelectiveInferenceError, ValueError):
    """Malformed or out-of-contract input."""


class UnsupportedConfigurationError(ValidationError):
    """A configuration the method does not cover (e.g. lambda = 0)."""


class MustSupplySigmaError(ValidationError):
    """Noise variance cannot be estimated when n <= p."""


class CapacityError(ValidationError):
    """Too many selected variables to enumerate every sign pattern."""


class NumericalError(SelectiveInferenceError, ArithmeticError):
    pass


class ConvergenceError(NumericalError):
    def __init__(self, message, kkt_residual=float("nan"), sweeps=0):
        super().__init__(message)
        self.kkt_residual = kkt_residual
        self.sweeps = sweeps


class DegenerateDesignError(NumericalError):
    """Gram matrix of the selected columns is singular or ill-conditioned."""


class InconsistentSolutionError(NumericalError):
    """A nonzero coefficient whose subgradient is not on the boundary."""


class DegenerateRegionError(NumericalError):
    """Truncation region carries no Gaussian mass, even in log space."""


class BracketError(NumericalError):
    def __init__(self, message, pivot_range=(float("nan"), float("nan"))):
        super().__init__(message)
        self.pivot_range = pivot_range


class InternalInconsistencyError(NumericalError):
    """The observed response falls outside its own selection event."""


class FailureBudgetError(NumericalError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
