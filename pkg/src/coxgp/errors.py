"""Exception types shared across the package."""


class CoxGpError(Exception):
    """Base class for all coxgp errors."""


class ParameterError(CoxGpError, ValueError):
    """A parameter is outside its admissible domain (e.g. non-positive variance)."""


class ShapeError(CoxGpError, ValueError):
    """Array arguments have inconsistent shapes or lengths."""


class DomainError(CoxGpError, ValueError):
    """A point lies outside the grid domain."""


class InfeasibilityError(CoxGpError):
    """A constraint system admits no strictly feasible point."""


class FeasibilityError(CoxGpError):
    """A supplied starting point violates the constraint system."""


class NumericalConditioningError(CoxGpError):
    """A matrix factorisation failed even after jitter escalation."""


class DivergenceError(CoxGpError):
    """The constrained HMC integrator exceeded its bounce budget."""


class DominatingBoundError(CoxGpError):
    """The thinning bound lambda_max was exceeded by the target intensity."""


class EstimationFailureError(CoxGpError):
    """Hyper-parameter search found no candidate with finite objective."""


class DegenerateReferenceError(CoxGpError, ValueError):
    """The reference values for a metric have zero variance."""


class ChainStateError(CoxGpError):
    """A posterior chain is empty or otherwise unusable."""


class EventsParseError(CoxGpError):
    """An events CSV file could not be parsed."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"{message} (line {line_number})"
        super().__init__(message)
        self.line_number = line_number
