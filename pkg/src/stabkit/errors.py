"""Exception types shared across the toolkit."""


class StabkitError(Exception):
    """Base class for all toolkit-specific errors."""


class ContractViolation(StabkitError, ValueError):
    """An argument violates a documented precondition (shape, finiteness, ...)."""


class NumericalFailure(StabkitError):
    """A numerical routine did not converge or produced unusable output.

    Distinct from an infeasibility verdict: infeasibility is a result,
    numerical failure is the absence of one.
    """


class RankDeficientData(StabkitError):
    """State data does not have the row rank required by the operation."""


class ModelConstructionError(StabkitError):
    """A benchmark model could not be assembled (bad parameters, Newton failure, ...)."""


class DivergenceError(StabkitError):
    """Time integration produced non-finite states.

    The states computed before the blow-up are kept in ``partial_trajectory``.
    """

    def __init__(self, message, partial_trajectory=None):
        super().__init__(message)
        self.partial_trajectory = partial_trajectory
