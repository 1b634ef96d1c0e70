"""Exception types raised across the package."""


class DalPceError(Exception):
    """Base class for all package errors."""


class DomainError(DalPceError, ValueError):
    """A point lies outside the interval or box an operation is defined on."""


class DimensionMismatch(DalPceError, ValueError):
    pass


class RankDeficient(DalPceError):
    """Design matrix has (numerically) dependent columns."""


class LeverageOne(DalPceError):
    """Some training point has leverage numerically equal to one."""


class DegenerateEdge(DalPceError):
    """A split was requested along an edge shorter than the minimum edge length."""


class EmptyPool(DalPceError):
    pass


class ZeroVariance(DalPceError):
    pass


class MissingPce(DalPceError):
    pass


class BudgetExceeded(DalPceError):
    """The evaluation budget ran out in the middle of an iteration.

    The learner state is left consistent when this is raised.
    """


class ModelEvaluationFailure(DalPceError):
    """The black-box model failed or returned a non-finite value.

    Parameters
    ----------
    message : str
        Description of the failure.
    points : ndarray, optional
        Coordinates of the points being evaluated when the failure occurred.
    """

    def __init__(self, message, points=None):
        super().__init__(message)
        self.points = points


class ConfigError(DalPceError, ValueError):
    pass
