"""Exception hierarchy shared across the package.

Every failure mode that a caller can provoke with bad inputs gets its own
class so tests can assert on the exact category instead of message text.
"""


class TransportHJBError(Exception):
    """Base class for all package errors."""


class GridMismatchError(TransportHJBError):
    """Two grid functions (or a matrix and an operand) live on different grids."""


class AlignmentError(TransportHJBError):
    """A time or shift argument is not an integer multiple of the step."""


class DomainError(TransportHJBError):
    """A grid function fails the zero-endpoint proxy for D(A) or D(A*)."""


class HorizonError(TransportHJBError):
    """A control path is too short for the requested final time."""


class ResolutionError(TransportHJBError):
    """A boundary-layer index n is too large for the grid to resolve 1/n."""


class OperatorConstructionError(TransportHJBError):
    """Discrete operator violates a structural requirement (symmetry, positivity)."""


class BudgetError(TransportHJBError):
    """Exhaustive enumeration would exceed the configured evaluation budget."""


class CostRejectedError(TransportHJBError):
    """A running cost fails the boundedness or Lipschitz hypothesis audit."""


class ConfigError(TransportHJBError):
    """Experiment configuration is malformed (unknown key, bad value, bad shape)."""
