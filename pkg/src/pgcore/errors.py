"""Exception types raised across the package."""


class PgcoreError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(PgcoreError, ValueError):
    pass


class DomainViolation(PgcoreError, ValueError):
    pass


class EmptyCoalition(PgcoreError, ValueError):
    pass


class BoundaryInfeasible(PgcoreError, ValueError):
    """A one-sided direction would leave the unit box immediately.

    ``agents`` lists the offending coordinates.
    """

    def __init__(self, message, agents=()):
        super().__init__(message)
        self.agents = tuple(int(i) for i in agents)


class NonFiniteDerivative(PgcoreError, ArithmeticError):
    pass


class InfeasibleSet(PgcoreError, ValueError):
    pass


class NoDescent(PgcoreError, ValueError):
    pass


class InvalidEconomy(PgcoreError):
    pass


class SlideBudgetExhausted(PgcoreError, RuntimeError):
    pass


class InstanceTooLarge(PgcoreError, ValueError):
    pass


class ConfigParseError(PgcoreError, ValueError):
    pass
