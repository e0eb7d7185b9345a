"""Exception types shared across the package."""


class SatStabError(Exception):
    """Base class for all package errors."""


class ShapeError(SatStabError):
    """Matrix or vector dimensions are inconsistent."""


class SingularBlock(SatStabError):
    """A block that must be inverted is singular or numerically unusable."""


class NumericalError(SatStabError):
    """A numerical routine failed to converge or produced non-finite values."""


class EmptySet(SatStabError):
    """The requested set is empty, so no element can be produced."""


class NoiseBoundViolation(SatStabError):
    """A supplied noise sample exceeds the declared energy bound."""


class AllInfeasible(SatStabError):
    """No point of the search grid admits a feasible solution."""
