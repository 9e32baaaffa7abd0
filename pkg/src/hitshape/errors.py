"""Exception hierarchy.

Input problems derive from :class:`StringError` (a ``ValueError``); numerical
breakdowns derive from :class:`NumericalError`.  The CLI maps the two families
to exit codes 2 and 1 respectively.
"""


class StringError(ValueError):
    """A speed-measure specification violates a data-model rule."""


class NumericalError(ArithmeticError):
    """A computation could not be completed to the required accuracy."""


class RootIsolationError(NumericalError):
    pass


class RateCollisionError(NumericalError):
    """Two exponential rates are indistinguishable at the collision tolerance."""


class PartialFractionError(NumericalError):
    pass


class EigenError(NumericalError):
    pass


class TruncationHorizonError(NumericalError):
    pass


class UncertifiedError(NumericalError):
    """A zero count could not be certified, so no sign pattern is produced."""
