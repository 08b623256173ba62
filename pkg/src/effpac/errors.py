"""Exception types shared across the package."""


class EffpacError(Exception):
    """Base class for all library errors."""


class DomainError(EffpacError, ValueError):
    """A value lies outside the representable region (e.g. outside the box)."""


class UndecidedMembership(EffpacError):
    """Membership of a point in a concept could not be resolved at the budget."""

    def __init__(self, point, concept, budget=None):
        self.point = point
        self.concept = concept
        self.budget = budget
        super().__init__(
            f"membership of {point} in concept {concept} unresolved at budget {budget}"
        )


class NoConsistentHypothesis(EffpacError):
    """No concept in the searched prefix agrees with the labeled sample."""


class ApproximationError(EffpacError):
    """Rational approximation did not reach the requested tolerance."""

    def __init__(self, message, achieved=None):
        self.achieved = achieved
        super().__init__(message)


class PrecisionError(EffpacError):
    """A point's membership stayed unresolved and no finite description exists."""


class HorizonError(EffpacError):
    """A construction step was requested past the configured horizon."""


class SchemaError(EffpacError, ValueError):
    """A catalog, pool, or distribution file does not match its schema."""
