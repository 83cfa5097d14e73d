"""Exception types raised across the package."""


class SampleSumError(Exception):
    """Base class for all errors raised by samplesum."""


class SpecError(SampleSumError, ValueError):
    """Malformed population specification."""


class ZeroVariance(SampleSumError):
    """The normalizing variance sigma^2 vanishes."""


class DegenerateDesign(SampleSumError):
    """The design has n = N (q = 0) where q > 0 is required."""


class NotScorePopulation(SampleSumError):
    """A score-only routine received a population with random elements."""


class ZeroSpread(SampleSumError):
    """All scores are equal, so b^2 = 0."""


class UnsupportedOrder(SampleSumError):
    """Requested expansion order is not constructed."""


class QuadratureFailure(SampleSumError):
    """Adaptive quadrature did not reach its tolerance."""


class CombinatorialOverflow(SampleSumError):
    """A multi-index enumeration would exceed the configured cap."""


class BudgetExceeded(SampleSumError):
    """The exact DP state space is over budget."""

    def __init__(self, size, budget):
        self.size = size
        self.budget = budget
        super().__init__(f"DP state space {size} cells exceeds budget {budget}")


class TooLarge(SampleSumError):
    """Subset enumeration requested for a population that is too large."""


class RangeWarning(UserWarning):
    """Argument lies outside the range where an asymptotic formula is meaningful."""
