"""Exception types shared across the toolkit."""


class PsqError(ValueError):
    """Base class for all toolkit errors."""


class EmptyPhases(PsqError):
    """A mixture was built from an empty phase list."""


class NonPositiveParameter(PsqError):
    """A weight, rate, or scale that must be positive is not."""


class WeightsNotNormalized(PsqError):
    """Mixture weights do not sum to one within tolerance."""


class NegativeArgument(PsqError):
    """A time/size argument that must be nonnegative is negative."""


class PoleEvaluation(PsqError):
    """The secular function was evaluated at (or too close to) a pole."""


class UnstableSystem(PsqError):
    """Offered load is at or above one; the queue has no steady state."""


class BracketFailure(PsqError):
    """A root bracket lost its guaranteed sign change (upstream invariant breach)."""


class DegenerateSpectrum(PsqError):
    """Spectral gaps underflowed; the closed-form coefficient products are undefined."""


class SingularMatrix(PsqError):
    """Dense elimination hit a zero pivot (cannot occur under interleaving)."""


class UnstableConfig(PsqError):
    """A simulation scenario violates the stability condition."""


class InvalidBins(PsqError):
    """Size-bin edges are empty, unsorted, or nonpositive."""


class MalformedScenario(PsqError):
    """A scenario file is missing fields or has the wrong shape."""
