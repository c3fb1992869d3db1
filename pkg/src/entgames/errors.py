"""Exception types shared across the toolkit."""


class EntGamesError(Exception):
    """Base class for all toolkit errors."""


class ShapeMismatch(EntGamesError):
    """Array shapes disagree with the declared question/answer counts."""


class NonNormalizedMu(EntGamesError):
    """Question distribution does not sum to one within tolerance."""


class NegativeProbability(EntGamesError):
    """Question distribution has a meaningfully negative entry."""


class NotProjection(EntGamesError):
    """Some (u, v, b) accepts more than one first-player answer."""

    def __init__(self, u: int, v: int, b: int):
        self.u, self.v, self.b = u, v, b
        super().__init__(
            f"question pair ({u}, {v}): second answer {b} is accepted together "
            f"with more than one first answer"
        )


class NotHermitian(EntGamesError):
    """Matrix deviates from its conjugate transpose beyond tolerance."""


class NotPositiveSemidefinite(EntGamesError):
    """Matrix has an eigenvalue below the hard negativity threshold."""


class DimensionMismatch(EntGamesError):
    """Operator or state dimensions are inconsistent."""


class SearchSpaceTooLarge(EntGamesError):
    """Exhaustive enumeration would exceed the configured cap."""


class InvalidMeasurement(EntGamesError):
    """Effects are not PSD or do not sum to identity as declared."""


class DegenerateState(EntGamesError):
    """A state that must be nonzero came out with (numerically) zero mass."""


class InternalInconsistency(EntGamesError):
    """Two routes to the same quantity disagreed beyond tolerance."""
