"""Exception hierarchy shared by all modules.

The CLI maps these onto its exit-code contract: rejected input and schema
problems exit 2, math-domain failures exit 3, violated run hypotheses exit 4
and anything else exits 5.
"""


class HennionLabError(Exception):
    """Base class for all library errors."""


class RejectedInputError(HennionLabError, ValueError):
    """Input outside the documented domain of an operation."""


class ShapeMismatchError(RejectedInputError):
    """Element or map shapes incompatible with the algebra."""


class MathDomainError(HennionLabError, ArithmeticError):
    """A numerically well-posed call hit a degenerate configuration."""


class DegeneratePairError(MathDomainError):
    """Two states coincide where a distinct pair is required."""


class KernelStateError(MathDomainError):
    """The projective action was applied to a state in the map's kernel."""


class DegenerateSamplingError(MathDomainError):
    """Every probe of a sampling estimator was unusable."""


class NotEnoughDataError(MathDomainError):
    """A fit was requested on fewer usable points than it needs."""


class InvertibilityViolationError(MathDomainError):
    """An operator that must be invertible is numerically singular."""


class HypothesisViolationError(HennionLabError):
    """A run-level hypothesis (faithfulness, contraction chance) fails."""
