"""Exception taxonomy shared across the package."""


class IsaacsVexError(Exception):
    """Base class for all package errors."""


class ParseError(IsaacsVexError):
    """Malformed input document (JSON syntax, binary snapshot header)."""


class ValidationError(IsaacsVexError):
    """Structurally valid input that violates the problem contract."""


class UnknownProblem(IsaacsVexError):
    """Requested built-in problem name does not exist."""


class NonFiniteCoefficient(IsaacsVexError):
    """A coefficient evaluator returned NaN or Inf."""


class SingularSigma(IsaacsVexError):
    """Volatility matrix is numerically singular at an evaluation point."""


class DivergedField(IsaacsVexError):
    """Backward recursion exceeded the a-priori value bound; aborting."""


class InconsistentSplit(IsaacsVexError):
    """Envelope split violates the barycentric identities."""


class NonFiniteInput(IsaacsVexError):
    """Array input contains NaN or Inf."""


class UnsupportedG(IsaacsVexError):
    """Terminal payoff outside the family covered by a closed form."""


class MissingArtifacts(IsaacsVexError):
    """Expected solve artifacts (slices, splits) not found on disk."""
