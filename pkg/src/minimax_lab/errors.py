"""Exception hierarchy shared by all solver modules.

Two families matter for the CLI exit code: UsageError (bad input, exit 1)
and HypothesisFailure (the input violates a hypothesis a routine relies on,
exit 2). Everything else is a plain MinimaxLabError.
"""

from __future__ import annotations


class MinimaxLabError(Exception):
    """Base class for every error raised by this package."""


class UsageError(MinimaxLabError):
    """The caller asked for something malformed or out of range."""


class HypothesisFailure(MinimaxLabError):
    """A structural hypothesis needed by the requested computation fails.

    These are findings, not bugs: the run completes with a diagnostic and
    the CLI maps them to exit code 2.
    """


# --- expression parsing -------------------------------------------------

class ExpressionError(UsageError):
    pass


class ExpressionSyntaxError(ExpressionError):
    def __init__(self, message: str, position: int):
        super().__init__(f"syntax error at position {position}: {message}")
        self.position = position


class UnknownIdentifierError(ExpressionError):
    def __init__(self, name: str, position: int):
        super().__init__(f"unknown identifier {name!r} at position {position}")
        self.name = name
        self.position = position


class ArityMismatchError(ExpressionError):
    def __init__(self, name: str, arity: int, position: int):
        super().__init__(
            f"variable {name!r} at position {position} exceeds arity {arity}"
        )
        self.name = name
        self.arity = arity
        self.position = position


# --- grids and fields ---------------------------------------------------

class GridError(UsageError):
    pass


class EvaluationError(MinimaxLabError):
    """A field produced a non-finite value on its own grid."""


# --- solver-level -------------------------------------------------------

class RangeError(UsageError):
    """A requested level r lies outside the guaranteed interval."""


class DomainError(UsageError):
    """A routine's sign or ordering precondition is violated."""


class PreconditionError(UsageError):
    pass


class CoverError(UsageError):
    """A supplied cover is not covering / not (weakly) filtering."""

    def __init__(self, message: str, offending=None):
        super().__init__(message)
        self.offending = offending


class ConfigError(UsageError):
    pass


class NonUniqueMinimumError(HypothesisFailure):
    """An inner minimization produced a multi-point global-minima cluster."""

    def __init__(self, message: str, lam=None, cluster=None):
        super().__init__(message)
        self.lam = lam
        self.cluster = cluster


class NoBracketError(HypothesisFailure):
    """The multiplier expansion never bracketed the target level.

    Treated as "hypothesis unverified", never as a counterexample.
    """


class MaxIterError(HypothesisFailure):
    pass


class ResidualError(HypothesisFailure):
    """The bisection collapsed with a residual the grid cannot explain."""


class Condition34Error(HypothesisFailure):
    """The small-multiplier limit ran into the upper bound of the field."""


class NoWitnessError(HypothesisFailure):
    """The multiplier grid is too coarse to expose the strict gap."""


class RootCountShortfallError(HypothesisFailure):
    def __init__(self, message: str, roots=None, y_mu=None):
        super().__init__(message)
        self.roots = roots
        self.y_mu = y_mu


class CrossCheckError(MinimaxLabError):
    """A certificate failed its own independent sanity comparison."""
