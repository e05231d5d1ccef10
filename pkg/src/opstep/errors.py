"""Exception types shared across the package."""


class OpstepError(Exception):
    """Base class for package-specific failures."""


class TapeMismatchError(OpstepError):
    """A backward sweep was requested from a variable recorded on another tape."""


class JetSingularityError(OpstepError):
    """Division by a jet whose leading coefficient is zero."""


class UnsupportedDerivativeError(OpstepError):
    """Requested a derivative the jet machinery does not provide (e.g. mixed
    cross-derivatives: each coordinate must be seeded in its own pass)."""


class NonFiniteGradientError(OpstepError):
    """A gradient component came out NaN/Inf; carries the flat parameter index."""

    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"non-finite gradient at flat parameter index {index}")


class StiffnessSuspectedError(OpstepError):
    """Explicit solver step size underflowed; the problem is likely stiff."""


class NewtonFailureError(OpstepError):
    """Newton iteration failed to converge after step-size reduction."""


class DegenerateGridError(OpstepError):
    """Random-field covariance stayed non-positive-definite after jitter escalation."""


class RolloutDivergedError(OpstepError):
    """Rollout produced a non-finite or exploding prediction; carries window index."""

    def __init__(self, window, message=None):
        self.window = window
        super().__init__(message or f"rollout diverged in window {window}")


class CheckpointError(OpstepError):
    """Checkpoint failed validation on load."""


class UndefinedMetricError(OpstepError):
    """Relative error against a zero-norm reference is undefined."""
