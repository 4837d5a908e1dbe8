"""Exception hierarchy shared by the library and the command line tool.

Three broad families map onto CLI exit codes: configuration/validation
problems (exit 2), numerical failures (exit 3), and missing input
artifacts (exit 4).
"""


class ResoscanError(Exception):
    """Base class for all library-specific errors."""


class ValidationError(ResoscanError, ValueError):
    """Invalid argument, configuration value, or malformed input file."""


class DegenerateInputError(ValidationError):
    """Input is formally valid but numerically empty (e.g. zero-norm state)."""


class ContainmentError(ValidationError):
    """A wave packet does not fit inside the grid at the required level."""


class ResolutionError(ValidationError):
    """Grid spacing too coarse for the requested wavenumber or energy."""


class DomainError(ValidationError):
    """Argument outside the validity region of an evaluation scheme."""


class NumericalError(ResoscanError, RuntimeError):
    """A numerical routine failed to reach its stated accuracy."""


class LinearSolveError(NumericalError):
    """A shifted linear solve did not meet its residual tolerance."""


class PropagationError(NumericalError):
    """Chebyshev series failure or norm divergence during time evolution."""


class StopConditionError(NumericalError):
    """Time evolution hit the step budget before its stop condition."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class NoBarrierError(NumericalError):
    """Potential has no interior maximum in the search range."""


class FitError(NumericalError):
    """Resonance fit failed to converge or is ill-conditioned."""


class AmbiguousPeakError(FitError):
    """Several comparable maxima inside one fit window."""


class NotFoundError(NumericalError):
    """No resonance signature in the scanned range."""


class AntiResonanceError(NotFoundError):
    """Phase shift crosses pi/2 (mod pi) downward only; no width defined."""


class PoleInstabilityError(NumericalError):
    """Rational continuation poles move too much between fit orders."""

    def __init__(self, message, candidates=()):
        super().__init__(message)
        self.candidates = list(candidates)


class MissingArtifactError(ResoscanError, FileNotFoundError):
    """A required intermediate file from an earlier stage is absent."""
