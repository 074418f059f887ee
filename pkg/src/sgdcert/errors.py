"""Exception types shared across the package."""


class SgdCertError(Exception):
    """Base class for every error raised by this package."""


class DomainError(SgdCertError, ValueError):
    """A parameter lies outside the domain an operation or formula requires."""


class StepsizeOutOfRange(DomainError):
    """Resolved stepsize violates the admissible range for the run."""


class PermutationTooShort(DomainError):
    """Without-replacement sampling asked for more draws than components exist."""


class IndexOutOfRange(SgdCertError, IndexError):
    """Component, block or task index outside [0, n)."""


class InfeasibleNoise(SgdCertError):
    """Residual projection collapsed to zero while a positive noise level was requested."""


class GenerationFailed(SgdCertError):
    """Random instance generation could not meet its target after the retry budget."""


class LengthMismatch(SgdCertError, ValueError):
    """Trajectory length and weight-schedule horizon disagree."""


class NotAMinimizer(SgdCertError, ValueError):
    """A point claimed as a population minimizer has a non-negligible gradient."""


class InconsistentTask(SgdCertError, ValueError):
    """A task's linear system admits no exact solution."""


class DegenerateSet(SgdCertError, ValueError):
    """Convex-set descriptor is malformed (zero normal, nonpositive radius, empty set)."""


class InsufficientPoints(SgdCertError, ValueError):
    """Too few usable points for a rate fit."""


class FormatError(SgdCertError, ValueError):
    """A serialized artifact does not conform to its file format."""
