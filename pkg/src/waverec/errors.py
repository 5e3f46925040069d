"""Exception hierarchy.

Every error raised by the library derives from :class:`WaverecError`.  The
CLI maps :class:`InputError` subclasses to exit code 1 and
:class:`NoConvergence` / :class:`CertificateFailure` to exit code 2.
"""


class WaverecError(Exception):
    """Base class for all library errors."""


class InputError(WaverecError, ValueError):
    """The caller supplied data that violates an operation's precondition."""


class NonHermitian(InputError):
    pass


class NonFinite(InputError):
    pass


class NotPsd(InputError):
    pass


class DimMismatch(InputError):
    pass


class SingularPair(InputError):
    """The anticommutator equation has no solution on some eigen-block."""


class TruncationTooSmall(InputError):
    pass


class Overflow(TruncationTooSmall):
    """Coherent amplitude too large for the requested Fock truncation."""


class BasisMismatch(InputError):
    pass


class NegativeWeight(InputError):
    pass


class NonUniformGrid(InputError):
    pass


class ZeroAmplitude(InputError):
    pass


class NotContraction(InputError):
    pass


class InvalidDilation(InputError):
    pass


class NotUnitary(InputError):
    pass


class BadReference(InputError):
    pass


class GridTooCoarse(InputError):
    pass


class SupportViolation(InputError):
    pass


class Inadmissible(InputError):
    def __init__(self, constraint, violation):
        super().__init__(f"inadmissible: {constraint} violated by {violation:.3e}")
        self.constraint = constraint
        self.violation = violation


class ZeroSignal(InputError):
    pass


class DegenerateGram(InputError):
    pass


class NotEquidiagonal(InputError):
    pass


class GammaOutOfRange(InputError):
    pass


class TooFewPoints(InputError):
    pass


class AllDominated(InputError):
    pass


class Dominated(InputError):
    pass


class ModeMismatch(InputError):
    pass


class ZeroOutcome(InputError):
    pass


class SingularFisher(InputError):
    pass


class SingularG(InputError):
    pass


class SingularH(InputError):
    pass


class SingularS(InputError):
    pass


class SupportDeficient(InputError):
    pass


class StepTooSmall(InputError):
    pass


class SchemaError(InputError):
    def __init__(self, message, pointer=""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer


class NumericalFailure(WaverecError):
    pass


class NegativeVariance(NumericalFailure):
    pass


class CertificateFailure(WaverecError):
    """A solver returned a result whose certificate residuals exceed tolerance."""


class NoConvergence(WaverecError):
    """Iteration limit reached; ``best`` holds the last iterate's result."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
