"""Exception hierarchy shared by every module."""


class DiophError(Exception):
    """Base class for all domain errors raised by the package."""


class UnsupportedExpression(DiophError, ValueError):
    pass


class PrecisionExhausted(DiophError):
    pass


class IndependenceNotDeclared(DiophError):
    pass


class RationalDependenceDetected(DiophError):
    pass


class ScaleExceeded(DiophError):
    pass


class IndexOutOfRange(DiophError, IndexError):
    pass


class DegenerateLattice(DiophError):
    pass


class InsufficientData(DiophError):
    pass


class DomainError(DiophError, ValueError):
    pass


class ConfigError(DiophError, ValueError):
    pass


class SequenceExhausted(DiophError):
    def __init__(self, message, required=None):
        super().__init__(message)
        self.required = required


class InsufficientChildren(DiophError):
    def __init__(self, parent, found, needed):
        super().__init__(
            f"parent ball {parent}: found {found} admissible children, need {needed}"
        )
        self.parent = parent
        self.found = found
        self.needed = needed


class UnknownBall(DiophError, KeyError):
    pass


class ScaleWindow(DiophError, ValueError):
    pass


class CertificateFailure(DiophError):
    def __init__(self, message, ball=None, level=None):
        super().__init__(message)
        self.ball = ball
        self.level = level


class UsageError(Exception):
    """Bad command line; not a domain error."""
