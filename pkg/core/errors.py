"""
DR-KdV Errors
Outcomes of the algebra operations that callers need to tell apart
"""
from typing import Optional


class NotATotalDerivative(ValueError):
    """Raised when an element is not in the image of the spatial derivation"""


class NonzeroConstantTerm(ValueError):
    """Raised when an element expected to vanish at the origin does not"""


class NoSolution(ValueError):
    """Raised when an order-by-order linear system is inconsistent"""


class NonUniqueSolution(ValueError):
    """Raised when an order-by-order linear system is rank deficient"""


class NotAConservationLaw(ValueError):
    """Raised when f is not a conservation law of a flow"""

    def __init__(self, label, message: Optional[str] = None):
        self.label = label
        super().__init__(message or f"not a conservation law of flow {label}")


class ClosednessViolation(ValueError):
    """Raised when a 1-form that must be closed is not"""


class DegenerateJacobian(ValueError):
    """Raised when a Miura transformation has a non-invertible leading Jacobian"""


class TruncationError(ValueError):
    """Raised when a truncation context is too small for the requested result"""


class ParseError(ValueError):
    """Raised for malformed expression text, with its position"""

    def __init__(self, message: str, line: int = 0, column: int = 0, source: str = '<expr>'):
        self.message = message
        self.line = line
        self.column = column
        self.source = source
        super().__init__(f"{source}:{line}:{column}: {message}")
