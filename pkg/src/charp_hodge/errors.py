"""Exception types shared across the package."""

from __future__ import annotations


class CharPError(Exception):
    """Base class for every error raised by this package."""


class RingMismatch(CharPError):
    """Operands live in incompatible polynomial rings."""


class DegreeCapExceeded(CharPError):
    def __init__(self, degree: int, cap: int):
        super().__init__(f"total degree {degree} exceeds the cap {cap} (set CHARP_HODGE_MAX_DEGREE to raise it)")
        self.degree = degree
        self.cap = cap


class NotNilpotent(CharPError):
    """Higgs data or p-curvature is not nilpotent within the allowed level."""


class ContractViolation(CharPError):
    """A computed object failed a postcondition that the theory guarantees."""


class CertificationFailure(CharPError):
    def __init__(self, message: str, degree: int | None = None):
        super().__init__(message if degree is None else f"{message} (failing degree {degree})")
        self.degree = degree


class ParseError(CharPError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.message = message
        self.line = line
        self.column = column


class SemanticError(CharPError):
    def __init__(self, block: str, message: str):
        super().__init__(f"block {block}: {message}")
        self.block = block
