"""Exception hierarchy.  Input errors and failed mathematical checks are kept apart."""
from __future__ import annotations


class FiberMeasureError(Exception):
    """Base class for every error raised by the package."""


class InputError(FiberMeasureError, ValueError):
    """The caller supplied something invalid."""


class AlphabetError(InputError):
    pass


class FamilyError(InputError):
    pass


class CompatibilityError(InputError):
    """A word is not compatible with the selector digits of ω."""


class PreconditionError(InputError):
    pass


class SupportError(InputError):
    pass


class DomainError(InputError):
    pass


class InvariantError(InputError):
    pass


class ConfigError(InputError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)


class CertificationError(FiberMeasureError):
    """A certified check or search did not succeed."""


class GeometryError(CertificationError):
    pass


class RefinementLimitError(CertificationError):
    def __init__(self, message: str, bracket=None):
        self.bracket = bracket
        super().__init__(message)


class SearchFailure(CertificationError):
    pass


class AffineReducibleError(CertificationError):
    pass


class ResolutionError(InputError):
    pass
