"""Typed failures shared across the package.

The CLI maps these onto exit codes, so keep the hierarchy flat.
"""


class ParabolicError(Exception):
    """Base class for all package errors."""


class DomainError(ParabolicError, ValueError):
    """An operation is undefined for the given operator (e.g. negative power of a non-injective S)."""


class ArgumentError(ParabolicError, ValueError):
    """A scalar argument is outside its admissible range."""


class ContractError(ParabolicError, ValueError):
    """Inputs are individually valid but incompatible (wrong grid kind, mismatched shapes)."""


class SpecError(ParabolicError, ValueError):
    """User-supplied input violates its declared invariants."""


class NumericError(ParabolicError, ArithmeticError):
    """A linear solve or quadrature failed to reach its tolerance."""
