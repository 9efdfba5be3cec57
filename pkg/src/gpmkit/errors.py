"""Exception hierarchy shared by all gpmkit modules."""

from __future__ import annotations


class GpmError(Exception):
    """Base class for every error raised by this package."""


class InputParseError(GpmError, ValueError):
    """Malformed textual input: frequency table, designation, or profile file.

    Carries optional ``line`` and ``column`` (1-based) context which is
    appended to the rendered message.
    """

    def __init__(self, message: str, *, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class UnknownAlleleError(GpmError, ValueError):
    """An allele label is not part of the locus alphabet."""

    def __init__(self, locus_name: str, label: str):
        self.locus_name = locus_name
        self.label = label
        super().__init__(f"unknown allele '{label}' at locus '{locus_name}'")


class DataValidationError(GpmError, ValueError):
    """Data violates a documented invariant (sums, signs, shapes, duplicates)."""


class NoSharedLociError(DataValidationError):
    """Two profiles have no locus in common that is also in the frequency set."""


class UndefinedLikelihoodError(GpmError, ArithmeticError):
    """A likelihood ratio is undefined: a supported genotype has zero
    background probability, so the defining ratio divides by zero."""
