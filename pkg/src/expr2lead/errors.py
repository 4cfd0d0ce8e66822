"""Shared exception hierarchy for the pipeline."""


class Expr2LeadError(Exception):
    """Base class for all pipeline errors."""


class ParseError(Expr2LeadError):
    """Malformed input file or string; carries position context in the message."""


class ValidationError(Expr2LeadError):
    """Input violates a documented precondition or range constraint."""


class EmptyResultError(Expr2LeadError):
    """A filter or aggregation step left nothing to work with."""


class SanitizeError(Expr2LeadError):
    """Molecular graph failed valence or aromaticity validation."""


class FetchError(Expr2LeadError):
    """Remote structure retrieval failed; carries the accession."""

    def __init__(self, accession, message):
        super().__init__(message)
        self.accession = accession


class InitializationError(Expr2LeadError):
    """Population seeding could not produce enough valid candidates."""
