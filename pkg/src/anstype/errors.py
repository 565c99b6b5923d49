"""Shared exception types."""


class ValidationError(ValueError):
    """Input violates a documented contract (bad enum value, duplicate id, ...)."""


class DataFormatError(ValueError):
    """A data file could not be parsed (malformed JSON, bad TSV row, ...)."""
