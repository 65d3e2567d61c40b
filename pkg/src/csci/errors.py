"""Exception types shared across the pipeline.

Each maps to a distinct CLI exit code: config errors (2), data errors (3),
numerical/degeneracy errors (4).
"""


class CsciError(Exception):
    """Base class for pipeline errors."""


class ConfigError(CsciError):
    """Invalid or inconsistent configuration."""


class DataError(CsciError):
    """Malformed, duplicated, or structurally invalid input data."""


class DegenerateError(CsciError):
    """A computation has no well-defined answer on this input
    (all-pass standards, empty universes, zero-variance series)."""
