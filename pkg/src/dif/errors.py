"""Exception hierarchy.

Each class carries the process exit code the CLI uses when it escapes a
subcommand, so library callers and shell scripts see the same taxonomy.
"""

from __future__ import annotations


class DifError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ParseError(DifError):
    """Malformed input data (ragged rows, non-numeric or missing cells)."""

    exit_code = 3


class InputError(ParseError):
    """Input data is structurally unusable, e.g. empty."""


class ConfigError(DifError, ValueError):
    """Invalid configuration value or unknown option."""

    exit_code = 4


class ShapeError(DifError, ValueError):
    """Operand dimensions do not agree."""

    exit_code = 5


class MetricError(DifError, ValueError):
    """A metric is undefined for the given labels."""

    exit_code = 6


class VerificationError(DifError):
    """An equivalence check failed."""

    exit_code = 7


class ModelFormatError(DifError):
    """A model file is truncated, corrupt, or of an unknown version."""

    exit_code = 8


EXIT_CODES = {
    "ok": 0,
    "error": DifError.exit_code,
    "usage": 2,
    "parse": ParseError.exit_code,
    "config": ConfigError.exit_code,
    "dimension": ShapeError.exit_code,
    "metric": MetricError.exit_code,
    "verification": VerificationError.exit_code,
    "model-format": ModelFormatError.exit_code,
    "io": 9,
}
