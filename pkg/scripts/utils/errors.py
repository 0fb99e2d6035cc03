"""Exception hierarchy for the repositioning pipeline.

Every error carries a stable machine ``code`` so the command-line entry point can
emit a one-line, parseable failure record.
"""

from __future__ import annotations

from pathlib import Path


class RepositioningError(Exception):
    """Base class for all pipeline errors."""

    code = "error"

    def __init__(self, message: str) -> None:
        """Initialize with a human-readable message."""
        super().__init__(message)
        self.message = message


class InputFormatError(RepositioningError):
    """Malformed input file, reported with a 1-based line number."""

    code = "input_format"

    def __init__(self, path: Path | str, line: int | None, message: str) -> None:
        """Initialize with the offending file and line.

        Args:
            path: File being parsed.
            line: 1-based line number, or None when the error is file-level.
            message: What is wrong with the line.
        """
        location = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{location}: {message}")
        self.path = Path(path)
        self.line = line


class DomainValidationError(RepositioningError):
    """A value violates a domain-type invariant (range, symmetry, width, alphabet)."""

    code = "invalid_value"


class ConfigError(RepositioningError):
    """Configuration is unreadable, fails schema validation, or names missing files."""

    code = "config"


class EmptyCatalogError(RepositioningError):
    """Catalog alignment removed every entity on one side."""

    code = "empty_catalog"

    def __init__(self, side: str) -> None:
        """Initialize for the side that became empty."""
        super().__init__(f"no {side} entities survive catalog alignment")
        self.side = side


class InsufficientDataError(RepositioningError):
    """Not enough data to run the requested stage."""

    code = "insufficient_data"
