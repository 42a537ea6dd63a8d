"""Error types shared across the package."""

from __future__ import annotations


class ToolrankError(Exception):
    """Base class for data and validation errors reported to users."""


class FormatError(ToolrankError):
    """Malformed input file. Carries the file path and 1-based line number."""

    def __init__(self, path: str, line_no: int, message: str):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")
