"""
Exception hierarchy for proxforge.

Per-record problems are collected into reports by the callers; these
exceptions signal problems that stop the current unit of work.
"""

from typing import Optional, Tuple


class ProxForgeError(Exception):
    """Base class for all proxforge errors."""


class UsageError(ProxForgeError):
    """Bad command-line usage (unknown flag, missing input)."""


class ConfigError(ProxForgeError):
    """Configuration file or value outside its documented range."""


class AnnotationParseError(ProxForgeError):
    """Malformed annotation source. Carries the position of the failure."""

    def __init__(
        self,
        message: str,
        line: Optional[int] = None,
        column: Optional[int] = None,
        offset: Optional[int] = None,
    ):
        self.line = line
        self.column = column
        self.offset = offset
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        if offset is not None:
            where.append(f"byte {offset}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(f"{message}{suffix}")


class InvalidBBoxError(ProxForgeError):
    """Bounding box with non-positive width or height."""


class DepthFormatError(ProxForgeError):
    """Depth file does not match its declared format."""

    def __init__(
        self,
        message: str,
        offset: Optional[int] = None,
        pixel: Optional[Tuple[int, int]] = None,
    ):
        self.offset = offset
        self.pixel = pixel
        if pixel is not None:
            message = f"{message} at pixel (x={pixel[0]}, y={pixel[1]})"
        elif offset is not None:
            message = f"{message} at byte offset {offset}"
        super().__init__(message)


class DegenerateMapError(ProxForgeError):
    """Flat depth map: max == min, proximity cannot be ranked."""


class OutOfBoundsError(ProxForgeError):
    """Sampling center lies outside the depth map."""


class GenerationError(ProxForgeError):
    """A conversation could not be generated for an object or pair."""


class InvalidEvalSetError(ProxForgeError):
    """Evaluation set is empty or inconsistent."""


class FixtureError(ProxForgeError):
    """Answer key does not match the evaluation set."""


class DatasetFormatError(ProxForgeError):
    """A JSONL dataset, answer key or response file is malformed."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        where = ":".join(str(p) for p in (path, line) if p is not None)
        super().__init__(f"{where}: {message}" if where else message)
