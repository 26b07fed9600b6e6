"""Shared exception base for the package.

Every domain error raised by confalyzer derives from ConfalyzerError so the
CLI can map them to exit code 1 while usage errors stay at exit code 2.
"""


class ConfalyzerError(Exception):
    """Base class for all domain errors."""
