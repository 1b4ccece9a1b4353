# src/core/errors.py
"""
Exception hierarchy shared by the numerical core and the command runner.

Core functions raise these; `src/cli/commands.py` maps them onto exit codes
(ConfigError -> 1, any other OrbitSearchError -> 2).
"""


class OrbitSearchError(Exception):
    """Base class for every error raised deliberately by this package."""


class DomainError(OrbitSearchError):
    """A point lies outside the admissible region of its chart."""


class UnsupportedError(OrbitSearchError):
    """The operation is not defined for the given surface kind."""


class ResolutionError(OrbitSearchError):
    """A discrete path is too coarse to be lifted unambiguously."""


class PreconditionError(OrbitSearchError):
    """Input violates a documented precondition (T <= 0, off-submanifold endpoint, ...)."""


class NumericalError(OrbitSearchError):
    """A linear solve or evaluation produced a singular system or non-finite values."""


class ClippedError(OrbitSearchError):
    """
    An integrated trajectory left the admissible region.

    Attributes:
        partial_path: The portion of the trajectory computed before clipping.
    """
    def __init__(self, message: str, partial_path=None):
        super().__init__(message)
        self.partial_path = partial_path


class InvalidFamilyError(OrbitSearchError):
    """A minimax family does not have the required endpoint geometry."""


class ConfigError(OrbitSearchError):
    """
    A run configuration could not be parsed or validated.

    Attributes:
        line: 1-based line in the config file the problem was traced to, if known.
    """
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)
