"""Exception hierarchy.

Everything raised deliberately by this package derives from ReachLearnError,
so callers can catch one type at the boundary.  Numerical failures during
simulation carry enough context (model, time, offending quantity) to be
reported without a traceback.
"""

from __future__ import annotations


class ReachLearnError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ReachLearnError, ValueError):
    """Invalid configuration value or combination."""


class ContractError(ReachLearnError, ValueError):
    """A function precondition was violated (bad shape, mode, range)."""


class ParseError(ReachLearnError):
    """A file could not be parsed.

    Carries the path and, when known, the 1-based line number.
    """

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}: " if line is None else f"{path}:{line}: "
        super().__init__(prefix + message)


class SimulationError(ReachLearnError):
    """A trajectory could not be integrated."""


class SingularityError(SimulationError):
    """A model derivative hit a singular term (division by ~0)."""

    def __init__(self, message: str, term: str | None = None, time: float | None = None):
        self.term = term
        self.time = time
        super().__init__(message)


class BlowUpError(SimulationError):
    """State norm exceeded the blow-up bound; carries the last valid time."""

    def __init__(self, message: str, last_valid_time: float | None = None):
        self.last_valid_time = last_valid_time
        super().__init__(message)


class DivergenceError(SimulationError):
    """Internal step count exceeded the configured maximum."""
