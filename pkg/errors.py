"""Exception hierarchy shared by the simulator modules.

ConfigurationError subclasses map to CLI exit code 2, DomainError
subclasses to exit code 1.
"""
from __future__ import annotations

from typing import List, Optional


class EnigmaSimError(Exception):
    """Root of every error raised on purpose by this package."""


class ConfigurationError(EnigmaSimError, ValueError):
    """Inputs are inconsistent with each other (lengths, dimensions, ranges)."""


class ConfigParseError(ConfigurationError):
    def __init__(self, path: str, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.path = path
        self.line = line
        self.column = column
        where = f"{path}:{line}:{column}" if line is not None else path
        super().__init__(f"{where}: {message}")


class ConfigValidationError(ConfigurationError):
    def __init__(self, problems: List[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


class DomainError(EnigmaSimError, ValueError):
    """A well-formed request that has no meaningful answer."""


class LengthMismatchError(DomainError):
    pass


class DegenerateSeedError(DomainError):
    pass


class InconsistentEvidenceError(DomainError):
    pass


class EnumerationLimitError(DomainError):
    pass


class NoFeasiblePointError(DomainError):
    def __init__(self, message: str, best_p_alice: Optional[float] = None):
        self.best_p_alice = best_p_alice
        super().__init__(message)
