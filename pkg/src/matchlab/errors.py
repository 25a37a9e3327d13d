"""Exception types shared across the package."""

from __future__ import annotations


class MatchlabError(Exception):
    """Base class for all package errors."""


class ConfigError(MatchlabError, ValueError):
    """Invalid configuration (bad distribution parameters, d too large, ...)."""


class DomainError(MatchlabError, ValueError):
    """Arguments outside an operation's domain (same-side pair, non-neighbors, ...)."""


class ContractError(MatchlabError, RuntimeError):
    """An input violates an operation's contract (non-edge in a matching, unstable list, ...)."""


class UnstableMatchingError(ContractError):
    """Raised when an operation requiring a stable matching receives one with a blocking edge."""

    def __init__(self, message: str, blocking_pairs: list[tuple[int, int]]) -> None:
        super().__init__(message)
        self.blocking_pairs = blocking_pairs


class SizeGuardError(MatchlabError, ValueError):
    """Instance too large for exhaustive enumeration."""
