"""Exception types shared by every package.

Each error subclasses a builtin so callers can catch ``ValueError`` or
``RuntimeError`` without importing this module. The CLI is the only layer
that turns them into exit codes.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from mdp.core import Violation


class InvalidMdpError(ValueError):
    def __init__(self, violations: list["Violation"]):
        self.violations = violations
        summary = "; ".join(str(v) for v in violations[:5])
        more = f" (+{len(violations) - 5} more)" if len(violations) > 5 else ""
        super().__init__(f"Invalid MDP: {summary}{more}")


class SingularSystemError(RuntimeError):
    pass


class PolicyError(ValueError):
    pass


class CriticMismatchError(ValueError):
    pass


class DimensionMismatchError(ValueError):
    pass


class UnknownBaselineError(ValueError):
    pass


class MissingCriticError(ValueError):
    pass


class InputError(ValueError):
    """Unreadable or invalid input file. Always exit code 2."""


class UsageError(ValueError):
    """Inconsistent command-line configuration. Always exit code 2."""
