"""Exception types raised across the package."""

from __future__ import annotations


class DTIMError(Exception):
    """Base class for every error raised by this package."""


class ParseError(DTIMError, ValueError):
    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class EmptyGraphError(DTIMError, ValueError):
    pass


class ConvergenceError(DTIMError, RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


class AdmissibilityError(DTIMError, ValueError):
    def __init__(self, node: int, total: float):
        super().__init__(f"incoming weights of node {node} sum to {total!r} > 1")
        self.node = node
        self.total = total


class EmptyTargetSetError(DTIMError, ValueError):
    pass


class DegenerateDiversityError(DTIMError, ZeroDivisionError):
    pass


class EnumerationTooLargeError(DTIMError, ValueError):
    pass
