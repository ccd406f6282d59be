"""Exception types shared across the package."""

from __future__ import annotations


class SparsePathsError(Exception):
    """Base class for errors raised by this package."""


class GraphError(SparsePathsError, ValueError):
    """Invalid graph structure or unusable construction options."""


class EdgeListError(GraphError):
    """Malformed edge-list input; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConvergenceError(SparsePathsError, RuntimeError):
    """An iterative solver ran out of iterations before meeting tolerance."""

    def __init__(self, message: str, residual: float | None = None,
                 iterations: int | None = None, node: int | None = None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.node = node
