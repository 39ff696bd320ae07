"""Exception types shared across the package."""

from __future__ import annotations


class RoutelearnError(Exception):
    """Base class for all package-specific errors."""


class NetworkError(RoutelearnError, ValueError):
    """Invalid network structure or mismatched route/edge data."""


class CostError(RoutelearnError, ValueError):
    """Invalid cost function, cost table, or noise covariance."""


class BeliefError(RoutelearnError, ValueError):
    """Vector is not a probability distribution over the states."""


class ScenarioError(RoutelearnError, ValueError):
    """Scenario file or dictionary failed validation."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class SolverError(RoutelearnError, RuntimeError):
    """Equilibrium computation failed.

    When raised for non-convergence, `best` carries the best iterate found
    so callers can inspect how far the solver got.
    """

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best
