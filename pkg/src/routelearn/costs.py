"""State-dependent edge cost functions, beliefs, and cost-model validation.

Cost functions are polynomials with nonnegative ascending-power coefficients
(affine is the degree-1 special case). That restriction gives closed-form
integrals for the equilibrium potential and makes the minimum-slope check
decidable from the coefficients alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import BeliefError, CostError

DEFAULT_ALPHA = 1e-3


def polyval_ascending(coeffs, x) -> np.ndarray:
    """Horner evaluation of ascending-power coefficient rows at x.

    `coeffs` has shape (..., k); `x` must broadcast against coeffs[..., 0].
    """
    c = np.asarray(coeffs, dtype=float)
    x = np.asarray(x, dtype=float)
    res = np.zeros(np.broadcast(c[..., 0], x).shape, dtype=float)
    res += c[..., -1]
    for k in range(c.shape[-1] - 2, -1, -1):
        res = res * x + c[..., k]
    return res


def polyint_ascending(coeffs, x) -> np.ndarray:
    """Exact integral from 0 to x of the polynomial with ascending coefficients."""
    c = np.asarray(coeffs, dtype=float)
    x = np.asarray(x, dtype=float)
    k = c.shape[-1]
    res = np.zeros(np.broadcast(c[..., 0], x).shape, dtype=float)
    res += c[..., -1] / k
    for j in range(k - 2, -1, -1):
        res = res * x + c[..., j] / (j + 1)
    return res * x


@dataclass(frozen=True)
class CostFunction:
    """Edge travel-time function of load, with nonnegative coefficients.

    coefficients[i] multiplies load**i; the intercept is the free-flow time.
    """

    coefficients: tuple[float, ...]

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coefficients)
        if len(coeffs) < 2:
            raise CostError("cost function needs degree at least 1")
        if any(not np.isfinite(c) for c in coeffs):
            raise CostError("cost coefficients must be finite")
        if any(c < 0 for c in coeffs):
            raise CostError("cost coefficients must be nonnegative")
        object.__setattr__(self, "coefficients", coeffs)

    @classmethod
    def affine(cls, slope: float, intercept: float) -> "CostFunction":
        return cls((intercept, slope))

    @classmethod
    def polynomial(cls, coefficients: Sequence[float]) -> "CostFunction":
        return cls(tuple(coefficients))

    @property
    def form(self) -> str:
        return "affine" if len(self.coefficients) == 2 else "polynomial"

    @property
    def intercept(self) -> float:
        return self.coefficients[0]

    def value(self, load: float) -> float:
        if load < 0:
            raise ValueError("load must be nonnegative")
        return float(polyval_ascending(self.coefficients, load))

    def derivative(self, load: float) -> float:
        d = [k * c for k, c in enumerate(self.coefficients)][1:]
        return float(polyval_ascending(d, load))

    def min_derivative(self) -> float:
        # With nonnegative coefficients the derivative is nondecreasing on
        # [0, inf), so its infimum over any (0, D] is the linear coefficient.
        return self.coefficients[1]

    def integral(self, load: float) -> float:
        if load < 0:
            raise ValueError("load must be nonnegative")
        return float(polyint_ascending(self.coefficients, load))


@dataclass(frozen=True)
class StateSpace:
    """Finite state set plus the state the simulator draws costs from."""

    labels: tuple[str, ...]
    true_state: str

    def __post_init__(self):
        labels = tuple(str(s) for s in self.labels)
        if len(labels) != len(set(labels)):
            raise CostError("duplicate state labels")
        if not labels:
            raise CostError("state space is empty")
        if self.true_state not in labels:
            raise CostError(f"true state {self.true_state!r} not among labels")
        object.__setattr__(self, "labels", labels)

    @property
    def n_states(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise CostError(f"unknown state {label!r}") from None

    @property
    def true_index(self) -> int:
        return self.labels.index(self.true_state)


class Belief:
    """Probability vector over the state set, immutable once built."""

    __slots__ = ("probs",)

    def __init__(self, probs):
        p = np.array(probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise BeliefError("belief must be a nonempty vector")
        if not np.isfinite(p).all():
            raise BeliefError("belief entries must be finite")
        if (p < 0).any():
            raise BeliefError("belief entries must be nonnegative")
        if abs(float(p.sum()) - 1.0) > 1e-12:
            raise BeliefError(f"belief entries sum to {p.sum()!r}, not 1")
        p.setflags(write=False)
        self.probs = p

    @classmethod
    def uniform(cls, n_states: int) -> "Belief":
        return cls(np.full(n_states, 1.0 / n_states))

    @classmethod
    def point_mass(cls, n_states: int, index: int) -> "Belief":
        p = np.zeros(n_states)
        p[index] = 1.0
        return cls(p)

    def __len__(self) -> int:
        return self.probs.size

    def support(self) -> np.ndarray:
        """Indices of states with strictly positive probability."""
        return np.flatnonzero(self.probs > 0.0)

    def __repr__(self) -> str:
        return f"Belief({np.array2string(self.probs, precision=6)})"


class CostModel:
    """Complete cost table over (edge, state) plus the observation noise.

    `sigma` is the covariance of the per-stage Gaussian noise on realized
    edge costs; it must be symmetric positive definite so that every
    submatrix taken on a used-edge set stays invertible.
    """

    def __init__(
        self,
        edges: Sequence[str],
        states: Sequence[str],
        table: Mapping[tuple[str, str], CostFunction],
        sigma,
        alpha: float = DEFAULT_ALPHA,
    ):
        self.edges = tuple(str(e) for e in edges)
        self.states = tuple(str(s) for s in states)
        if len(self.edges) != len(set(self.edges)):
            raise CostError("duplicate edge identifiers")
        if len(self.states) != len(set(self.states)):
            raise CostError("duplicate state labels")
        if alpha <= 0:
            raise CostError("alpha must be positive")
        self.alpha = float(alpha)

        missing = [
            (e, s) for e in self.edges for s in self.states if (e, s) not in table
        ]
        if missing:
            raise CostError(f"cost table incomplete, missing entries: {missing[:4]}")
        self.table = {
            (e, s): table[(e, s)] for e in self.edges for s in self.states
        }
        for key, fn in self.table.items():
            if not isinstance(fn, CostFunction):
                raise CostError(f"table entry {key} is not a CostFunction")

        sig = np.array(sigma, dtype=float)
        n = len(self.edges)
        if sig.shape != (n, n):
            raise CostError(f"sigma has shape {sig.shape}, expected ({n}, {n})")
        if not np.isfinite(sig).all():
            raise CostError("sigma entries must be finite")
        if np.max(np.abs(sig - sig.T)) > 1e-12 * max(1.0, np.max(np.abs(sig))):
            raise CostError("sigma must be symmetric")
        try:
            np.linalg.cholesky(sig)
        except np.linalg.LinAlgError:
            raise CostError("sigma must be positive definite") from None
        sig.setflags(write=False)
        self.sigma = sig

        max_len = max(len(fn.coefficients) for fn in self.table.values())
        coeffs = np.zeros((len(self.edges), len(self.states), max_len))
        for i, e in enumerate(self.edges):
            for j, s in enumerate(self.states):
                fn = self.table[(e, s)]
                coeffs[i, j, : len(fn.coefficients)] = fn.coefficients
        coeffs.setflags(write=False)
        self._coeffs = coeffs

        self._edge_index = {e: i for i, e in enumerate(self.edges)}
        self._state_index = {s: i for i, s in enumerate(self.states)}
        self._chol_cache: dict[tuple[int, ...], tuple[np.ndarray, float]] = {}
        self._slope_ok: bool | None = None

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_states(self) -> int:
        return len(self.states)

    def edge_index(self, edge: str) -> int:
        try:
            return self._edge_index[edge]
        except KeyError:
            raise CostError(f"unknown edge {edge!r}") from None

    def state_index(self, state: str) -> int:
        try:
            return self._state_index[state]
        except KeyError:
            raise CostError(f"unknown state {state!r}") from None

    def function(self, edge: str, state: str) -> CostFunction:
        self.edge_index(edge)
        self.state_index(state)
        return self.table[(edge, state)]

    def mixed_coefficients(self, probs: np.ndarray) -> np.ndarray:
        """Belief-weighted coefficient rows, shape (n_edges, degree + 1)."""
        return np.einsum("esc,s->ec", self._coeffs, np.asarray(probs, dtype=float))

    def mixed_coefficients_batch(self, prob_rows: np.ndarray) -> np.ndarray:
        """Mixed coefficients for many beliefs at once, shape (n, E, degree + 1)."""
        return np.einsum("esc,ns->nec", self._coeffs, np.asarray(prob_rows, dtype=float))

    def state_coefficients(self, state: str) -> np.ndarray:
        return self._coeffs[:, self.state_index(state), :]

    def cost_matrix(self, loads, edge_indices: Sequence[int]) -> np.ndarray:
        """Per-state cost values on the selected edges, shape (S, m)."""
        idx = list(edge_indices)
        w = np.asarray(loads, dtype=float)[idx]
        sub = self._coeffs[idx]  # (m, S, C)
        return polyval_ascending(np.swapaxes(sub, 0, 1), w)

    def sigma_cholesky(self, edge_indices: tuple[int, ...]) -> tuple[np.ndarray, float]:
        """Cached Cholesky factor and log-determinant of a sigma submatrix."""
        key = tuple(edge_indices)
        hit = self._chol_cache.get(key)
        if hit is not None:
            return hit
        sub = self.sigma[np.ix_(key, key)]
        try:
            chol = np.linalg.cholesky(sub)
        except np.linalg.LinAlgError:
            raise CostError(
                f"noise covariance submatrix on edges {key} is not positive definite"
            ) from None
        logdet = 2.0 * float(np.log(np.diag(chol)).sum())
        chol.setflags(write=False)
        self._chol_cache[key] = (chol, logdet)
        return chol, logdet

    def ensure_slope_bound(self) -> None:
        """Raise CostError unless every cost function satisfies the slope bound."""
        if self._slope_ok is None:
            report = validate_slope_bound(self)
            self._slope_ok = report.ok
            if not report.ok:
                raise CostError(
                    "minimum-slope violation on entries "
                    + ", ".join(f"({e}, {s})" for e, s, _ in report.violations)
                )
        elif not self._slope_ok:
            raise CostError("cost model failed the minimum-slope check")

    def __repr__(self) -> str:
        return (
            f"CostModel(edges={len(self.edges)}, states={len(self.states)}, "
            f"alpha={self.alpha})"
        )


@dataclass(frozen=True)
class SlopeBoundReport:
    """Outcome of the minimum-slope check over the whole cost table."""

    ok: bool
    alpha: float
    violations: tuple[tuple[str, str, float], ...]  # (edge, state, inf derivative)


def validate_slope_bound(model: CostModel, alpha: float | None = None) -> SlopeBoundReport:
    """Check every cost function's derivative is at least alpha on (0, D].

    Affine entries are checked by slope; polynomial entries by the infimum
    of the derivative, which for nonnegative coefficients is attained as the
    load tends to zero.
    """
    bound = model.alpha if alpha is None else float(alpha)
    violations = []
    for e in model.edges:
        for s in model.states:
            inf_d = model.table[(e, s)].min_derivative()
            if inf_d < bound:
                violations.append((e, s, inf_d))
    return SlopeBoundReport(not violations, bound, tuple(violations))


def edge_cost(model: CostModel, edge: str, state: str, load: float) -> float:
    """Travel time on one edge in one state at the given load."""
    if load < 0:
        raise ValueError("load must be nonnegative")
    c = model._coeffs[model.edge_index(edge), model.state_index(state)]
    return float(polyval_ascending(c, load))


def expected_edge_cost(model: CostModel, edge: str, theta: Belief, load: float) -> float:
    """Belief-weighted travel time on one edge at the given load."""
    if load < 0:
        raise ValueError("load must be nonnegative")
    if len(theta) != model.n_states:
        raise BeliefError(
            f"belief has {len(theta)} entries, model has {model.n_states} states"
        )
    c = model._coeffs[model.edge_index(edge)]  # (S, C)
    mixed = theta.probs @ c
    return float(polyval_ascending(mixed, load))


def expected_route_cost(model: CostModel, network, route, theta: Belief, loads) -> float:
    """Belief-weighted route cost: sum of member-edge expected costs."""
    k = network.route_index(route)
    w = np.asarray(loads, dtype=float)
    total = 0.0
    for e in network.routes[k]:
        total += expected_edge_cost(model, e, theta, float(w[network.edge_index(e)]))
    return total


def beckmann_integral(model: CostModel, edge: str, theta: Belief, load: float) -> float:
    """Exact integral of the expected edge cost from zero load to `load`."""
    if load < 0:
        raise ValueError("load must be nonnegative")
    c = model._coeffs[model.edge_index(edge)]
    mixed = theta.probs @ c
    return float(polyint_ascending(mixed, load))
