"""Wardrop equilibrium computation via route-based Frank-Wolfe.

The potential minimized is the sum over edges of the integral of the
belief-weighted cost, so its minimizers are exactly the equilibria and the
duality gap provides a no-better-route certificate. For affine mixtures the
solver finishes with an equal-cost polish on the active route set, which
pins interior solutions to machine precision and leaves unused routes at
exactly zero flow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .costs import Belief, CostModel, polyint_ascending, polyval_ascending
from .errors import SolverError
from .graph import Network

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 100_000


@dataclass(frozen=True)
class EquilibriumResult:
    """One equilibrium route-flow representative and its certificates.

    Edge loads are essentially unique; route flows are one representative of
    a possibly larger optimal face, so downstream code must only rely on
    `edge_loads`.
    """

    route_flows: np.ndarray
    edge_loads: np.ndarray
    gap: float
    route_costs: np.ndarray
    n_iterations: int
    potential: float
    phi_history: tuple[float, ...] | None = None


@dataclass(frozen=True)
class WardropCertificate:
    ok: bool
    worst_violation: float
    min_route_cost: float
    route_costs: np.ndarray
    used_routes: tuple[int, ...]


def _line_search(mixed: np.ndarray, w: np.ndarray, d: np.ndarray, affine: bool) -> float:
    """Exact step toward the all-or-nothing target.

    Minimizes the potential along w + g*d for g in [0, 1]. The directional
    derivative sum_e cost_e(w + g d) d_e is nondecreasing in g, so the affine
    case has a closed form and the general case bisects on its sign.
    """
    if affine:
        num = -float(polyval_ascending(mixed, w) @ d)
        den = float(mixed[:, 1] @ (d * d))
        if den <= 0.0:
            # direction changes no loaded edge; any step is equivalent
            return 1.0
        return min(1.0, max(0.0, num / den))
    if float(polyval_ascending(mixed, w + d) @ d) <= 0.0:
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if float(polyval_ascending(mixed, w + mid * d) @ d) > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _face_polish(
    inc: np.ndarray, mixed: np.ndarray, demand: float, q: np.ndarray, rmin: int
) -> np.ndarray | None:
    """Equalize expected costs on the active route set (affine mixtures).

    Solves the equal-cost linear system restricted to the currently positive
    routes plus the cheapest one, dropping negative flows active-set style.
    Returns the polished flows only when they satisfy the equilibrium
    conditions to near machine precision, else None.
    """
    slopes, intercepts = mixed[:, 1], mixed[:, 0]
    route_slope = inc.T @ (slopes[:, None] * inc)
    route_free = inc.T @ intercepts
    active = sorted(set(np.flatnonzero(q > 1e-12 * demand)) | {rmin})
    while True:
        k = len(active)
        if k == 1:
            sol = np.array([demand])
            break
        m = np.zeros((k, k))
        rhs = np.zeros(k)
        base = active[-1]
        for i, r in enumerate(active[:-1]):
            m[i] = route_slope[r, active] - route_slope[base, active]
            rhs[i] = route_free[base] - route_free[r]
        m[k - 1] = 1.0
        rhs[k - 1] = demand
        try:
            sol = np.linalg.solve(m, rhs)
        except np.linalg.LinAlgError:
            return None
        if sol.min() >= -1e-12 * demand:
            sol = np.maximum(sol, 0.0)
            break
        active.pop(int(np.argmin(sol)))
    q_new = np.zeros(inc.shape[1])
    q_new[active] = sol
    q_new[active[int(np.argmax(sol))]] += demand - q_new.sum()

    t = inc.T @ polyval_ascending(mixed, inc @ q_new)
    common = float(t[active].mean())
    scale = 1e-9 * (1.0 + abs(common))
    if np.max(np.abs(t[active] - common)) > scale:
        return None
    if float(t.min()) < common - scale:
        return None
    return q_new


def solve_wardrop(
    network: Network,
    model: CostModel,
    theta: Belief,
    demand: float,
    *,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    init_route: int | None = None,
    keep_history: bool = False,
) -> EquilibriumResult:
    """Equilibrium route flows and edge loads for one belief.

    Iterates all-or-nothing assignment to the cheapest route with exact line
    search, stopping once the relative duality gap or the no-better-route
    certificate falls below `tol`. Ties in the cheapest route go to the
    lowest index so runs are deterministic.
    """
    if demand <= 0:
        raise ValueError("demand must be positive")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    if len(theta) != model.n_states:
        raise SolverError(
            f"belief has {len(theta)} entries, model has {model.n_states} states"
        )
    model.ensure_slope_bound()

    inc = network.incidence
    n_routes = network.n_routes
    mixed = model.mixed_coefficients(theta.probs)
    affine = mixed.shape[1] == 2 or not np.any(mixed[:, 2:])
    flow_tol = 1e-9 * demand
    tiny = np.finfo(float).tiny

    if init_route is None:
        t0 = inc.T @ polyval_ascending(mixed, np.zeros(network.n_edges))
        start = int(np.argmin(t0))
    else:
        start = int(init_route)
        if not 0 <= start < n_routes:
            raise ValueError(f"init_route {start} out of range")
    q = np.zeros(n_routes)
    q[start] = demand

    history: list[float] | None = [] if keep_history else None
    best_lb = -np.inf
    prev_phi = np.inf
    converged = False
    rmin = 0
    it = 0

    for it in range(1, max_iter + 1):
        w = inc @ q
        costs = polyval_ascending(mixed, w)
        t = inc.T @ costs
        phi = float(polyint_ascending(mixed, w).sum())
        assert phi <= prev_phi + 1e-9 * (1.0 + abs(prev_phi)), "potential increased"
        prev_phi = phi
        if history is not None:
            history.append(phi)

        rmin = int(np.argmin(t))
        abs_gap = float(t @ q - t[rmin] * demand)
        best_lb = max(best_lb, phi - abs_gap)
        rel_gap = (phi - best_lb) / max(abs(phi), tiny)
        used = q > flow_tol
        worst = float(np.max(t[used]) - t[rmin]) if used.any() else 0.0
        if rel_gap <= tol or worst <= tol * max(1.0, abs(t[rmin])):
            converged = True
            break

        y = np.zeros(n_routes)
        y[rmin] = demand
        d = inc @ (y - q)
        gamma = _line_search(mixed, w, d, affine)
        if gamma >= 1.0:
            q = y
        else:
            q = q + gamma * (y - q)

    if affine:
        polished = _face_polish(inc, mixed, demand, q, rmin)
        if polished is not None:
            q = polished
            converged = True

    # final certificates at the returned point
    q = q.copy()
    q.setflags(write=False)
    w = inc @ q
    w.setflags(write=False)
    t = inc.T @ polyval_ascending(mixed, w)
    phi = float(polyint_ascending(mixed, w).sum())
    rmin = int(np.argmin(t))
    abs_gap = float(t @ q - t[rmin] * demand)
    best_lb = max(best_lb, phi - abs_gap)
    rel_gap = max(0.0, (phi - best_lb) / max(abs(phi), tiny))
    prev_phi = phi
    if rel_gap <= tol:
        converged = True
    result = EquilibriumResult(
        route_flows=q,
        edge_loads=w,
        gap=float(rel_gap),
        route_costs=t,
        n_iterations=it,
        potential=float(prev_phi),
        phi_history=tuple(history) if history is not None else None,
    )
    if not converged:
        raise SolverError(
            f"no convergence within {max_iter} iterations (relative gap {rel_gap:.3e})",
            best=result,
        )
    return result


def complete_info_equilibrium(
    network: Network,
    model: CostModel,
    state: str,
    demand: float,
    **kwargs,
) -> EquilibriumResult:
    """Equilibrium when the state is known, i.e. under a point-mass belief."""
    theta = Belief.point_mass(model.n_states, model.state_index(state))
    return solve_wardrop(network, model, theta, demand, **kwargs)


def verify_equilibrium(
    network: Network,
    model: CostModel,
    theta: Belief,
    result,
    tol: float,
    *,
    flow_tol: float | None = None,
) -> WardropCertificate:
    """Recompute route costs and certify the no-better-route condition.

    Accepts a solver result or a raw route-flow vector. Returns a failing
    certificate (never raises) so callers can inspect the worst violation.
    """
    q = np.asarray(getattr(result, "route_flows", result), dtype=float)
    if q.shape != (network.n_routes,):
        raise ValueError(f"route flows have shape {q.shape}")
    mixed = model.mixed_coefficients(theta.probs)
    w = network.incidence @ q
    t = network.incidence.T @ polyval_ascending(mixed, w)
    if flow_tol is None:
        flow_tol = 1e-9 * max(float(q.sum()), np.finfo(float).tiny)
    used = tuple(int(i) for i in np.flatnonzero(q > flow_tol))
    t_min = float(t.min())
    worst = max((float(t[i]) - t_min for i in used), default=0.0)
    return WardropCertificate(
        ok=worst <= tol,
        worst_violation=worst,
        min_route_cost=t_min,
        route_costs=t,
        used_routes=used,
    )


def solve_wardrop_batch(
    network: Network,
    model: CostModel,
    thetas: np.ndarray,
    demand: float,
    *,
    tol: float = 1e-10,
    max_iter: int = 300,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized Frank-Wolfe over many beliefs at once.

    Runs the same iteration as solve_wardrop on every row of `thetas`
    simultaneously (no final polish) and returns the edge-load matrix plus
    the per-row relative duality gap. Intended for dense simplex sweeps.
    """
    if demand <= 0:
        raise ValueError("demand must be positive")
    model.ensure_slope_bound()
    probs = np.asarray(thetas, dtype=float)
    if probs.ndim != 2 or probs.shape[1] != model.n_states:
        raise ValueError(f"belief matrix has shape {probs.shape}")
    inc = network.incidence
    n, n_routes = probs.shape[0], network.n_routes
    rows = np.arange(n)
    mixed = model.mixed_coefficients_batch(probs)  # (n, E, C)
    affine = mixed.shape[2] == 2 or not np.any(mixed[:, :, 2:])
    slopes = mixed[:, :, 1]
    tiny = np.finfo(float).tiny

    t0 = polyval_ascending(mixed, np.zeros((n, network.n_edges))) @ inc
    q = np.zeros((n, n_routes))
    q[rows, np.argmin(t0, axis=1)] = demand

    best_lb = np.full(n, -np.inf)
    gaps = np.full(n, np.inf)
    for _ in range(max_iter):
        w = q @ inc.T
        costs = polyval_ascending(mixed, w)
        t = costs @ inc
        phi = polyint_ascending(mixed, w).sum(axis=1)
        rmin = np.argmin(t, axis=1)
        abs_gap = (t * q).sum(axis=1) - t[rows, rmin] * demand
        np.maximum(best_lb, phi - abs_gap, out=best_lb)
        gaps = (phi - best_lb) / np.maximum(np.abs(phi), tiny)
        live = gaps > tol
        if not live.any():
            break

        y = np.zeros_like(q)
        y[rows, rmin] = demand
        step = y - q
        d = step @ inc.T
        if affine:
            num = -(costs * d).sum(axis=1)
            den = (slopes * d * d).sum(axis=1)
            gamma = np.where(den > 0.0, np.clip(num / np.where(den > 0.0, den, 1.0), 0.0, 1.0), 1.0)
        else:
            gamma = np.ones(n)
            psi1 = (polyval_ascending(mixed, w + d) * d).sum(axis=1)
            need = psi1 > 0.0
            if need.any():
                lo = np.zeros(need.sum())
                hi = np.ones(need.sum())
                wn, dn, mn = w[need], d[need], mixed[need]
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    pos = (polyval_ascending(mn, wn + mid[:, None] * dn) * dn).sum(axis=1) > 0.0
                    hi = np.where(pos, mid, hi)
                    lo = np.where(pos, lo, mid)
                gamma[need] = 0.5 * (lo + hi)
        q[live] += gamma[live, None] * step[live]

    return q @ inc.T, gaps
