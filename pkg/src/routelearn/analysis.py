"""Rest-point theory: distinguishability, verification, enumeration, costs.

A rest point pairs a belief with the equilibrium load it induces such that
the belief puts no mass on states whose costs differ from the truth on any
used edge. Trajectories settle exactly on such pairs, so these checks close
the loop between simulation output and the underlying fixed-point structure.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .costs import Belief, CostModel, polyval_ascending
from .equilibrium import complete_info_equilibrium, solve_wardrop, solve_wardrop_batch
from .graph import Network, is_series_parallel, used_edges


def distinguishable_states(
    model: CostModel,
    true_state: str,
    loads,
    cost_tol: float = 1e-9,
    used_tol: float = 0.0,
) -> frozenset[str]:
    """States whose cost differs from the truth on some loaded edge.

    A state that differs only on edges carrying no load produces the same
    observed-cost distribution as the truth and cannot be told apart.
    """
    w = np.asarray(loads, dtype=float)
    used = np.flatnonzero(w > used_tol)
    out = set()
    if used.size == 0:
        return frozenset(out)
    true_vals = polyval_ascending(model.state_coefficients(true_state)[used], w[used])
    for s in model.states:
        if s == true_state:
            continue
        vals = polyval_ascending(model.state_coefficients(s)[used], w[used])
        if np.any(np.abs(vals - true_vals) > cost_tol):
            out.add(s)
    return frozenset(out)


def average_cost(model: CostModel, state: str, loads) -> float:
    """Demand-weighted travel time: sum of load times edge cost in `state`."""
    w = np.asarray(loads, dtype=float)
    vals = polyval_ascending(model.state_coefficients(state), w)
    return float(w @ vals)


@dataclass(frozen=True)
class RestPointCheck:
    """Certificates for one claimed (belief, load) rest point."""

    ok: bool
    violations: tuple[str, ...]
    equilibrium_gap: float  # max-norm gap between claimed and recomputed loads
    residual_mass: float  # belief mass on states distinguishable at the claim
    consistency_gap: float  # worst used-edge gap, believed vs true expected cost
    used: tuple[str, ...]


def check_rest_point(
    network: Network,
    model: CostModel,
    true_state: str,
    theta: Belief,
    loads,
    demand: float,
    *,
    load_tol: float = 1e-6,
    mass_tol: float = 1e-3,
    cost_tol: float = 1e-9,
    used_tol: float | None = None,
    solver_tol: float = 1e-10,
) -> RestPointCheck:
    """Verify a claimed rest point and return its certificates.

    Passes when (i) the equilibrium at `theta` reproduces `loads` within
    `load_tol` and (ii) `theta` puts at most `mass_tol` on states
    distinguishable at `loads`. Also certifies that on used edges the
    belief-weighted cost matches the true cost, which (i) and (ii) imply up
    to residual-mass leakage.
    """
    if used_tol is None:
        used_tol = 1e-9 * demand
    w_claim = np.asarray(loads, dtype=float)
    violations = []

    eq = solve_wardrop(network, model, theta, demand, tol=solver_tol)
    gap = float(np.max(np.abs(eq.edge_loads - w_claim)))
    if gap > load_tol:
        violations.append("equilibrium_load_mismatch")

    dist = distinguishable_states(model, true_state, w_claim, cost_tol, used_tol)
    mass = float(
        sum(theta.probs[model.state_index(s)] for s in dist)
    )
    if mass > mass_tol:
        violations.append("distinguishable_mass")

    used_idx = np.flatnonzero(w_claim > used_tol)
    used_labels = tuple(model.edges[i] for i in used_idx)
    if used_idx.size:
        per_state = model.cost_matrix(w_claim, used_idx)  # (S, m)
        believed = theta.probs @ per_state
        true_vals = per_state[model.state_index(true_state)]
        consistency = float(np.max(np.abs(believed - true_vals)))
        worst_state_gap = float(np.max(np.abs(per_state - true_vals[None, :])))
    else:
        consistency = 0.0
        worst_state_gap = 0.0
    # mass leakage on distinguishable states bounds the believed-cost error
    if consistency > mass_tol * (1.0 + worst_state_gap) + cost_tol:
        violations.append("used_cost_consistency")

    return RestPointCheck(
        ok=not violations,
        violations=tuple(violations),
        equilibrium_gap=gap,
        residual_mass=mass,
        consistency_gap=consistency,
        used=used_labels,
    )


@dataclass(frozen=True)
class RestPointFamily:
    """A cluster of rest points sharing one used-edge set.

    On a fixed used-edge set the equilibrium load is pinned down, so the
    family varies only in the belief. `thresholds` maps each support state
    to the (min, max) mass it takes across the family; when the support has
    exactly two states the boundaries are refined by bisection.
    """

    used: tuple[str, ...]
    support: tuple[str, ...]
    loads: np.ndarray
    n_nodes: int
    representative: np.ndarray
    thresholds: dict[str, tuple[float, float]]
    refined: bool
    average_cost_true: float
    check: RestPointCheck


@dataclass(frozen=True)
class RestPointReport:
    families: tuple[RestPointFamily, ...]
    grid_n: int
    n_nodes: int
    n_passing: int
    mass_tol: float
    max_solver_gap: float


def _simplex_grid_chunks(n_states: int, grid_n: int, chunk_size: int):
    """Yield (chunk, n_states) arrays covering the grid k/grid_n on the simplex."""
    if n_states == 1:
        yield np.ones((1, 1))
        return
    total_slots = grid_n + n_states - 1
    bars_iter = itertools.combinations(range(total_slots), n_states - 1)
    while True:
        batch = list(itertools.islice(bars_iter, chunk_size))
        if not batch:
            return
        bars = np.asarray(batch, dtype=np.int64)
        padded = np.concatenate(
            [
                np.full((len(bars), 1), -1, dtype=np.int64),
                bars,
                np.full((len(bars), 1), total_slots, dtype=np.int64),
            ],
            axis=1,
        )
        counts = np.diff(padded, axis=1) - 1
        yield counts / grid_n


def simplex_grid_size(n_states: int, grid_n: int) -> int:
    if n_states == 1:
        return 1
    from math import comb

    return comb(grid_n + n_states - 1, n_states - 1)


class _ClusterAccumulator:
    __slots__ = (
        "count",
        "support_mask",
        "load_sum",
        "theta_min",
        "theta_max",
        "rep",
        "rep_support_size",
    )

    def __init__(self, n_states: int, n_edges: int):
        self.count = 0
        self.support_mask = np.zeros(n_states, dtype=bool)
        self.load_sum = np.zeros(n_edges)
        self.theta_min = np.ones(n_states)
        self.theta_max = np.zeros(n_states)
        self.rep = None
        self.rep_support_size = -1

    def add(self, thetas: np.ndarray, loads: np.ndarray) -> None:
        self.count += len(thetas)
        sup = thetas > 0.0
        self.support_mask |= sup.any(axis=0)
        self.load_sum += loads.sum(axis=0)
        np.minimum(self.theta_min, thetas.min(axis=0), out=self.theta_min)
        np.maximum(self.theta_max, thetas.max(axis=0), out=self.theta_max)
        sizes = sup.sum(axis=1)
        best = int(np.argmax(sizes))
        if int(sizes[best]) > self.rep_support_size:
            self.rep_support_size = int(sizes[best])
            self.rep = thetas[best].copy()


def _rest_point_mass(
    network: Network,
    model: CostModel,
    true_state: str,
    theta: Belief,
    demand: float,
    cost_tol: float,
    used_tol: float,
    solver_tol: float,
) -> tuple[float, frozenset[str]]:
    """Mass on distinguishable states at the equilibrium of `theta`."""
    eq = solve_wardrop(network, model, theta, demand, tol=solver_tol)
    dist = distinguishable_states(model, true_state, eq.edge_loads, cost_tol, used_tol)
    mass = float(sum(theta.probs[model.state_index(s)] for s in dist))
    return mass, used_edges(network, eq.edge_loads, used_tol)


def _bisect_boundary(predicate, x_fail: float, x_pass: float, tol: float) -> float:
    """Refine a pass/fail boundary; returns the passing-side endpoint."""
    lo, hi = x_fail, x_pass
    while abs(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        if predicate(mid):
            hi = mid
        else:
            lo = mid
    return hi


def enumerate_rest_points(
    network: Network,
    model: CostModel,
    true_state: str,
    grid_n: int,
    demand: float,
    *,
    mass_tol: float = 1e-9,
    cost_tol: float = 1e-9,
    used_tol: float | None = None,
    refine_tol: float = 1e-6,
    chunk_size: int = 200_000,
    solver_tol: float = 1e-10,
) -> RestPointReport:
    """Sweep the belief simplex for rest points and cluster them into families.

    Evaluates the rest-point predicate at every grid node theta with
    components k/grid_n (equilibrium solved for all nodes in vectorized
    batches), clusters passing nodes by their used-edge set, and for
    families supported on exactly two states refines the boundary of the
    belief range by bisection down to `refine_tol`.
    """
    n_states = model.n_states
    if n_states > 6:
        raise ValueError("simplex grid enumeration is limited to at most 6 states")
    if grid_n < 1:
        raise ValueError("grid_n must be at least 1")
    if used_tol is None:
        used_tol = 1e-9 * demand
    true_idx = model.state_index(true_state)

    edge_bits = 1 << np.arange(network.n_edges, dtype=np.int64)
    clusters: dict[int, _ClusterAccumulator] = {}
    n_nodes = 0
    n_passing = 0
    max_gap = 0.0

    for thetas in _simplex_grid_chunks(n_states, grid_n, chunk_size):
        n_nodes += len(thetas)
        loads, gaps = solve_wardrop_batch(
            network, model, thetas, demand, tol=solver_tol
        )
        max_gap = max(max_gap, float(gaps.max()))
        used_mask = loads > used_tol  # (n, E)
        true_vals = polyval_ascending(model._coeffs[:, true_idx, :], loads)
        dist = np.zeros((len(thetas), n_states), dtype=bool)
        for j in range(n_states):
            if j == true_idx:
                continue
            vals = polyval_ascending(model._coeffs[:, j, :], loads)
            dist[:, j] = (used_mask & (np.abs(vals - true_vals) > cost_tol)).any(axis=1)
        residual = (thetas * dist).sum(axis=1)
        passing = residual <= mass_tol
        n_passing += int(passing.sum())
        if not passing.any():
            continue
        keys = used_mask[passing] @ edge_bits
        th_pass = thetas[passing]
        ld_pass = loads[passing]
        for key in np.unique(keys):
            sel = keys == key
            acc = clusters.get(int(key))
            if acc is None:
                acc = clusters[int(key)] = _ClusterAccumulator(
                    n_states, network.n_edges
                )
            acc.add(th_pass[sel], ld_pass[sel])

    def passes(theta_vec: np.ndarray, want_key: int | None = None) -> bool:
        mass, used = _rest_point_mass(
            network,
            model,
            true_state,
            Belief(theta_vec),
            demand,
            cost_tol,
            used_tol,
            solver_tol,
        )
        if mass > mass_tol:
            return False
        if want_key is not None:
            key = sum(
                1 << network.edge_index(e) for e in used
            )
            return key == want_key
        return True

    families = []
    for key, acc in sorted(clusters.items()):
        used_labels = tuple(
            e for i, e in enumerate(network.edge_ids) if key >> i & 1
        )
        support_idx = np.flatnonzero(acc.support_mask)
        support_labels = tuple(model.states[i] for i in support_idx)
        mean_loads = acc.load_sum / acc.count
        thresholds = {
            model.states[i]: (float(acc.theta_min[i]), float(acc.theta_max[i]))
            for i in support_idx
        }
        refined = False
        if len(support_idx) == 2:
            i, j = int(support_idx[0]), int(support_idx[1])

            def face_theta(x: float) -> np.ndarray:
                v = np.zeros(n_states)
                v[i] = x
                v[j] = 1.0 - x
                return v

            xs = np.arange(grid_n + 1) / grid_n
            ok = np.array([passes(face_theta(x), key) for x in xs])
            if ok.any():
                lo_idx = int(np.argmax(ok))
                hi_idx = int(len(ok) - 1 - np.argmax(ok[::-1]))
                lo = xs[lo_idx]
                hi = xs[hi_idx]
                if lo_idx > 0:
                    lo = _bisect_boundary(
                        lambda x: passes(face_theta(x), key),
                        xs[lo_idx - 1],
                        lo,
                        refine_tol,
                    )
                if hi_idx < len(xs) - 1:
                    hi = _bisect_boundary(
                        lambda x: passes(face_theta(x), key),
                        xs[hi_idx + 1],
                        hi,
                        refine_tol,
                    )
                thresholds[model.states[i]] = (float(lo), float(hi))
                thresholds[model.states[j]] = (float(1.0 - hi), float(1.0 - lo))
                refined = True

        rep = acc.rep
        check = check_rest_point(
            network,
            model,
            true_state,
            Belief(rep),
            mean_loads,
            demand,
            load_tol=max(1e-7, 10 * solver_tol),
            mass_tol=max(mass_tol, 1e-12),
            cost_tol=cost_tol,
            used_tol=used_tol,
            solver_tol=solver_tol,
        )
        families.append(
            RestPointFamily(
                used=used_labels,
                support=support_labels,
                loads=mean_loads,
                n_nodes=acc.count,
                representative=rep,
                thresholds=thresholds,
                refined=refined,
                average_cost_true=average_cost(model, true_state, mean_loads),
                check=check,
            )
        )

    families.sort(key=lambda f: -len(f.used))
    return RestPointReport(
        families=tuple(families),
        grid_n=grid_n,
        n_nodes=n_nodes,
        n_passing=n_passing,
        mass_tol=mass_tol,
        max_solver_gap=max_gap,
    )


@dataclass(frozen=True)
class AverageCostEntry:
    used: tuple[str, ...]
    rest_cost: float
    ok: bool


@dataclass(frozen=True)
class AverageCostComparison:
    """Average-cost comparison of rest points against the known-state optimum.

    Only meaningful on series-parallel networks; `applicable` is False
    otherwise and no entries are produced.
    """

    applicable: bool
    complete_info_cost: float | None
    entries: tuple[AverageCostEntry, ...]
    ok: bool


def compare_average_costs(
    network: Network,
    model: CostModel,
    true_state: str,
    families,
    demand: float,
    tol: float = 1e-9,
) -> AverageCostComparison:
    if not is_series_parallel(network):
        return AverageCostComparison(False, None, (), True)
    eq = complete_info_equilibrium(network, model, true_state, demand)
    base = average_cost(model, true_state, eq.edge_loads)
    entries = []
    for fam in families:
        cost = average_cost(model, true_state, fam.loads)
        entries.append(AverageCostEntry(fam.used, cost, cost >= base - tol))
    return AverageCostComparison(True, base, tuple(entries), all(e.ok for e in entries))


@dataclass(frozen=True)
class ConditionReport:
    """Which of the three complete-learning conditions the scenario meets.

    Witnesses carry the first counterexample found: for condition 1 a
    (state, route) pair with no separating edge, for condition 2 an edge
    whose free-flow time depends on the state, for condition 3 a
    (state, edge) pair where the known-state equilibrium leaves the edge
    unused.
    """

    fully_distinguishable: bool
    witness_distinguishable: tuple | None
    state_independent_free_flow: bool
    witness_free_flow: tuple | None
    all_edges_used: bool
    witness_utilization: tuple | None

    @property
    def any_holds(self) -> bool:
        return (
            self.fully_distinguishable
            or self.state_independent_free_flow
            or self.all_edges_used
        )


def check_complete_learning_conditions(
    network: Network,
    model: CostModel,
    true_state: str,
    demand: float,
    *,
    load_tol: float | None = None,
) -> ConditionReport:
    """Decide the three sufficient conditions from the parametric cost table.

    Function identity is decided by exact coefficient comparison, never by
    sampling, so knife-edge equalities cannot slip through. Condition 1 is
    checked route by route: a state is distinguishable under every feasible
    load exactly when each route carries at least one edge whose cost
    function differs from the truth, because any feasible load fully uses at
    least one route.
    """
    if load_tol is None:
        load_tol = 1e-9 * demand
    coeffs = model._coeffs
    true_idx = model.state_index(true_state)

    cond1 = True
    wit1 = None
    for s in model.states:
        if s == true_state:
            continue
        j = model.state_index(s)
        for k, route in enumerate(network.routes):
            separating = any(
                not np.array_equal(
                    coeffs[model.edge_index(e), j], coeffs[model.edge_index(e), true_idx]
                )
                for e in route
            )
            if not separating:
                cond1 = False
                wit1 = (s, k)
                break
        if not cond1:
            break

    cond2 = True
    wit2 = None
    intercepts = coeffs[:, :, 0]
    for i, e in enumerate(model.edges):
        base = intercepts[i, 0]
        for j, s in enumerate(model.states):
            if intercepts[i, j] != base:
                cond2 = False
                wit2 = (e, s, float(intercepts[i, j]), float(base))
                break
        if not cond2:
            break

    cond3 = True
    wit3 = None
    for s in model.states:
        eq = complete_info_equilibrium(network, model, s, demand)
        low = int(np.argmin(eq.edge_loads))
        if eq.edge_loads[low] <= load_tol:
            cond3 = False
            wit3 = (s, model.edges[low], float(eq.edge_loads[low]))
            break

    return ConditionReport(cond1, wit1, cond2, wit2, cond3, wit3)
