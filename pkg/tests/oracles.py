"""Independent reference implementations used only to cross-check the package.

Everything here deliberately avoids the production code paths: the
two-route solver is closed-form algebra, the series-parallel oracle searches
over every reduction order, and instance generators build inputs from
scratch.
"""

from __future__ import annotations

import itertools
from collections import Counter, defaultdict

import numpy as np

from routelearn import Belief, CostFunction, CostModel, Network


def two_route_affine_loads(network: Network, model: CostModel, theta: Belief, demand: float) -> np.ndarray:
    """Closed-form equilibrium loads for a 2-route network with affine mixtures.

    The route-cost difference is affine in the first route's flow, so the
    equilibrium is the clamped root of one linear equation.
    """
    assert network.n_routes == 2
    mixed = model.mixed_coefficients(theta.probs)
    slopes, intercepts = mixed[:, 1], mixed[:, 0]
    inc = network.incidence
    delta = inc[:, 0] - inc[:, 1]
    g_slope = float(slopes @ (delta * delta))
    w_at_zero = inc[:, 1] * demand
    g0 = float(delta @ (slopes * w_at_zero + intercepts))
    if g_slope <= 0.0:
        q1 = demand / 2.0  # identical routes; loads do not depend on the split
    else:
        q1 = float(np.clip(-g0 / g_slope, 0.0, demand))
    return inc @ np.array([q1, demand - q1])


def sp_oracle(edges, origin, destination) -> bool:
    """Exhaustive series-parallel test: try every reduction order.

    Explores the full graph-rewriting state space (parallel merges and
    series contractions in any order) and reports whether any sequence
    reaches the single origin->destination edge.
    """
    start = tuple(sorted((e[0], e[1]) for e in edges))
    if not start:
        return False
    seen = {start}
    stack = [start]
    while stack:
        state = stack.pop()
        if len(state) == 1:
            if state[0] == (origin, destination):
                return True
            continue
        moves = []
        for i in range(len(state)):
            for j in range(i + 1, len(state)):
                if state[i] == state[j]:
                    moves.append(tuple(sorted(state[:j] + state[j + 1 :])))
        indeg = Counter(h for _, h in state)
        outdeg = Counter(t for t, _ in state)
        nodes = {v for e in state for v in e}
        for v in nodes:
            if v in (origin, destination):
                continue
            if indeg[v] == 1 and outdeg[v] == 1:
                (u, _) = next(e for e in state if e[1] == v)
                (_, x) = next(e for e in state if e[0] == v)
                if u == x:
                    continue
                remaining = list(state)
                remaining.remove((u, v))
                remaining.remove((v, x))
                remaining.append((u, x))
                moves.append(tuple(sorted(remaining)))
        for move in moves:
            if move not in seen:
                seen.add(move)
                stack.append(move)
    return False


def two_terminal_multigraphs(max_edges: int):
    """Yield every directed multigraph with at most `max_edges` edges in which
    each edge lies on some simple path from node 0 (origin) to node 1
    (destination). Nodes are drawn from {0, 1, 2, 3, 4, 5}; with five edges a
    path can pass through at most four interior nodes, so the pool is
    exhaustive up to relabeling.
    """
    nodes = range(6)
    pairs = [
        (u, v)
        for u in nodes
        for v in nodes
        if u != v and u != 1 and v != 0  # no exits from the sink, no entries to the source
    ]
    for k in range(1, max_edges + 1):
        for combo in itertools.combinations_with_replacement(pairs, k):
            if _every_edge_on_simple_path(combo):
                yield combo


def _every_edge_on_simple_path(edges) -> bool:
    pair_set = set(edges)
    adj = defaultdict(set)
    for u, v in pair_set:
        adj[u].add(v)
    on_path = set()
    stack = [(0, (0,))]
    while stack:
        node, path = stack.pop()
        if node == 1:
            on_path.update(zip(path, path[1:]))
            continue
        for nxt in adj[node]:
            if nxt not in path:
                stack.append((nxt, path + (nxt,)))
    return pair_set <= on_path


def all_simple_routes(edges) -> list[tuple[int, ...]]:
    """All simple 0 -> 1 paths of a multigraph, as tuples of edge indices."""
    out = []
    stack = [(0, (0,), ())]
    while stack:
        node, path, used = stack.pop()
        if node == 1:
            out.append(used)
            continue
        for i, (u, v) in enumerate(edges):
            if u == node and v not in path:
                stack.append((v, path + (v,), used + (i,)))
    return out


def random_spd(rng: np.random.Generator, n: int) -> np.ndarray:
    m = rng.normal(size=(n, n))
    return m @ m.T + 0.5 * n * np.eye(n)


def random_simplex(rng: np.random.Generator, n: int) -> np.ndarray:
    p = rng.dirichlet(np.ones(n))
    p = np.maximum(p, 0.0)
    return p / p.sum()


def random_two_route_instance(rng: np.random.Generator):
    """Random 2-route network with affine costs, possibly sharing edges."""
    n_shared = int(rng.integers(0, 3))
    shared = [f"s{i}" for i in range(n_shared)]
    own0 = [f"a{i}" for i in range(int(rng.integers(1, 3)))]
    own1 = [f"b{i}" for i in range(int(rng.integers(1, 3)))]
    edges = shared + own0 + own1
    network = Network(edges, [own0 + shared, own1 + shared])
    n_states = int(rng.integers(1, 4))
    states = [f"st{j}" for j in range(n_states)]
    table = {
        (e, s): CostFunction.affine(
            slope=0.2 + float(rng.uniform(0.0, 3.0)),
            intercept=float(rng.uniform(0.0, 10.0)),
        )
        for e in edges
        for s in states
    }
    model = CostModel(edges, states, table, np.eye(len(edges)))
    theta = Belief(random_simplex(rng, n_states))
    demand = float(rng.uniform(0.5, 5.0))
    return network, model, theta, demand


def random_multi_route_instance(rng: np.random.Generator, max_degree: int = 1):
    """Random network with 2 to 4 routes; costs affine or quadratic."""
    n_routes = int(rng.integers(2, 5))
    n_shared = int(rng.integers(0, 3))
    shared = [f"s{i}" for i in range(n_shared)]
    routes = []
    edges = list(shared)
    for r in range(n_routes):
        own = [f"r{r}e{i}" for i in range(int(rng.integers(1, 3)))]
        edges.extend(own)
        take = [s for s in shared if rng.random() < 0.6]
        routes.append(own + take)
    for s in shared:  # every edge must lie on at least one route
        if not any(s in r for r in routes):
            routes[0].append(s)
    network = Network(edges, routes)
    n_states = int(rng.integers(1, 4))
    states = [f"st{j}" for j in range(n_states)]
    table = {}
    for e in edges:
        for s in states:
            if max_degree >= 2 and rng.random() < 0.5:
                table[(e, s)] = CostFunction.polynomial(
                    [
                        float(rng.uniform(0.0, 5.0)),
                        0.2 + float(rng.uniform(0.0, 2.0)),
                        float(rng.uniform(0.0, 1.0)),
                    ]
                )
            else:
                table[(e, s)] = CostFunction.affine(
                    slope=0.2 + float(rng.uniform(0.0, 3.0)),
                    intercept=float(rng.uniform(0.0, 10.0)),
                )
    model = CostModel(edges, states, table, np.eye(len(edges)))
    theta = Belief(random_simplex(rng, n_states))
    demand = float(rng.uniform(0.5, 5.0))
    return network, model, theta, demand


def wheatstone_network() -> Network:
    """Four-node bridge network: five edges, three routes, not series-parallel."""
    return Network(
        ["oa", "ob", "ad", "bd", "ab"],
        [["oa", "ad"], ["ob", "bd"], ["oa", "ab", "bd"]],
    )
