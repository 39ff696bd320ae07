"""Two-terminal route networks: edge loads, used edges, series-parallel tests."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import NetworkError


class Network:
    """Directed two-terminal network described by an explicit route list.

    Edges are string identifiers. Every route is an ordered sequence of edge
    ids from the origin to the destination. The incidence matrix has one row
    per edge and one column per route; entry (e, r) is 1 iff edge e lies on
    route r. Instances are immutable after construction and safe to share.
    """

    def __init__(self, edges: Sequence[str], routes: Sequence[Sequence[str]]):
        edge_ids = tuple(str(e) for e in edges)
        if not edge_ids:
            raise NetworkError("network needs at least one edge")
        if len(edge_ids) != len(set(edge_ids)):
            raise NetworkError("duplicate edge identifiers")
        route_list = tuple(tuple(str(e) for e in r) for r in routes)
        if not route_list:
            raise NetworkError("network needs at least one route")
        index = {e: i for i, e in enumerate(edge_ids)}
        for k, route in enumerate(route_list):
            if not route:
                raise NetworkError(f"route {k} is empty")
            if len(set(route)) != len(route):
                raise NetworkError(f"route {k} repeats an edge")
            for e in route:
                if e not in index:
                    raise NetworkError(f"route {k} uses unknown edge {e!r}")
        covered = {e for r in route_list for e in r}
        unused = [e for e in edge_ids if e not in covered]
        if unused:
            raise NetworkError(f"edges not on any route: {unused}")

        incidence = np.zeros((len(edge_ids), len(route_list)))
        for k, route in enumerate(route_list):
            for e in route:
                incidence[index[e], k] = 1.0
        incidence.setflags(write=False)

        self.edge_ids = edge_ids
        self.routes = route_list
        self.incidence = incidence
        self._index = index

    @property
    def n_edges(self) -> int:
        return len(self.edge_ids)

    @property
    def n_routes(self) -> int:
        return len(self.routes)

    def edge_index(self, edge: str) -> int:
        try:
            return self._index[edge]
        except KeyError:
            raise NetworkError(f"unknown edge {edge!r}") from None

    def route_index(self, route) -> int:
        """Accept a route position or the route's edge sequence."""
        if isinstance(route, (int, np.integer)):
            k = int(route)
            if not 0 <= k < self.n_routes:
                raise NetworkError(f"route index {k} out of range")
            return k
        key = tuple(str(e) for e in route)
        try:
            return self.routes.index(key)
        except ValueError:
            raise NetworkError(f"unknown route {key!r}") from None

    def __repr__(self) -> str:
        return f"Network(edges={list(self.edge_ids)!r}, routes={len(self.routes)})"


def edge_loads(network: Network, route_flows) -> np.ndarray:
    """Aggregate route flows into per-edge loads (exact linear map)."""
    q = np.asarray(route_flows, dtype=float)
    if q.shape != (network.n_routes,):
        raise NetworkError(
            f"route flow vector has shape {q.shape}, expected ({network.n_routes},)"
        )
    return network.incidence @ q


def validate_route_flow(network: Network, route_flows, demand: float, tol: float = 1e-9) -> None:
    """Raise NetworkError unless the flow is feasible for the given demand."""
    q = np.asarray(route_flows, dtype=float)
    if q.shape != (network.n_routes,):
        raise NetworkError(f"route flow vector has shape {q.shape}")
    if (q < -tol).any():
        raise NetworkError("negative route flow")
    if abs(float(q.sum()) - demand) > tol * max(1.0, abs(demand)):
        raise NetworkError(f"route flows sum to {q.sum()!r}, expected {demand!r}")


def used_edges(network: Network, loads, tol: float) -> frozenset[str]:
    """Edges carrying load strictly above `tol`."""
    if tol < 0:
        raise ValueError("tolerance must be nonnegative")
    w = np.asarray(loads, dtype=float)
    if w.shape != (network.n_edges,):
        raise NetworkError(f"load vector has shape {w.shape}, expected ({network.n_edges},)")
    return frozenset(e for e, we in zip(network.edge_ids, w) if we > tol)


@dataclass(frozen=True)
class TwoTerminalGraph:
    """Multigraph reconstructed from a route list, nodes numbered 0..n-1."""

    n_nodes: int
    origin: int
    destination: int
    edges: tuple[tuple[int, int, str], ...]  # (tail, head, edge id)


def underlying_graph(network: Network) -> TwoTerminalGraph:
    """Rebuild the two-terminal multigraph that the route list induces.

    Each edge contributes a tail and a head symbol; symbols are merged when
    routes force them to coincide (consecutive edges share a node, all routes
    start at the origin and end at the destination).
    """
    parent: dict = {}

    def find(x):
        parent.setdefault(x, x)
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:  # path compression
            parent[x], x = root, parent[x]
        return root

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb

    for route in network.routes:
        union(("t", route[0]), "origin")
        union(("h", route[-1]), "destination")
        for a, b in zip(route, route[1:]):
            union(("h", a), ("t", b))

    if find("origin") == find("destination"):
        raise NetworkError("origin and destination coincide; not two-terminal")

    node_of: dict = {}

    def node_id(symbol) -> int:
        root = find(symbol)
        if root not in node_of:
            node_of[root] = len(node_of)
        return node_of[root]

    origin = node_id("origin")
    destination = node_id("destination")
    out = []
    for e in network.edge_ids:
        tail = node_id(("t", e))
        head = node_id(("h", e))
        if tail == head:
            raise NetworkError(f"edge {e!r} collapses to a self-loop")
        out.append((tail, head, e))
    return TwoTerminalGraph(len(node_of), origin, destination, tuple(out))


def series_parallel_reducible(edges: Iterable[tuple[int, int]], origin, destination) -> bool:
    """Greedy two-terminal reduction of a directed multigraph.

    Merges parallel edges (identical tail and head) and contracts interior
    nodes with exactly one incoming and one outgoing edge. Returns True iff
    the graph reduces to the single edge origin -> destination. Reduction
    order does not affect the outcome for these moves.
    """
    work = [(e[0], e[1]) for e in edges]
    while True:
        if len(work) == 1:
            return work[0] == (origin, destination)
        deduped = list(dict.fromkeys(work))
        if len(deduped) != len(work):
            work = deduped
            continue
        indeg: dict = {}
        outdeg: dict = {}
        for t, h in work:
            outdeg[t] = outdeg.get(t, 0) + 1
            indeg[h] = indeg.get(h, 0) + 1
        contracted = False
        for i, (t, h) in enumerate(work):
            v = h
            if v in (origin, destination):
                continue
            if indeg.get(v, 0) == 1 and outdeg.get(v, 0) == 1:
                j = next(k for k, (t2, _) in enumerate(work) if t2 == v)
                u, x = t, work[j][1]
                if u == x:  # would create a self-loop; leave this node alone
                    continue
                work = [e for k, e in enumerate(work) if k not in (i, j)]
                work.append((u, x))
                contracted = True
                break
        if not contracted:
            return False


def is_series_parallel(network: Network) -> bool:
    """True iff the graph induced by the routes is two-terminal series-parallel."""
    g = underlying_graph(network)
    return series_parallel_reducible(
        [(t, h) for t, h, _ in g.edges], g.origin, g.destination
    )
