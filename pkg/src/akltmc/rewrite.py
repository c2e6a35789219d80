"""Graph-state measurement rules and the planarity-restoring thinning.

The domain graph with measured-domain labels becomes a simple graph
(self-loops dropped; they only select the X vs Y label).  Thinning then
excises every connected cluster of measured vertices that cannot be
absorbed by a local complementation: Z-measuring a vertex removes it
with its edges, so Z-measuring the unmeasured neighbours of a cluster
cuts it out of the graph.  Only isolated Y-measured vertices whose
domain has one or two sites are treated in place, by local
complementation, after at most degree-3 is restored by Z-measuring the
lowest-id neighbours.

The output graph is expected to be planar; that is asserted by tests,
not by this module.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx

from .domains import DomainGraph, UNMEASURED, X_MEASURED, Y_MEASURED
from .lattice import Lattice


@dataclass
class SimpleGraph:
    """Mutable simple graph with alive flags and site-derived coordinates."""

    n: int
    n_real: int
    adj: list  # list[set[int]]
    alive: list  # list[bool]
    coords: list  # (x, y) mean of constituent sites; partners use their anchor
    min_x: list
    max_x: list
    origin: list  # "domain" | "partner"
    n_sites: list  # constituent site count per vertex; 0 for partners

    def copy(self) -> "SimpleGraph":
        return SimpleGraph(
            self.n,
            self.n_real,
            [set(a) for a in self.adj],
            list(self.alive),
            list(self.coords),
            list(self.min_x),
            list(self.max_x),
            list(self.origin),
            list(self.n_sites),
        )

    def degree(self, v: int) -> int:
        return len(self.adj[v])

    def alive_vertices(self) -> list:
        return [v for v in range(self.n) if self.alive[v]]

    def edge_count(self) -> int:
        return sum(len(a) for a in self.adj) // 2


def simple_graph_from_domains(graph: DomainGraph, lattice: Lattice) -> SimpleGraph:
    n = graph.n_vertices
    coords, min_x, max_x, origin, n_sites = [], [], [], [], []
    for d in graph.vertices:
        if d.is_boundary_partner:
            s, _ = lattice.boundary_legs[d.id - graph.n_real]
            x, y = lattice.sites[s]
            coords.append((float(x), float(y)))
            min_x.append(x)
            max_x.append(x)
            origin.append("partner")
            n_sites.append(0)
        else:
            xs = [lattice.sites[s][0] for s in d.sites]
            ys = [lattice.sites[s][1] for s in d.sites]
            coords.append((sum(xs) / len(xs), sum(ys) / len(ys)))
            min_x.append(min(xs))
            max_x.append(max(xs))
            origin.append("domain")
            n_sites.append(len(d.sites))
    adj = [set() for _ in range(n)]
    for a, b in graph.reduced_edges:
        adj[a].add(b)
        adj[b].add(a)
    return SimpleGraph(
        n=n,
        n_real=graph.n_real,
        adj=adj,
        alive=[True] * n,
        coords=coords,
        min_x=min_x,
        max_x=max_x,
        origin=origin,
        n_sites=n_sites,
    )


def z_delete(graph: SimpleGraph, v: int) -> SimpleGraph:
    """Remove a vertex and every edge ending in it (logical Z measurement)."""
    if not graph.alive[v]:
        raise ValueError(f"vertex {v} is already dead")
    for w in graph.adj[v]:
        graph.adj[w].discard(v)
    graph.adj[v] = set()
    graph.alive[v] = False
    return graph


def local_complement(graph: SimpleGraph, v: int) -> SimpleGraph:
    """Toggle every edge among the neighbours of v."""
    if not graph.alive[v]:
        raise ValueError(f"vertex {v} is dead")
    nbrs = sorted(graph.adj[v])
    for i, a in enumerate(nbrs):
        for b in nbrs[i + 1 :]:
            if b in graph.adj[a]:
                graph.adj[a].discard(b)
                graph.adj[b].discard(a)
            else:
                graph.adj[a].add(b)
                graph.adj[b].add(a)
    return graph


def y_delete(graph: SimpleGraph, v: int) -> SimpleGraph:
    """Logical Y measurement: local complementation, then removal."""
    local_complement(graph, v)
    return z_delete(graph, v)


@dataclass
class ThinningStats:
    n_real: int
    r0: float  # measured fraction among real domains
    r1: float  # additionally Z-measured fraction among real domains
    removed: dict = field(default_factory=dict)
    vertices_before: int = 0
    vertices_after: int = 0


def thin(graph: SimpleGraph, measured: list) -> tuple[SimpleGraph, ThinningStats]:
    """Excise measured clusters, absorb small isolated Y vertices, drop partners.

    The graph is modified in place.  `measured` labels every vertex
    (including partners, which must be unmeasured).
    """
    if len(measured) != graph.n:
        raise ValueError("one label per vertex required")
    n_real = graph.n_real
    n_measured = sum(
        1 for v in range(n_real) if measured[v] != UNMEASURED
    )
    removed = {"measured": 0, "z_neighbor": 0, "z_for_y": 0, "y_absorbed": 0, "partner": 0}

    def kill(v: int, cause: str) -> None:
        z_delete(graph, v)
        removed[cause] += 1

    # clusters of measured vertices; excise unless a lone small Y vertex
    seen = [False] * graph.n
    deferred_y = []
    for v in range(n_real):
        if seen[v] or measured[v] == UNMEASURED or not graph.alive[v]:
            continue
        cluster, stack = [v], [v]
        seen[v] = True
        while stack:
            u = stack.pop()
            for w in graph.adj[u]:
                if w < n_real and measured[w] != UNMEASURED and not seen[w]:
                    seen[w] = True
                    cluster.append(w)
                    stack.append(w)
        lone_small_y = (
            len(cluster) == 1
            and measured[v] == Y_MEASURED
            and graph.n_sites[v] <= 2
        )
        if lone_small_y:
            deferred_y.append(v)
            continue
        boundary = set()
        for u in cluster:
            boundary |= graph.adj[u]
        boundary -= set(cluster)
        for w in sorted(boundary):
            if graph.alive[w]:
                kill(w, "partner" if graph.origin[w] == "partner" else "z_neighbor")
        for u in cluster:
            kill(u, "measured")

    # surviving isolated Y-measured vertices with small domains
    for v in deferred_y:
        if not graph.alive[v]:
            continue
        while graph.degree(v) > 3:
            target = min(graph.adj[v])
            kill(target, "partner" if graph.origin[target] == "partner" else "z_for_y")
        local_complement(graph, v)
        kill(v, "y_absorbed")

    # boundary partners never carry information downstream
    for v in range(n_real, graph.n):
        if graph.alive[v]:
            kill(v, "partner")

    z_measured = removed["z_neighbor"] + removed["z_for_y"]
    stats = ThinningStats(
        n_real=n_real,
        r0=n_measured / n_real if n_real else 0.0,
        r1=z_measured / n_real if n_real else 0.0,
        removed=removed,
        vertices_before=graph.n,
        vertices_after=sum(graph.alive),
    )
    return graph, stats


def is_planar(graph: SimpleGraph) -> bool:
    """Left-right planarity test on the alive subgraph."""
    g = nx.Graph()
    g.add_nodes_from(graph.alive_vertices())
    for v in range(graph.n):
        if not graph.alive[v]:
            continue
        for w in graph.adj[v]:
            if v < w:
                g.add_edge(v, w)
    ok, _ = nx.check_planarity(g)
    return ok
