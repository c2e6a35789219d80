"""Domains, the encoded graph-state graph, and exact signed stabilizer generators.

A domain is a maximal connected set of sites sharing one POVM axis (the
F/K kind is irrelevant for membership).  Domains are the graph vertices;
two domains are graph-adjacent when the number of lattice edges between
them is odd.  In open mode every boundary leg contributes one additional
degree-1 partner vertex.

Pauli bookkeeping convention: an operator is stored as
``i^phase * prod_v X_v^(v in xs) * prod_v Z_v^(v in zs)`` with phase an
integer mod 4 and Y == i * X * Z.  A vertex appearing in both supports
carries a Y.  Hermitian stabilizer elements have a well defined sign +-1.

Per-domain generator shape: a central X (or Y when the vertex has a
self-loop) and Z on every graph neighbour.  The overall sign collects
one minus per inter-domain edge and internal edge, the sublattice signs
of the crossing-edge endpoints, and the i powers produced when rewriting
the crossing-axis Paulis in the domain's own logical frame.  The
self-loop rule: a domain of type T acquires a loop when the number of
lattice edges to neighbours of the "other" axis (z,x -> y; y -> x) is
odd.

Boundary partners are treated as if measured along the central domain's
internal axis, so they never contribute to self-loop parity; a partner's
own generator is sign * X_partner Z_neighbour with sign fixed to
-lambda(attachment site).  These conventions are validated against the
exhaustive oracle.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .lattice import Lattice, sublattice_sign
from .povm import AXES, PovmConfig

#: internal-edge axis per domain type
B_AXIS = {"x": "z", "y": "z", "z": "x"}
#: the crossing axis that feeds the self-loop parity, per domain type
LOOP_AXIS = {"x": "y", "y": "x", "z": "y"}

UNMEASURED, X_MEASURED, Y_MEASURED = "unmeasured", "x_measured", "y_measured"


@dataclass(frozen=True)
class SignedPauli:
    """Pauli operator with exact phase tracking (units of i, mod 4)."""

    phase: int
    xs: frozenset
    zs: frozenset

    def __mul__(self, other: "SignedPauli") -> "SignedPauli":
        # Z of self commutes past X of other, one factor -1 per overlap
        phase = (self.phase + other.phase + 2 * len(self.zs & other.xs)) % 4
        return SignedPauli(phase, self.xs ^ other.xs, self.zs ^ other.zs)

    @property
    def sign(self) -> int:
        """+-1 for a Hermitian operator with no Y component left implicit."""
        if self.xs & self.zs or self.phase % 2:
            raise ValueError("sign undefined: operator has Y components or odd phase")
        return 1 if self.phase == 0 else -1

    def is_identity(self) -> bool:
        return not self.xs and not self.zs and self.phase == 0


IDENTITY = SignedPauli(0, frozenset(), frozenset())


@dataclass(frozen=True)
class Domain:
    """One graph vertex: a real domain or a boundary partner."""

    id: int
    axis: str | None  # None for partners
    sites: frozenset
    all_k: bool
    is_boundary_partner: bool = False

    @property
    def n_sites(self) -> int:
        return len(self.sites)


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        p = self.parent
        while p[a] != a:
            p[a] = p[p[a]]
            a = p[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def find_domains(lattice: Lattice, config: PovmConfig) -> list[Domain]:
    """Partition sites into connected same-axis components, then append partners.

    Real domains are ordered by their smallest site index, partners by
    boundary-leg order, so ids are deterministic.
    """
    n = lattice.n_sites
    uf = _UnionFind(n)
    axes = config.axes
    for u, _, v, _ in lattice.edges:
        if axes[u] == axes[v]:
            uf.union(u, v)
    groups: dict[int, list[int]] = {}
    for s in range(n):
        groups.setdefault(uf.find(s), []).append(s)
    domains = []
    for root in sorted(groups):
        sites = groups[root]
        domains.append(
            Domain(
                id=len(domains),
                axis=AXES[axes[root]],
                sites=frozenset(sites),
                all_k=all(config.kinds[s] for s in sites),
            )
        )
    for _ in lattice.boundary_legs:
        domains.append(
            Domain(
                id=len(domains),
                axis=None,
                sites=frozenset(),
                all_k=False,
                is_boundary_partner=True,
            )
        )
    return domains


@dataclass
class DomainGraph:
    """The encoded graph-state graph over domains and boundary partners."""

    lattice: Lattice
    vertices: list[Domain]
    n_real: int
    dom_of_site: list[int]
    # unordered real-real pairs -> lattice-edge count; partner pairs -> 1
    edge_multiplicity: dict
    reduced_edges: set  # pairs with odd multiplicity
    self_loops: set  # real domain ids with a loop
    raw_edge_total: int  # |interdomain lattice edges| + |legs|
    internal_edges: dict  # real domain id -> lattice edges inside it
    generators: list[SignedPauli] = field(default_factory=list)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def neighbors(self, v: int) -> set:
        out = set()
        for a, b in self.reduced_edges:
            if a == v:
                out.add(b)
            elif b == v:
                out.add(a)
        return out

    def to_edgelist(self) -> str:
        lines = [
            f"# V={self.n_vertices} Eraw={self.raw_edge_total} "
            f"selfloops={','.join(str(v) for v in sorted(self.self_loops)) or '-'}"
        ]
        for a, b in sorted(self.reduced_edges):
            lines.append(f"{a} {b}")
        return "\n".join(lines)


def build_domain_graph(
    lattice: Lattice, config: PovmConfig, domains: list[Domain] | None = None
) -> DomainGraph:
    """Count edge multiplicities, reduce mod 2, and attach signed generators."""
    if domains is None:
        domains = find_domains(lattice, config)
    n_real = sum(1 for d in domains if not d.is_boundary_partner)
    dom_of_site = [0] * lattice.n_sites
    for d in domains[:n_real]:
        for s in d.sites:
            dom_of_site[s] = d.id

    mult: Counter = Counter()
    internal: dict[int, int] = {d.id: 0 for d in domains[:n_real]}
    for u, _, v, _ in lattice.edges:
        du, dv = dom_of_site[u], dom_of_site[v]
        if du == dv:
            if config.axes[u] != config.axes[v]:
                raise AssertionError("adjacent same-domain sites with different axes")
            internal[du] += 1
        else:
            mult[(min(du, dv), max(du, dv))] += 1
    raw_total = sum(mult.values())
    for j, (s, _) in enumerate(lattice.boundary_legs):
        mult[(dom_of_site[s], n_real + j)] = 1
        raw_total += 1

    reduced = {pair for pair, m in mult.items() if m % 2 == 1}

    loops = set()
    for d in domains[:n_real]:
        target = LOOP_AXIS[d.axis]
        n_neq = 0
        for s in d.sites:
            for v in lattice.neighbors[s]:
                if dom_of_site[v] != d.id and AXES[config.axes[v]] == target:
                    n_neq += 1
        if n_neq % 2 == 1:
            loops.add(d.id)

    graph = DomainGraph(
        lattice=lattice,
        vertices=domains,
        n_real=n_real,
        dom_of_site=dom_of_site,
        edge_multiplicity=dict(mult),
        reduced_edges=reduced,
        self_loops=loops,
        raw_edge_total=raw_total,
        internal_edges=internal,
    )
    graph.generators = [stabilizer_generator(graph, config, v) for v in range(len(domains))]
    return graph


def stabilizer_generator(graph: DomainGraph, config: PovmConfig, vertex: int) -> SignedPauli:
    """Exact signed stabilizer generator of one graph vertex."""
    lattice = graph.lattice
    dom = graph.vertices[vertex]
    if dom.is_boundary_partner:
        leg_site, _ = lattice.boundary_legs[vertex - graph.n_real]
        phase = 2 if sublattice_sign(lattice, leg_site) == 1 else 0
        return SignedPauli(phase, frozenset([vertex]), frozenset([graph.dom_of_site[leg_site]]))

    axis = dom.axis
    target = LOOP_AXIS[axis]
    e_internal = graph.internal_edges[dom.id]
    n_cross = 0
    n_neq = 0
    lam_far_neg = 0
    lam_near_neg = 0
    for s in dom.sites:
        for v in lattice.neighbors[s]:
            if graph.dom_of_site[v] == dom.id:
                continue
            n_cross += 1
            if sublattice_sign(lattice, v) == -1:
                lam_far_neg += 1
            if AXES[config.axes[v]] == target:
                n_neq += 1
                if sublattice_sign(lattice, s) == -1:
                    lam_near_neg += 1
    legs = [
        graph.n_real + j
        for j, (ls, _) in enumerate(lattice.boundary_legs)
        if ls in dom.sites
    ]
    n_cross += len(legs)

    phase = 2 * (e_internal + n_cross) + 2 * lam_far_neg + 2 * lam_near_neg + n_neq
    if n_neq % 2 == 1 and axis == "x":
        phase += 2

    zs = {
        (b if a == vertex else a)
        for (a, b) in graph.reduced_edges
        if vertex in (a, b)
    }
    xs = frozenset([vertex])
    if n_neq % 2 == 1:
        zs.add(vertex)
    return SignedPauli(phase % 4, xs, frozenset(zs))


def classify_measured(graph: DomainGraph, config: PovmConfig) -> list[str]:
    """Label every vertex: all-K real domains are measured, loop decides X vs Y."""
    labels = []
    for d in graph.vertices:
        if d.is_boundary_partner or not d.all_k:
            labels.append(UNMEASURED)
        elif d.id in graph.self_loops:
            labels.append(Y_MEASURED)
        else:
            labels.append(X_MEASURED)
    return labels
