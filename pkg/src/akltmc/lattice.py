"""Square-lattice geometry with open or toroidal boundaries.

Sites are indexed row-major: ``index = y * width + x``.  Every site has
four leg slots (0: +x, 1: -x, 2: +y, 3: -y).  In open mode a slot that
has no lattice neighbour becomes a boundary leg, conceptually attached to
an unmeasured spin-1/2 partner.  On the torus every slot is matched and
small sizes produce doubled edges (a 2x2 torus is a multigraph).
"""

from __future__ import annotations

from dataclasses import dataclass, field

SLOT_RIGHT, SLOT_LEFT, SLOT_UP, SLOT_DOWN = 0, 1, 2, 3


class LatticeError(ValueError):
    """Raised for dimensions that do not define a valid lattice."""


@dataclass(frozen=True)
class Lattice:
    """Immutable square-lattice geometry, shareable across workers."""

    width: int
    height: int
    boundary_mode: str  # "open" or "torus"
    sites: tuple[tuple[int, int], ...]
    # each edge is (site_u, slot_u, site_v, slot_v)
    edges: tuple[tuple[int, int, int, int], ...]
    # each leg is (site, slot); empty on the torus
    boundary_legs: tuple[tuple[int, int], ...]
    # neighbour site ids per site, with repetition for doubled torus edges
    neighbors: tuple[tuple[int, ...], ...] = field(repr=False)
    # per site: slot -> ("edge", edge_index, side) or ("leg", leg_index)
    slot_map: tuple[tuple[tuple, ...], ...] = field(repr=False)

    @property
    def n_sites(self) -> int:
        return self.width * self.height

    def site_index(self, x: int, y: int) -> int:
        return y * self.width + x

    def degree(self, site: int) -> int:
        return len(self.neighbors[site])


def build_lattice(width: int, height: int, mode: str = "open") -> Lattice:
    """Construct a lattice with deterministic row-major indexing.

    Open mode allows any width, height >= 1.  Torus mode requires both
    dimensions >= 2 (so edges are well defined) and even (so the site
    graph stays bipartite).
    """
    if width < 1 or height < 1:
        raise LatticeError(f"lattice dimensions must be positive, got {width}x{height}")
    if mode not in ("open", "torus"):
        raise LatticeError(f"unknown boundary mode {mode!r}")
    if mode == "torus":
        if width < 2 or height < 2:
            raise LatticeError("torus mode requires width >= 2 and height >= 2")
        if width % 2 or height % 2:
            raise LatticeError("torus mode requires even dimensions for bipartiteness")

    sites = tuple((x, y) for y in range(height) for x in range(width))
    idx = lambda x, y: y * width + x  # noqa: E731

    edges: list[tuple[int, int, int, int]] = []
    slot_assign: list[list] = [[None] * 4 for _ in range(width * height)]
    for y in range(height):
        for x in range(width):
            s = idx(x, y)
            if x + 1 < width or mode == "torus":
                t = idx((x + 1) % width, y)
                e = len(edges)
                edges.append((s, SLOT_RIGHT, t, SLOT_LEFT))
                slot_assign[s][SLOT_RIGHT] = ("edge", e, 0)
                slot_assign[t][SLOT_LEFT] = ("edge", e, 1)
            if y + 1 < height or mode == "torus":
                t = idx(x, (y + 1) % height)
                e = len(edges)
                edges.append((s, SLOT_UP, t, SLOT_DOWN))
                slot_assign[s][SLOT_UP] = ("edge", e, 0)
                slot_assign[t][SLOT_DOWN] = ("edge", e, 1)

    legs: list[tuple[int, int]] = []
    for s in range(width * height):
        for slot in range(4):
            if slot_assign[s][slot] is None:
                slot_assign[s][slot] = ("leg", len(legs))
                legs.append((s, slot))

    neighbors: list[list[int]] = [[] for _ in range(width * height)]
    for u, _, v, _ in edges:
        neighbors[u].append(v)
        neighbors[v].append(u)

    lat = Lattice(
        width=width,
        height=height,
        boundary_mode=mode,
        sites=sites,
        edges=tuple(edges),
        boundary_legs=tuple(legs),
        neighbors=tuple(tuple(n) for n in neighbors),
        slot_map=tuple(tuple(sl) for sl in slot_assign),
    )
    _check_invariants(lat)
    return lat


def sublattice_sign(lattice: Lattice, site: int) -> int:
    """Checkerboard sublattice sign: +1 on sublattice A, -1 on B.

    Anchored at +1 for site (0, 0); adjacent sites always differ.
    """
    x, y = lattice.sites[site]
    return 1 if (x + y) % 2 == 0 else -1


def _check_invariants(lat: Lattice) -> None:
    n = lat.n_sites
    if lat.boundary_mode == "open":
        expected = lat.width * (lat.height - 1) + lat.height * (lat.width - 1)
        assert len(lat.edges) == expected
        assert 4 * n == 2 * len(lat.edges) + len(lat.boundary_legs)
        for s in range(n):
            assert lat.degree(s) + sum(1 for ls, _ in lat.boundary_legs if ls == s) == 4
    else:
        assert len(lat.boundary_legs) == 0
        assert all(lat.degree(s) == 4 for s in range(n))
    for u, _, v, _ in lat.edges:
        assert sublattice_sign(lat, u) * sublattice_sign(lat, v) == -1
