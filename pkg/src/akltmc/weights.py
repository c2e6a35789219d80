"""Exact relative weight of an outcome configuration.

A configuration either cannot occur at all (when minus the product of the
measured-domain X operators over some kernel vector of H lies in the
stabilizer group) or occurs with relative probability

    2^log2_weight,   log2_weight = -(|Eraw| - |V| + 2 |J_K| - dim ker H)

where |Eraw| counts inter-domain lattice edges plus boundary legs, |V|
counts domains plus boundary partners, |J_K| counts K-type sites, and H
is the binary anticommutation matrix between the stabilizer generators
and the measured-domain X operators.  Only ratios are meaningful; the
outcome-independent normalization is never computed.

The H entry (mu, nu) is 1 exactly when vertex nu lies in the Z support
of generator mu: nu is a reduced-graph neighbour of mu, or mu == nu with
a self-loop, or mu is a partner attached to nu.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .domains import DomainGraph, IDENTITY, build_domain_graph, find_domains
from .lattice import Lattice
from .oracle import deformed_fz_log2_factor
from .povm import AXIS_Z, KIND_F, PovmConfig


@dataclass
class BinaryMatrix:
    """GF(2) matrix; each row is a Python int bit mask over columns."""

    n_rows: int
    n_cols: int
    rows: list[int]

    def entry(self, i: int, j: int) -> int:
        return (self.rows[i] >> j) & 1


@dataclass
class KernelBasis:
    """Basis of ker(H); vectors are column bit masks."""

    n_cols: int
    vectors: list[int]

    @property
    def dim(self) -> int:
        return len(self.vectors)


def build_H(graph: DomainGraph) -> tuple[BinaryMatrix, list[int]]:
    """Anticommutation matrix; columns are the all-K real domains."""
    columns = [d.id for d in graph.vertices[: graph.n_real] if d.all_k]
    col_index = {c: j for j, c in enumerate(columns)}
    rows = []
    for mu in range(graph.n_vertices):
        mask = 0
        for nu in graph.generators[mu].zs:
            j = col_index.get(nu)
            if j is not None:
                mask |= 1 << j
        rows.append(mask)
    return BinaryMatrix(graph.n_vertices, len(columns), rows), columns


def gf2_kernel(matrix: BinaryMatrix) -> KernelBasis:
    """Null-space basis over GF(2) by Gaussian elimination on bit-packed rows."""
    n_cols = matrix.n_cols
    if n_cols == 0:
        return KernelBasis(0, [])
    # reduced row echelon form, pivots tracked per column
    pivot_rows: list[tuple[int, int]] = []  # (pivot column, row mask)
    for row in matrix.rows:
        for pc, pr in pivot_rows:
            if (row >> pc) & 1:
                row ^= pr
        if row:
            pc = row.bit_length() - 1
            # eliminate the new pivot from existing rows
            pivot_rows = [
                (c, (r ^ row) if (r >> pc) & 1 else r) for c, r in pivot_rows
            ]
            pivot_rows.append((pc, row))
    pivot_cols = {c for c, _ in pivot_rows}
    basis = []
    for free in range(n_cols):
        if free in pivot_cols:
            continue
        vec = 1 << free
        for pc, pr in pivot_rows:
            if (pr >> free) & 1:
                vec |= 1 << pc
        basis.append(vec)
    return KernelBasis(n_cols, basis)


def incompatibility(graph: DomainGraph, kernel: KernelBasis, columns: list[int]) -> bool:
    """True when some kernel vector certifies zero probability.

    For each basis vector the product of the generators over its support
    must reproduce the bare X string on that support; the configuration
    is impossible exactly when the resulting sign disagrees with the
    product of the measured-operator signs (-1)^sites.  Checking basis
    vectors suffices because the sign map is a group homomorphism on the
    kernel.
    """
    for vec in kernel.vectors:
        support = [columns[j] for j in range(kernel.n_cols) if (vec >> j) & 1]
        prod = IDENTITY
        for v in support:
            prod = prod * graph.generators[v]
        if prod.zs or prod.xs != frozenset(support):
            raise AssertionError("kernel-vector generator product is not a bare X string")
        o_sign = -1 if sum(graph.vertices[v].n_sites for v in support) % 2 else 1
        if prod.sign != o_sign:
            return True
    return False


@dataclass
class WeightResult:
    """Compatibility flag plus the integer log2 relative weight and its terms."""

    compatible: bool
    log2_weight: int | None
    raw_edges: int
    n_vertices: int
    n_k_sites: int
    kernel_dim: int
    deformation_log2_extra: float = 0.0

    @property
    def total_log2(self) -> float:
        """Relative log2 weight including the deformation factor; -inf if zero."""
        if not self.compatible:
            return float("-inf")
        return self.log2_weight + self.deformation_log2_extra


def weight_from_graph(graph: DomainGraph, config: PovmConfig) -> WeightResult:
    matrix, columns = build_H(graph)
    kernel = gf2_kernel(matrix)
    n_k = config.n_k
    if incompatibility(graph, kernel, columns):
        return WeightResult(False, None, graph.raw_edge_total, graph.n_vertices, n_k, kernel.dim)
    exponent = graph.raw_edge_total - graph.n_vertices + 2 * n_k - kernel.dim
    return WeightResult(
        True, -exponent, graph.raw_edge_total, graph.n_vertices, n_k, kernel.dim
    )


def log_weight(lattice: Lattice, config: PovmConfig) -> WeightResult:
    """Full pipeline: domains, graph, H, kernel, sign check, exponent."""
    graph = build_domain_graph(lattice, config, find_domains(lattice, config))
    return weight_from_graph(graph, config)


def deformed_log_weight(lattice: Lattice, config: PovmConfig, a: float) -> WeightResult:
    """Base weight plus the per-F_z deformation factor; compatibility unchanged."""
    result = log_weight(lattice, config)
    n_fz = int(((config.kinds == KIND_F) & (config.axes == AXIS_Z)).sum())
    log2_factor = deformed_fz_log2_factor(a)
    if n_fz == 0:
        extra = 0.0
    elif math.isinf(log2_factor):
        extra = float("-inf")
    else:
        extra = n_fz * log2_factor
    result.deformation_log2_extra = extra
    return result
