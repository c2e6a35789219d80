"""Exhaustive exact outcome probabilities on tiny lattices.

The resource state is built from spin singlets on lattice edges with a
per-site projection of the four virtual qubits onto their symmetric
(spin-2) subspace.  Dangling boundary legs are traced as maximally mixed
(weight 1/2 per leg), which is identical to attaching unmeasured spin-1/2
partners.

Two independent evaluation strategies are provided:

* bond summation: an exhaustive sum over bond basis states, two values
  per ket/bra edge bit and per shared leg bit.  Handles tori with doubled
  edges uniformly and never materializes a large state vector.
* state vector: explicit partner qubits and a dense state, feasible only
  on the smallest systems.  Used to cross-check the bond summation.

Deformed evaluation replaces the site operators with their deformed
counterparts and divides by the deformed state norm.  The deformation
operator scales the extremal S_z = +/-2 levels by `a`; with that
convention the modified z-type rank-two element carries the factor
sqrt((3 - a^2) / (2 a^2)) and the deformed six-element set still sums to
the symmetric projector.  Valid range: 1/sqrt(3) <= a <= sqrt(3).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import Lattice
from .povm import PovmConfig, config_from_indices

A_MIN = 1.0 / math.sqrt(3.0)
A_MAX = math.sqrt(3.0)

_IDENTITY_TOL = 1e-12


class OracleSizeError(ValueError):
    """Raised when a lattice is too large for exhaustive evaluation."""


def _ket(amplitudes) -> np.ndarray:
    v = np.asarray(amplitudes, dtype=complex)
    return v / np.linalg.norm(v)


_Q0 = _ket([1, 0])
_Q1 = _ket([0, 1])
_AXIS_PAIRS = {
    "x": (_ket([1, 1]), _ket([1, -1])),
    "y": (_ket([1, 1j]), _ket([1, -1j])),
    "z": (_Q0, _Q1),
}


def _kron4(v: np.ndarray) -> np.ndarray:
    out = v
    for _ in range(3):
        out = np.kron(out, v)
    return out


def _proj(v: np.ndarray) -> np.ndarray:
    return np.outer(v, v.conj())


def _symmetric_projector() -> np.ndarray:
    """Projector onto the symmetric subspace of four qubits (dimension 5)."""
    dim = 16
    p = np.zeros((dim, dim), dtype=complex)
    for perm in itertools.permutations(range(4)):
        op = np.zeros((dim, dim))
        for i in range(dim):
            bits = [(i >> (3 - k)) & 1 for k in range(4)]
            j = sum(bits[perm[k]] << (3 - k) for k in range(4))
            op[j, i] = 1.0
        p += op
    return p / 24.0


_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}

#: axis of the internal-edge convention per domain type (z->x, x->z, y->z)
B_AXIS = {"z": "x", "x": "z", "y": "z"}


@dataclass
class SiteOperatorTable:
    """The six 16x16 site operators plus the projectors they are built from."""

    f_ops: dict  # axis -> F_axis
    k_ops: dict  # axis -> K_axis
    sym_projector: np.ndarray
    ghz_projectors: dict  # axis -> |GHZ^-_axis><GHZ^-_axis|
    code_projectors: dict  # axis -> Pi_axis
    extremal_z: np.ndarray = field(default=None)  # |0000><0000| + |1111><1111|

    def povm_element(self, kind: str, axis: str) -> np.ndarray:
        return self.f_ops[axis] if kind == "F" else self.k_ops[axis]

    def deformation(self, a: float) -> np.ndarray:
        """Deformation operator lifted to the four-qubit representation."""
        _check_a(a)
        return a * self.extremal_z + (self.sym_projector - self.extremal_z)

    def deformation_inverse(self, a: float) -> np.ndarray:
        _check_a(a)
        return (1.0 / a) * self.extremal_z + (self.sym_projector - self.extremal_z)

    def deformed_element(self, kind: str, axis: str, a: float) -> np.ndarray:
        _check_a(a)
        base = self.povm_element(kind, axis) @ self.deformation(a)
        if kind == "F" and axis == "z":
            base = math.sqrt((3.0 - a * a) / (2.0 * a * a)) * base
        return base


def _check_a(a: float) -> None:
    if not (A_MIN - 1e-12 <= a <= A_MAX + 1e-12):
        raise ValueError(f"deformation parameter a={a} outside [{A_MIN:.6f}, {A_MAX:.6f}]")


def deformed_fz_log2_factor(a: float) -> float:
    """log2 of the per-site weight factor carried by each F_z outcome.

    At the upper endpoint the z-type rank-two element vanishes; any
    configuration containing an F_z then has weight zero (-inf).
    """
    _check_a(a)
    ratio = (3.0 - a * a) / (2.0 * a * a)
    if ratio <= 1e-12:
        return float("-inf")
    return math.log2(ratio)


def build_site_operators() -> SiteOperatorTable:
    """Construct the operator table and verify its algebraic identities.

    A failed identity aborts construction, signalling a transcription bug
    rather than a recoverable condition.
    """
    f_ops, k_ops, ghz, code = {}, {}, {}, {}
    for axis, (plus, minus) in _AXIS_PAIRS.items():
        up, dn = _kron4(plus), _kron4(minus)
        f_ops[axis] = math.sqrt(2.0 / 3.0) * (_proj(up) + _proj(dn))
        g = (up - dn) / math.sqrt(2.0)
        ghz[axis] = _proj(g)
        k_ops[axis] = math.sqrt(1.0 / 3.0) * ghz[axis]
        code[axis] = _proj(up) + _proj(dn)

    p_s = _symmetric_projector()
    table = SiteOperatorTable(
        f_ops=f_ops,
        k_ops=k_ops,
        sym_projector=p_s,
        ghz_projectors=ghz,
        code_projectors=code,
        extremal_z=code["z"],
    )

    total = sum(f.conj().T @ f for f in f_ops.values())
    total += sum(k.conj().T @ k for k in k_ops.values())
    _assert_zero(total - p_s, "POVM completeness")

    for axis in "xyz":
        f, k = f_ops[axis], k_ops[axis]
        # two-stage identity: K = sqrt(3/2) K F, equivalently K F = sqrt(2/3) K
        _assert_zero(k - math.sqrt(3.0 / 2.0) * (k @ f), f"two-stage K identity ({axis})")
        b = _PAULI[B_AXIS[axis]]
        sb4 = _kron4_op(b)
        sandwich = code[axis] @ ((np.eye(16) - sb4) / 2.0) @ code[axis]
        _assert_zero(ghz[axis] - sandwich, f"GHZ sandwich identity ({axis})")
        assert np.linalg.matrix_rank(f, tol=1e-9) == 2
        assert np.linalg.matrix_rank(k, tol=1e-9) == 1

    for a in (A_MIN, 0.8, 1.0, 1.3, A_MAX):
        tot = np.zeros((16, 16), dtype=complex)
        for kind in "FK":
            for axis in "xyz":
                m = table.deformed_element(kind, axis, a)
                tot += m.conj().T @ m
        _assert_zero(tot - p_s, f"deformed completeness (a={a})")

    return table


def _kron4_op(m: np.ndarray) -> np.ndarray:
    out = m
    for _ in range(3):
        out = np.kron(out, m)
    return out


def _assert_zero(m: np.ndarray, label: str) -> None:
    dev = np.abs(m).max()
    if dev > _IDENTITY_TOL:
        raise AssertionError(f"operator identity failed: {label} (deviation {dev:.3e})")


# ---------------------------------------------------------------------------
# bond-basis summation


class _BondSummer:
    """Exhaustive sum over bond basis bits for one lattice.

    Bit layout of a term index: edge ket bits, then edge bra bits, then
    shared leg bits.  Each edge contributes sign (-1)^(ket+bra) and weight
    1/2; each leg contributes weight 1/2.
    """

    MAX_BITS = 26

    def __init__(self, lattice: Lattice):
        self.lattice = lattice
        self.n_edges = len(lattice.edges)
        self.n_legs = len(lattice.boundary_legs)
        self.bits = 2 * self.n_edges + self.n_legs
        if self.bits > self.MAX_BITS:
            raise OracleSizeError(
                f"{lattice.width}x{lattice.height} needs {self.bits} bond bits "
                f"(limit {self.MAX_BITS})"
            )
        self.scale = 0.5 ** (self.n_edges + self.n_legs)
        self._cache = self._build_chunk(0, 1 << self.bits) if self.bits <= 18 else None

    def _build_chunk(self, start: int, stop: int):
        t = np.arange(start, stop, dtype=np.int64)
        ne, lat = self.n_edges, self.lattice
        ket_bits = [(t >> e) & 1 for e in range(ne)]
        bra_bits = [(t >> (ne + e)) & 1 for e in range(ne)]
        leg_bits = [(t >> (2 * ne + j)) & 1 for j in range(self.n_legs)]

        parity = np.zeros(len(t), dtype=np.int64)
        for e in range(ne):
            parity ^= ket_bits[e] ^ bra_bits[e]
        sign = (1 - 2 * parity).astype(np.float64)

        n = lat.n_sites
        ket_idx = [np.zeros(len(t), dtype=np.int64) for _ in range(n)]
        bra_idx = [np.zeros(len(t), dtype=np.int64) for _ in range(n)]
        for s in range(n):
            for slot in range(4):
                entry = lat.slot_map[s][slot]
                if entry[0] == "edge":
                    _, e, side = entry
                    kb = ket_bits[e] if side == 0 else 1 - ket_bits[e]
                    bb = bra_bits[e] if side == 0 else 1 - bra_bits[e]
                else:
                    _, j = entry
                    kb = bb = leg_bits[j]
                ket_idx[s] += kb << (3 - slot)
                bra_idx[s] += bb << (3 - slot)
        return sign, ket_idx, bra_idx

    def value(self, site_ops: list[np.ndarray]) -> float:
        """Trace of the bond state against the product of site operators."""
        total = 0.0 + 0.0j
        chunk = 1 << min(self.bits, 20)
        for start in range(0, 1 << self.bits, chunk):
            if self._cache is not None:
                sign, ket_idx, bra_idx = self._cache
            else:
                sign, ket_idx, bra_idx = self._build_chunk(start, start + chunk)
            prod = sign.astype(complex)
            for s, op in enumerate(site_ops):
                prod = prod * op[bra_idx[s], ket_idx[s]]
            total += prod.sum()
        value = total * self.scale
        assert abs(value.imag) < 1e-10 * max(1.0, abs(value.real))
        return float(value.real)


@dataclass
class OracleEvaluator:
    """Exact probability evaluation for one lattice (optionally deformed)."""

    lattice: Lattice
    a: float = 1.0
    table: SiteOperatorTable = None

    def __post_init__(self):
        if self.table is None:
            self.table = build_site_operators()
        _check_a(self.a)
        self._summer = _BondSummer(self.lattice)
        d_inv = self.table.deformation_inverse(self.a)
        self._den_op = d_inv @ d_inv if self.a != 1.0 else self.table.sym_projector
        self._num_ops = {}
        for kind in "FK":
            for axis in "xyz":
                m = self.table.deformed_element(kind, axis, self.a)
                self._num_ops[kind + axis] = d_inv.conj().T @ m.conj().T @ m @ d_inv
        self._den = self._summer.value([self._den_op] * self.lattice.n_sites)
        assert self._den > 0

    def probability(self, config: PovmConfig) -> float:
        ops = [self._num_ops[config.outcome(s).code] for s in range(self.lattice.n_sites)]
        return self._summer.value(ops) / self._den

    def probability_table(self):
        """All 6^N probabilities as a flat array indexed by base-6 config digits.

        Digit s of the row index (least significant first) is the outcome
        index of site s in the canonical Fx..Kz order.
        """
        n = self.lattice.n_sites
        if n > 4:
            raise OracleSizeError(f"enumerate_all limited to 4 sites, got {n}")
        summer = self._summer
        sign, ket_idx, bra_idx = summer._build_chunk(0, 1 << summer.bits)
        gathers = []
        for s in range(n):
            row = {}
            for code, op in self._num_ops.items():
                row[code] = op[bra_idx[s], ket_idx[s]]
            gathers.append(row)
        codes = ("Fx", "Fy", "Fz", "Kx", "Ky", "Kz")
        probs = np.empty(6**n, dtype=float)
        signc = sign.astype(complex)
        for flat in range(6**n):
            rem, prod = flat, signc
            for s in range(n):
                prod = prod * gathers[s][codes[rem % 6]]
                rem //= 6
            probs[flat] = prod.sum().real * summer.scale / self._den
        return probs


def config_probability(lattice: Lattice, config: PovmConfig, a: float = 1.0) -> float:
    """Exact probability of one outcome configuration, normalized over all 6^N."""
    return OracleEvaluator(lattice, a=a).probability(config)


def enumerate_all(lattice: Lattice, a: float = 1.0):
    """All 6^N configurations with exact probabilities.

    Returns (configs, probabilities, summary) where summary reports the
    probability sum and the number of (numerically) zero entries.
    """
    ev = OracleEvaluator(lattice, a=a)
    probs = ev.probability_table()
    n = lattice.n_sites
    configs = []
    for flat in range(6**n):
        digits, rem = [], flat
        for _ in range(n):
            digits.append(rem % 6)
            rem //= 6
        configs.append(config_from_indices(lattice, digits))
    summary = {
        "total": float(probs.sum()),
        "n_zero": int((probs < 1e-12).sum()),
        "n_configs": len(configs),
    }
    return configs, probs, summary


def single_site_marginals(lattice: Lattice, a: float = 1.0) -> np.ndarray:
    """Marginal probability of each outcome at each site, shape (N, 6)."""
    ev = OracleEvaluator(lattice, a=a)
    probs = ev.probability_table()
    n = lattice.n_sites
    out = np.zeros((n, 6))
    for flat, p in enumerate(probs):
        rem = flat
        for s in range(n):
            out[s, rem % 6] += p
            rem //= 6
    return out


# ---------------------------------------------------------------------------
# independent dense state-vector path (explicit partner qubits)


def _bond_state(lattice: Lattice) -> np.ndarray:
    """Dense state of all singlets: site qubits then one partner per leg."""
    n_q = 4 * lattice.n_sites + len(lattice.boundary_legs)
    if n_q > 20:
        raise OracleSizeError(f"state-vector path limited to 20 qubits, needs {n_q}")
    singlet = np.array([0.0, 1.0, -1.0, 0.0]) / math.sqrt(2.0)
    pairs = []
    for u, su, v, sv in lattice.edges:
        pairs.append((4 * u + su, 4 * v + sv))
    for j, (s, slot) in enumerate(lattice.boundary_legs):
        pairs.append((4 * s + slot, 4 * lattice.n_sites + j))
    state = np.array([1.0])
    for _ in pairs:
        state = np.kron(state, singlet)
    kron_pos = {}
    for i, (qa, qb) in enumerate(pairs):
        kron_pos[qa] = 2 * i
        kron_pos[qb] = 2 * i + 1
    axes = [kron_pos[q] for q in range(n_q)]
    return state.reshape([2] * n_q).transpose(axes).reshape(-1)


def _apply_site_op(state: np.ndarray, op: np.ndarray, site: int, n_q: int) -> np.ndarray:
    left = 1 << (4 * site)
    right = 1 << (n_q - 4 * site - 4)
    reshaped = state.reshape(left, 16, right)
    return np.einsum("ab,xbz->xaz", op, reshaped).reshape(-1)


def statevector_probability(lattice: Lattice, config: PovmConfig, a: float = 1.0) -> float:
    """Probability via a dense state with explicit partner qubits.

    Independent of the bond summation: boundary legs are purified into
    partner spin-1/2 singlets instead of being traced.
    """
    table = build_site_operators()
    n_q = 4 * lattice.n_sites + len(lattice.boundary_legs)
    bonds = _bond_state(lattice)
    d_inv = table.deformation_inverse(a)
    den_op = d_inv @ table.sym_projector
    num = bonds
    den = bonds
    for s in range(lattice.n_sites):
        o = config.outcome(s)
        num_op = table.deformed_element(o.kind, o.axis, a) @ den_op
        num = _apply_site_op(num, num_op, s, n_q)
        den = _apply_site_op(den, den_op, s, n_q)
    return float(np.vdot(num, num).real / np.vdot(den, den).real)


def reduced_site_density(lattice: Lattice, site: int) -> np.ndarray:
    """Reduced four-qubit density operator of one site of the resource state."""
    table = build_site_operators()
    n_q = 4 * lattice.n_sites + len(lattice.boundary_legs)
    psi = _bond_state(lattice)
    for s in range(lattice.n_sites):
        psi = _apply_site_op(psi, table.sym_projector, s, n_q)
    psi = psi / np.linalg.norm(psi)
    left = 1 << (4 * site)
    right = 1 << (n_q - 4 * site - 4)
    t = psi.reshape(left, 16, right)
    return np.einsum("xaz,xbz->ab", t, t.conj())
