"""Metropolis sampling of outcome configurations under the exact weights.

Proposals pick one site uniformly and one of the five other outcomes
uniformly, so the proposal is symmetric and detailed balance holds with
the bare weight ratio min(1, 2^delta).  Zero-weight (incompatible)
proposals are ordinary rejections.  As an ergodicity hedge, every sweep
ends with one proposal that flips the F/K kind of every site in a
uniformly chosen domain.

Reproducibility: one chain consumes a single numpy PCG64 stream seeded
from the 64-bit chain seed, with a fixed draw order (per sweep: N site
indices, N alternative indices, N uniforms, then domain index and
uniform for the hedge move).  The same seed always yields bit-identical
samples.  Parallel chains use independent seeds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .engine import ChainEngine
from .lattice import Lattice, build_lattice
from .povm import AXIS_X, AXIS_Y, AXIS_Z, KIND_F, PovmConfig


@dataclass
class ChainParams:
    width: int
    height: int
    boundary_mode: str = "open"
    seed: int = 0
    burn_in_sweeps: int = 50
    sweeps_between_samples: int = 2
    sample_count: int = 100
    deformation_a: float = 1.0

    def __post_init__(self):
        if self.burn_in_sweeps < 0 or self.sweeps_between_samples < 1 or self.sample_count < 0:
            raise ValueError("chain counts must be positive")


@dataclass
class ChainState:
    engine: ChainEngine
    rng: np.random.Generator
    steps: int = 0
    accepted: int = 0

    @property
    def config(self) -> PovmConfig:
        return self.engine.config()

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.steps if self.steps else 0.0

    @property
    def k_fraction(self) -> float:
        return self.engine.n_k_total / self.engine.lattice.n_sites


@dataclass
class ChainDiagnostics:
    acceptance_rate: float
    mean_k_fraction: float
    rows: list = field(default_factory=list)  # (step, acceptance_rate, k_fraction)


def accept_move(delta_log2: float, u: float) -> bool:
    """Metropolis rule for a symmetric proposal with weight ratio 2^delta."""
    if delta_log2 >= 0.0:
        return True
    return u < 2.0**delta_log2


def initial_config(lattice: Lattice, deformation_a: float = 1.0) -> PovmConfig:
    """All-F checkerboard start, always compatible.

    The default alternation is z/x; at the deformation endpoint where the
    F_z factor vanishes the x/y alternation is used instead so the start
    has nonzero weight.
    """
    n = lattice.n_sites
    kinds = np.full(n, KIND_F, dtype=np.uint8)
    axes = np.empty(n, dtype=np.uint8)
    even_axis, odd_axis = AXIS_Z, AXIS_X
    if (3.0 - deformation_a * deformation_a) <= 1e-12:
        even_axis, odd_axis = AXIS_X, AXIS_Y
    for s, (x, y) in enumerate(lattice.sites):
        axes[s] = even_axis if (x + y) % 2 == 0 else odd_axis
    return PovmConfig(lattice, kinds, axes)


def initialize_chain(params: ChainParams) -> ChainState:
    lattice = build_lattice(params.width, params.height, params.boundary_mode)
    config = initial_config(lattice, params.deformation_a)
    engine = ChainEngine(lattice, config, a=params.deformation_a)
    rng = np.random.default_rng(np.random.SeedSequence(params.seed))
    return ChainState(engine=engine, rng=rng)


def metropolis_step(state: ChainState, rng: np.random.Generator | None = None) -> ChainState:
    """One single-site proposal; the state is updated in place."""
    rng = rng if rng is not None else state.rng
    n = state.engine.lattice.n_sites
    site = int(rng.integers(n))
    alt = int(rng.integers(5))
    u = float(rng.random())
    _site_move(state, site, alt, u)
    return state


def _site_move(state: ChainState, site: int, alt: int, u: float) -> None:
    eng = state.engine
    cur = eng.kinds[site] * 3 + eng.axes[site]
    prop = alt if alt < cur else alt + 1
    delta = eng.propose(site, prop // 3, prop % 3)
    state.steps += 1
    if delta is not None and accept_move(delta, u):
        eng.accept()
        state.accepted += 1
    else:
        eng.reject()


def _hedge_move(state: ChainState, r: int, u: float) -> None:
    eng = state.engine
    ids = sorted(eng.domains)
    delta = eng.propose_domain_flip(ids[r % len(ids)])
    state.steps += 1
    if delta is not None and accept_move(delta, u):
        eng.accept()
        state.accepted += 1
    else:
        eng.reject()


def run_sweep(state: ChainState) -> None:
    """N single-site proposals followed by one domain-flip proposal."""
    n = state.engine.lattice.n_sites
    rng = state.rng
    sites = rng.integers(0, n, size=n)
    alts = rng.integers(0, 5, size=n)
    us = rng.random(n)
    for i in range(n):
        _site_move(state, int(sites[i]), int(alts[i]), float(us[i]))
    r = int(rng.integers(1 << 30))
    u = float(rng.random())
    _hedge_move(state, r, u)


def run_chain(params: ChainParams) -> tuple[list[PovmConfig], ChainDiagnostics]:
    """Burn in, then emit `sample_count` configs every few sweeps."""
    state = initialize_chain(params)
    for _ in range(params.burn_in_sweeps):
        run_sweep(state)
    samples: list[PovmConfig] = []
    rows = []
    k_sum = 0.0
    while len(samples) < params.sample_count:
        for _ in range(params.sweeps_between_samples):
            run_sweep(state)
        samples.append(state.config)
        k_sum += state.k_fraction
        rows.append((state.steps, state.acceptance_rate, state.k_fraction))
    diag = ChainDiagnostics(
        acceptance_rate=state.acceptance_rate,
        mean_k_fraction=k_sum / max(1, len(samples)),
        rows=rows,
    )
    return samples, diag
