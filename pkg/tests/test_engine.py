"""The incremental chain engine must be bit-identical to full recomputation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from akltmc.engine import ChainEngine
from akltmc.lattice import build_lattice
from akltmc.povm import parse_config
from akltmc.sampler import initial_config
from akltmc.weights import log_weight

LATTICES = [
    ("open", 3, 3),
    ("open", 4, 3),
    ("torus", 2, 2),
    ("torus", 2, 4),
    ("torus", 4, 4),
]


def _terms(engine):
    return (
        engine.raw_edges,
        engine.n_vertices,
        engine.n_k_total,
        engine.dim_ker,
        engine.log2_weight,
    )


def _ref_terms(lattice, config):
    ref = log_weight(lattice, config)
    return ref.compatible, (
        ref.raw_edges,
        ref.n_vertices,
        ref.n_k_sites,
        ref.kernel_dim,
        ref.log2_weight,
    )


def _drive(lattice, seed, steps, accept_rate=0.55):
    engine = ChainEngine(lattice, initial_config(lattice))
    rng = np.random.default_rng(seed)
    n = lattice.n_sites
    for _ in range(steps):
        if rng.random() < 0.88:
            s = int(rng.integers(n))
            cur = engine.kinds[s] * 3 + engine.axes[s]
            alt = int(rng.integers(5))
            prop = alt if alt < cur else alt + 1
            delta = engine.propose(s, prop // 3, prop % 3)
        else:
            ids = sorted(engine.domains)
            delta = engine.propose_domain_flip(ids[int(rng.integers(len(ids)))])

        compatible, ref = _ref_terms(lattice, engine.config())
        assert (delta is not None) == compatible
        if compatible:
            assert _terms(engine) == ref

        if delta is not None and rng.random() < accept_rate:
            engine.accept()
        else:
            engine.reject()
    # the maintained state is still exactly a full recomputation
    compatible, ref = _ref_terms(lattice, engine.config())
    assert compatible and _terms(engine) == ref


@pytest.mark.parametrize("mode,w,h", LATTICES)
def test_engine_matches_recompute(mode, w, h):
    _drive(build_lattice(w, h, mode), seed=w * 100 + h, steps=250)


@settings(max_examples=12, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_engine_matches_recompute_torus_fuzz(seed):
    _drive(build_lattice(2, 4, "torus"), seed=seed, steps=120)


@settings(max_examples=8, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_engine_matches_recompute_open_fuzz(seed):
    _drive(build_lattice(3, 3, "open"), seed=seed, steps=120)


def test_reject_restores_full_state():
    lattice = build_lattice(3, 3, "open")
    engine = ChainEngine(lattice, initial_config(lattice))
    rng = np.random.default_rng(9)
    for _ in range(60):
        snapshot = (
            list(engine.kinds),
            list(engine.axes),
            list(engine.dom_id),
            {d: (set(rec.sites), rec.axis, rec.n_k) for d, rec in engine.domains.items()},
            set(engine.allk),
            _terms(engine),
        )
        s = int(rng.integers(lattice.n_sites))
        cur = engine.kinds[s] * 3 + engine.axes[s]
        alt = int(rng.integers(5))
        prop = alt if alt < cur else alt + 1
        engine.propose(s, prop // 3, prop % 3)
        engine.reject()
        assert snapshot == (
            list(engine.kinds),
            list(engine.axes),
            list(engine.dom_id),
            {d: (set(rec.sites), rec.axis, rec.n_k) for d, rec in engine.domains.items()},
            set(engine.allk),
            _terms(engine),
        )


def test_incompatible_start_rejected():
    lattice = build_lattice(2, 2, "torus")
    # all-K checkerboard pairs an X-measured singleton with a -X stabilizer
    config = parse_config("Kz Kx\nKx Kz", lattice)
    ref = log_weight(lattice, config)
    assert not ref.compatible
    with pytest.raises(ValueError):
        ChainEngine(lattice, config)


def test_initial_weight_matches():
    lattice = build_lattice(5, 4, "open")
    engine = ChainEngine(lattice, initial_config(lattice))
    compatible, ref = _ref_terms(lattice, engine.config())
    assert compatible and _terms(engine) == ref
    assert engine.n_k_total == 0
