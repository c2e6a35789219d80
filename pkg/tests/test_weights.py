import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from akltmc.domains import IDENTITY, build_domain_graph
from akltmc.lattice import build_lattice
from akltmc.oracle import enumerate_all
from akltmc.povm import config_from_indices, parse_config, random_config
from akltmc.weights import (
    BinaryMatrix,
    build_H,
    deformed_log_weight,
    gf2_kernel,
    incompatibility,
    log_weight,
)

LAT12 = build_lattice(1, 2, "open")
LAT22 = build_lattice(2, 2, "open")


# -- gf2 kernel ------------------------------------------------------------


def test_kernel_identity():
    m = BinaryMatrix(3, 3, [0b001, 0b010, 0b100])
    assert gf2_kernel(m).dim == 0


def test_kernel_one_one():
    m = BinaryMatrix(1, 2, [0b11])
    basis = gf2_kernel(m)
    assert basis.dim == 1
    assert basis.vectors == [0b11]


def test_kernel_zero_columns():
    assert gf2_kernel(BinaryMatrix(4, 0, [0, 0, 0, 0])).dim == 0


def test_kernel_zero_matrix():
    assert gf2_kernel(BinaryMatrix(1, 1, [0])).dim == 1


@settings(max_examples=40, deadline=None)
@given(
    rows=st.integers(1, 6),
    cols=st.integers(1, 8),
    seed=st.integers(0, 2**31),
)
def test_kernel_against_bruteforce(rows, cols, seed):
    rng = np.random.default_rng(seed)
    mat = [int(v) for v in rng.integers(0, 1 << cols, size=rows)]
    m = BinaryMatrix(rows, cols, mat)
    basis = gf2_kernel(m)
    for vec in basis.vectors:
        for row in mat:
            assert bin(row & vec).count("1") % 2 == 0
    # brute-force count of null vectors fixes the dimension
    count = 0
    for v in range(1 << cols):
        if all(bin(row & v).count("1") % 2 == 0 for row in mat):
            count += 1
    assert count == 1 << basis.dim


# -- H construction ---------------------------------------------------------


def test_h_no_k_columns():
    cfg = parse_config("Fz Fx\nFx Fz", LAT22)
    g = build_domain_graph(LAT22, cfg)
    matrix, columns = build_H(g)
    assert columns == []
    assert matrix.n_cols == 0


def test_h_1x2_all_kz():
    cfg = parse_config("Kz\nKz", LAT12)
    g = build_domain_graph(LAT12, cfg)
    matrix, columns = build_H(g)
    assert matrix.n_rows == 7 and matrix.n_cols == 1
    ones = sum(matrix.entry(i, 0) for i in range(7))
    assert ones == 6  # six partner rows, no self-loop row
    assert gf2_kernel(matrix).dim == 0


def test_partner_free_regression():
    # without partner rows the same domain would have an all-zero column
    m = BinaryMatrix(1, 1, [0])
    assert gf2_kernel(m).dim == 1


def test_vacuous_compatibility():
    cfg = parse_config("Fz Fx\nFx Fz", LAT22)
    g = build_domain_graph(LAT22, cfg)
    matrix, columns = build_H(g)
    assert incompatibility(g, gf2_kernel(matrix), columns) is False


# -- weight formula ----------------------------------------------------------


def test_all_fz_exponent_1x2():
    res = log_weight(LAT12, parse_config("Fz\nFz", LAT12))
    assert res.compatible
    assert res.raw_edges == 6 and res.n_vertices == 7
    assert res.log2_weight == 1  # -(|Eraw| - |V|) = -(6 - 7)


def test_all_kz_ratio_1x2():
    ff = log_weight(LAT12, parse_config("Fz\nFz", LAT12))
    kk = log_weight(LAT12, parse_config("Kz\nKz", LAT12))
    assert kk.kernel_dim == 0 and kk.n_k_sites == 2
    assert kk.log2_weight - ff.log2_weight == -4  # ratio 1/16


def test_all_f_ratios_toll_free():
    # with no K outcomes the weight depends only on |V| - |Eraw|
    base = log_weight(LAT22, parse_config("Fz Fz\nFz Fz", LAT22))
    check = log_weight(LAT22, parse_config("Fx Fz\nFz Fx", LAT22))
    assert base.log2_weight - check.log2_weight == (
        (base.n_vertices - base.raw_edges) - (check.n_vertices - check.raw_edges)
    )


def test_monotone_one_k_in_multisite_domain():
    cfg = parse_config("Fz Fz\nFx Fx", LAT22)
    base = log_weight(LAT22, cfg)
    bumped = cfg.copy()
    bumped.kinds[0] = 1  # domain {0,1} keeps an F at site 1
    res = log_weight(LAT22, bumped)
    assert res.compatible == base.compatible
    assert res.log2_weight == base.log2_weight - 2
    assert res.kernel_dim == base.kernel_dim


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_monotone_property_random(seed):
    rng = np.random.default_rng(seed)
    lat = build_lattice(3, 3, "open")
    cfg = random_config(lat, rng)
    g = build_domain_graph(lat, cfg)
    for d in g.vertices[: g.n_real]:
        f_sites = [s for s in d.sites if cfg.kinds[s] == 0]
        if len(f_sites) >= 2:
            base = log_weight(lat, cfg)
            bumped = cfg.copy()
            bumped.kinds[min(f_sites)] = 1
            res = log_weight(lat, bumped)
            if base.compatible:
                assert res.compatible
                assert res.log2_weight == base.log2_weight - 2
            return


# -- oracle equivalence -------------------------------------------------------


def _check_lattice_against_oracle(lat):
    configs, probs, _ = enumerate_all(lat)
    results = [log_weight(lat, c) for c in configs]
    ref = int(np.argmax(probs))
    for res, p in zip(results, probs):
        assert res.compatible == (p > 1e-12)
        if res.compatible:
            predicted = 2.0 ** (res.log2_weight - results[ref].log2_weight)
            assert abs(p / probs[ref] - predicted) / predicted < 1e-9


def test_oracle_equivalence_1x2():
    _check_lattice_against_oracle(LAT12)


def test_oracle_equivalence_2x2_torus():
    # the torus exercises both multi-edges and the incompatibility sign check
    _check_lattice_against_oracle(build_lattice(2, 2, "torus"))


def test_sign_homomorphism():
    # products of kernel vectors have multiplicative signs
    lat = build_lattice(2, 2, "torus")
    rng = np.random.default_rng(3)
    found = 0
    for _ in range(400):
        cfg = random_config(lat, rng)
        g = build_domain_graph(lat, cfg)
        matrix, columns = build_H(g)
        kernel = gf2_kernel(matrix)
        if kernel.dim < 2:
            continue
        found += 1

        def sign_of(vec):
            support = [columns[j] for j in range(kernel.n_cols) if (vec >> j) & 1]
            prod = IDENTITY
            for v in support:
                prod = prod * g.generators[v]
            o_sign = -1 if sum(g.vertices[v].n_sites for v in support) % 2 else 1
            return prod.sign * o_sign

        v1, v2 = kernel.vectors[0], kernel.vectors[1]
        assert sign_of(v1 ^ v2) == sign_of(v1) * sign_of(v2)
        if found > 10:
            break
    assert found > 0


# -- deformation -----------------------------------------------------------------


def test_deformed_identity_at_one():
    cfg = parse_config("Fz Kx\nFx Fz", LAT22)
    base = log_weight(LAT22, cfg)
    deformed = deformed_log_weight(LAT22, cfg, 1.0)
    assert deformed.deformation_log2_extra == 0.0
    assert deformed.log2_weight == base.log2_weight


def test_deformed_upper_endpoint_zero_weight():
    cfg = parse_config("Fz Fx\nFx Fz", LAT22)
    res = deformed_log_weight(LAT22, cfg, math.sqrt(3.0))
    assert res.deformation_log2_extra == float("-inf")
    no_fz = parse_config("Fy Fx\nFx Fy", LAT22)
    res2 = deformed_log_weight(LAT22, no_fz, math.sqrt(3.0))
    assert res2.deformation_log2_extra == 0.0


def test_deformed_lower_endpoint_factor_four():
    cfg = parse_config("Fz Fx\nFx Fz", LAT22)
    res = deformed_log_weight(LAT22, cfg, 1.0 / math.sqrt(3.0))
    assert abs(res.deformation_log2_extra - 2.0 * 2) < 1e-12  # two F_z sites


def test_deformed_range_rejected():
    cfg = parse_config("Fz Fx\nFx Fz", LAT22)
    with pytest.raises(ValueError):
        deformed_log_weight(LAT22, cfg, 0.5)


def test_normalization_both_modes():
    for lat in (LAT12, build_lattice(2, 2, "torus")):
        _, _, summary = enumerate_all(lat)
        assert abs(summary["total"] - 1.0) < 1e-9
