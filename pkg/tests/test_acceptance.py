"""Acceptance suite: every criterion at its stated tolerance.

Each test prints one `ACCEPT n name: PASS` line (visible with -s or -rP);
a failed assertion marks the criterion red.  Chain samples are shared
between criteria through module-scoped fixtures, so the suite runs the
expensive lattices once.
"""

import math
import time

import numpy as np
import pytest

from akltmc.domains import build_domain_graph, classify_measured, find_domains
from akltmc.lattice import build_lattice
from akltmc.oracle import enumerate_all, single_site_marginals
from akltmc.percolation import (
    PercCurve,
    collapse,
    estimate_p_span,
    find_crossing,
    largest_domain_stats,
    spans,
)
from akltmc.rewrite import is_planar, simple_graph_from_domains, thin
from akltmc.sampler import ChainParams, initialize_chain, metropolis_step, run_chain
from akltmc.weights import deformed_log_weight, log_weight


def _report(number: int, name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    print(f"ACCEPT {number:2d} {name}: {status}" + (f" ({detail})" if detail else ""))
    assert ok, f"criterion {number} failed: {detail}"


def _thinned(lattice, config):
    graph = build_domain_graph(lattice, config, find_domains(lattice, config))
    simple = simple_graph_from_domains(graph, lattice)
    return thin(simple, classify_measured(graph, config))


def _chain(L, seed, n_samples, burn_in=60, gap=3):
    params = ChainParams(
        L, L, seed=seed, burn_in_sweeps=burn_in, sweeps_between_samples=gap, sample_count=n_samples
    )
    samples, _ = run_chain(params)
    return build_lattice(L, L, "open"), samples


@pytest.fixture(scope="module")
def planarity_samples():
    # shared by criteria 5, 6 and 10
    out = {}
    for L, seed in ((16, 161), (32, 321), (64, 641)):
        out[L] = _chain(L, seed, 200)
    return out


@pytest.fixture(scope="module")
def desk_curves():
    # shared by criteria 8 and 9: L in {40, 60, 80}, three pooled chains per
    # size, 3000 deletion trials per point on the 0.08..0.20 grid
    curves = []
    for i, L in enumerate((40, 60, 80)):
        lattice = build_lattice(L, L, "open")
        graphs = []
        for chain in range(3):
            _, samples = _chain(L, seed=1000 * L + chain, n_samples=100)
            graphs.extend(_thinned(lattice, cfg)[0] for cfg in samples)
        curve = PercCurve(L=L)
        for j, p in enumerate(np.arange(0.08, 0.2049, 0.01)):
            rng = np.random.default_rng((777, i, j))
            curve.points.append(estimate_p_span(graphs, lattice, float(p), 10, rng))
        curves.append(curve)
    return curves


def test_criterion_1_oracle_completeness():
    t0 = time.time()
    worst = 0.0
    for w, h, mode in ((1, 2, "open"), (2, 2, "open"), (2, 2, "torus")):
        _, _, summary = enumerate_all(build_lattice(w, h, mode))
        worst = max(worst, abs(summary["total"] - 1.0))
    elapsed = time.time() - t0
    _report(
        1,
        "oracle completeness",
        worst < 1e-9 and elapsed < 60,
        f"max deviation {worst:.2e}, {elapsed:.0f}s",
    )


def test_criterion_2_weight_formula_equivalence():
    t0 = time.time()
    worst = 0.0
    zero_violations = 0
    for w, h in ((1, 2), (2, 2)):
        lattice = build_lattice(w, h, "open")
        configs, probs, _ = enumerate_all(lattice)
        results = [log_weight(lattice, c) for c in configs]
        ref = int(np.argmax(probs))
        for res, p in zip(results, probs):
            if not res.compatible:
                if p >= 1e-12:
                    zero_violations += 1
                continue
            predicted = 2.0 ** (res.log2_weight - results[ref].log2_weight)
            worst = max(worst, abs(p / probs[ref] - predicted) / predicted)
    lat12 = build_lattice(1, 2, "open")
    from akltmc.povm import parse_config

    ff = log_weight(lat12, parse_config("Fz\nFz", lat12))
    kk = log_weight(lat12, parse_config("Kz\nKz", lat12))
    anchor_ok = kk.log2_weight - ff.log2_weight == -4
    elapsed = time.time() - t0
    _report(
        2,
        "weight-formula equivalence",
        worst < 1e-9 and zero_violations == 0 and anchor_ok and elapsed < 300,
        f"worst ratio dev {worst:.2e}, anchor 1/16 {'ok' if anchor_ok else 'BAD'}, {elapsed:.0f}s",
    )


def test_criterion_3_marginals():
    worst = 0.0
    expected = np.array([4 / 15] * 3 + [1 / 15] * 3)
    for w, h, mode in ((1, 2, "open"), (2, 2, "open"), (2, 2, "torus")):
        marg = single_site_marginals(build_lattice(w, h, mode))
        worst = max(worst, float(np.abs(marg - expected).max()))
    _report(3, "single-site marginals 4/15, 1/15", worst < 1e-9, f"max deviation {worst:.2e}")


def test_criterion_4_sampler_total_variation():
    t0 = time.time()
    lattice = build_lattice(2, 2, "open")
    _, probs, _ = enumerate_all(lattice)
    tvs, k_ok = [], []
    for seed in (1, 2, 3):
        state = initialize_chain(ChainParams(2, 2, seed=seed))
        for _ in range(10_000):
            metropolis_step(state)
        counts = np.zeros(6**4)
        engine = state.engine
        k_series = []
        steps = 1_000_000
        for _ in range(steps):
            metropolis_step(state)
            idx = 0
            mult = 1
            for s in range(4):
                idx += (engine.kinds[s] * 3 + engine.axes[s]) * mult
                mult *= 6
            counts[idx] += 1
            k_series.append(engine.n_k_total)
        tvs.append(0.5 * float(np.abs(counts / steps - probs).sum()))
        k_arr = np.array(k_series, dtype=float) / 4
        batches = k_arr.reshape(100, -1).mean(axis=1)
        stderr = batches.std(ddof=1) / math.sqrt(len(batches))
        k_ok.append(abs(k_arr.mean() - 0.2) < 3 * stderr)
    elapsed = time.time() - t0
    _report(
        4,
        "sampler vs oracle distribution",
        all(tv < 0.02 for tv in tvs) and all(k_ok) and elapsed < 600,
        f"TV={['%.4f' % tv for tv in tvs]}, K-fraction 3-sigma ok={k_ok}, {elapsed:.0f}s",
    )


def test_criterion_5_planarity(planarity_samples):
    t0 = time.time()
    failures = 0
    total = 0
    for L, (lattice, samples) in planarity_samples.items():
        for config in samples:
            graph, _ = _thinned(lattice, config)
            total += 1
            if not is_planar(graph):
                failures += 1
    elapsed = time.time() - t0
    _report(
        5,
        "thinned graphs planar",
        failures == 0 and total >= 600 and elapsed < 1800,
        f"{total - failures}/{total} planar, {elapsed:.0f}s",
    )


def test_criterion_6_thinning_statistics(planarity_samples):
    series = {"r0": {}, "r1": {}, "r0+r1": {}}
    for L, (lattice, samples) in planarity_samples.items():
        r0s, r1s = [], []
        for config in samples:
            _, stats = _thinned(lattice, config)
            r0s.append(stats.r0)
            r1s.append(stats.r1)
        series["r0"][L] = r0s
        series["r1"][L] = r1s
        series["r0+r1"][L] = [a + b for a, b in zip(r0s, r1s)]
    details = []
    ok = True
    for name, by_l in series.items():
        ls = sorted(by_l)
        means = np.array([np.mean(by_l[L]) for L in ls])
        errs = np.array([np.std(by_l[L], ddof=1) / math.sqrt(len(by_l[L])) for L in ls])
        # weighted least squares slope and its standard error
        x = np.array(ls, dtype=float)
        w = 1.0 / errs**2
        xbar = np.sum(w * x) / np.sum(w)
        slope = np.sum(w * (x - xbar) * means) / np.sum(w * (x - xbar) ** 2)
        slope_err = math.sqrt(1.0 / np.sum(w * (x - xbar) ** 2))
        details.append(f"{name}: slope={slope:.2e}+-{slope_err:.2e}")
        if abs(slope) > 2 * slope_err:
            ok = False
    _report(6, "r0, r1 size-independent", ok, "; ".join(details))


def test_criterion_7_spanning_growth():
    counts = {}
    for L, seed in ((20, 201), (60, 602)):
        lattice, samples = _chain(L, seed, 200)
        n = 0
        for config in samples:
            graph, _ = _thinned(lattice, config)
            if spans(graph, lattice):
                n += 1
        counts[L] = n / len(samples)
    p20, p60 = counts[20], counts[60]
    se = math.sqrt(p20 * (1 - p20) / 200 + p60 * (1 - p60) / 200)
    z = (p60 - p20) / se if se > 0 else float("inf")
    _report(
        7,
        "p_span grows with L at p_delete=0",
        z > 1.645,
        f"p_span(20)={p20:.3f}, p_span(60)={p60:.3f}, one-sided z={z:.2f}",
    )


def test_criterion_8_threshold_window(desk_curves):
    estimate = find_crossing(desk_curves)
    trials = min(pt[1] for c in desk_curves for pt in c.points)
    _report(
        8,
        "desk-scale crossing in [0.11, 0.17]",
        0.11 <= estimate.p_star <= 0.17 and trials >= 400,
        f"p_star={estimate.p_star:.4f} spread={estimate.spread:.4f} trials/point>={trials}",
    )


def test_pspan_monotone_in_p_delete(desk_curves):
    # module invariant: no increase beyond 2 sigma along the sweep
    violations = []
    for curve in desk_curves:
        for (p0, _, _, y0, e0), (p1, _, _, y1, e1) in zip(curve.points, curve.points[1:]):
            if y1 - y0 > 2.0 * math.hypot(e0, e1):
                violations.append((curve.L, p0, p1, y1 - y0))
    assert not violations, violations


@pytest.mark.skipif(
    not __import__("os").environ.get("AKLTMC_OVERNIGHT"),
    reason="overnight sizes enabled with AKLTMC_OVERNIGHT=1",
)
def test_criterion_8_overnight_band():
    curves = []
    for i, L in enumerate((120, 140)):
        lattice = build_lattice(L, L, "open")
        graphs = []
        for chain in range(3):
            _, samples = _chain(L, seed=9000 + 10 * i + chain, n_samples=100, burn_in=100)
            graphs.extend(_thinned(lattice, cfg)[0] for cfg in samples)
        curve = PercCurve(L=L)
        for j, p in enumerate(np.arange(0.08, 0.2049, 0.01)):
            rng = np.random.default_rng((888, i, j))
            curve.points.append(estimate_p_span(graphs, lattice, float(p), 10, rng))
        curves.append(curve)
    estimate = find_crossing(curves)
    band = max(estimate.spread, 0.01)
    _report(
        8,
        "overnight crossing contains 0.142(3)",
        abs(estimate.p_star - 0.142) <= band + 0.003,
        f"p_star={estimate.p_star:.4f} band={band:.4f}",
    )


def test_criterion_9_data_collapse(desk_curves):
    estimate = find_crossing(desk_curves)
    _, res_scaled, res_raw = collapse(desk_curves, estimate.p_star, 4.0 / 3.0)
    ok = res_scaled < res_raw / 2
    _report(
        9,
        "data collapse with nu=4/3",
        ok,
        f"residual {res_raw:.5f} -> {res_scaled:.5f} ({res_raw / max(res_scaled, 1e-12):.1f}x)",
    )


def test_criterion_10_domain_sizes(planarity_samples):
    samples_by_l = {L: samples for L, (_, samples) in planarity_samples.items()}
    lattices = {L: lattice for L, (lattice, _) in planarity_samples.items()}
    stats = largest_domain_stats(samples_by_l, lattices)
    growth = stats.per_l[64]["mean_max"] / stats.per_l[16]["mean_max"]
    axis_dev = max(
        abs(f - 1 / 3) for rec in stats.per_l.values() for f in rec["axis_fractions"]
    )
    # the exact per-site axis marginal is 1/3; the band covers the strongly
    # correlated sampling noise of the pooled axis fractions
    ok = stats.slope > 0 and growth < 3.0 and not stats.rejected and axis_dev < 0.02
    _report(
        10,
        "largest domain grows like log N",
        ok,
        f"slope={stats.slope:.3f}, R2={stats.r_squared:.3f}, growth(64/16)={growth:.2f}, "
        f"axis dev {axis_dev:.4f}",
    )


def test_criterion_11_deformation():
    lat12 = build_lattice(1, 2, "open")
    _, base, _ = enumerate_all(lat12)
    _, at_one, _ = enumerate_all(lat12, a=1.0)
    exact_at_one = np.array_equal(base, at_one)

    worst = 0.0
    for a in (0.8, 1.0, 1.3):
        configs, probs, _ = enumerate_all(lat12, a=a)
        results = [deformed_log_weight(lat12, c, a) for c in configs]
        ref = int(np.argmax(probs))
        for res, p in zip(results, probs):
            predicted = 2.0 ** (res.total_log2 - results[ref].total_log2)
            worst = max(worst, abs(p / probs[ref] - predicted) / predicted)

    # machinery validation: the sweep runs end to end and emits a trend report
    from akltmc.cli import main as cli_main

    out = pytest.importorskip("pathlib").Path("/tmp/akltmc_accept_deform")
    rc = cli_main(
        [
            "deform-sweep",
            "--a", "0.9,1.0,1.15",
            "--sizes", "12,16,20",
            "--p-min", "0.02",
            "--p-max", "0.30",
            "--p-step", "0.04",
            "--trials", "200",
            "--burn-in", "30",
            "--gap", "2",
            "--seed", "4242",
            "--out", str(out),
        ]
    )
    report = (out / "trend_report.txt").read_text() if rc == 0 else ""
    sweep_ok = rc == 0 and "trend of p_star(a)" in report
    _report(
        11,
        "deformation machinery",
        exact_at_one and worst < 1e-9 and sweep_ok,
        f"a=1 exact={exact_at_one}, worst ratio dev {worst:.2e}, sweep report ok={sweep_ok}",
    )
