"""Command-line driver: sampling, weights, thinning, percolation, oracle checks.

Every artifact is stamped with the seed and package version in a leading
comment line; identical invocations produce byte-identical files.  Exit
codes: 0 success, 1 usage error, 2 runtime failure, 3 oracle acceptance
failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .domains import build_domain_graph, classify_measured, find_domains
from .lattice import build_lattice
from .oracle import A_MAX, A_MIN
from .percolation import (
    CrossingNotFound,
    PercCurve,
    collapse,
    estimate_p_span,
    find_crossing,
    largest_domain_stats,
)
from .povm import parse_config, serialize_config
from .rewrite import simple_graph_from_domains, thin
from .sampler import ChainParams, run_chain
from .weights import deformed_log_weight, log_weight


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(1)


class UsageError(ValueError):
    pass


def _stamp(seed) -> str:
    return f"# akltmc {__version__} seed={seed}"


def _write_csv(path: Path, seed, header: str, rows) -> None:
    lines = [_stamp(seed), header]
    lines.extend(rows)
    path.write_text("\n".join(lines) + "\n")


def _read_config_text(source: str) -> str:
    if source == "-":
        return sys.stdin.read()
    return Path(source).read_text()


def _load_config(text: str, mode: str):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise UsageError("empty configuration grid")
    width = len(lines[0].split())
    height = len(lines)
    lattice = build_lattice(width, height, mode)
    return lattice, parse_config(text, lattice)


def _apply_config_file(args: argparse.Namespace, argv: list) -> None:
    if not getattr(args, "config", None):
        return
    path = Path(args.config)
    if not path.exists():
        raise UsageError(f"config file not found: {path}")
    defaults = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        defaults[key.replace("-", "_")] = value
    for key, value in defaults.items():
        if not hasattr(args, key):
            raise UsageError(f"{path}: unknown option {key!r}")
        if f"--{key.replace('_', '-')}" in argv or f"--{key}" in argv:
            continue  # explicit flags win
        current = getattr(args, key)
        if isinstance(current, bool):
            setattr(args, key, value.lower() in ("1", "true", "yes"))
        elif isinstance(current, int):
            setattr(args, key, int(value))
        elif isinstance(current, float):
            setattr(args, key, float(value))
        else:
            setattr(args, key, value)


# -- sample ---------------------------------------------------------------


def _cmd_sample(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params = ChainParams(
        width=args.size,
        height=args.size,
        boundary_mode=args.mode,
        seed=args.seed,
        burn_in_sweeps=args.burn_in,
        sweeps_between_samples=args.gap,
        sample_count=args.samples,
        deformation_a=args.deform_a,
    )
    samples, diag = run_chain(params)
    for i, config in enumerate(samples):
        (out / f"sample_{i:05d}.cfg").write_text(serialize_config(config) + "\n")
    rows = [
        f"{step},{acc:.8f},{k:.8f}" for step, acc, k in diag.rows
    ]
    _write_csv(out / "diagnostics.csv", args.seed, "step,acceptance_rate,k_fraction", rows)
    print(
        f"wrote {len(samples)} samples to {out} "
        f"(acceptance {diag.acceptance_rate:.3f}, mean K fraction {diag.mean_k_fraction:.4f})"
    )
    return 0


# -- weight ---------------------------------------------------------------


def _cmd_weight(args) -> int:
    lattice, config = _load_config(_read_config_text(args.input), args.mode)
    if args.deform_a != 1.0:
        result = deformed_log_weight(lattice, config, args.deform_a)
    else:
        result = log_weight(lattice, config)
    print("compatible\traw_edges\tn_vertices\tn_k_sites\tkernel_dim\tlog2_weight")
    log2 = ""
    if result.compatible:
        log2 = f"{result.log2_weight + result.deformation_log2_extra:g}"
    print(
        f"{int(result.compatible)}\t{result.raw_edges}\t{result.n_vertices}"
        f"\t{result.n_k_sites}\t{result.kernel_dim}\t{log2}"
    )
    return 0


# -- thin --------------------------------------------------------------------


def _cmd_thin(args) -> int:
    lattice, config = _load_config(_read_config_text(args.input), args.mode)
    graph = build_domain_graph(lattice, config, find_domains(lattice, config))
    labels = classify_measured(graph, config)
    simple = simple_graph_from_domains(graph, lattice)
    simple, stats = thin(simple, labels)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "domain_graph.txt").write_text(graph.to_edgelist() + "\n")
    lines = []
    for v in range(simple.n):
        if not simple.alive[v]:
            continue
        for w in simple.adj[v]:
            if v < w:
                lines.append(f"{v} {w}")
    (out / "thinned_edges.txt").write_text(
        "\n".join([f"# alive={stats.vertices_after}"] + lines) + "\n"
    )
    coord_rows = [
        f"{v},{simple.coords[v][0]:.6f},{simple.coords[v][1]:.6f}"
        for v in range(simple.n)
        if simple.alive[v]
    ]
    _write_csv(out / "coordinates.csv", "-", "vertex,x,y", coord_rows)
    _write_csv(
        out / "thin_stats.csv",
        "-",
        "r0,r1,vertices_before,vertices_after",
        [f"{stats.r0:.8f},{stats.r1:.8f},{stats.vertices_before},{stats.vertices_after}"],
    )
    print(f"thinned graph written to {out} (r0={stats.r0:.4f}, r1={stats.r1:.4f})")
    return 0


# -- percolate -----------------------------------------------------------------


def _thinned_graphs(task):
    size, mode, seed, burn_in, gap, n_samples, deform_a = task
    params = ChainParams(
        width=size,
        height=size,
        boundary_mode=mode,
        seed=seed,
        burn_in_sweeps=burn_in,
        sweeps_between_samples=gap,
        sample_count=n_samples,
        deformation_a=deform_a,
    )
    samples, _ = run_chain(params)
    lattice = build_lattice(size, size, mode)
    graphs = []
    configs = []
    for config in samples:
        graph = build_domain_graph(lattice, config, find_domains(lattice, config))
        simple = simple_graph_from_domains(graph, lattice)
        simple, _ = thin(simple, classify_measured(graph, config))
        graphs.append(simple)
        configs.append(config)
    return graphs, configs


def _chain_seed(master: int, *path: int) -> int:
    ss = np.random.SeedSequence((master, *path))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _percolation_curves(args, a_index: int = 0, deform_a: float = 1.0):
    sizes = [int(s) for s in args.sizes.split(",") if s]
    if not sizes:
        raise UsageError("no sizes given")
    p_grid = []
    p = args.p_min
    while p <= args.p_max + 1e-12:
        p_grid.append(round(p, 10))
        p += args.p_step
    if not p_grid:
        raise UsageError("empty p_delete grid")
    n_samples = max(1, args.trials // args.reuse)
    trials_per_sample = args.reuse

    tasks = [
        (size, "open", _chain_seed(args.seed, a_index, i), args.burn_in, args.gap, n_samples, deform_a)
        for i, size in enumerate(sizes)
    ]
    if args.threads > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            produced = list(pool.map(_thinned_graphs, tasks))
    else:
        produced = [_thinned_graphs(t) for t in tasks]

    curves = []
    configs_by_l = {}
    for i, size in enumerate(sizes):
        graphs, configs = produced[i]
        configs_by_l[size] = configs
        lattice = build_lattice(size, size, "open")
        curve = PercCurve(L=size)
        for j, p_delete in enumerate(p_grid):
            rng = np.random.default_rng(np.random.SeedSequence((args.seed, a_index, i, j)))
            curve.points.append(
                estimate_p_span(graphs, lattice, p_delete, trials_per_sample, rng)
            )
        curves.append(curve)
    return sizes, curves, configs_by_l


def _write_curves(out: Path, seed, curves) -> None:
    rows = []
    for curve in curves:
        for p_delete, trials, span_count, p_span, stderr in curve.points:
            rows.append(
                f"{curve.L},{p_delete:.6f},{trials},{span_count},{p_span:.8f},{stderr:.8f}"
            )
    _write_csv(out / "pspan_curves.csv", seed, "L,p_delete,trials,spans,p_span,stderr", rows)


_GNUPLOT_CURVES = """\
# gnuplot script: percolation curves (reads pspan_curves.csv)
set datafile separator ","
set key top right
set xlabel "p_delete"
set ylabel "p_span"
plot for [i=1:words(sizes)] "pspan_curves.csv" \\
    using (column(1)==word(sizes,i)+0 ? $2 : 1/0):5 \\
    with linespoints title sprintf("L=%s", word(sizes,i))
"""

_GNUPLOT_COLLAPSE = """\
# gnuplot script: data collapse (reads collapse.csv)
set datafile separator ","
set key top right
set xlabel "(p_delete - p_star) L^{1/nu}"
set ylabel "p_span"
plot for [i=1:words(sizes)] "collapse.csv" \\
    using (column(1)==word(sizes,i)+0 ? $2 : 1/0):3 \\
    with points title sprintf("L=%s", word(sizes,i))
"""


def _cmd_percolate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sizes, curves, _ = _percolation_curves(args)
    _write_curves(out, args.seed, curves)
    try:
        crossing = find_crossing(curves)
        cross_rows = [f"{crossing.p_star:.8f},{crossing.spread:.8f},{len(crossing.intersections)}"]
        pair_rows = [f"{a},{b},{p:.8f}" for a, b, p in crossing.intersections]
        message = f"crossing p* = {crossing.p_star:.4f} (spread {crossing.spread:.4f})"
    except CrossingNotFound:
        cross_rows = ["nan,nan,0"]
        pair_rows = []
        message = "no crossing found inside the swept range"
    _write_csv(out / "crossing.csv", args.seed, "p_star,spread,n_intersections", cross_rows)
    _write_csv(out / "crossing_pairs.csv", args.seed, "L_a,L_b,p_cross", pair_rows)
    script = f'sizes = "{" ".join(str(s) for s in sizes)}"\n' + _GNUPLOT_CURVES
    (out / "plot_curves.gp").write_text(script)
    print(message)
    print(f"artifacts written to {out}")
    return 0


def _cmd_collapse(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    curves_path = Path(args.curves)
    if not curves_path.exists():
        raise UsageError(f"curves CSV not found: {curves_path}")
    by_l: dict[int, PercCurve] = {}
    for line in curves_path.read_text().splitlines():
        if line.startswith("#") or line.startswith("L,"):
            continue
        l_str, p_str, trials, spancnt, pspan, stderr = line.split(",")
        curve = by_l.setdefault(int(l_str), PercCurve(L=int(l_str)))
        curve.points.append(
            (float(p_str), int(trials), int(spancnt), float(pspan), float(stderr))
        )
    curves = [by_l[k] for k in sorted(by_l)]
    if args.p_star is None:
        p_star = find_crossing(curves).p_star
    else:
        p_star = args.p_star
    collapsed, res_scaled, res_raw = collapse(curves, p_star, args.nu)
    rows = []
    for L, xs, ys in collapsed:
        for x, y in zip(xs, ys):
            rows.append(f"{L},{x:.8f},{y:.8f}")
    _write_csv(out / "collapse.csv", args.seed, "L,x_rescaled,p_span", rows)
    _write_csv(
        out / "collapse_residuals.csv",
        args.seed,
        "p_star,nu,residual_collapsed,residual_unscaled",
        [f"{p_star:.8f},{args.nu:.8f},{res_scaled:.10f},{res_raw:.10f}"],
    )
    script = f'sizes = "{" ".join(str(c.L) for c in curves)}"\n' + _GNUPLOT_COLLAPSE
    (out / "plot_collapse.gp").write_text(script)
    ratio = res_raw / res_scaled if res_scaled > 0 else math.inf
    print(f"residual reduced {ratio:.2f}x (p_star={p_star:.4f}, nu={args.nu:.4f})")
    return 0


def _cmd_deform_sweep(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    a_values = [float(v) for v in args.a.split(",") if v]
    if not a_values:
        raise UsageError("no deformation values given")
    for a in a_values:
        if not (A_MIN - 1e-9 <= a <= A_MAX + 1e-9):
            raise UsageError(f"deformation a={a} outside [{A_MIN:.4f}, {A_MAX:.4f}]")
    rows = []
    p_stars = []
    for k, a in enumerate(a_values):
        sizes, curves, configs_by_l = _percolation_curves(args, a_index=k, deform_a=a)
        try:
            crossing = find_crossing(curves)
            p_star, spread = crossing.p_star, crossing.spread
        except CrossingNotFound:
            p_star, spread = float("nan"), float("nan")
        lattices = {size: build_lattice(size, size, "open") for size in sizes}
        stats = largest_domain_stats(configs_by_l, lattices)
        rows.append(f"{a:.6f},{p_star:.8f},{spread:.8f},{stats.slope:.8f}")
        p_stars.append(p_star)
    _write_csv(out / "deform_sweep.csv", args.seed, "a,p_star,spread,max_domain_slope", rows)

    finite = [(a, p) for a, p in zip(a_values, p_stars) if not math.isnan(p)]
    trend = "undetermined"
    if len(finite) >= 2:
        diffs = [finite[i + 1][1] - finite[i][1] for i in range(len(finite) - 1)]
        if all(d >= 0 for d in diffs):
            trend = "non-decreasing"
        elif all(d <= 0 for d in diffs):
            trend = "non-increasing"
        else:
            trend = "mixed"
    report = [
        f"deformation sweep over a = {a_values}",
        f"p_star values: {[f'{p:.4f}' for p in p_stars]}",
        f"trend of p_star(a): {trend}",
    ]
    (out / "trend_report.txt").write_text("\n".join(report) + "\n")
    print("\n".join(report))
    return 0


def _cmd_oracle_check(args) -> int:
    from . import oraclechecks

    failures = oraclechecks.run_all(verbose=True)
    return 3 if failures else 0


def build_parser() -> _Parser:
    parser = _Parser(prog="akltmc", description=__doc__)
    parser.add_argument("--version", action="version", version=f"akltmc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="run a Metropolis chain and write sample grids")
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--mode", default="open", choices=("open", "torus"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--burn-in", type=int, default=50)
    p.add_argument("--gap", type=int, default=2)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--deform-a", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="key = value file; flags override")
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("weight", help="exact relative weight of a config grid")
    p.add_argument("input", help="grid file or - for stdin")
    p.add_argument("--mode", default="open", choices=("open", "torus"))
    p.add_argument("--deform-a", type=float, default=1.0)
    p.set_defaults(func=_cmd_weight)

    p = sub.add_parser("thin", help="thin a config grid to a planar graph")
    p.add_argument("input", help="grid file or - for stdin")
    p.add_argument("--mode", default="open", choices=("open", "torus"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_thin)

    def _perc_common(p):
        p.add_argument("--sizes", default="40,60,80")
        p.add_argument("--p-min", type=float, default=0.08)
        p.add_argument("--p-max", type=float, default=0.20)
        p.add_argument("--p-step", type=float, default=0.01)
        p.add_argument("--trials", type=int, default=400)
        p.add_argument("--reuse", type=int, default=10, help="deletion trials per sample")
        p.add_argument("--burn-in", type=int, default=50)
        p.add_argument("--gap", type=int, default=2)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--out", required=True)
        p.add_argument("--config", help="key = value file; flags override")

    p = sub.add_parser("percolate", help="p_span curves, crossing estimate, plot script")
    _perc_common(p)
    p.set_defaults(func=_cmd_percolate)

    p = sub.add_parser("collapse", help="finite-size-scaling collapse of existing curves")
    p.add_argument("--curves", required=True, help="pspan_curves.csv from percolate")
    p.add_argument("--p-star", type=float, default=None)
    p.add_argument("--nu", type=float, default=4.0 / 3.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_collapse)

    p = sub.add_parser("deform-sweep", help="percolation pipeline over a deformation grid")
    p.add_argument("--a", default="0.85,1.0,1.15")
    _perc_common(p)
    p.set_defaults(func=_cmd_deform_sweep)

    p = sub.add_parser("oracle-check", help="run the exhaustive oracle acceptance suite")
    p.set_defaults(func=_cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config_file(args, argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
