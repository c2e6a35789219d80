"""Spanning paths, deletion sweeps, threshold crossing and data collapse.

Spanning is left to right: a path of alive vertices from a vertex whose
domain contains a site in column x = 0 to one containing a site in
column x = width - 1.  Vertex coordinates are the mean of the
constituent sites, but boundary membership uses the sites themselves so
an elongated domain touching the edge is never missed.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .domains import find_domains
from .lattice import Lattice
from .rewrite import SimpleGraph


@dataclass
class PercCurve:
    L: int
    # each point: (p_delete, trials, span_count, p_span, stderr)
    points: list = field(default_factory=list)

    def p_values(self):
        return [pt[0] for pt in self.points]

    def p_spans(self):
        return [pt[3] for pt in self.points]


@dataclass
class CrossingEstimate:
    p_star: float
    spread: float
    intersections: list  # (L_a, L_b, p_cross)


@dataclass
class DomainSizeStats:
    per_l: dict  # L -> {"mean_max": .., "max_max": .., "axis_fractions": (..,..,..)}
    slope: float  # mean largest size vs log N
    intercept: float
    r_squared: float
    rejected: list  # L values excluded as degenerate


class CrossingNotFound(RuntimeError):
    pass


def spans(graph: SimpleGraph, lattice: Lattice) -> bool:
    """Breadth-first search from the left boundary set to the right one."""
    width = lattice.width
    right = width - 1
    start = [
        v
        for v in range(graph.n)
        if graph.alive[v] and graph.origin[v] == "domain" and graph.min_x[v] == 0
    ]
    if not start:
        return False
    seen = set(start)
    queue = deque(start)
    while queue:
        v = queue.popleft()
        if graph.max_x[v] == right:
            return True
        for w in graph.adj[v]:
            if graph.alive[w] and w not in seen:
                seen.add(w)
                queue.append(w)
    return False


def delete_sites(graph: SimpleGraph, p_delete: float, rng: np.random.Generator) -> SimpleGraph:
    """Independently kill each alive vertex with probability p_delete (copy)."""
    if not 0.0 <= p_delete <= 1.0:
        raise ValueError("p_delete must lie in [0, 1]")
    out = graph.copy()
    kill = rng.random(out.n) < p_delete
    for v in range(out.n):
        if out.alive[v] and kill[v]:
            for w in out.adj[v]:
                out.adj[w].discard(v)
            out.adj[v] = set()
            out.alive[v] = False
    return out


def _spans_masked(graph: SimpleGraph, alive, lattice: Lattice) -> bool:
    width = lattice.width
    right = width - 1
    adj = graph.adj
    start = [
        v
        for v in range(graph.n)
        if alive[v] and graph.origin[v] == "domain" and graph.min_x[v] == 0
    ]
    if not start:
        return False
    seen = set(start)
    queue = deque(start)
    max_x = graph.max_x
    while queue:
        v = queue.popleft()
        if max_x[v] == right:
            return True
        for w in adj[v]:
            if alive[w] and w not in seen:
                seen.add(w)
                queue.append(w)
    return False


def estimate_p_span(
    graphs: list[SimpleGraph],
    lattice: Lattice,
    p_delete: float,
    trials_per_sample: int,
    rng: np.random.Generator,
    bootstrap: int = 200,
):
    """One percolation-curve point, averaging deletion and sample randomness.

    Deletion trials reuse each thinned sample; the standard error comes
    from a bootstrap over samples, which accounts for the reuse
    correlation (falls back to the binomial error for a single sample).
    """
    if not graphs:
        raise ValueError("need at least one sample graph")
    per_sample = []
    total_spans = 0
    for g in graphs:
        base_alive = np.array(g.alive, dtype=bool)
        count = 0
        for _ in range(trials_per_sample):
            if p_delete > 0.0:
                alive = base_alive & (rng.random(g.n) >= p_delete)
            else:
                alive = base_alive
            if _spans_masked(g, alive, lattice):
                count += 1
        per_sample.append(count / trials_per_sample)
        total_spans += count
    trials = len(graphs) * trials_per_sample
    p_span = total_spans / trials
    fractions = np.array(per_sample)
    if len(graphs) > 1:
        means = np.empty(bootstrap)
        for b in range(bootstrap):
            idx = rng.integers(0, len(fractions), size=len(fractions))
            means[b] = fractions[idx].mean()
        stderr = float(means.std(ddof=1))
    else:
        stderr = math.sqrt(max(p_span * (1 - p_span), 1e-12) / trials)
    return (p_delete, trials, total_spans, p_span, stderr)


def find_crossing(curves: list[PercCurve]) -> CrossingEstimate:
    """Pairwise intersections of linearly interpolated curves.

    The estimate is the median crossing abscissa; the spread is the half
    range.  Input order does not matter.
    """
    if len(curves) < 2:
        raise ValueError("need at least two curves")
    ordered = sorted(curves, key=lambda c: c.L)
    intersections = []
    for i, ca in enumerate(ordered):
        for cb in ordered[i + 1 :]:
            xs = sorted(set(ca.p_values()) & set(cb.p_values()))
            if len(xs) < 2:
                continue
            ya = np.interp(xs, ca.p_values(), ca.p_spans())
            yb = np.interp(xs, cb.p_values(), cb.p_spans())
            diff = ya - yb
            for k in range(len(xs) - 1):
                d0, d1 = diff[k], diff[k + 1]
                if d0 == 0.0:
                    intersections.append((ca.L, cb.L, xs[k]))
                elif d0 * d1 < 0.0:
                    t = d0 / (d0 - d1)
                    intersections.append((ca.L, cb.L, xs[k] + t * (xs[k + 1] - xs[k])))
    if not intersections:
        raise CrossingNotFound("no curve intersection inside the swept range")
    values = sorted(p for _, _, p in intersections)
    p_star = float(np.median(values))
    spread = (values[-1] - values[0]) / 2.0
    return CrossingEstimate(p_star=p_star, spread=spread, intersections=intersections)


def collapse(curves: list[PercCurve], p_star: float, nu: float, grid: int = 50):
    """Rescale abscissae by (p - p_star) L^(1/nu) and score the overlap.

    Returns (collapsed point sets, residual_collapsed, residual_unscaled)
    where each residual is the mean squared vertical distance between
    curve pairs interpolated over their common range.
    """
    if nu <= 0:
        raise ValueError("nu must be positive")
    collapsed = []
    for c in curves:
        scale = c.L ** (1.0 / nu)
        xs = [(p - p_star) * scale for p in c.p_values()]
        collapsed.append((c.L, xs, c.p_spans()))
    raw = [(c.L, c.p_values(), c.p_spans()) for c in curves]
    return collapsed, _pair_residual(collapsed, grid), _pair_residual(raw, grid)


def _pair_residual(point_sets, grid: int) -> float:
    residuals = []
    for i in range(len(point_sets)):
        for j in range(i + 1, len(point_sets)):
            _, xa, ya = point_sets[i]
            _, xb, yb = point_sets[j]
            lo = max(min(xa), min(xb))
            hi = min(max(xa), max(xb))
            if hi <= lo:
                continue
            xs = np.linspace(lo, hi, grid)
            fa = np.interp(xs, xa, ya)
            fb = np.interp(xs, xb, yb)
            residuals.append(float(np.mean((fa - fb) ** 2)))
    return float(np.mean(residuals)) if residuals else 0.0


def largest_domain_stats(samples_by_l: dict, lattices: dict) -> DomainSizeStats:
    """Largest-domain growth versus log N plus per-axis occupation.

    `samples_by_l` maps L to a list of configurations.  L values whose
    mean largest domain exceeds half the lattice (degenerate inputs) are
    excluded from the fit.
    """
    if len(samples_by_l) < 3:
        raise ValueError("need samples at three or more sizes")
    per_l = {}
    rejected = []
    xs, ys = [], []
    for L, configs in sorted(samples_by_l.items()):
        lattice = lattices[L]
        n = lattice.n_sites
        largest = []
        axis_counts = np.zeros(3)
        for config in configs:
            domains = find_domains(lattice, config)
            largest.append(
                max(len(d.sites) for d in domains if not d.is_boundary_partner)
            )
            for a in range(3):
                axis_counts[a] += int((config.axes == a).sum())
        mean_max = float(np.mean(largest))
        per_l[L] = {
            "mean_max": mean_max,
            "max_max": int(max(largest)),
            "axis_fractions": tuple(axis_counts / (len(configs) * n)),
        }
        if mean_max > n / 2:
            rejected.append(L)
        else:
            xs.append(math.log(n))
            ys.append(mean_max)
    if len(xs) >= 2:
        slope, intercept = np.polyfit(xs, ys, 1)
        pred = np.polyval([slope, intercept], xs)
        ss_res = float(np.sum((np.array(ys) - pred) ** 2))
        ss_tot = float(np.sum((np.array(ys) - np.mean(ys)) ** 2))
        r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    else:
        slope = intercept = r2 = float("nan")
    return DomainSizeStats(
        per_l=per_l,
        slope=float(slope),
        intercept=float(intercept),
        r_squared=r2,
        rejected=rejected,
    )
