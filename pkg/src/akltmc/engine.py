"""Incremental weight state for the Metropolis chain.

Recomputing domains, the domain graph and the GF(2) kernel from scratch
for every proposal is the correctness baseline but far too slow inside
the sampling loop.  This engine maintains the weight-formula terms under
single-site updates with work proportional to the size of the touched
neighbourhood:

* domain surgery: an axis change removes the site from its domain (which
  may split into fragments) and merges it with the same-axis neighbour
  domains; all affected domains are small.
* the inter-domain edge count is recounted only over edges incident to
  the touched sites.
* dim ker H changes are localized to the interaction components of the
  all-K columns near the touched region.  Two columns interact when they
  share a matrix row; components are closed under that relation, and the
  seeding is identical before and after a mutation, so unaffected
  components cancel in the difference.  Any column whose domain has a
  boundary leg is pinned to zero by the leg's partner row and can never
  enter a kernel vector.

Per-domain neighbourhood data (odd-multiplicity neighbours, leg count,
self-loop parity, generator phase) is a pure function of the domain
structure, independent of the F/K kinds, and is cached across proposals.
An axis change invalidates only the domains adjacent to the touched
sites; rejected proposals restore the previous cache entries.

Every result is required to be identical to a full recomputation via
`akltmc.weights.log_weight`; the test suite drives random move sequences
to enforce that contract.
"""

from __future__ import annotations

import math

import numpy as np

from .lattice import Lattice, sublattice_sign
from .oracle import deformed_fz_log2_factor
from .povm import AXIS_X, AXIS_Y, AXIS_Z, KIND_K, PovmConfig

#: per domain axis: the crossing axis whose edge parity makes a self-loop
_LOOP_AXIS = {AXIS_X: AXIS_Y, AXIS_Y: AXIS_X, AXIS_Z: AXIS_Y}

#: component closures larger than this fall back to a global recompute
_REGION_CAP = 128

_MISSING = object()


class _Dom:
    __slots__ = ("sites", "axis", "n_k")

    def __init__(self, sites: set, axis: int, n_k: int):
        self.sites = sites
        self.axis = axis
        self.n_k = n_k

    @property
    def all_k(self) -> bool:
        return self.n_k == len(self.sites)


class ChainEngine:
    """Mutable configuration with incrementally maintained weight terms."""

    def __init__(self, lattice: Lattice, config: PovmConfig, a: float = 1.0):
        self.lattice = lattice
        self.nbrs = lattice.neighbors
        n = lattice.n_sites
        self.legs_count = [0] * n
        for s, _ in lattice.boundary_legs:
            self.legs_count[s] += 1
        self.n_legs = len(lattice.boundary_legs)
        self.lam_neg = [sublattice_sign(lattice, s) == -1 for s in range(n)]

        self.axes = [int(v) for v in config.axes]
        self.kinds = [int(v) for v in config.kinds]
        self.a = a
        self.log2_factor = deformed_fz_log2_factor(a)

        self.dom_id = [0] * n
        self.domains: dict[int, _Dom] = {}
        self.next_id = 0
        seen = [False] * n
        for s in range(n):
            if seen[s]:
                continue
            comp, stack = {s}, [s]
            seen[s] = True
            while stack:
                u = stack.pop()
                for v in self.nbrs[u]:
                    if not seen[v] and self.axes[v] == self.axes[s]:
                        seen[v] = True
                        comp.add(v)
                        stack.append(v)
            did = self._new_id()
            self.domains[did] = _Dom(comp, self.axes[s], sum(self.kinds[u] for u in comp))
            for u in comp:
                self.dom_id[u] = did

        self.allk = {d for d, rec in self.domains.items() if rec.all_k}
        self.n_k_total = sum(self.kinds)
        self.n_fz = sum(
            1 for s in range(n) if self.kinds[s] == 0 and self.axes[s] == AXIS_Z
        )
        self.inter_edges = 0
        for u, _, v, _ in lattice.edges:
            if self.dom_id[u] != self.dom_id[v]:
                self.inter_edges += 1

        self._cache: dict[int, tuple] = {}
        self._cache_log: dict | None = None

        self.dim_ker, compatible = self._global_kernel()
        if not compatible:
            raise ValueError("initial configuration is incompatible (zero weight)")
        if math.isinf(self.log2_factor) and self.n_fz > 0:
            raise ValueError("initial configuration has zero deformed weight")
        self._pending = None

    # -- public weight terms ------------------------------------------------

    @property
    def raw_edges(self) -> int:
        return self.inter_edges + self.n_legs

    @property
    def n_vertices(self) -> int:
        return len(self.domains) + self.n_legs

    @property
    def log2_weight(self) -> int:
        return -(self.raw_edges - self.n_vertices + 2 * self.n_k_total - self.dim_ker)

    @property
    def deformation_log2_extra(self) -> float:
        if self.n_fz == 0:
            return 0.0
        return self.n_fz * self.log2_factor

    @property
    def total_log2(self) -> float:
        return self.log2_weight + self.deformation_log2_extra

    def config(self) -> PovmConfig:
        return PovmConfig(
            self.lattice,
            np.array(self.kinds, dtype=np.uint8),
            np.array(self.axes, dtype=np.uint8),
        )

    # -- proposals ------------------------------------------------------------

    def propose(self, site: int, kind: int, axis: int):
        """Mutate to the proposed outcome; return the total log2 weight change.

        Returns None when the proposal has zero weight.  Exactly one of
        `accept` / `reject` must follow.
        """
        assert self._pending is None, "previous proposal not finalized"
        old_lw = self.log2_weight
        old_fz = self.n_fz
        if axis == self.axes[site]:
            undo, ok = self._apply_kind_flip(site, kind)
        else:
            undo, ok = self._apply_axis_change(site, kind, axis)
        self._pending = undo
        return self._delta(ok, old_lw, old_fz)

    def propose_domain_flip(self, did: int):
        """Flip the F/K kind of every site in one domain (axis unchanged)."""
        assert self._pending is None
        old_lw = self.log2_weight
        old_fz = self.n_fz
        undo, ok = self._apply_domain_flip(did)
        self._pending = undo
        return self._delta(ok, old_lw, old_fz)

    def _delta(self, ok: bool, old_lw: int, old_fz: int):
        if not ok:
            return None
        if math.isinf(self.log2_factor):
            if self.n_fz > 0:
                return None
            return float(self.log2_weight - old_lw)
        return (self.log2_weight - old_lw) + (self.n_fz - old_fz) * self.log2_factor

    def accept(self) -> None:
        self._pending = None

    def reject(self) -> None:
        undo = self._pending
        assert undo is not None
        self._pending = None
        for s, did in undo["dom_id"].items():
            self.dom_id[s] = did
        for did in undo["added"]:
            del self.domains[did]
        self.domains.update(undo["removed"])
        self.allk -= undo["allk_added"]
        self.allk |= undo["allk_removed"]
        for s, k in undo["kinds"].items():
            self.kinds[s] = k
        for s, ax in undo["axes"].items():
            self.axes[s] = ax
        for did, nk in undo["n_k"].items():
            self.domains[did].n_k = nk
        for key, val in undo["cache"].items():
            if val is _MISSING:
                self._cache.pop(key, None)
            else:
                self._cache[key] = val
        (
            self.inter_edges,
            self.n_k_total,
            self.n_fz,
            self.dim_ker,
            self.next_id,
        ) = undo["scalars"]

    # -- mutations ------------------------------------------------------------

    def _new_id(self) -> int:
        did = self.next_id
        self.next_id += 1
        return did

    def _blank_undo(self) -> dict:
        return {
            "dom_id": {},
            "added": [],
            "removed": {},
            "allk_added": set(),
            "allk_removed": set(),
            "kinds": {},
            "axes": {},
            "n_k": {},
            "cache": {},
            "base_old": frozenset(),
            "scalars": (
                self.inter_edges,
                self.n_k_total,
                self.n_fz,
                self.dim_ker,
                self.next_id,
            ),
        }

    def _set_allk(self, did: int, undo: dict) -> None:
        rec = self.domains[did]
        if rec.all_k and did not in self.allk:
            self.allk.add(did)
            undo["allk_added"].add(did)
        elif not rec.all_k and did in self.allk:
            self.allk.discard(did)
            undo["allk_removed"].add(did)

    def _apply_kind_flip(self, site: int, kind: int):
        # domain structure is untouched: no cache invalidation needed
        undo = self._blank_undo()
        did = self.dom_id[site]
        dom = self.domains[did]
        delta = kind - self.kinds[site]
        # H changes only when the domain enters or leaves the all-K column set
        toggles = (dom.n_k + delta == len(dom.sites)) != (dom.n_k == len(dom.sites))

        undo["kinds"][site] = self.kinds[site]
        undo["n_k"][did] = dom.n_k
        self.kinds[site] = kind
        self.n_k_total += delta
        dom.n_k += delta
        if self.axes[site] == AXIS_Z:
            self.n_fz -= delta
        if not toggles:
            return undo, True
        self._set_allk(did, undo)
        return undo, self._kernel_update({did}, {did}, undo)

    def _apply_domain_flip(self, did: int):
        undo = self._blank_undo()
        dom = self.domains[did]
        size = len(dom.sites)
        toggles = dom.n_k == size or dom.n_k == 0

        flipped = 0
        undo["n_k"][did] = dom.n_k
        for s in dom.sites:
            undo["kinds"][s] = self.kinds[s]
            self.kinds[s] ^= 1
            flipped += 1 if self.kinds[s] == KIND_K else -1
        self.n_k_total += flipped
        if dom.axis == AXIS_Z:
            self.n_fz -= flipped
        dom.n_k = size - undo["n_k"][did]
        if not toggles:
            return undo, True
        self._set_allk(did, undo)
        return undo, self._kernel_update({did}, {did}, undo)

    def _apply_axis_change(self, site: int, kind: int, axis: int):
        undo = self._blank_undo()
        old_did = self.dom_id[site]
        old_dom = self.domains[old_did]
        merge_ids = sorted(
            {self.dom_id[v] for v in self.nbrs[site] if self.axes[v] == axis}
        )
        w_sites = set(old_dom.sites)
        w_sites.add(site)
        for mid in merge_ids:
            w_sites |= self.domains[mid].sites
        ball = self._ball1(w_sites)
        base_old = {self.dom_id[u] for u in ball}
        seeds_old = base_old & self.allk
        undo["base_old"] = base_old

        inter_before = self._count_inter(w_sites)

        # neighbourhood data of every domain near the ball becomes stale
        cache_undo = undo["cache"]
        for x in base_old:
            if x in self._cache and x not in cache_undo:
                cache_undo[x] = self._cache.pop(x)

        # record per-site state
        undo["kinds"][site] = self.kinds[site]
        undo["axes"][site] = self.axes[site]
        if self.axes[site] == AXIS_Z and self.kinds[site] == 0:
            self.n_fz -= 1
        if axis == AXIS_Z and kind == 0:
            self.n_fz += 1
        self.n_k_total += kind - self.kinds[site]
        self.kinds[site] = kind
        self.axes[site] = axis

        # dissolve the old domain into fragments
        undo["removed"][old_did] = old_dom
        if old_did in self.allk:
            self.allk.discard(old_did)
            undo["allk_removed"].add(old_did)
        del self.domains[old_did]
        rest = set(old_dom.sites)
        rest.discard(site)
        while rest:
            start = min(rest)
            comp, stack = {start}, [start]
            rest.discard(start)
            while stack:
                u = stack.pop()
                for v in self.nbrs[u]:
                    if v in rest:
                        rest.discard(v)
                        comp.add(v)
                        stack.append(v)
            fid = self._new_id()
            frag = _Dom(comp, old_dom.axis, sum(self.kinds[u] for u in comp))
            self.domains[fid] = frag
            undo["added"].append(fid)
            for u in comp:
                undo["dom_id"].setdefault(u, self.dom_id[u])
                self.dom_id[u] = fid
            self._set_allk(fid, undo)

        # merge the site with its new-axis neighbours
        merged_sites = {site}
        for mid in merge_ids:
            rec = self.domains[mid]
            undo["removed"][mid] = rec
            if mid in self.allk:
                self.allk.discard(mid)
                undo["allk_removed"].add(mid)
            del self.domains[mid]
            merged_sites |= rec.sites
        nid = self._new_id()
        self.domains[nid] = _Dom(
            merged_sites, axis, sum(self.kinds[u] for u in merged_sites)
        )
        undo["added"].append(nid)
        for u in merged_sites:
            undo["dom_id"].setdefault(u, self.dom_id[u])
            self.dom_id[u] = nid
        self._set_allk(nid, undo)

        inter_after = self._count_inter(w_sites)
        self.inter_edges += inter_after - inter_before

        seeds_new = {self.dom_id[u] for u in ball} & self.allk
        # log cache writes made while evaluating the mutated structure
        self._cache_log = cache_undo
        ok = self._kernel_update(seeds_old, seeds_new, undo)
        self._cache_log = None
        return undo, ok

    # -- local counting ---------------------------------------------------------

    def _ball1(self, sites: set) -> set:
        out = set(sites)
        for u in sites:
            out.update(self.nbrs[u])
        return out

    def _count_inter(self, w_sites: set) -> int:
        c = 0
        dom_id, nbrs = self.dom_id, self.nbrs
        for u in w_sites:
            du = dom_id[u]
            for v in nbrs[u]:
                if v in w_sites and v > u:
                    continue
                if dom_id[v] != du:
                    c += 1
        return c

    # -- kernel bookkeeping -------------------------------------------------------

    def _dom_data(self, did: int):
        """(odd-multiplicity neighbour set, leg count, self-loop, generator phase)."""
        hit = self._cache.get(did)
        if hit is not None:
            return hit
        dom = self.domains[did]
        target = _LOOP_AXIS[dom.axis]
        cnt: dict[int, int] = {}
        legs = 0
        e_int = 0
        n_cross = 0
        n_neq = 0
        lam_far = 0
        lam_near = 0
        dom_id, nbrs, axes = self.dom_id, self.nbrs, self.axes
        for s in dom.sites:
            legs += self.legs_count[s]
            s_neg = self.lam_neg[s]
            for v in nbrs[s]:
                dv = dom_id[v]
                if dv == did:
                    e_int += 1
                    continue
                n_cross += 1
                cnt[dv] = cnt.get(dv, 0) + 1
                if self.lam_neg[v]:
                    lam_far += 1
                if axes[v] == target:
                    n_neq += 1
                    if s_neg:
                        lam_near += 1
        e_int //= 2
        n_cross += legs
        phase = 2 * (e_int + n_cross) + 2 * lam_far + 2 * lam_near + n_neq
        if (n_neq & 1) and dom.axis == AXIS_X:
            phase += 2
        odd = frozenset(k for k, m in cnt.items() if m & 1)
        data = (odd, legs, bool(n_neq & 1), phase % 4)
        log = self._cache_log
        if log is not None and did not in log:
            log[did] = self._cache.get(did, _MISSING)
        self._cache[did] = data
        return data

    def _new_data(self, did: int):
        """Current-structure data, None for domains that no longer exist."""
        if did not in self.domains:
            return None
        return self._cache.get(did) or self._dom_data(did)

    def _old_data(self, did: int, undo: dict, memo: dict):
        """Pre-mutation data, None for domains created by the mutation."""
        if did in memo:
            return memo[did]
        if did in undo["removed"]:
            exists_old = True
        elif did in self.domains:
            exists_old = did not in set(undo["added"])
        else:
            exists_old = False
        if not exists_old:
            memo[did] = None
            return None
        val = undo["cache"].get(did, _MISSING)
        if val is not _MISSING and val is not None:
            memo[did] = val
            return val
        if did in undo["base_old"] or did in undo["removed"]:
            data = self._overlay_dom_data(did, undo)
        else:
            # untouched domain: current data is also the old data
            data = self._cache.get(did) or self._dom_data(did)
        memo[did] = data
        return data

    def _overlay_dom_data(self, did: int, undo: dict):
        """Recompute pre-mutation neighbourhood data through the undo overlay."""
        dom = undo["removed"].get(did) or self.domains[did]
        target = _LOOP_AXIS[dom.axis]
        old_dom_id = undo["dom_id"]
        old_axes = undo["axes"]
        cnt: dict[int, int] = {}
        legs = 0
        e_int = 0
        n_cross = 0
        n_neq = 0
        lam_far = 0
        lam_near = 0
        for s in dom.sites:
            legs += self.legs_count[s]
            s_neg = self.lam_neg[s]
            for v in self.nbrs[s]:
                dv = old_dom_id.get(v)
                if dv is None:
                    dv = self.dom_id[v]
                if dv == did:
                    e_int += 1
                    continue
                n_cross += 1
                cnt[dv] = cnt.get(dv, 0) + 1
                if self.lam_neg[v]:
                    lam_far += 1
                ax = old_axes.get(v)
                if ax is None:
                    ax = self.axes[v]
                if ax == target:
                    n_neq += 1
                    if s_neg:
                        lam_near += 1
        e_int //= 2
        n_cross += legs
        phase = 2 * (e_int + n_cross) + 2 * lam_far + 2 * lam_near + n_neq
        if (n_neq & 1) and dom.axis == AXIS_X:
            phase += 2
        odd = frozenset(k for k, m in cnt.items() if m & 1)
        return (odd, legs, bool(n_neq & 1), phase % 4)

    def _kernel_update(self, seeds_old: set, seeds_new: set, undo: dict) -> bool:
        """Fold the kernel change of a finished mutation into dim_ker.

        Seeds are the all-K columns in the touched neighbourhood, taken in
        the pre- and post-mutation structure.  The region is closed under
        shared-row reachability in the union of both structures, so every
        changed interaction component is fully enumerated on both sides
        and untouched components cancel in the difference.
        """
        seeds = seeds_old | seeds_new
        if not seeds:
            return True
        allk_old = (self.allk - undo["allk_added"]) | undo["allk_removed"]
        dirty = set(undo["base_old"])
        dirty.update(undo["removed"])
        dirty.update(undo["added"])
        memo: dict = {}
        region = self._union_closure(seeds, undo, allk_old, dirty, memo)
        if region is None:
            total, ok = self._global_kernel()
            self.dim_ker = total
            return ok
        cols_old = sorted(region & allk_old)
        cols_new = sorted(region & self.allk)
        k_before = self._kernel_dim(cols_old, undo, memo, old=True, check_signs=False)[0]
        k_after, ok = self._kernel_dim(cols_new, undo, memo, old=False, check_signs=True)
        self.dim_ker += k_after - k_before
        return ok

    def _union_closure(self, seeds, undo: dict, allk_old: set, dirty: set, memo: dict):
        """Columns reachable from the seeds through shared rows, either structure.

        Domains outside the dirty set have identical data in both
        structures and are only looked up once.
        """
        both_allk = self.allk | allk_old
        region = set(seeds)
        stack = list(seeds)
        while stack:
            nu = stack.pop()
            rows = set()
            if nu in dirty:
                sides = (self._new_data(nu), self._old_data(nu, undo, memo))
            else:
                sides = (self._new_data(nu),)
            for data in sides:
                if data is not None:
                    rows |= data[0]
                    if data[2]:
                        rows.add(nu)
            for w in rows:
                cands = set()
                if w in dirty:
                    wn = self._new_data(w)
                    if wn is not None:
                        cands |= wn[0] & self.allk
                        if wn[2] and w in self.allk:
                            cands.add(w)
                    wo = self._old_data(w, undo, memo)
                    if wo is not None:
                        cands |= wo[0] & allk_old
                        if wo[2] and w in allk_old:
                            cands.add(w)
                else:
                    wn = self._new_data(w)
                    cands = set(wn[0] & both_allk)
                    if wn[2] and w in both_allk:
                        cands.add(w)
                for c in cands:
                    if c not in region:
                        region.add(c)
                        stack.append(c)
                        if len(region) > _REGION_CAP:
                            return None
        return region

    def _kernel_dim(self, cols: list[int], undo, memo, old: bool, check_signs: bool):
        """dim ker of H restricted to the given columns, plus the sign check.

        The columns must be a union of complete interaction components of
        the chosen structure, so the dimension is the sum over components.
        """
        if not cols:
            return 0, True
        rowmask: dict = {}
        datas = []
        for j, nu in enumerate(cols):
            data = self._old_data(nu, undo, memo) if old else self._new_data(nu)
            datas.append(data)
            odd, legs, loop, _ = data
            bit = 1 << j
            for w in odd:
                rowmask[w] = rowmask.get(w, 0) | bit
            if loop:
                rowmask[nu] = rowmask.get(nu, 0) | bit
            if legs:
                rowmask[("leg", nu)] = rowmask.get(("leg", nu), 0) | bit
        pivot_rows: list[tuple[int, int]] = []
        for row in rowmask.values():
            for pc, pr in pivot_rows:
                if (row >> pc) & 1:
                    row ^= pr
            if row:
                pc = row.bit_length() - 1
                pivot_rows = [
                    (c, (r ^ row) if (r >> pc) & 1 else r) for c, r in pivot_rows
                ]
                pivot_rows.append((pc, row))
        pivot_cols = {c for c, _ in pivot_rows}
        dim = len(cols) - len(pivot_rows)
        if dim == 0 or not check_signs:
            return dim, True
        for free in range(len(cols)):
            if free in pivot_cols:
                continue
            vec = 1 << free
            for pc, pr in pivot_rows:
                if (pr >> free) & 1:
                    vec |= 1 << pc
            idxs = [j for j in range(len(cols)) if (vec >> j) & 1]
            if not self._sign_ok([cols[j] for j in idxs], [datas[j] for j in idxs]):
                return dim, False
        return dim, True

    def _sign_ok(self, support: list[int], datas: list[tuple]) -> bool:
        phase_tot = 0
        z_acc: set = set()
        n_sites = 0
        for nu, (odd, legs, loop, phase) in zip(support, datas):
            assert legs == 0
            if nu in z_acc:
                phase_tot += 2
            phase_tot += phase
            z_acc ^= odd
            if loop:
                z_acc ^= {nu}
            n_sites += len(self.domains[nu].sites)
        assert not z_acc and phase_tot % 2 == 0
        s_p = 1 if phase_tot % 4 == 0 else -1
        s_o = -1 if n_sites % 2 else 1
        return s_p == s_o

    def _global_kernel(self):
        """Exact dim ker H and sign compatibility from the full structure."""
        region: set = set()
        total = 0
        ok = True
        no_undo = {
            "removed": {},
            "added": [],
            "cache": {},
            "base_old": frozenset(),
            "dom_id": {},
            "axes": {},
        }
        memo: dict = {}
        for seed in sorted(self.allk):
            if seed in region:
                continue
            comp = self._current_component(seed)
            region |= comp
            cols = sorted(comp)
            dim, comp_ok = self._kernel_dim(cols, no_undo, memo, old=False, check_signs=True)
            total += dim
            ok = ok and comp_ok
        return total, ok

    def _current_component(self, seed: int):
        """Component closure in the current structure only (no size cap)."""
        comp = {seed}
        stack = [seed]
        allk = self.allk
        while stack:
            nu = stack.pop()
            odd, _, loop, _ = self._new_data(nu)
            rows = set(odd)
            if loop:
                rows.add(nu)
            for w in rows:
                wdata = self._new_data(w)
                candidates = wdata[0] & allk
                if wdata[2] and w in allk:
                    candidates = candidates | {w}
                for c in candidates:
                    if c not in comp:
                        comp.add(c)
                        stack.append(c)
        return comp
