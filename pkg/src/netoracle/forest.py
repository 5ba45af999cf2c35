"""Backup oracle over a forest of parallel trees with per-level dominant nodes.

Every hierarchy node at an even level ``j`` appears in every tree.  Within one
tree some nodes are *dominant*: dominant nodes sharing a level are more than
``2*5^j`` apart, and each node is dominant in exactly one tree (the first one
whose level has no dominant node that close).  A node's parent two levels up
is the dominant node covering it in that tree, when there is one, and the
closest covering node otherwise.  Parents are fixed when a node is created,
so every root path is immutable and stored once per point.

Each node records its default parent, and a per-tree parent wherever the
dominance rule picks a different one.  A tree created after a point was
inserted sees that point's default parents, since no dominant node of that
tree existed then.  For queries the root path of every point's lowest node is
cached as a tuple of points indexed by ``(level - base) // 2``, ending at the
root point, which is implicitly repeated above; only paths that differ from
the default are stored per tree.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

import numpy as np

from .counters import NULL
from .errors import InvariantError
from .scale import level_containing, log5, radius


@dataclass(frozen=True)
class ForestAnswer:
    estimate: float
    lca_level_min: int
    tree: int
    level: int
    pair: tuple
    fallback: bool


def lemma_c_window(j, c):
    """c-neighbor levels compatible with a minimum LCA level ``j`` (``i`` in ``[j-1, j+2]``)."""
    lo = math.ceil(j - 2 - log5(c + 1.6))
    hi = math.ceil(j + 2 - log5(c - 1.6))
    return lo, hi


class DominantForest:
    def __init__(self, hierarchy, lam=2.0, counter=NULL, cap=None):
        self.h = hierarchy
        self.lam = float(lam)
        self.cap = cap if cap is not None else 4 ** math.ceil(self.lam) + 8
        self.counter = counter
        self.diagnostics = []
        self._build()
        hierarchy.subscribe(self._on_event)

    # -- construction -------------------------------------------------------------

    def _build(self):
        h = self.h
        self.base = 2 * math.floor((h.i_min - 2) / 2)
        self.seq = {}
        self.dom = {}
        self.default = {}
        self.paths = [{}]
        self.tpar = [{}]
        self.defpar = {}
        self.born = [0]
        self.root = h.root
        for p in h.order:
            self._insert(p)

    def _on_event(self, kind, payload):
        if kind == "rebuild":
            self._build()
        elif kind == "insert":
            if self.h.i_min < self.base + 2:
                self._build()
            else:
                self._insert(payload.point)

    @property
    def n_trees(self):
        return len(self.paths)

    def _dom_of(self, q, j):
        if q == self.root:
            return 0
        return self.dom[(q, j)]

    def _new_tree(self, at):
        self.paths.append({})
        self.tpar.append({})
        self.born.append(at)
        if len(self.paths) > self.cap:
            self.diagnostics.append(f"forest size {len(self.paths)} exceeds cap {self.cap}")

    def path(self, h, p):
        return self.paths[h].get(p) or self.default[p]

    def _insert(self, p):
        h = self.h
        k = len(self.seq)
        self.seq[p] = k
        if p == h.root:
            self.root = p
            self.default[p] = (p,)
            return
        top = h.top[p]
        seq = self.seq
        nb = [(d, q) for q, d in h.nbrs[p].items() if seq.get(q, k) < k]
        nb.sort()
        nd = [d for d, _ in nb]
        nq = [q for _, q in nb]
        tops = h.top
        base = self.base
        jt = top if (top - base) % 2 == 0 else top - 1
        levels = range(base, jt + 1, 2)

        # dominance, top-down so each node sees the choices of earlier points only
        for j in levels:
            lim = 2.0 * radius(j)
            blocked = set()
            for t in range(bisect.bisect_right(nd, lim)):
                q = nq[t]
                if tops[q] >= j:
                    blocked.add(self._dom_of(q, j))
            tree = 0
            while tree in blocked:
                tree += 1
            if tree == len(self.paths):
                self._new_tree(k)
            self.dom[(p, j)] = tree
            self.counter.add("forest_ops", len(blocked) + 1)

        # covering candidates two levels up
        cover = []
        for j in levels:
            up = j + 2
            lim = radius(up)
            if up <= top:
                cands = [(0.0, p)]
                for t in range(bisect.bisect_right(nd, lim)):
                    q = nq[t]
                    if tops[q] >= up:
                        cands.append((nd[t], q))
            else:
                a = h.ancestor_point(p, up)
                cands = [(h.space.dist(p, a), a)]
                reach = 1.25 * lim
                for q, da in h.nbrs[a].items():
                    if q != a and da <= reach and tops[q] >= up and seq.get(q, k) < k:
                        dq = h.space.dist(p, q)
                        if dq <= lim:
                            cands.append((dq, q))
            default = min(cands)[1]
            domcov = {}
            for _, q in cands:
                domcov.setdefault(self._dom_of(q, up), q)
            cover.append((default, domcov))
            self.counter.add("forest_ops", len(cands))

        jl = base
        for default, domcov in cover:
            self.defpar[(p, jl)] = default
            for tree, q in domcov.items():
                if q != default and self.born[tree] <= k:
                    self.tpar[tree][(p, jl)] = q
            jl += 2
        self.default[p] = self._walk(None, p, base)
        for tree in range(len(self.paths)):
            if self.born[tree] > k:
                continue
            path = self._walk(tree, p, base)
            if path != self.default[p]:
                self.paths[tree][p] = path

    def parent(self, tree, p, j):
        """Parent point at level ``j + 2`` of node ``(p, j)``."""
        if p == self.root:
            return p
        if tree is not None:
            q = self.tpar[tree].get((p, j))
            if q is not None:
                return q
        return self.defpar[(p, j)]

    def _walk(self, tree, p, j):
        """Points on the root path of node ``(p, j)``, stopping at the root."""
        out = []
        root = self.root
        while p != root:
            out.append(p)
            p = self.parent(tree, p, j)
            j += 2
        out.append(root)
        return tuple(out)

    # -- queries ----------------------------------------------------------------

    def _at(self, path, k):
        return path[k] if k < len(path) else self.root

    def lca_level(self, tree, x, y):
        """Level of the lowest common ancestor of ``x`` and ``y`` in one tree."""
        px = self.path(tree, x)
        py = self.path(tree, y)
        lo, hi = 0, max(len(px), len(py))
        while lo < hi:
            mid = (lo + hi) // 2
            self.counter.add("forest_lca_probes", 1)
            if self._at(px, mid) == self._at(py, mid):
                hi = mid
            else:
                lo = mid + 1
        return self.base + 2 * lo

    def forest_query(self, x, y):
        h = self.h
        h.check_query_point(x)
        h.check_query_point(y)
        if x == y:
            return ForestAnswer(0.0, self.base, 0, self.base, (x, x), False)
        best, tree = None, 0
        for t in range(len(self.paths)):
            j = self.lca_level(t, x, y)
            if best is None or j < best:
                best, tree = j, t
        lo, hi = lemma_c_window(best, h.c)
        lim = h.c * radius(lo)
        found = None
        for m in range(lo, hi + 1):
            a = h.ancestor_point(x, m)
            b = h.ancestor_point(y, m)
            self.counter.add("forest_scan", 1)
            d = h.nbrs[a].get(b)
            if a != b and d is not None and d <= lim:
                found = (a, b, m, d)
                break
            lim *= 5.0
        if found is not None and found[2] == lo:
            a = h.ancestor_point(x, lo - 1)
            b = h.ancestor_point(y, lo - 1)
            d = h.nbrs[a].get(b)
            if a == b or (d is not None and d <= h.c * radius(lo - 1)):
                found = None
        fallback = found is None
        if fallback:
            self.counter.add("forest_fallback", 1)
            found = h.lowest_ancestral_neighbors(x, y)
        a, b, m, d = found
        return ForestAnswer(d, best, tree, m, (a, b), fallback)

    def query(self, x, y):
        return self.forest_query(x, y).estimate

    def audit_record(self, x, y):
        ans = self.forest_query(x, y)
        exact = self.h.space.exact_query(x, y)
        rec = {"x": x, "y": y, "exact": exact, "estimate": ans.estimate,
               "ratio": ans.estimate / exact if exact > 0 else 1.0,
               "lca_level_min": ans.lca_level_min,
               "i": level_containing(exact) if exact > 0 else None}
        return rec

    # -- invariants ---------------------------------------------------------------

    def dominant_sets(self):
        out = {}
        for (p, j), t in self.dom.items():
            out.setdefault((t, j), []).append(p)
        root = self.root
        if root is not None:
            for j in range(self.base, self.h.i_max + 1, 2):
                out.setdefault((0, j), []).append(root)
        return out

    def verify_invariants(self, sample=None, seed=0):
        bad = []
        h = self.h
        sp = h.space
        for (t, j), pts in self.dominant_sets().items():
            if len(pts) < 2:
                continue
            lim = 2.0 * radius(j)
            arr = np.array(pts, dtype=np.int64)
            for a_i in range(len(arr) - 1):
                ds = sp.dists_from(arr[a_i], arr[a_i + 1:])
                for b_i in np.nonzero(ds <= lim)[0][:3]:
                    bad.append(f"dominance: tree {t} level {j} {arr[a_i]},{arr[a_i + 1 + b_i]} d={ds[b_i]:.6g}")
        for p in h.order:
            if p == self.root:
                continue
            top = h.top[p]
            for j in range(self.base, top + 1, 2):
                if (p, j) not in self.dom:
                    bad.append(f"uniqueness: node ({p},{j}) dominant in no tree")
        for (p, j) in self.dom:
            if j % 2:
                bad.append(f"odd level node ({p},{j})")
        pts = list(h.order)
        if sample is not None and sample < len(pts):
            rng = np.random.default_rng(seed)
            pts = [pts[i] for i in rng.choice(len(pts), sample, replace=False)]
        for t in range(len(self.paths)):
            for p in pts:
                path = self.path(t, p)
                for k in range(1, len(path)):
                    j = self.base + 2 * k
                    if sp.dist(path[k - 1], path[k]) > radius(j):
                        bad.append(f"cover: tree {t} {path[k - 1]}->{path[k]} at level {j}")
                    if not sp.dist(p, path[k]) < (25.0 / 24.0) * radius(j):
                        bad.append(f"drift: tree {t} point {p} ancestor {path[k]} level {j}")
        if len(self.paths) > self.cap:
            bad.append(f"forest size {len(self.paths)} exceeds cap {self.cap}")
        return bad

    def size_report(self):
        return {"trees": len(self.paths), "dominant_nodes": len(self.dom),
                "overrides": sum(len(d) for d in self.paths), "base": self.base}


def check_forest(forest):
    bad = forest.verify_invariants()
    if bad:
        raise InvariantError("; ".join(bad[:5]))
