"""Backup oracle over a centroid path decomposition of the compressed tree.

Nodes of ``T`` are grouped into vertical paths by subtree size: a node joins
its parent's path when both sizes fall in the path's dyadic class, so any
root-to-leaf route crosses O(log n) paths.  The path graph joins two paths
whenever they hold ``c``-neighbor nodes; each edge keeps the sorted levels at
which that happens (a path has at most one node per level, so a level names
the witnessing pair).

A query binary-searches the heads of the paths on ``x``'s route for the lowest
one whose ``y``-side counterpart is a ``c``-neighbor or the same node.  The
lowest ancestral pair then lies on that path, and one edge lookup per
candidate path on ``y``'s route yields its level.

The static index uses exact classes ``[2^i, 2^(i+1))`` and level-ancestor
queries on a frozen snapshot.  The dynamic index widens classes to
``[2^i, 3*2^(i+1))``, follows tree mutations, and replaces level ancestor by a
nested binary search over the heads on ``y``'s route.  When a node outgrows its
class, the subtree below the highest such node is decomposed afresh.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass

from .counters import NULL
from .errors import EpochError, InvariantError
from .scale import min_level_within, radius


@dataclass(frozen=True)
class CentroidAnswer:
    estimate: float
    level: int
    pair: tuple
    outer_probes: int
    inner_probes: int
    fallback: bool


class CentroidIndex:
    """Centroid paths, route lists and the path graph over one :class:`NavTree`."""

    def __init__(self, nav, dynamic=False, counter=NULL):
        self.nav = nav
        self.h = nav.h
        self.dynamic = dynamic
        self.counter = counter
        self.diagnostics = []
        self._build()
        if dynamic:
            self.h.subscribe(self._on_event)

    # -- construction -------------------------------------------------------------

    def _build(self):
        nav = self.nav
        tree = nav.tree
        self.tree = tree
        self.version = tree.version
        self.epoch = nav.epoch
        n = len(tree.parent)
        size = [1] * n
        for x in sorted(range(n), key=tree.level.__getitem__):
            p = tree.parent[x]
            if p >= 0:
                size[p] += size[x]
        self.size = size
        self.path_of = [-1] * n
        self.path_child = [-1] * n
        self.p_head = []
        self.p_cls = []
        self.p_nodes = []
        self.p_levels = []
        self.route = []
        self.edges = {}
        self.adj = []
        if tree.root >= 0:
            self._decompose(tree.root)
            for x in range(n):
                self._add_node_edges(x)
        if self.dynamic:
            tree.observers.append(self._observe)

    def _on_event(self, kind, payload):
        if kind == "rebuild":
            self._build()

    def _cls_range(self, i):
        if self.dynamic:
            return 1 << i, 3 << (i + 1)
        return 1 << i, 1 << (i + 1)

    def _new_path(self, head):
        pid = len(self.p_head)
        self.p_head.append(head)
        self.p_cls.append(self.size[head].bit_length() - 1)
        self.p_nodes.append([head])
        self.p_levels.append([self.tree.level[head]])
        self.adj.append(set())
        par = self.tree.parent[head]
        self.route.append((pid,) + (self.route[self.path_of[par]] if par >= 0 else ()))
        self.path_of[head] = pid
        return pid

    def _decompose(self, top):
        """Exact-class decomposition of the subtree under ``top`` (a path head)."""
        tree = self.tree
        size = self.size
        stack = [top]
        self._new_path(top)
        touched = 0
        while stack:
            x = stack.pop()
            touched += 1
            pid = self.path_of[x]
            cls = self.p_cls[pid]
            self.path_child[x] = -1
            for c in tree.children[x]:
                if self.path_child[x] < 0 and size[c].bit_length() - 1 == cls:
                    self.path_child[x] = c
                    self.path_of[c] = pid
                    self.p_nodes[pid].insert(0, c)
                    self.p_levels[pid].insert(0, tree.level[c])
                else:
                    self._new_path(c)
                stack.append(c)
        self.counter.add("centroid_touched", touched)

    def _add_node_edges(self, x):
        """Path-graph edges for the ``c``-links of node ``x`` to nodes already in ``T``."""
        h = self.h
        p = self.tree.label[x]
        w = self.tree.level[x]
        lim = h.c * radius(w)
        ids = self.nav.ids
        tops = h.top
        px = self.path_of[x]
        added = 0
        for q, d in h.nbrs[p].items():
            if d > lim or tops[q] < w:
                continue
            y = ids.get((q, w))
            if y is None or y >= len(self.path_of) or self.path_of[y] < 0:
                continue
            py = self.path_of[y]
            if py == px:
                raise InvariantError(f"c-neighbors ({p},{w}) and ({q},{w}) share a path")
            self._edge_add(px, py, w)
            self._edge_add(py, px, w)
            added += 1
        return added

    def _edge_add(self, a, b, w):
        lst = self.edges.get((a, b))
        if lst is None:
            self.edges[(a, b)] = [w]
            self.adj[a].add(b)
            return
        k = bisect.bisect_left(lst, w)
        if k == len(lst) or lst[k] != w:
            lst.insert(k, w)

    # -- dynamic maintenance --------------------------------------------------------

    def _grow_arrays(self, x):
        while len(self.size) <= x:
            self.size.append(1)
            self.path_of.append(-1)
            self.path_child.append(-1)

    def _observe(self, kind, x, other):
        """Mirror one tree mutation (``root``, ``leaf`` or ``split``)."""
        tree = self.tree
        self._grow_arrays(x)
        touched = 1
        if kind == "root" and other < 0:
            self.size[x] = 1
            self._new_path(x)
        elif kind == "leaf":
            u = other
            self.size[x] = 1
            pu = self.path_of[u]
            if self.path_child[u] < 0 and self.p_cls[pu] == 0:
                self.path_child[u] = x
                self.path_of[x] = pu
                self.p_nodes[pu].insert(0, x)
                self.p_levels[pu].insert(0, tree.level[x])
            else:
                self._new_path(x)
        else:
            c = other
            if kind == "split" and len(tree.children[x]) != 1:
                raise InvariantError("centroid index follows single-edge splits only")
            self.size[x] = self.size[c] + 1
            pc = self.path_of[c]
            u = tree.parent[x]
            if u >= 0 and self.path_child[u] == c:
                self.path_child[u] = x
            self.path_child[x] = c
            self.path_of[x] = pc
            k = bisect.bisect_left(self.p_levels[pc], tree.level[x])
            self.p_nodes[pc].insert(k, x)
            self.p_levels[pc].insert(k, tree.level[x])
            if self.p_head[pc] == c:
                self.p_head[pc] = x
        # sizes up the root path, remembering the highest node that outgrew its class
        worst = -1
        a = x
        while True:
            if a != x:
                self.size[a] += 1
            lo, hi = self._cls_range(self.p_cls[self.path_of[a]])
            if self.size[a] >= hi:
                worst = a
            touched += 1
            a = tree.parent[a]
            if a < 0:
                break
        self.counter.add("centroid_touched", touched)
        if worst >= 0:
            self._resplit(worst)
        else:
            self._add_node_edges(x)
        self.version = tree.version

    def _resplit(self, v):
        tree = self.tree
        if self.p_head[self.path_of[v]] != v:
            raise InvariantError(f"node {v} outgrew its class without heading its path")
        nodes = []
        stack = [v]
        while stack:
            x = stack.pop()
            nodes.append(x)
            stack.extend(tree.children[x])
        dead = {self.path_of[x] for x in nodes if self.path_of[x] >= 0}
        for pid in dead:
            for q in self.adj[pid]:
                self.edges.pop((pid, q), None)
                self.edges.pop((q, pid), None)
                if q not in dead:
                    self.adj[q].discard(pid)
            self.adj[pid] = set()
            self.p_head[pid] = -1
            self.p_nodes[pid] = []
            self.p_levels[pid] = []
        for x in nodes:
            self.path_of[x] = -1
        self._decompose(v)
        for x in nodes:
            self._add_node_edges(x)
        self.counter.add("centroid_resplits", 1)

    # -- queries ------------------------------------------------------------------

    def _check_fresh(self):
        if self.nav.epoch != self.epoch or self.tree is not self.nav.tree:
            raise EpochError("centroid index belongs to an earlier tree epoch")
        if not self.dynamic and self.tree.version != self.version:
            raise EpochError("static centroid index is stale; rebuild after mutations")

    def _exit(self, route, s, start_level):
        """Lowest level of ``route[s]`` lying on the route started at ``start_level``."""
        if s == 0:
            return start_level
        return self.tree.level[self.tree.parent[self.p_head[route[s - 1]]]]

    def _node_at(self, pid, level):
        lv = self.p_levels[pid]
        k = bisect.bisect_left(lv, level)
        if k < len(lv) and lv[k] == level:
            return self.p_nodes[pid][k]
        return -1

    def _y_node_static(self, snap, yleaf, level):
        if level < self.tree.level[yleaf]:
            return -1
        node, flagged = snap.level_ancestor(yleaf, level)
        return -1 if flagged else node

    def _y_node_dynamic(self, yroute, ylevel, level, probes):
        """Nested search: the path on ``y``'s route covering ``level``, then its node there."""
        lo, hi = 0, len(yroute) - 1
        head_level = self.tree.level
        heads = self.p_head
        while lo < hi:
            mid = (lo + hi) // 2
            probes[1] += 1
            if head_level[heads[yroute[mid]]] >= level:
                hi = mid
            else:
                lo = mid + 1
        if level < self._exit(yroute, lo, ylevel):
            return -1
        probes[1] += 1
        return self._node_at(yroute[lo], level)

    def query(self, x, y):
        return self.centroid_query(x, y).estimate

    def centroid_query(self, x, y):
        h = self.h
        h.check_query_point(x)
        h.check_query_point(y)
        if x == y:
            return CentroidAnswer(0.0, h.leaf_level(x), (x, x), 0, 0, False)
        self._check_fresh()
        nav = self.nav
        tree = self.tree
        level = tree.level
        label = tree.label
        xleaf = nav.leaf_id(x)
        yleaf = nav.leaf_id(y)
        xroute = self.route[self.path_of[xleaf]]
        yroute = self.route[self.path_of[yleaf]]
        probes = [0, 0]
        snap = None if self.dynamic else tree.freeze()
        c = h.c

        def holds(s):
            probes[0] += 1
            node = self.p_head[xroute[s]]
            lv = level[node]
            if self.dynamic:
                other = self._y_node_dynamic(yroute, level[yleaf], lv, probes)
            else:
                other = self._y_node_static(snap, yleaf, lv)
            if other < 0:
                return False
            if other == node:
                return True
            d = h.nbrs[label[node]].get(label[other])
            return d is not None and d <= c * radius(lv)

        lo, hi = 0, len(xroute) - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if holds(mid):
                hi = mid
            else:
                lo = mid + 1
        s = lo
        pid = xroute[s]
        top = level[self.p_head[pid]]
        bottom = self._exit(xroute, s, level[xleaf])
        if s > 0:
            bottom = max(bottom, level[self.p_head[xroute[s - 1]]] + 1)

        # candidate paths on y's route whose portion meets [bottom, top]
        best = None
        ylevel = level[yleaf]
        heads = [level[self.p_head[q]] for q in yroute]
        r = bisect.bisect_left(heads, bottom)
        while r < len(yroute):
            f = self._exit(yroute, r, ylevel)
            if f > top:
                break
            qid = yroute[r]
            lst = self.edges.get((pid, qid))
            probes[1] += 1
            if lst:
                lower = max(bottom, f)
                k = bisect.bisect_left(lst, lower)
                if k < len(lst) and lst[k] <= min(top, heads[r]):
                    if best is None or lst[k] < best[0]:
                        best = (lst[k], pid, qid)
            r += 1
        self.counter.add("centroid_outer", probes[0])
        self.counter.add("centroid_inner", probes[1])
        if best is None:
            self.counter.add("centroid_fallback", 1)
            a, b, m, d = h.lowest_ancestral_neighbors(x, y)
            return CentroidAnswer(d, m, (a, b), probes[0], probes[1], True)
        m, p1, p2 = best
        a = label[self._node_at(p1, m)]
        b = label[self._node_at(p2, m)]
        return CentroidAnswer(h.nbrs[a][b], m, (a, b), probes[0], probes[1], False)

    def audit_record(self, x, y):
        ans = self.centroid_query(x, y)
        exact = self.h.space.exact_query(x, y)
        return {"x": x, "y": y, "exact": exact, "estimate": ans.estimate,
                "ratio": ans.estimate / exact if exact > 0 else 1.0,
                "level": ans.level, "outer_probes": ans.outer_probes,
                "inner_probes": ans.inner_probes}

    # -- structure reports ------------------------------------------------------------

    def live_paths(self):
        return [pid for pid, hd in enumerate(self.p_head) if hd >= 0]

    def max_route_length(self):
        tree = self.tree
        best = 0
        for x in range(len(tree.parent)):
            if not tree.children[x]:
                best = max(best, len(self.route[self.path_of[x]]))
        return best

    def brute_force_edges(self):
        """Edge levels recomputed from every link, for comparison with :attr:`edges`."""
        h = self.h
        ids = self.nav.ids
        out = {}
        for p in h.order:
            for q, d in h.nbrs[p].items():
                lo = min_level_within(d, h.c)
                hi = min(h.eff_top(p), h.eff_top(q))
                for w in range(lo, hi + 1):
                    a = ids.get((p, w))
                    b = ids.get((q, w))
                    if a is None or b is None:
                        continue
                    out.setdefault((self.path_of[a], self.path_of[b]), set()).add(w)
        return {k: sorted(v) for k, v in out.items()}

    def verify_invariants(self, check_edges=True):
        bad = []
        tree = self.tree
        n = len(tree.parent)
        size = [1] * n
        for x in sorted(range(n), key=tree.level.__getitem__):
            p = tree.parent[x]
            if p >= 0:
                size[p] += size[x]
        if size != self.size[:n]:
            bad.append("subtree sizes out of date")
        for pid in self.live_paths():
            nodes = self.p_nodes[pid]
            lo, hi = self._cls_range(self.p_cls[pid])
            if nodes[-1] != self.p_head[pid]:
                bad.append(f"path {pid}: head mismatch")
            for a, b in zip(nodes, nodes[1:]):
                if tree.parent[a] != b:
                    bad.append(f"path {pid}: {a} not a child of {b}")
            for x in nodes:
                if not lo <= self.size[x] < hi:
                    bad.append(f"path {pid}: size {self.size[x]} of node {x} outside [{lo},{hi})")
                if self.path_of[x] != pid:
                    bad.append(f"node {x} not mapped to path {pid}")
            if [tree.level[x] for x in nodes] != self.p_levels[pid]:
                bad.append(f"path {pid}: level list out of sync")
        if not self.dynamic:
            for x in range(n):
                p = tree.parent[x]
                if p < 0:
                    continue
                same = size[x].bit_length() == size[p].bit_length()
                if same != (self.path_of[x] == self.path_of[p]):
                    bad.append(f"static rule broken at node {x}")
        # each path change drops at least one dyadic size class
        limit = max(n, 1).bit_length() + (3 if self.dynamic else 0)
        longest = self.max_route_length()
        if longest > limit:
            bad.append(f"route crosses {longest} paths, bound {limit}")
        if check_edges:
            want = self.brute_force_edges()
            if want != self.edges:
                missing = [k for k in want if k not in self.edges][:3]
                extra = [k for k in self.edges if k not in want][:3]
                bad.append(f"path graph differs from brute force: missing {missing} extra {extra}")
        return bad

    def size_report(self):
        return {"paths": len(self.live_paths()), "edges": len(self.edges) // 2,
                "max_route": self.max_route_length(), "dynamic": self.dynamic}
