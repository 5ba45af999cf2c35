"""Navigation over the compressed hierarchy tree.

:class:`LevelTree` is a rooted tree whose node levels strictly increase towards
the root.  It supports the three mutations the hierarchy produces (new root,
new leaf, split edge), LCA queries that also report the two children of the
LCA leading to the query nodes, static level-ancestor queries and k-jump
queries through registered :class:`JumpTree` instances.

Queries on an unmodified tree use a frozen snapshot: Euler tours with sparse
tables over the two left-child/right-sibling binarizations ``T1`` (children in
order) and ``T2`` (children reversed).  After mutations the snapshot is stale;
queries then walk parent pointers by level until enough updates accumulate to
justify a rebuild (doubling schedule).

:class:`NavTree` mirrors the explicit nodes of a :class:`NetHierarchy` in a
``LevelTree`` and keeps it in sync through hierarchy events.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

import numpy as np

from .counters import NULL
from .errors import EpochError, InvariantError, LevelError, UnknownPointError
from .hierarchy import Node

TOP_LEVEL = 1 << 50


@dataclass(frozen=True)
class LcaResult:
    """``w = lca(u, v)`` and the children of ``w`` towards ``u`` and ``v``.

    ``degenerate`` is ``"u"`` when ``u`` is an ancestor of ``v`` (then
    ``u_child == u``), ``"v"`` for the mirror case and ``"both"`` when
    ``u == v``.
    """

    w: int
    u_child: int
    v_child: int
    degenerate: str | None = None


def _sparse_table(seq, key):
    """Rows of argmin-by-``key`` over windows of length ``2^j``."""
    rows = [seq]
    span = 1
    while 2 * span <= len(seq):
        prev = rows[-1]
        a = prev[:len(prev) - span]
        b = prev[span:]
        rows.append(np.where(key[a] <= key[b], a, b))
        span *= 2
    return rows


class _EulerLca:
    """Static LCA on a binary tree given as left/right child arrays."""

    def __init__(self, root, left, right, n):
        depth = np.zeros(n, dtype=np.int64)
        first = np.full(n, -1, dtype=np.int64)
        tour = []
        stack = [(root, 0, 0)]
        while stack:
            x, d, state = stack.pop()
            if state == 0:
                depth[x] = d
                first[x] = len(tour)
            tour.append(x)
            kids = (left[x], right[x])
            while state < 2 and kids[state] < 0:
                state += 1
            if state < 2:
                stack.append((x, d, state + 1))
                stack.append((kids[state], d + 1, 0))
        self.first = first
        self.rows = _sparse_table(np.array(tour, dtype=np.int64), depth)
        self.depth = depth

    def query(self, u, v):
        a = int(self.first[u])
        b = int(self.first[v])
        if a > b:
            a, b = b, a
        j = (b - a + 1).bit_length() - 1
        row = self.rows[j]
        x = int(row[a])
        y = int(row[b - (1 << j) + 1])
        return x if self.depth[x] <= self.depth[y] else y


class Snapshot:
    """Frozen O(1)-query structures for one version of a :class:`LevelTree`."""

    def __init__(self, tree):
        self.tree = tree
        self.version = tree.version
        n = len(tree.parent)
        self.n = n
        parent = np.array([p if p >= 0 else i for i, p in enumerate(tree.parent)], dtype=np.int64)
        self.level = np.array(tree.level, dtype=np.int64)
        left1 = np.full(n, -1, dtype=np.int64)
        right1 = np.full(n, -1, dtype=np.int64)
        left2 = np.full(n, -1, dtype=np.int64)
        right2 = np.full(n, -1, dtype=np.int64)
        last = np.full(n, -1, dtype=np.int64)
        for x in range(n):
            ch = tree.children[x]
            if not ch:
                continue
            left1[x] = ch[0]
            left2[x] = ch[-1]
            last[x] = ch[-1]
            for a, b in zip(ch, ch[1:]):
                right1[a] = b
                right2[b] = a
        self.lastchild = last
        root = tree.root
        self.t1 = _EulerLca(root, left1, right1, n)
        self.t2 = _EulerLca(root, left2, right2, n)

        # preorder intervals and depth-from-root in T
        tin = np.zeros(n, dtype=np.int64)
        tout = np.zeros(n, dtype=np.int64)
        depth = np.zeros(n, dtype=np.int64)
        clock = 0
        stack = [(root, 0, False)]
        while stack:
            x, d, done = stack.pop()
            if done:
                tout[x] = clock
                continue
            tin[x] = clock
            depth[x] = d
            clock += 1
            stack.append((x, d, True))
            for c in reversed(tree.children[x]):
                stack.append((c, d + 1, False))
        self.tin, self.tout, self.depth = tin, tout, depth

        up = [parent]
        while (1 << len(up)) < max(2, n):
            prev = up[-1]
            up.append(prev[prev])
        self.up = up

    def check(self):
        if self.version != self.tree.version:
            raise EpochError("snapshot invalidated by a later mutation")

    def is_ancestor(self, a, b):
        return self.tin[a] <= self.tin[b] and self.tout[b] <= self.tout[a]

    def lca_with_children(self, u, v, counter=NULL):
        self.check()
        counter.add("lca_probes", 1)
        if u == v:
            return LcaResult(u, u, u, "both")
        if self.is_ancestor(u, v):
            return LcaResult(u, u, self.t1.query(v, int(self.lastchild[u])), "u")
        if self.is_ancestor(v, u):
            return LcaResult(v, self.t1.query(u, int(self.lastchild[v])), v, "v")
        x = self.t1.query(u, v)
        y = self.t2.query(u, v)
        w = self.tree.parent[x]
        if self.is_ancestor(x, u):
            return LcaResult(w, x, y)
        return LcaResult(w, y, x)

    def level_ancestor(self, u, target, counter=NULL):
        """Lowest ancestor of ``u`` at level ``>= target``; flagged when above it."""
        self.check()
        level = self.level
        if target < level[u]:
            raise LevelError(f"target level {target} below node level {int(level[u])}")
        root = self.tree.root
        if target > level[root]:
            raise LevelError(f"target level {target} above root level {int(level[root])}")
        x = u
        for row in reversed(self.up):
            y = int(row[x])
            counter.add("la_probes", 1)
            if level[y] < target:
                x = y
        if level[x] < target:
            x = self.tree.parent[x]
        return x, bool(level[x] != target)

    def depth_of(self, u):
        self.check()
        return int(self.depth[u])


class LevelTree:
    """Rooted tree with strictly increasing levels towards the root."""

    def __init__(self, counter=NULL):
        self.parent = []
        self.children = []
        self.level = []
        self.label = []
        self.root = -1
        self.version = 0
        self.counter = counter
        self.jump_trees = []
        self.observers = []
        self._snap = None
        self._snap_size = 0
        self._since_snap = 0

    def __len__(self):
        return len(self.parent)

    def _order_key(self, x, parent):
        lab = self.label[x]
        return (lab != self.label[parent], lab)

    def _place(self, x, parent):
        ch = self.children[parent]
        key = self._order_key(x, parent)
        keys = [self._order_key(c, parent) for c in ch]
        ch.insert(bisect.bisect_left(keys, key), x)

    def _new(self, level, label):
        x = len(self.parent)
        self.parent.append(-1)
        self.children.append([])
        self.level.append(level)
        self.label.append(label)
        return x

    def _touch(self):
        self.version += 1
        self._since_snap += 1
        self.counter.add("tree_updates", 1)

    # -- mutations --------------------------------------------------------------

    def add_root(self, level, label=None):
        """New root above the current one (or the first node)."""
        old = self.root
        if old >= 0 and level <= self.level[old]:
            raise InvariantError("new root must lie above the current root")
        x = self._new(level, x_label(label, len(self.parent)))
        self.root = x
        if old >= 0:
            self.parent[old] = x
            self.children[x].append(old)
        self._touch()
        for jt in self.jump_trees:
            jt.on_add_root(x, old)
        for ob in self.observers:
            ob("root", x, old)
        return x

    def add_leaf(self, parent, level, label=None):
        if not 0 <= parent < len(self.parent):
            raise InvariantError(f"unknown parent {parent}")
        if level >= self.level[parent]:
            raise InvariantError("leaf level must lie below its parent")
        x = self._new(level, x_label(label, len(self.parent)))
        self.parent[x] = parent
        self._place(x, parent)
        self._touch()
        for jt in self.jump_trees:
            jt.on_add_leaf(x)
        for ob in self.observers:
            ob("leaf", x, parent)
        return x

    def insert_internal(self, parent, kids, level, label=None):
        """New node between ``parent`` and the listed children of ``parent``."""
        kids = list(kids)
        for c in kids:
            if self.parent[c] != parent:
                raise InvariantError(f"node {c} is not a child of {parent}")
            if self.level[c] >= level:
                raise InvariantError("inserted node must lie above its new children")
        if level >= self.level[parent]:
            raise InvariantError("inserted node must lie below its parent")
        if self.jump_trees and len(kids) != 1:
            raise InvariantError("jump trees only follow single-edge splits")
        x = self._new(level, x_label(label, len(self.parent)))
        self.parent[x] = parent
        moved = set(kids)
        self.children[parent] = [c for c in self.children[parent] if c not in moved]
        self._place(x, parent)
        for c in kids:
            self.parent[c] = x
            self._place(c, x)
        self._touch()
        for jt in self.jump_trees:
            jt.on_split(x, kids[0])
        for ob in self.observers:
            ob("split", x, kids[0])
        return x

    def split_edge(self, child, level, label=None):
        return self.insert_internal(self.parent[child], [child], level, label)

    # -- queries ----------------------------------------------------------------

    def freeze(self):
        """Snapshot for static queries; raises :class:`EpochError` once stale."""
        if self._snap is None or self._snap.version != self.version:
            self._snap = Snapshot(self)
            self._snap_size = len(self.parent)
            self._since_snap = 0
            self.counter.add("snapshot_rebuilds", 1)
        return self._snap

    def _live_snapshot(self):
        snap = self._snap
        if snap is not None and snap.version == self.version:
            return snap
        if self._since_snap >= max(32, self._snap_size):
            return self.freeze()
        return None

    def is_ancestor(self, a, b):
        """True when ``a`` is ``b`` or an ancestor of ``b``."""
        snap = self._live_snapshot()
        if snap is not None:
            return bool(snap.is_ancestor(a, b))
        la = self.level[a]
        while self.level[b] < la:
            b = self.parent[b]
            self.counter.add("walk_steps", 1)
        return a == b

    def lca_with_children(self, u, v):
        for x in (u, v):
            if not 0 <= x < len(self.parent):
                raise UnknownPointError(f"unknown tree node {x}")
        snap = self._live_snapshot()
        if snap is not None:
            return snap.lca_with_children(u, v, self.counter)
        return self.naive_lca_with_children(u, v, self.counter)

    def naive_lca_with_children(self, u, v, counter=NULL):
        """Two-pointer walk by level; also the reference oracle in tests."""
        if u == v:
            return LcaResult(u, u, u, "both")
        level = self.level
        parent = self.parent
        x, y = u, v
        px = py = None
        while x != y:
            counter.add("walk_steps", 1)
            if level[x] < level[y]:
                px, x = x, parent[x]
            elif level[y] < level[x]:
                py, y = y, parent[y]
            else:
                px, x = x, parent[x]
                py, y = y, parent[y]
        if x == u:
            return LcaResult(x, u, py, "u")
        if x == v:
            return LcaResult(x, px, v, "v")
        return LcaResult(x, px, py)

    def level_ancestor(self, u, target):
        """Static level ancestor through the current snapshot."""
        return self.freeze().level_ancestor(u, target, self.counter)

    def naive_level_ancestor(self, u, target):
        x = u
        while self.level[x] < target:
            x = self.parent[x]
        return x, self.level[x] != target

    def add_jump_tree(self, k):
        for jt in self.jump_trees:
            if jt.k == k:
                return jt
        jt = JumpTree(self, k)
        self.jump_trees.append(jt)
        return jt

    def jump_tree(self, k):
        for jt in self.jump_trees:
            if jt.k == k:
                return jt
        raise LevelError(f"no jump tree registered for k={k}")

    def k_jump(self, u, w, k):
        return self.jump_tree(k).query(u, w)

    def naive_k_jump(self, u, w, k):
        """The k-jump definition applied literally by walking parents."""
        if not self.is_ancestor(w, u) or u == w:
            raise LevelError("w must be a proper ancestor of u")
        m = k * ((self.level[w] - 1) // k)
        if m <= self.level[u]:
            return u
        x = u
        while self.level[x] < m:
            x = self.parent[x]
        return x

    def to_edges(self):
        return {x: self.parent[x] for x in range(len(self.parent))}


def x_label(label, default):
    return default if label is None else label


class JumpTree:
    """Tree ``T'`` over every ``k``-th level of a :class:`LevelTree`.

    ``T'`` holds a copy of each node whose level is a multiple of ``k`` and a
    proxy for each compressed position at a multiple ``L`` of ``k`` whose lowest
    explicit ancestor lies below ``L + k``.  A compressed position sits on an
    edge ``x -> parent(x)``, so proxies are keyed by the lower endpoint ``x``
    and point at ``parent(x)``.  Ancestry in ``T'`` follows ancestry in the
    base tree.
    """

    def __init__(self, base, k):
        if k < 1:
            raise LevelError("jump parameter k must be positive")
        self.base = base
        self.k = k
        self.counter = base.counter
        self.tp = LevelTree(base.counter)
        self.top = self.tp.add_root(TOP_LEVEL, ("top",))
        self.info = {self.top: ("top", -1)}
        self.copy_of = {}
        self.proxy_on = {}
        self.last_touched = 0
        self._bulk = False
        self._build()

    # -- construction -----------------------------------------------------------

    def _mult_below(self, level):
        """Largest multiple of ``k`` strictly below ``level``."""
        return self.k * ((level - 1) // self.k)

    def _proxy_level(self, lo, hi):
        """Level of the proxy kept on an edge from level ``lo`` up to ``hi``, if any."""
        lv = self._mult_below(hi)
        if lv > lo and hi < lv + self.k:
            return lv
        return None

    def _build(self):
        # top-down bulk load: every ancestor entry exists before its descendants,
        # so no downward searches are needed
        base = self.base
        entries = []
        for x in range(len(base.parent)):
            if base.level[x] % self.k == 0:
                entries.append((base.level[x], 0, "node", x))
            p = base.parent[x]
            if p >= 0:
                lv = self._proxy_level(base.level[x], base.level[p])
                if lv is not None:
                    entries.append((lv, 1, "proxy", x))
        entries.sort(key=lambda e: (-e[0], -e[1], e[3]))
        self._bulk = True
        for lv, _, kind, x in entries:
            self._add(kind, x, lv)
        self._bulk = False

    def _node_added(self, x):
        base = self.base
        if base.level[x] % self.k == 0:
            self._add("node", x, base.level[x])
        p = base.parent[x]
        if p >= 0:
            lv = self._proxy_level(base.level[x], base.level[p])
            if lv is not None:
                self._add("proxy", x, lv)

    def _tp_level(self, t):
        return self.tp.level[t]

    def _find_up(self, start):
        """Nearest ``T'`` node strictly above the position just above ``start``'s parent edge start."""
        base = self.base
        x = start
        while x >= 0:
            self.last_touched += 1
            t = self.copy_of.get(x)
            if t is not None:
                return t
            t = self.proxy_on.get(x)
            if t is not None:
                return t
            x = base.parent[x]
        return self.top

    def _up_from(self, kind, x):
        base = self.base
        if kind == "node":
            t = self.proxy_on.get(x)
            if t is not None:
                return t
        return self._find_up(base.parent[x])

    def _find_down(self, kind, x):
        """Nearest ``T'`` nodes below the position of a new entry."""
        base = self.base
        found = []
        stack = list(base.children[x]) if kind == "node" else [x]
        first = kind != "node"
        while stack:
            y = stack.pop()
            self.last_touched += 1
            if not (first and y == x):
                t = self.proxy_on.get(y)
                if t is not None:
                    found.append(t)
                    continue
            first = False
            t = self.copy_of.get(y)
            if t is not None:
                found.append(t)
                continue
            stack.extend(base.children[y])
        return found

    def _add(self, kind, x, lv):
        parent = self._up_from(kind, x)
        below = [] if self._bulk else self._find_down(kind, x)
        label = (self.base.label[x], lv)
        if below:
            t = self.tp.insert_internal(parent, below, lv, label)
        else:
            t = self.tp.add_leaf(parent, lv, label)
        self.info[t] = (kind, x)
        if kind == "node":
            self.copy_of[x] = t
        else:
            self.proxy_on[x] = t
        return t

    # -- maintenance hooks --------------------------------------------------------

    def on_add_root(self, z, old):
        self.last_touched = 0
        base = self.base
        if base.level[z] % self.k == 0:
            self._add("node", z, base.level[z])
        if old >= 0:
            lv = self._proxy_level(base.level[old], base.level[z])
            if lv is not None:
                self._add("proxy", old, lv)

    def on_add_leaf(self, z):
        self.last_touched = 0
        self._node_added(z)

    def on_split(self, z, c):
        self.last_touched = 0
        base = self.base
        zl = base.level[z]
        pi = self.proxy_on.pop(c, None)
        if pi is not None:
            lv = self.tp.level[pi]
            if lv > zl:
                self.proxy_on[z] = pi
                self.info[pi] = ("proxy", z)
            elif lv == zl:
                self.copy_of[z] = pi
                self.info[pi] = ("node", z)
            else:
                # still on c's edge, now pointing at z
                self.proxy_on[c] = pi
        if zl % self.k == 0 and z not in self.copy_of:
            self._add("node", z, zl)
        if c not in self.proxy_on:
            lv = self._proxy_level(base.level[c], zl)
            if lv is not None:
                self._add("proxy", c, lv)

    # -- queries ------------------------------------------------------------------

    def target(self, t):
        """Base-tree node a ``T'`` entry stands for (proxies: lowest explicit ancestor)."""
        kind, x = self.info[t]
        if kind == "node":
            return x
        if kind == "proxy":
            return self.base.parent[x]
        raise LevelError("the virtual top has no base node")

    def lowest_at_or_above(self, u):
        t = self.copy_of.get(u)
        if t is not None:
            return t
        return self._up_from("node", u)

    def query(self, u, w):
        """Ancestor of ``u`` at the largest multiple of ``k`` below ``level(w)``.

        Returns the base node there, or its lowest explicit ancestor when the
        position is compressed; ``u`` itself when that level is below ``u``.
        """
        base = self.base
        if u == w or not base.is_ancestor(w, u):
            raise LevelError("w must be a proper ancestor of u")
        m = self._mult_below(base.level[w])
        if base.level[u] >= m:
            return u
        self.last_touched = 0
        u1 = self.lowest_at_or_above(u)
        w1 = self.lowest_at_or_above(w)
        if u1 == w1:
            return w
        res = self.tp.lca_with_children(u1, w1)
        if res.w != w1:
            raise InvariantError("jump tree ancestry disagrees with the base tree")
        child = res.u_child
        if self.tp.level[child] < m:
            return w
        return self.target(child)

    # -- structure for diffs --------------------------------------------------------

    def _key(self, t):
        kind, x = self.info[t]
        return (kind, x)

    def structure(self):
        """``{(kind, x): (parent_kind, parent_x)}`` for every entry."""
        out = {}
        for t, (kind, x) in self.info.items():
            if kind == "top":
                continue
            out[(kind, x)] = self._key(self.tp.parent[t])
        return out

    @staticmethod
    def expected_structure(base, k):
        """The same map computed straight from the definition."""
        entries = set()
        for x in range(len(base.parent)):
            if base.level[x] % k == 0:
                entries.add(("node", x))
            p = base.parent[x]
            if p < 0:
                continue
            lo, hi = base.level[x], base.level[p]
            # a compressed multiple L on the edge is kept iff its lowest
            # explicit ancestor (p) lies below L + k
            for lv in range(k * (lo // k + 1), hi, k):
                if hi < lv + k:
                    entries.add(("proxy", x))

        def above(kind, x):
            if kind == "node":
                yield ("proxy", x)
            y = base.parent[x]
            while y >= 0:
                yield ("node", y)
                yield ("proxy", y)
                y = base.parent[y]

        out = {}
        for kind, x in entries:
            out[(kind, x)] = next((e for e in above(kind, x) if e in entries), ("top", -1))
        return out


class NavTree:
    """The compressed hierarchy tree ``T`` kept in sync with a hierarchy."""

    def __init__(self, hierarchy, jump_ks=(), counter=NULL):
        self.h = hierarchy
        self.counter = counter
        self.jump_ks = tuple(sorted(set(int(k) for k in jump_ks)))
        self.epoch = 0
        self._build()
        hierarchy.subscribe(self._on_event)

    def _build(self):
        h = self.h
        self.tree = LevelTree(self.counter)
        self.ids = {}
        self.nodes = []
        self.by_point = {}
        nodes = sorted(h.explicit_nodes(), key=lambda nd: (-nd.level, nd.point))
        for nd in nodes:
            self._insert_node(nd)
        for k in self.jump_ks:
            self.tree.add_jump_tree(k)

    def _register(self, nd, x):
        self.ids[nd] = x
        self.nodes.append(nd)
        bisect.insort(self.by_point.setdefault(nd.point, []), nd.level)

    def _insert_node(self, nd):
        h = self.h
        tree = self.tree
        par = h.t_parent(nd)
        if par is None:
            x = tree.add_root(nd.level, nd.point)
            self._register(nd, x)
            return x
        pid = self.ids.get(par)
        if pid is None:
            raise InvariantError(f"parent {tuple(par)} of {tuple(nd)} missing from the tree")
        levels = self.by_point.get(nd.point, [])
        k = bisect.bisect_left(levels, nd.level)
        if k > 0:
            below = self.ids[Node(nd.point, levels[k - 1])]
            if tree.parent[below] != pid:
                raise InvariantError(f"{tuple(nd)} does not split the edge above its chain child")
            x = tree.split_edge(below, nd.level, nd.point)
            self._register(nd, x)
            return x
        x = tree.add_leaf(pid, nd.level, nd.point)
        self._register(nd, x)
        return x

    def maintain(self, event):
        """Apply one hierarchy insertion; returns the number of new tree nodes."""
        for nd in event.new_nodes:
            if nd in self.ids:
                raise InvariantError(f"node {tuple(nd)} already mirrored")
            if not self.h.is_explicit(nd):
                raise InvariantError(f"node {tuple(nd)} is not explicit in the hierarchy")
            self._insert_node(nd)
        return len(event.new_nodes)

    def _on_event(self, kind, payload):
        if kind == "insert":
            self.maintain(payload)
        elif kind == "rebuild":
            self.epoch += 1
            self._build()

    # -- handles ------------------------------------------------------------------

    def node_id(self, nd):
        x = self.ids.get(Node(*nd))
        if x is None:
            raise LevelError(f"{tuple(nd)} is not an explicit node")
        return x

    def handle(self, nd):
        return NavHandle(Node(*nd), self.epoch)

    def _resolve(self, ref):
        if isinstance(ref, NavHandle):
            if ref.epoch != self.epoch:
                raise EpochError("node handle from an earlier epoch")
            return self.node_id(ref.node)
        if isinstance(ref, (int, np.integer)):
            return int(ref)
        return self.node_id(ref)

    def node(self, x):
        return self.nodes[x]

    # -- public operations -------------------------------------------------------

    def lca_with_children(self, u, v):
        """``(w, u_child, v_child, degenerate)`` as hierarchy nodes."""
        res = self.tree.lca_with_children(self._resolve(u), self._resolve(v))
        nodes = self.nodes
        return nodes[res.w], nodes[res.u_child], nodes[res.v_child], res.degenerate

    def freeze(self):
        return self.tree.freeze()

    def level_ancestor(self, u, target, snapshot=None):
        """Explicit ancestor at ``target`` or, flagged, the lowest one above it."""
        snap = snapshot or self.tree.freeze()
        x, flagged = snap.level_ancestor(self._resolve(u), target, self.counter)
        return self.nodes[x], flagged

    def k_jump(self, u, w, k):
        x = self.tree.k_jump(self._resolve(u), self._resolve(w), k)
        return self.nodes[x]

    def leaf_id(self, p):
        return self.node_id(self.h.leaf(p))

    def depth(self, u):
        return self.tree.freeze().depth_of(self._resolve(u))


@dataclass(frozen=True)
class NavHandle:
    node: Node
    epoch: int


def jump_parameters(c, n, lam, p):
    """The registered jump widths, each floored at 1."""
    def clog(x, base):
        return max(1, math.ceil(math.log(x, base) - 1e-12)) if x > 1 else 1

    loglog = clog(max(2.0, math.log2(max(n, 2))), 2)
    return {
        "c": clog(c, 5),
        "loglog_n": loglog,
        "lambda": clog(lam, 5),
        "p": clog(p, 2),
    }
