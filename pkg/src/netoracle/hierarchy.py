"""Leveled net hierarchy with cached neighbor links and compressed chains.

Level ``i`` has radius ``5^i`` and may be negative.  A point ``p`` occupies
every level up to ``top[p]``; the first point inserted (the root) occupies all
levels.  Level sets are nested, pairwise distances inside level ``i`` are at
least ``5^(i-1)``, and a point leaving the hierarchy above ``top[p]`` hangs off
a parent point within ``5^top[p]``, which is inside the ``(3/5)*5^(top+1)``
covering radius.

Two nodes ``(p, i)`` and ``(q, i)`` are linked when ``d(p, q) <= c*5^i``; the
6-neighbors are the subset within ``6*5^i``.  A node is explicit when it has a
link or at least two children; every other node sits inside an implicit chain
and is only materialised on demand.  The explicit nodes form the compressed
tree ``T`` used by the navigation structures.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DuplicatePointError, EndpointError, LevelError, ParameterError, UnknownPointError
from .scale import radius

ROOT_TOP = 1 << 40
_RAD_OFFSET = 400
_RADII = np.array([5.0 ** i for i in range(-_RAD_OFFSET, _RAD_OFFSET + 1)])
_LOG5 = math.log(5.0)


def _radii(levels):
    return _RADII[np.clip(levels, -_RAD_OFFSET, _RAD_OFFSET) + _RAD_OFFSET]


def _packing_levels(ds):
    """Vectorised :func:`scale.packing_level`."""
    lv = np.ceil(np.log(ds) / _LOG5).astype(np.int64)
    lv += (_radii(lv) < ds)
    lv -= (_radii(lv - 1) >= ds)
    return lv


def _min_levels_within(ds, b):
    """Vectorised :func:`scale.min_level_within`."""
    lv = np.ceil(np.log(ds / b) / _LOG5).astype(np.int64)
    lv += (b * _radii(lv) < ds)
    lv -= (b * _radii(lv - 1) >= ds)
    return lv


def safe_c(epsilon):
    """Link radius factor that keeps lowest-ancestral-neighbor answers within ``1 +/- eps``.

    Ancestors drift less than ``5^m / 4`` from their descendants, so a pair
    that first links at level ``m`` errs by under ``2.5 / (c - 2)`` relative to
    the linked distance.  The returned value never drops below the classical
    ``8/(5 eps)`` choice.
    """
    return max(8.0 / (5.0 * epsilon), 2.5 / epsilon + 2.0)


@dataclass
class HierarchyConfig:
    epsilon: float = 0.25
    lam: float = 2.0
    rebuild_fraction: float = 1.0 / 3.0
    c: float | None = None
    c_rule: str = "safe"

    def __post_init__(self):
        if not 0 < self.epsilon <= 0.5:
            raise ParameterError("epsilon must lie in (0, 1/2]")
        if self.lam <= 0:
            raise ParameterError("lambda must be positive")
        if not 0 < self.rebuild_fraction <= 1:
            raise ParameterError("rebuild_fraction must lie in (0, 1]")
        if self.c is None:
            if self.c_rule == "safe":
                self.c = safe_c(self.epsilon)
            elif self.c_rule == "classical":
                self.c = 8.0 / (5.0 * self.epsilon)
            else:
                raise ParameterError(f"unknown c_rule {self.c_rule!r}")
        if self.c < 16.0 / 5.0:
            raise ParameterError("c must be at least 16/5")

    @property
    def link_factor(self):
        """Links are stored up to ``max(6, c) * 5^i``."""
        return max(6.0, self.c)


class Node(NamedTuple):
    point: int
    level: int


@dataclass
class Link:
    a: int
    b: int
    level: int
    cached_distance: float
    radius_class: float


@dataclass
class InsertEvent:
    point: int
    top: int
    parent: int | None
    links: dict
    new_nodes: list = field(default_factory=list)


class NetHierarchy:
    """Incrementally maintained net hierarchy over a :class:`MetricSpace`."""

    def __init__(self, space, config=None, points=None):
        self.space = space
        self.config = config or HierarchyConfig()
        self.c = float(self.config.c)
        self.B = float(self.config.link_factor)
        self.version = 0
        self.epoch = 0
        self.listeners = []
        self._reset()
        if points is None:
            points = space.live_ids()
        for p in points:
            self.insert_point(p)

    def _reset(self):
        self.order = []
        self._ids = np.zeros(64, dtype=np.int64)
        self._tops = np.zeros(64, dtype=np.int64)
        self.top = {}
        self.parent = {}
        self.kids = {}
        self.nbrs = {}
        self.elevels = {}
        self._eset = {}
        self._chain_tops = {}
        self._chain_pts = {}
        self.root = None
        self.tombstones = set()
        self.i_min = 0
        self.n_links = 0

    # -- basic queries ----------------------------------------------------------

    def __contains__(self, p):
        return p in self.top

    def __len__(self):
        return len(self.order)

    @property
    def n_live(self):
        return len(self.order) - len(self.tombstones)

    @property
    def i_max(self):
        if self.root is None:
            return 0
        levels = self.elevels[self.root]
        return levels[-1] if levels else 0

    def eff_top(self, p):
        t = self.top[p]
        return self.i_max if t == ROOT_TOP else t

    def in_level(self, p, i):
        return self.top[p] >= i

    def level_points(self, i):
        return [p for p in self.order if self.top[p] >= i]

    def _check_member(self, p):
        if p not in self.top:
            raise UnknownPointError(f"point {p} is not in the hierarchy")

    def check_query_point(self, p):
        self._check_member(p)
        if p in self.tombstones:
            raise EndpointError(f"point {p} is deleted")

    def link_distance(self, p, q):
        """Cached distance of the ``(p, q)`` link, or ``None``."""
        return self.nbrs[p].get(q)

    def linked_at(self, p, q, i, b=None):
        """True when ``(p, i)`` and ``(q, i)`` are ``b``-neighbors (default ``c``)."""
        d = self.nbrs[p].get(q)
        if d is None:
            return False
        if self.top[p] < i or self.top[q] < i:
            return False
        return d <= (self.c if b is None else b) * radius(i)

    def ancestor_point(self, p, i):
        """Point of ``p``'s ancestor at level ``i`` (levels below ``p``'s top give ``p``)."""
        tops = self._chain_tops[p]
        k = bisect.bisect_left(tops, i)
        return self._chain_pts[p][k]

    def ancestor_chain(self, p):
        return list(zip(self._chain_tops[p], self._chain_pts[p]))

    # -- explicit tree T ----------------------------------------------------------

    def leaf_level(self, p):
        levels = self.elevels[p]
        return levels[0] if levels else 0

    def leaf(self, p):
        return Node(p, self.leaf_level(p))

    def root_node(self):
        return Node(self.root, self.i_max)

    def is_explicit(self, node):
        p, i = node
        levels = self._eset.get(p)
        if levels is None:
            return False
        if not levels:
            return p == self.root and i == 0
        return i in levels

    def t_parent(self, node):
        """Parent of an explicit node in the compressed tree ``T``."""
        p, i = node
        levels = self.elevels[p]
        k = bisect.bisect_right(levels, i)
        if k < len(levels):
            return Node(p, levels[k])
        if p == self.root:
            return None
        return Node(self.parent[p], self.top[p] + 1)

    def t_children(self, node):
        """Ordered children in ``T``: the node's own chain first, then by point id."""
        p, i = node
        out = []
        levels = self.elevels[p]
        k = bisect.bisect_left(levels, i)
        if k > 0:
            out.append(Node(p, levels[k - 1]))
        for q in self.kids[p].get(i, ()):
            out.append(Node(q, self.top[q]))
        return out

    def explicit_nodes(self):
        for p in self.order:
            levels = self.elevels[p]
            if not levels and p == self.root:
                yield Node(p, 0)
            for i in levels:
                yield Node(p, i)

    def lowest_explicit_at_or_above(self, p, i):
        """Lowest explicit ancestor of the (possibly implicit) node ``(anc(p, i), i)``."""
        a = self.ancestor_point(p, i)
        levels = self.elevels[a]
        k = bisect.bisect_left(levels, i)
        if k < len(levels) and levels[k] <= self.eff_top(a):
            return Node(a, levels[k])
        if a == self.root:
            return self.root_node()
        return Node(self.parent[a], self.top[a] + 1)

    def implicit_chains(self):
        """Maximal implicit runs as ``(point, top_level, bottom_level)`` records.

        Runs strictly between consecutive explicit levels of a point; the
        unbounded run below a point's leaf is reported with bottom ``-inf``.
        """
        for p in self.order:
            levels = self.elevels[p]
            if not levels:
                continue
            yield (p, levels[0] - 1, -math.inf)
            for lo, hi in zip(levels, levels[1:]):
                if hi - lo > 1:
                    yield (p, hi - 1, lo + 1)
            t = self.eff_top(p)
            if t > levels[-1]:
                yield (p, t, levels[-1] + 1)

    # -- public operations --------------------------------------------------------

    def cover_ancestor(self, p, i):
        """``p``'s ancestor node at level ``i``, expanding compressed chains."""
        self._check_member(p)
        if i < self.leaf_level(p) or i > self.i_max:
            raise LevelError(f"level {i} outside [{self.leaf_level(p)}, {self.i_max}] for point {p}")
        return Node(self.ancestor_point(p, i), i)

    def neighbor_set(self, node, b):
        """All ``b``-neighbor links of an explicit node."""
        p, i = node
        self._check_member(p)
        if not self.is_explicit(node):
            raise LevelError(f"node {tuple(node)} is implicit and has no neighbors")
        if b > self.B:
            raise ParameterError(f"links are only stored up to b={self.B}")
        lim = b * radius(i)
        out = []
        for q, d in self.nbrs[p].items():
            if d <= lim and self.top[q] >= i:
                out.append(Link(p, q, i, d, b))
        out.sort(key=lambda lk: (lk.cached_distance, lk.b))
        return out

    def links_at(self, p, i):
        """Ids linked to ``(p, i)`` at radius ``c``."""
        lim = self.c * radius(i)
        return [q for q, d in self.nbrs[p].items() if d <= lim and self.top[q] >= i]

    # -- insertion ----------------------------------------------------------------

    def _grow(self):
        m = len(self._ids) * 2
        ids = np.zeros(m, dtype=np.int64)
        tops = np.zeros(m, dtype=np.int64)
        k = len(self.order)
        ids[:k] = self._ids[:k]
        tops[:k] = self._tops[:k]
        self._ids, self._tops = ids, tops

    def _add_level(self, p, i, fresh):
        s = self._eset[p]
        if i in s:
            return
        s.add(i)
        bisect.insort(self.elevels[p], i)
        fresh.append(Node(p, i))
        if i < self.i_min:
            self.i_min = i

    def insert_point(self, p):
        """Insert a live point; returns the :class:`InsertEvent` describing the change."""
        if p in self.top:
            raise DuplicatePointError(f"point {p} already inserted")
        if not self.space.is_live(p):
            raise EndpointError(f"point {p} is not live in the metric space")
        k = len(self.order)
        if k + 1 > len(self._ids):
            self._grow()
        self.kids[p] = {}
        self.elevels[p] = []
        self._eset[p] = set()
        if k == 0:
            self.root = p
            self.top[p] = ROOT_TOP
            self.nbrs[p] = {}
            self._chain_tops[p] = (ROOT_TOP,)
            self._chain_pts[p] = (p,)
            self.order.append(p)
            self._ids[0] = p
            self._tops[0] = ROOT_TOP
            self.version += 1
            ev = InsertEvent(p, ROOT_TOP, None, {}, [Node(p, 0)])
            self._emit("insert", ev)
            return ev

        ids = self._ids[:k]
        tops = self._tops[:k]
        ds = self.space.dists_from(p, ids)
        if np.any(ds <= 0):
            q = int(ids[np.argmin(ds)])
            raise DuplicatePointError(f"point {p} coincides with point {q}")
        plev = _packing_levels(ds)
        active = tops > plev
        top_p = int(plev[active].min())

        cand = tops >= top_p + 1
        cd = ds[cand]
        best = cd.min()
        par = int(ids[cand][cd == best].min())

        pair_top = np.minimum(tops, top_p)
        linked = ds <= self.B * _radii(pair_top)
        l_ids = ids[linked]
        l_ds = ds[linked]
        l_lo = _min_levels_within(l_ds, self.B)
        l_hi = pair_top[linked]

        was_single = k == 1
        self.top[p] = top_p
        self.parent[p] = par
        self.order.append(p)
        self._ids[k] = p
        self._tops[k] = top_p
        self._chain_tops[p] = (top_p,) + self._chain_tops[par]
        self._chain_pts[p] = (p,) + self._chain_pts[par]

        fresh = []
        links = {}
        mine = {}
        for q, d, lo, hi in zip(l_ids.tolist(), l_ds.tolist(), l_lo.tolist(), l_hi.tolist()):
            links[q] = d
            mine[q] = d
            self.nbrs[q][p] = d
            for i in range(lo, hi + 1):
                self._add_level(q, i, fresh)
                self._add_level(p, i, fresh)
        self.nbrs[p] = mine
        self.n_links += len(mine)
        self.kids[par].setdefault(top_p + 1, []).append(p)
        self.kids[par][top_p + 1].sort()
        self._add_level(par, top_p + 1, fresh)

        self.version += 1
        fresh.sort(key=lambda nd: (-nd.level, nd.point))
        ev = InsertEvent(p, top_p, par, links, fresh)
        if was_single:
            self._emit("rebuild", None)
        else:
            self._emit("insert", ev)
        return ev

    # -- deletion ---------------------------------------------------------------

    def delete_point(self, p):
        """Tombstone ``p``; rebuild from live points once enough are dead."""
        self._check_member(p)
        if p in self.tombstones:
            raise EndpointError(f"point {p} already deleted")
        self.tombstones.add(p)
        if self.space.is_live(p):
            self.space.delete(p)
        self.version += 1
        rebuilt = False
        if len(self.tombstones) >= self.config.rebuild_fraction * len(self.order):
            self.rebuild()
            rebuilt = True
        self._emit("delete", p)
        return {"point": p, "tombstones": len(self.tombstones), "rebuilt": rebuilt}

    def rebuild(self):
        live = [p for p in self.order if p not in self.tombstones]
        listeners = self.listeners
        self.listeners = []
        self._reset()
        for p in live:
            self.insert_point(p)
        self.listeners = listeners
        self.epoch += 1
        self.version += 1
        self._emit("rebuild", None)

    def _emit(self, kind, payload):
        for fn in list(self.listeners):
            fn(kind, payload)

    def subscribe(self, fn):
        self.listeners.append(fn)

    # -- reference searches -------------------------------------------------------

    def lowest_ancestral_neighbors(self, x, y, b=None):
        """Exhaustive upward walk for the lowest ancestral ``b``-neighbors.

        Returns ``(x', y', level, distance)``.  Used as ground truth by audits.
        """
        b = self.c if b is None else b
        if x == y:
            return (x, y, self.leaf_level(x), 0.0)
        m = max(self.leaf_level(x), self.leaf_level(y))
        lim = b * radius(m)
        while True:
            a = self.ancestor_point(x, m)
            c = self.ancestor_point(y, m)
            if a == c:
                raise AssertionError("ancestors merged before becoming neighbors")
            d = self.nbrs[a].get(c)
            if d is not None and d <= lim:
                return (a, c, m, d)
            m += 1
            lim *= 5.0

    # -- invariant checks ---------------------------------------------------------

    def verify_invariants(self, full=True):
        """Exhaustive scan; returns a list of human-readable violations."""
        bad = []
        sp = self.space
        order = self.order
        if not order:
            return bad
        imax = self.i_max
        ids = np.array(order, dtype=np.int64)
        etops = np.array([min(self.top[p], imax) for p in order], dtype=np.int64)
        for k, p in enumerate(order):
            t = etops[k]
            if k + 1 < len(order):
                ds = sp.dists_from(p, ids[k + 1:])
                lv = np.minimum(etops[k + 1:], t)
                viol = ds < _radii(lv - 1)
                for j in np.nonzero(viol)[0][:3]:
                    bad.append(f"packing: {p},{ids[k + 1 + j]} d={ds[j]:.6g} at level {lv[j]}")
            if p != self.root:
                par = self.parent[p]
                if self.top[par] < self.top[p] + 1:
                    bad.append(f"covering: parent {par} of {p} absent at level {self.top[p] + 1}")
                d = sp.dist(p, par)
                if not d < 0.6 * radius(self.top[p] + 1):
                    bad.append(f"covering: {p}->{par} d={d:.6g} level {self.top[p] + 1}")
            nb = self.nbrs[p]
            if nb:
                qs = np.fromiter(nb.keys(), dtype=np.int64, count=len(nb))
                cached = np.fromiter(nb.values(), dtype=float, count=len(nb))
                actual = sp.dists_from(p, qs)
                for j in np.nonzero(cached != actual)[0][:3]:
                    bad.append(f"link distance: {p},{qs[j]} cached {cached[j]!r} actual {actual[j]!r}")
                for q, d in nb.items():
                    if self.nbrs[q].get(p) != d:
                        bad.append(f"link symmetry: {p},{q}")
            if full and k + 1 < len(order):
                ds = sp.dists_from(p, ids)
                lv = np.minimum(etops, t)
                want = set(ids[(ds <= self.B * _radii(lv)) & (ids != p)].tolist())
                have = set(nb)
                if want != have:
                    bad.append(f"link completeness: {p} missing {sorted(want - have)[:3]} extra {sorted(have - want)[:3]}")
        for p in order:
            nb = self.nbrs[p]
            expect = set(self.kids[p])
            if nb:
                qs = list(nb)
                dv = np.fromiter(nb.values(), dtype=float, count=len(nb))
                tp = self.top[p]
                his = [min(tp, self.top[q]) for q in qs]
                for lo, hi in zip(_min_levels_within(dv, self.B).tolist(), his):
                    expect.update(range(lo, hi + 1))
                # below a pair's shared top level the parents are the pair itself,
                # so the hereditary check only bites at that top level
                c_lo = _min_levels_within(dv, self.c).tolist()
                for q, lo in zip(qs, c_lo):
                    if q < p:
                        continue
                    i = min(self.eff_top(p), self.eff_top(q))
                    if i < lo or i + 1 > imax:
                        continue
                    a = self.ancestor_point(p, i + 1)
                    c2 = self.ancestor_point(q, i + 1)
                    if a != c2 and not self.linked_at(a, c2, i + 1):
                        bad.append(f"hereditary: ({p},{q}) at {i} parents ({a},{c2}) not c-neighbors")
            if expect != self._eset[p]:
                bad.append(f"compression: point {p} explicit levels {sorted(self._eset[p])} expected {sorted(expect)}")
            for lvl, ch in self.kids[p].items():
                group = [p] + ch
                if len(group) > 1:
                    for a_i, g in enumerate(group[:-1]):
                        ds = sp.dists_from(g, group[a_i + 1:])
                        for j in np.nonzero(ds > 6 * radius(lvl - 1))[0][:3]:
                            bad.append(f"sibling: {g},{group[a_i + 1 + j]} under ({p},{lvl}) d={ds[j]:.6g}")
        return bad

    # -- reporting ----------------------------------------------------------------

    def size_report(self):
        nodes = sum(max(1, len(v)) if p == self.root else len(v) for p, v in self.elevels.items())
        return {"points": len(self.order), "live": self.n_live, "explicit_nodes": nodes,
                "links": self.n_links, "i_min": self.i_min, "i_max": self.i_max,
                "c": self.c}

    def dump(self):
        """Debug dump: ``level point parent_point`` per node, ``level a b dist`` per link."""
        lines = []
        for node in self.explicit_nodes():
            par = self.t_parent(node)
            lines.append(f"{node.level} {node.point} {par.point if par else -1}")
        for p in self.order:
            for q, d in sorted(self.nbrs[p].items()):
                if q <= p:
                    continue
                lo = int(_min_levels_within(np.array([d]), self.B)[0])
                for i in range(lo, min(self.eff_top(p), self.eff_top(q)) + 1):
                    lines.append(f"{i} {p} {q} {d!r}")
        return "\n".join(lines) + "\n"
