"""The composite (1 +/- eps) distance oracle and its query modes.

A query looks for the lowest ancestral 6-neighbors of ``x`` and ``y`` and then
the lowest ancestral ``c``-neighbors a few levels below them; the cached link
distance of the latter is the answer.

* Step 1 reads the lowest common ancestor level of ``x`` and ``y`` in a random
  tree embedding, which brackets ``d(x, y)`` and so the 6-neighbor level.
* Step 2 narrows the bracket with a packed snowflake distance between ancestors
  of ``x`` and ``y`` taken at the bottom of the bracket.
* Step 3 looks the 6-neighbor pair up in a memoised pair table keyed by the
  explicit ancestors at the bottom of the bracket, then scans the short
  window of possible ``c`` levels.

Every located pair is checked for minimality (the ancestors one level lower
are neither merged nor linked), so an unlucky random embedding only costs a
fallback to a backup oracle, never a wrong answer.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from .centroid import CentroidIndex
from .counters import NULL, OpCounter
from .embeddings import SnowflakeEmbedding, TreeEmbedding
from .errors import EpochError, OracleError, ParameterError
from .forest import DominantForest
from .hierarchy import HierarchyConfig, NetHierarchy
from .metric import MetricSpace
from .nav import NavTree
from .packed import pack, packed_sq_dist
from .scale import level_containing, log5, radius

STATIC_MODES = ("static_O1", "static_binary", "static_loglogN", "static_loglogLambda")
DYNAMIC_MODES = ("dynamic_O1", "dynamic_variant9")
MODES = STATIC_MODES + DYNAMIC_MODES

MAGIC = b"NETORCL\x00"
FORMAT_VERSION = 1
JUMP_BITS = 4


def level_window(i, b):
    """Levels where the lowest ancestral ``b``-neighbors of a pair with ``5^(i-1) < d <= 5^i`` can sit."""
    return math.ceil(i - 1 - log5(b + 1.6)), math.ceil(i - log5(b - 1.6))


def window_for_distances(dlo, dhi, b):
    return level_window(level_containing(dlo), b)[0], level_window(level_containing(dhi), b)[1]


def c_window_from_six(m6, c):
    """Possible ``c``-neighbor levels once the 6-neighbor level ``m6`` is known."""
    cands = [i for i in range(m6 - 1, m6 + 6) if level_window(i, 6)[0] <= m6 <= level_window(i, 6)[1]]
    lo = min(level_window(i, c)[0] for i in cands)
    hi = max(level_window(i, c)[1] for i in cands)
    return lo, min(hi, m6)


def _clog(x, base):
    return max(1, math.ceil(math.log(x, base) - 1e-12)) if x > 1 else 1


@dataclass
class OracleConfig:
    epsilon: float = 0.25
    lam: float = 3.0
    mode: str = "static_O1"
    D: int = 64
    p: int | None = None
    seed: int = 0
    bits: int = 16
    table_K: int = 3
    step2: str = "auto"
    calib_pairs: int = 2000
    c: float | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ParameterError(f"unknown mode {self.mode!r}; choose from {', '.join(MODES)}")
        if not 0 < self.epsilon <= 0.5:
            raise ParameterError("epsilon must lie in (0, 1/2]")
        if self.lam <= 0:
            raise ParameterError("lambda must be positive")
        if self.D < 1:
            raise ParameterError("snowflake dimension D must be positive")
        if not 1 <= self.bits <= 16:
            raise ParameterError("bits per packed coordinate must lie in [1, 16]")
        if self.step2 not in ("auto", "on", "off"):
            raise ParameterError("step2 must be auto, on or off")
        if self.p is not None and self.p < 2:
            raise ParameterError("p must be at least 2")

    @property
    def dynamic(self):
        return self.mode in DYNAMIC_MODES

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


@dataclass
class Answer:
    estimate: float
    level: int
    pair: tuple
    path_taken: str
    fallback_used: bool
    level6: int | None = None
    pair6: tuple | None = None
    d6: float | None = None
    window: tuple | None = None
    probes: int = 0
    ops: int = 0
    extra: dict = field(default_factory=dict)


class PairTable:
    """Lowest ancestral 6-neighbors of explicit node pairs, filled on first use.

    Root paths never change under insertions, so an entry stays valid until
    the hierarchy is rebuilt.  Pairs farther apart than the admissibility
    radius are refused, which bounds the cost of any single fill.
    """

    def __init__(self, hierarchy, lam, K=3, counter=NULL):
        self.h = hierarchy
        self.K = K
        self.span = 4 * max(0.0, log5(max(lam, 1.0))) + K
        self.counter = counter
        self.entries = {}
        hierarchy.subscribe(self._on_event)

    def _on_event(self, kind, payload):
        if kind == "rebuild":
            self.entries.clear()

    def admissible(self, level):
        return 38.0 / 5.0 * 5.0 ** self.span * radius(level)

    def lookup(self, nx, ny):
        key = (nx, ny)
        if key in self.entries:
            return self.entries[key]
        h = self.h
        start = max(nx.level, ny.level)
        entry = None
        if h.space.dist(nx.point, ny.point) <= self.admissible(start):
            lim = 6.0 * radius(start)
            stop = start + math.ceil(self.span) + 2
            m = start
            steps = 0
            while m <= stop:
                a = h.ancestor_point(nx.point, m)
                b = h.ancestor_point(ny.point, m)
                steps += 1
                if a == b:
                    break
                d = h.nbrs[a].get(b)
                if d is not None and d <= lim:
                    entry = (a, b, m, d)
                    break
                m += 1
                lim *= 5.0
            self.counter.add("table_fill", steps)
        self.entries[key] = entry
        return entry


class NeighborhoodIndex:
    """Neighborhoods centered on nodes at levels divisible by a stride, with packed snowflake vectors.

    The neighborhood of center ``(a, U)`` holds everything whose level-``U``
    ancestor is ``a`` or a 6-neighbor of ``a``; all of it lies within
    ``6.25 * 5^U`` of ``a``, so snowflake coordinates relative to ``a`` fit in
    ``[-sqrt(6.25 * 5^U), sqrt(6.25 * 5^U)]`` and are quantized to ``bits``.
    """

    def __init__(self, hierarchy, snow, bits=16, counter=NULL):
        self.h = hierarchy
        self.snow = snow
        self.bits = bits
        self.counter = counter
        self.vectors = {}
        hierarchy.subscribe(self._on_event)

    def _on_event(self, kind, payload):
        if kind == "rebuild":
            self.vectors.clear()

    @staticmethod
    def center_level(dhi, floor_level, stride):
        """Lowest multiple of ``stride`` at or above ``floor_level`` with ``5.5 * 5^U >= dhi``."""
        U = max(floor_level, math.ceil(log5(dhi / 5.5)))
        return stride * math.ceil(U / stride)

    def half_width(self, U):
        return math.sqrt(6.25 * radius(U))

    def co_resident(self, a, y, U):
        b = self.h.ancestor_point(y, U)
        if b == a:
            return True
        d = self.h.nbrs[a].get(b)
        return d is not None and d <= 6.0 * radius(U)

    def vector(self, a, U, p):
        key = (a, U, p)
        v = self.vectors.get(key)
        if v is None:
            w = self.half_width(U)
            rel = self.snow.scaled_coords(p) - self.snow.scaled_coords(a)
            top = (1 << self.bits) - 1
            q = np.clip(np.floor((rel + w) * (top / (2 * w)) + 0.5), 0, top).astype(np.int64)
            v = pack(q.tolist(), self.bits)
            self.vectors[key] = v
        return v

    def sq_dist_range(self, a, U, p, q):
        """Interval holding the squared snowflake distance of ``p`` and ``q``."""
        s = packed_sq_dist(self.vector(a, U, p), self.vector(a, U, q), self.counter)
        step = 2 * self.half_width(U) / ((1 << self.bits) - 1)
        root = math.sqrt(s) * step
        err = math.sqrt(self.snow.dim) * step
        return max(0.0, root - err) ** 2, (root + err) ** 2


class CompositeOracle:
    """Approximate distance oracle over a :class:`MetricSpace` in one of six query modes."""

    def __init__(self, space, config=None, points=None, counter=None, unit=None):
        self.space = space
        self.config = config or OracleConfig()
        self.counter = counter if counter is not None else OpCounter()
        cfg = self.config
        hcfg = HierarchyConfig(epsilon=cfg.epsilon, lam=cfg.lam, c=cfg.c)
        self.h = NetHierarchy(space, hcfg, points=[])
        self.epsilon = cfg.epsilon
        self.c = self.h.c
        n0 = space.n_live() if points is None else len(points)
        if unit is None:
            unit = float(space.d_min) if space.n_live() >= 2 else 1.0
        self.unit = float(unit)
        self._set_parameters(max(n0, 2))
        jump_ks = ()
        if cfg.mode == "dynamic_variant9":
            jump_ks = tuple(1 << j for j in range(self.jump_bits + 1))
        self.nav = NavTree(self.h, jump_ks=jump_ks, counter=self.counter)
        self.te = TreeEmbedding(self.h, cfg.lam, seed=cfg.seed, l=5.0, unit=self.unit)
        self.snow = SnowflakeEmbedding(self.h, cfg.lam, dim=cfg.D, seed=cfg.seed + 1, unit=self.unit)
        self.nbhd = NeighborhoodIndex(self.h, self.snow, bits=cfg.bits, counter=self.counter)
        self.table = PairTable(self.h, cfg.lam, K=cfg.table_K, counter=self.counter)
        self._forest = None
        self._centroid = None
        self.band = None
        self._band_n = 0
        self.diagnostics = []
        self.h.subscribe(self._on_event)
        for p in (space.live_ids() if points is None else points):
            self.h.insert_point(p)
        if cfg.mode == "static_binary":
            self.centroid()
        if not cfg.dynamic:
            self.te.precompute()
            if self.use_step2:
                self.snow.precompute()
                self._calibrate()
        self._built_version = self.h.version

    # -- parameters -----------------------------------------------------------------

    def _set_parameters(self, n):
        cfg = self.config
        lam = cfg.lam
        self.n_param = n
        self.loglog = math.log2(max(2.0, math.log2(max(n, 4))))
        forest_cost = 4 ** math.ceil(lam)
        centroid_cost = max(1, math.ceil(self.loglog)) ** 2
        self.p = cfg.p if cfg.p is not None else max(2, min(forest_cost, centroid_cost))
        self.forest_first = forest_cost <= centroid_cost
        self.stride_static = _clog(math.log2(max(n, 4)), 2)
        self.stride_dynamic = _clog(self.p, 2)
        self.stride3 = _clog(lam, 5)
        self.stride = self.stride_dynamic if cfg.dynamic else self.stride_static
        if cfg.dynamic:
            self.tail = _clog(self.p, 5.0 * lam / 4.0) if 5.0 * lam / 4.0 > 1 else 1
        else:
            self.tail = _clog(math.log2(max(n, 4)), 5)
        if cfg.step2 == "on":
            self.use_step2 = True
        elif cfg.step2 == "off":
            self.use_step2 = False
        elif cfg.dynamic:
            self.use_step2 = lam < self.p
        else:
            self.use_step2 = lam < math.log2(max(n, 4)) ** (1.0 / 3.0)
        if not hasattr(self, "jump_bits"):
            self.jump_bits = JUMP_BITS

    def window1_width(self):
        """Width of the Step-1 6-neighbor window implied by the tail parameter."""
        return self.tail + 2 + 2 + 1

    def probe_formula(self, mode=None):
        """Binary-search probe budget per mode: log2 of its window width (floored at 1)."""
        mode = mode or self.config.mode
        if mode == "static_binary":
            return _clog(max(self.loglog, 2.0), 2) + 1
        if mode == "static_loglogN":
            return _clog(self.window1_width() + 1, 2)
        width = self.window1_width()
        if self.use_step2 and self.band is not None:
            width = min(width, self.window2_width())
        return _clog(width + 1, 2)

    def window2_width(self):
        lo, hi = self.band
        return math.ceil(log5(hi / lo)) + 2 + 2

    def _on_event(self, kind, payload):
        if kind == "rebuild" and self.config.dynamic:
            self.band = None

    # -- substructures ----------------------------------------------------------

    def forest(self):
        if self._forest is None:
            self._forest = DominantForest(self.h, lam=self.config.lam, counter=self.counter)
        return self._forest

    def centroid(self):
        if self._centroid is None or self._centroid.epoch != self.nav.epoch:
            self._centroid = CentroidIndex(self.nav, dynamic=self.config.dynamic, counter=self.counter)
        return self._centroid

    def _calibrate(self):
        """Band ``[q_lo, q_hi]`` of squared snowflake distance over distance, from random pairs."""
        ids = [p for p in self.h.order if p not in self.h.tombstones]
        if len(ids) < 2:
            self.band = (1e-12, 1.0)
            self._band_n = len(ids)
            return
        rng = np.random.default_rng(self.config.seed + 7)
        qs = []
        for _ in range(self.config.calib_pairs):
            x, y = rng.choice(len(ids), 2, replace=False)
            x, y = ids[int(x)], ids[int(y)]
            d = self.space.dist(x, y)
            f = self.snow.snowflake_coords(x) - self.snow.snowflake_coords(y)
            qs.append(float(f @ f) / d)
        qs = np.array(qs)
        lo = max(float(qs.min()) / 2.0, 1e-300)
        self.band = (lo, min(1.0, float(qs.max()) * 2.0))
        self._band_n = len(ids)

    def _ensure_current(self):
        if self.config.dynamic:
            n = self.h.n_live
            if n >= 2 * self.n_param:
                self._set_parameters(n)
            if self.use_step2 and (self.band is None or n >= 2 * self._band_n):
                self._calibrate()
        elif self.h.version != self._built_version:
            raise EpochError("static oracle queried after its hierarchy changed; rebuild it")

    # -- predicates ------------------------------------------------------------

    def _six(self, x, y, m):
        """``True`` when the level-``m`` ancestors coincide or are 6-neighbors."""
        h = self.h
        a = h.ancestor_point(x, m)
        b = h.ancestor_point(y, m)
        if a == b:
            return True
        d = h.nbrs[a].get(b)
        return d is not None and d <= 6.0 * radius(m) and h.top[a] >= m and h.top[b] >= m

    def _linked(self, x, y, m, b):
        h = self.h
        a = h.ancestor_point(x, m)
        q = h.ancestor_point(y, m)
        if a == q:
            return None
        d = h.nbrs[a].get(q)
        if d is not None and d <= b * radius(m) and h.top[a] >= m and h.top[q] >= m:
            return (a, q, d)
        return None

    # -- steps ------------------------------------------------------------------

    def step1_coarse(self, x, y):
        """Distance bracket from the tree embedding and the 6-neighbor window it implies."""
        if x == y:
            return 0.0, None
        k = self.te.lca_level(x, y)
        u = self.te.rh.unit
        dlo = u * 5.0 ** (k - 1 - self.tail)
        dhi = u * 5.0 ** (k + 1)
        est = self.te.tree_distance(x, y)
        return est, (dlo, dhi, window_for_distances(dlo, dhi, 6), k)

    def step2_refine(self, x, y, dlo, dhi, lo6):
        """Narrowed distance bracket, or ``None`` when no neighborhood holds both ancestors."""
        h = self.h
        nx = h.lowest_explicit_at_or_above(x, lo6)
        ny = h.lowest_explicit_at_or_above(y, lo6)
        la = max(nx.level, ny.level)
        U = self.nbhd.center_level(dhi, la, self.stride)
        a = h.ancestor_point(x, U)
        if not self.nbhd.co_resident(a, y, U):
            self.counter.add("step2_miss", 1)
            return None
        if nx.point == ny.point:
            s_lo, s_hi = 0.0, 0.0
        else:
            s_lo, s_hi = self.nbhd.sq_dist_range(a, U, nx.point, ny.point)
        q_lo, q_hi = self.band
        drift = 2 * radius(la) / 4.0
        lo = max(dlo, s_lo / q_hi - drift)
        hi = min(dhi, s_hi / q_lo + drift)
        if hi <= 0 or lo > hi:
            return None
        return max(lo, dlo), hi

    def step3_locate(self, x, y, lo6):
        """Lowest ancestral 6-neighbors via the pair table, then the ``c`` scan below them."""
        h = self.h
        nx = h.lowest_explicit_at_or_above(x, lo6)
        ny = h.lowest_explicit_at_or_above(y, lo6)
        entry = self.table.lookup(nx, ny)
        if entry is None:
            return None, 1
        a, b, m6, d6 = entry
        if self._six(x, y, m6 - 1):
            return None, 2
        found, ops = self._scan_c(x, y, m6)
        if found is None:
            return None, 2 + ops
        return ((a, b, m6, d6), found), 2 + ops

    def _scan_c(self, x, y, m6):
        lo, hi = c_window_from_six(m6, self.c)
        ops = 0
        for m in range(lo, hi + 1):
            ops += 1
            hit = self._linked(x, y, m, self.c)
            if hit is not None:
                if m == lo:
                    ops += 1
                    below = self.h.ancestor_point(x, m - 1) == self.h.ancestor_point(y, m - 1)
                    if below or self._linked(x, y, m - 1, self.c) is not None:
                        return None, ops
                return (hit[0], hit[1], m, hit[2]), ops
        return None, ops

    def _bisect_six(self, x, y, lo, hi):
        """Lowest level in ``[lo, hi]`` where the 6-predicate holds, with probe count."""
        probes = 0
        while lo < hi:
            mid = (lo + hi) // 2
            probes += 1
            if self._six(x, y, mid):
                hi = mid
            else:
                lo = mid + 1
        return lo, probes

    def _jump_bisect_six(self, x, y, lo, hi):
        """Binary lifting over explicit ``x``-ancestors using the ``2^j``-jump trees."""
        h = self.h
        nav = self.nav
        leaf = nav.leaf_id(x)
        w_node = h.lowest_explicit_at_or_above(x, hi)
        w = nav.node_id(w_node)
        level = nav.tree.level
        probes = 0
        j = self.jump_bits
        while lo < level[w] and j >= 0:
            k = 1 << j
            m = k * ((level[w] - 1) // k)
            if m < lo:
                j -= 1
                continue
            z = nav.tree.k_jump(leaf, w, k) if m > level[leaf] else leaf
            lz = level[z]
            if lz >= level[w]:
                j -= 1
                continue
            probes += 1
            if self._six(x, y, lz):
                w = z
            else:
                lo = lz + 1
                if k == 1:
                    j = -1
        return level[w], probes

    # -- queries -------------------------------------------------------------------

    def query(self, x, y):
        return self.answer(x, y).estimate

    def answer(self, x, y):
        h = self.h
        h.check_query_point(x)
        h.check_query_point(y)
        if x == y:
            return Answer(0.0, h.leaf_level(x), (x, x), "trivial", False)
        self._ensure_current()
        mode = self.config.mode
        if mode == "static_binary":
            return self._answer_centroid(x, y)
        ops = 0
        _, info = self.step1_coarse(x, y)
        dlo, dhi, (lo6, hi6), k = info
        ops += max(1, math.ceil(math.log2(len(self.te.chain(x)) + 1)))
        window = (lo6, hi6)
        if mode in ("static_O1", "dynamic_O1", "static_loglogLambda", "dynamic_variant9") and self.use_step2:
            refined = self.step2_refine(x, y, dlo, dhi, lo6)
            ops += 4
            if refined is not None:
                w2 = window_for_distances(refined[0], refined[1], 6)
                window = (max(lo6, w2[0]), min(hi6, w2[1]))
                if window[0] > window[1]:
                    window = (lo6, hi6)
        lo, hi = window
        if mode in ("static_O1", "dynamic_O1"):
            located, extra = self.step3_locate(x, y, lo)
            ops += extra
            if located is not None:
                (a6, b6, m6, d6), (a, b, m, d) = located
                self.counter.add("fast_path_ops", ops)
                self.counter.add("fast_path_queries", 1)
                return Answer(d, m, (a, b), "steps", False, m6, (a6, b6), d6, window, 0, ops)
            return self._fallback(x, y, window, ops)
        # binary-search variants
        if not self._six(x, y, hi) or self._six(x, y, lo - 1):
            return self._fallback(x, y, window, ops + 2)
        ops += 2
        if mode == "dynamic_variant9":
            m6, probes = self._jump_bisect_six(x, y, lo, hi)
        else:
            m6, probes = self._bisect_six(x, y, lo, hi)
        ops += probes
        pair6 = self._linked(x, y, m6, 6.0)
        if pair6 is None or self._six(x, y, m6 - 1):
            return self._fallback(x, y, window, ops)
        found, extra = self._scan_c(x, y, m6)
        ops += extra
        if found is None:
            return self._fallback(x, y, window, ops)
        a, b, m, d = found
        self.counter.add("variant_probes", probes)
        return Answer(d, m, (a, b), "binary", False, m6, (pair6[0], pair6[1]), pair6[2],
                      window, probes, ops)

    def _answer_centroid(self, x, y):
        ans = self.centroid().centroid_query(x, y)
        probes = ans.outer_probes
        return Answer(ans.estimate, ans.level, ans.pair, "centroid", ans.fallback, probes=probes,
                      ops=ans.outer_probes + ans.inner_probes,
                      extra={"outer_probes": ans.outer_probes, "inner_probes": ans.inner_probes})

    def _fallback(self, x, y, window, ops):
        self.counter.add("fallbacks", 1)
        order = ("forest", "centroid") if self.forest_first else ("centroid", "forest")
        name = order[0]
        if name == "forest":
            fa = self.forest().forest_query(x, y)
            est, level, pair = fa.estimate, fa.level, fa.pair
        else:
            ca = self.centroid().centroid_query(x, y)
            est, level, pair = ca.estimate, ca.level, ca.pair
        return Answer(est, level, pair, name, True, window=window, ops=ops)

    def query_variant(self, x, y, mode):
        """Answer with another mode's search over this oracle's structures."""
        if mode not in MODES:
            raise ParameterError(f"unknown mode {mode!r}")
        if (mode in DYNAMIC_MODES) != self.config.dynamic:
            raise ParameterError(f"mode {mode} needs a {'dynamic' if mode in DYNAMIC_MODES else 'static'} oracle")
        if mode == "dynamic_variant9" and not self.nav.jump_ks:
            raise ParameterError("dynamic_variant9 needs the jump trees registered at build")
        saved = self.config.mode
        self.config.mode = mode
        try:
            return self.answer(x, y)
        finally:
            self.config.mode = saved

    # -- updates -----------------------------------------------------------------

    def dynamic_update(self, op, arg):
        """``("insert", coords_or_id)`` or ``("delete", id)``; returns the affected id."""
        if not self.config.dynamic:
            raise OracleError("static oracles do not accept updates; build a dynamic mode")
        if op == "insert":
            if isinstance(arg, (int, np.integer)):
                p = int(arg)
            else:
                p = self.space.add_point(arg)
            self.h.insert_point(p)
            return p
        if op == "delete":
            self.h.delete_point(int(arg))
            return int(arg)
        raise ParameterError(f"unknown update {op!r}")

    # -- audit and reports ----------------------------------------------------------

    def audit_record(self, x, y):
        ans = self.answer(x, y)
        exact = self.space.exact_query(x, y)
        rec = {"x": int(x), "y": int(y), "exact": exact, "estimate": ans.estimate,
               "ratio": ans.estimate / exact if exact > 0 else 1.0,
               "mode": self.config.mode, "path_taken": ans.path_taken,
               "fallback_used": ans.fallback_used, "level": ans.level,
               "i": level_containing(exact) if exact > 0 else None,
               "level6": ans.level6, "d6": ans.d6, "window": list(ans.window) if ans.window else None,
               "probes": ans.probes, "ops": ans.ops}
        rec.update(ans.extra)
        return rec

    def size_report(self):
        out = {"points": self.h.n_live, "links": self.h.n_links, "tree_nodes": len(self.nav.tree),
               "pair_table": len(self.table.entries), "packed_vectors": len(self.nbhd.vectors),
               "stride": self.stride, "tail": self.tail, "p": self.p, "step2": self.use_step2}
        if self._forest is not None:
            out["forest"] = self._forest.size_report()
        if self._centroid is not None:
            out["centroid"] = self._centroid.size_report()
        return out

    def verify_invariants(self, sample=200):
        report = {"hierarchy": self.h.verify_invariants()}
        report["restricted_tree"] = self.te.rh.verify_invariants(sample=self.h.order[:sample])
        report["restricted_snowflake"] = self.snow.rh.verify_invariants(sample=self.h.order[:sample])
        if self._forest is not None:
            report["forest"] = self._forest.verify_invariants(sample=sample)
        if self._centroid is not None:
            report["centroid"] = self._centroid.verify_invariants(check_edges=self.h.n_live <= 2000)
        return report

    def corrupt_link(self, p, q, factor=2.0):
        """Test hook: scale one cached link distance so audits have something to catch."""
        d = self.h.nbrs[p][q]
        self.h.nbrs[p][q] = d * factor
        self.h.nbrs[q][p] = d * factor

    # -- persistence ------------------------------------------------------------------

    def digest(self):
        h = self.h
        m = hashlib.sha256()
        for p in h.order:
            m.update(struct.pack("<qq", p, min(h.top[p], 1 << 62)))
        m.update(struct.pack("<q", h.n_links))
        return m.hexdigest()

    def save(self, fh):
        """Write a versioned binary snapshot to a binary file object."""
        sp = self.space
        sections = [(b"CONF", self.config.to_json().encode())]
        buf = io.BytesIO()
        if sp.kind == "points":
            np.save(buf, np.asarray(sp._coords[:sp.size]), allow_pickle=False)
        else:
            np.save(buf, sp._matrix, allow_pickle=False)
        sections.append((b"SPAC", sp.kind.encode() + b"\n" + buf.getvalue()))
        sections.append((b"LIVE", np.array([sp.is_live(i) for i in range(sp.size)], dtype=np.uint8).tobytes()))
        sections.append((b"ORDR", np.array(self.h.order, dtype=np.int64).tobytes()))
        sections.append((b"TOMB", np.array(sorted(self.h.tombstones), dtype=np.int64).tobytes()))
        meta = {"digest": self.digest(), "unit": self.unit, "band": self.band}
        sections.append((b"META", json.dumps(meta).encode()))
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<I", len(sections)))
        for tag, payload in sections:
            fh.write(tag)
            fh.write(struct.pack("<Q", len(payload)))
            fh.write(payload)

    @classmethod
    def load(cls, fh):
        if fh.read(len(MAGIC)) != MAGIC:
            raise OracleError("not an oracle snapshot")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != FORMAT_VERSION:
            raise OracleError(f"unsupported snapshot version {version}")
        (count,) = struct.unpack("<I", fh.read(4))
        sec = {}
        for _ in range(count):
            tag = fh.read(4)
            (length,) = struct.unpack("<Q", fh.read(8))
            payload = fh.read(length)
            if len(payload) != length:
                raise OracleError("truncated snapshot")
            sec[tag] = payload
        config = OracleConfig.from_json(sec[b"CONF"].decode())
        kind, _, arr = sec[b"SPAC"].partition(b"\n")
        data = np.load(io.BytesIO(arr), allow_pickle=False)
        space = MetricSpace(coords=data) if kind == b"points" else MetricSpace(matrix=data)
        live = np.frombuffer(sec[b"LIVE"], dtype=np.uint8)
        order = np.frombuffer(sec[b"ORDR"], dtype=np.int64).tolist()
        tomb = set(np.frombuffer(sec[b"TOMB"], dtype=np.int64).tolist())
        meta = json.loads(sec[b"META"].decode())
        oracle = cls(space, config, points=order, unit=meta["unit"])
        for p in sorted(tomb):
            oracle.h.delete_point(p)
        for i, ok in enumerate(live):
            if not ok and space.is_live(i):
                space.delete(i)
        if oracle.digest() != meta["digest"]:
            raise OracleError("snapshot digest mismatch after reload")
        return oracle
