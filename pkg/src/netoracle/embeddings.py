"""Restricted hierarchy with random radii, a tree embedding and a snowflake embedding.

All scales are measured in a fixed unit ``u`` (the minimum interpoint distance
when the structure is built), so restricted level ``i`` has nominal scale
``u * l^i``.  Level 0 holds every point; level ``i >= 1`` holds the points
whose hierarchy top reaches ``floor(log5(4 u l^i))``.  Every point lies within
``5^h / 4`` of its hierarchy ancestor at level ``h``, so each point is within
``u * l^i`` of an earlier (or equal) member of every restricted level, and a
radius drawn from ``[u l^i, 2 u l^i]`` always captures it.

A point is *captured* at level ``i`` by the earliest-inserted member ``v`` of
that level (inserted no later than the point) with ``d(v, x) <= r_i(v)``.
Capture decisions depend only on points inserted earlier, so they never change
once made.  The tree embedding hangs each level-``i`` member off its capturer
at level ``i + 1``; the snowflake embedding clusters points by their direct
capturer at each level.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
import warnings

import numpy as np

from .errors import LevelError, ParameterError

_MAX_LEVELS = 200


def _unit_float(seed, *key):
    """Deterministic uniform in ``[0, 1)`` keyed by ``seed`` and ``key``."""
    h = hashlib.blake2b(struct.pack(f"<{len(key) + 1}q", seed, *key), digest_size=8)
    return (int.from_bytes(h.digest(), "little") >> 11) * (1.0 / (1 << 53))


class RadiusSampler:
    """Truncated exponential radii on ``[a, 2a]`` with ``a = unit * l^i``.

    The rate is ``rho = 2 ln(lam^4) / (4 a)``, so ``rho * a = 2 ln lam`` at every
    level.  Densities and samples are exact for the truncated law; the inverse
    CDF is ``r = a - ln(1 - U (1 - e^(-rho a))) / rho``.
    """

    def __init__(self, l, lam, unit=1.0):
        if lam <= 1:
            raise ParameterError("the radius density needs lambda > 1")
        self.l = float(l)
        self.lam = float(lam)
        self.unit = float(unit)

    def interval(self, i):
        a = self.unit * self.l ** i
        return a, 2.0 * a

    def rate(self, i):
        a, _ = self.interval(i)
        return 8.0 * math.log(self.lam) / (4.0 * a)

    def pdf(self, i, r):
        a, b = self.interval(i)
        rho = self.rate(i)
        r = np.asarray(r, dtype=float)
        z = -math.expm1(-rho * a)
        out = rho * np.exp(-rho * (r - a)) / z
        return np.where((r >= a) & (r <= b), out, 0.0)

    def cdf(self, i, r):
        a, b = self.interval(i)
        rho = self.rate(i)
        r = np.clip(np.asarray(r, dtype=float), a, b)
        return -np.expm1(-rho * (r - a)) / -math.expm1(-rho * a)

    def from_uniform(self, i, u):
        a, b = self.interval(i)
        rho = self.rate(i)
        u = np.asarray(u, dtype=float)
        r = a - np.log1p(-u * -math.expm1(-rho * a)) / rho
        return np.clip(r, a, b)

    def sample(self, i, rng, size=None):
        """Draw from a numpy ``Generator`` (a seeded stream)."""
        return self.from_uniform(i, rng.random(size))

    def keyed(self, i, seed, point):
        """Radius of ``point`` at level ``i``, fixed by ``seed`` whatever the draw order."""
        return float(self.from_uniform(i, _unit_float(seed, i, point)))


def clamp_lambda(lam):
    if lam <= 1:
        warnings.warn(f"lambda {lam} <= 1 clamped to 1.01 for the radius density", stacklevel=3)
        return 1.01
    return float(lam)


class RestrictedHierarchy:
    """Restricted levels, keyed random radii and first-capture clusters over a hierarchy."""

    def __init__(self, hierarchy, l, lam, seed=0, unit=None):
        self.h = hierarchy
        self.l = float(l)
        self.lam = clamp_lambda(lam)
        self.seed = int(seed)
        sp = hierarchy.space
        if unit is None:
            unit = 1.0
            if sp.n_live() >= 2:
                unit = float(sp.d_min)
        self.unit = float(unit)
        self.sampler = RadiusSampler(self.l, self.lam, self.unit)
        self._build()
        hierarchy.subscribe(self._on_event)

    def _build(self):
        h = self.h
        self.seq = {}
        self.members = []
        self.radii = []
        self._root_radii = {}
        self._capture = {}
        self._comp = {}
        for p in h.order:
            self._add(p)

    def _on_event(self, kind, payload):
        if kind == "rebuild":
            self._build()
        elif kind == "insert":
            self._add(payload.point)

    # -- level bookkeeping ------------------------------------------------------

    def hierarchy_level(self, i):
        """Hierarchy level whose members form restricted level ``i >= 1``."""
        return math.floor(math.log(4.0 * self.unit * self.l ** i) / math.log(5.0) + 1e-12)

    def scale(self, i):
        return self.unit * self.l ** i

    @property
    def root(self):
        return self.h.order[0]

    def is_member(self, p, i):
        if i <= 0 or p == self.root:
            return True
        return self.h.top[p] >= self.hierarchy_level(i)

    def _add(self, p):
        self.seq[p] = len(self.seq)
        if p == self.root:
            self.members = [[p]]
            self.radii = [{}]
            return
        i = 0
        while self.is_member(p, i):
            if i == len(self.members):
                self.members.append([self.root])
                self.radii.append({})
            self.members[i].append(p)
            self.radii[i][p] = self.sampler.keyed(i, self.seed, p)
            i += 1
            if i > _MAX_LEVELS:
                raise LevelError("restricted hierarchy exceeds the level limit")

    def top_level(self):
        """Lowest level at which the first point is the only member."""
        return len(self.members)

    def radius(self, i, v):
        if i < 0:
            raise LevelError(f"restricted level {i} is negative")
        if v == self.root:
            r = self._root_radii.get(i)
            if r is None:
                r = self._root_radii[i] = self.sampler.keyed(i, self.seed, v)
            return r
        r = self.radii[i].get(v) if i < len(self.radii) else None
        if r is None:
            raise LevelError(f"point {v} is not a member of level {i}")
        return r

    # -- capture -----------------------------------------------------------------

    def capture(self, x, i):
        """Center of ``x``'s level-``i`` cluster: the earliest member whose radius holds ``x``."""
        key = (x, i)
        v = self._capture.get(key)
        if v is not None:
            return v
        if i >= self.top_level():
            v = self.root
        else:
            v = self._first_capture(x, i)
        self._capture[key] = v
        return v

    def _first_capture(self, x, i):
        sp = self.h.space
        mem = self.members[i]
        k = self.seq[x]
        seq = self.seq
        # members are stored in insertion order; only earlier ones compete
        hi = len(mem)
        while hi > 0 and seq[mem[hi - 1]] > k:
            hi -= 1
        ids = np.fromiter(mem[:hi], dtype=np.int64, count=hi)
        ds = sp.dists_from(x, ids)
        bound = 2.0 * self.scale(i) * (1 + 1e-9)
        for t in np.nonzero(ds <= bound)[0]:
            v = int(ids[t])
            if sp.dist(v, x) <= self.radius(i, v):
                return v
        raise LevelError(f"point {x} is not captured at restricted level {i}")

    def capture_all(self, i, xs=None):
        """First-capture centers for many points at once (vectorised over the members)."""
        xs = list(self.h.order if xs is None else xs)
        if i >= self.top_level():
            return {x: self.root for x in xs}
        sp = self.h.space
        mem = self.members[i]
        ids = np.fromiter(mem, dtype=np.int64, count=len(mem))
        mseq = np.array([self.seq[v] for v in mem])
        rad = np.array([self.radius(i, v) for v in mem])
        out = {}
        for start in range(0, len(xs), 256):
            chunk = xs[start:start + 256]
            dm = _block_dists(sp, chunk, ids)
            ok = (dm <= rad[None, :] * (1 + 1e-9)) & (mseq[None, :] <= np.array([self.seq[x] for x in chunk])[:, None])
            for row, x in enumerate(chunk):
                key = (x, i)
                if key in self._capture:
                    out[x] = self._capture[key]
                    continue
                v = None
                for t in np.nonzero(ok[row])[0]:
                    cand = int(ids[t])
                    if sp.dist(cand, x) <= rad[t]:
                        v = cand
                        break
                if v is None:
                    v = self._first_capture(x, i)
                self._capture[key] = v
                out[x] = v
        return out

    def competitors(self, v, i):
        """Members inserted before ``v`` within ``4 u l^i`` of it."""
        key = (v, i)
        comp = self._comp.get(key)
        if comp is None:
            mem = self.members[i] if i < len(self.members) else [self.root]
            k = self.seq[v]
            earlier = [u for u in mem if self.seq[u] < k]
            comp = ()
            if earlier:
                ds = self.h.space.dists_from(v, earlier)
                lim = 4.0 * self.scale(i)
                comp = tuple(u for u, d in zip(earlier, ds) if d <= lim)
            self._comp[key] = comp
        return comp

    def parent(self, p, i):
        """Tree parent at level ``i + 1`` of the level-``i`` member ``p``."""
        if not self.is_member(p, i):
            raise LevelError(f"point {p} is not a member of restricted level {i}")
        return self.capture(p, i + 1)

    def verify_invariants(self, sample=None):
        bad = []
        sp = self.h.space
        for i in range(len(self.members)):
            a, b = self.sampler.interval(i)
            for v in self.members[i]:
                r = self.radius(i, v)
                if not a <= r <= b:
                    bad.append(f"radius of {v} at level {i} outside [{a}, {b}]")
        pts = list(self.h.order if sample is None else sample)
        for i in range(self.top_level()):
            for x in pts:
                v = self.capture(x, i)
                if sp.dist(v, x) > self.radius(i, v):
                    bad.append(f"{x} outside the radius of its center {v} at level {i}")
                if self.seq[v] > self.seq[x]:
                    bad.append(f"{x} captured by later point {v} at level {i}")
                for u in self.members[i]:
                    if self.seq[u] >= self.seq[v]:
                        break
                    if sp.dist(u, x) <= self.radius(i, u):
                        bad.append(f"{x} at level {i}: earlier member {u} captures it before {v}")
                        break
        return bad


def _block_dists(space, xs, ids):
    if space.kind == "points":
        a = space._coords[np.asarray(xs, dtype=np.int64)]
        b = space._coords[ids]
        acc = np.zeros((len(a), len(b)))
        for k in range(space.dim):
            t = a[:, k][:, None] - b[:, k][None, :]
            acc += t * t
        return np.sqrt(acc)
    return space._matrix[np.ix_(np.asarray(xs, dtype=np.int64), ids)]


class TreeEmbedding:
    """Random tree metric over the restricted hierarchy; edges at level ``j`` cost ``u (4l)^j``."""

    def __init__(self, hierarchy, lam, seed=0, l=None, unit=None):
        lam = clamp_lambda(lam)
        self.l = float(l) if l is not None else 37.0 * lam * lam
        self.rh = RestrictedHierarchy(hierarchy, self.l, lam, seed=seed, unit=unit)
        self.h = hierarchy
        self._chains = {}
        hierarchy.subscribe(self._on_event)

    def _on_event(self, kind, payload):
        if kind == "rebuild":
            self._chains = {}

    def chain(self, x):
        """Tree ancestors of ``x`` at levels ``0, 1, ...`` ending with the first point."""
        c = self._chains.get(x)
        if c is None:
            rh = self.rh
            out = [x]
            i = 0
            root = rh.root
            while out[-1] != root:
                out.append(rh.parent(out[-1], i))
                i += 1
            c = tuple(out)
            self._chains[x] = c
        return c

    def precompute(self):
        """Capture every member's parent level by level, vectorised over the members."""
        rh = self.rh
        for i in range(rh.top_level()):
            rh.capture_all(i + 1, rh.members[i])

    def lca_level(self, x, y):
        if x == y:
            return 0
        cx, cy = self.chain(x), self.chain(y)
        root = self.rh.root
        lo, hi = 1, max(len(cx), len(cy))
        while lo < hi:
            mid = (lo + hi) // 2
            a = cx[mid] if mid < len(cx) else root
            b = cy[mid] if mid < len(cy) else root
            if a == b:
                hi = mid
            else:
                lo = mid + 1
        return lo

    def edge_length(self, j):
        return self.rh.unit * (4.0 * self.l) ** j

    def distance_at(self, k):
        """Tree distance of two points whose chains first meet at level ``k``."""
        return 2.0 * sum(self.edge_length(j) for j in range(1, k + 1))

    def tree_distance(self, x, y):
        self.h.space.check_live(x)
        self.h.space.check_live(y)
        return self.distance_at(self.lca_level(x, y))

    def tail_threshold(self, i):
        """Stretch beyond which a pair counts toward the level-``i`` tail."""
        return 32.0 / 5.0 * (4.0 * self.l) ** (i + 1)

    def tail_bound(self, i):
        return (4.0 / (5.0 * self.rh.lam)) ** i


class SnowflakeEmbedding:
    """Randomised embedding of ``(S, d^(1/2))`` into ``R^D``, updated point by point."""

    def __init__(self, hierarchy, lam, dim=64, seed=0, l=8.0, unit=None):
        lam = clamp_lambda(lam)
        self.lam = lam
        self.dim = int(dim)
        if self.dim < 1:
            raise ParameterError("snowflake dimension must be positive")
        self.seed = int(seed)
        self.rh = RestrictedHierarchy(hierarchy, l, lam, seed=seed, unit=unit)
        self.h = hierarchy
        self.tau = math.log(2.0) / (8.0 * lam)
        self.scale_factor = 1.0 / (2 ** 7 * lam)
        self._sigma = {}
        self._coords = {}
        self._g = {}
        hierarchy.subscribe(self._on_event)

    def _on_event(self, kind, payload):
        if kind == "rebuild":
            self._coords = {}
            self._g = {}

    def sigma(self, i, center):
        """Bernoulli bits of the cluster centered at ``center`` on level ``i``, one per coordinate."""
        key = (i, center)
        s = self._sigma.get(key)
        if s is None:
            nbytes = (self.dim + 7) // 8
            buf = b""
            block = 0
            while len(buf) < nbytes:
                h = hashlib.blake2b(struct.pack("<4q", self.seed, i, center, block), digest_size=64)
                buf += h.digest()
                block += 1
            s = np.unpackbits(np.frombuffer(buf[:nbytes], dtype=np.uint8), bitorder="little")[:self.dim]
            s = s.astype(float)
            self._sigma[key] = s
        return s

    def boundary_distance(self, x, i):
        """Distance from ``x`` to the boundary of its level-``i`` cluster."""
        if i < 0:
            raise LevelError(f"restricted level {i} is negative")
        key = (x, i)
        g = self._g.get(key)
        if g is None:
            rh = self.rh
            sp = self.h.space
            v = rh.capture(x, i)
            g = rh.radius(i, v) - sp.dist(v, x)
            for u in rh.competitors(v, i):
                g = min(g, sp.dist(u, x) - rh.radius(i, u))
            self._g[key] = g
        return g

    def level_terms(self, x):
        """``(level, center, weight)`` per level up to saturation in the top cluster."""
        rh = self.rh
        out = []
        i = 0
        top = rh.top_level()
        while True:
            v = rh.capture(x, i)
            s = rh.scale(i)
            t = self.boundary_distance(x, i) / self.tau
            out.append((i, v, math.sqrt(s) if t >= s else t / math.sqrt(s)))
            if i >= top and v == rh.root and t >= s:
                return out
            i += 1
            if i > _MAX_LEVELS:
                raise LevelError("snowflake level sum did not saturate")

    def raw_coords(self, x):
        """``(f^(1)(x), ..., f^(D)(x))`` centered so the top cluster contributes nothing."""
        c = self._coords.get(x)
        if c is None:
            c = np.zeros(self.dim)
            root = self.rh.root
            for i, v, w in self.level_terms(x):
                c += self.sigma(i, v) * w - self.sigma(i, root) * math.sqrt(self.rh.scale(i))
            self._coords[x] = c
        return c

    def snowflake_coords(self, x):
        """Final coordinates: ``D^(-1/2)`` times the raw vector, scaled to be non-expansive."""
        self.h.space.check_live(x)
        return self.scaled_coords(x)

    def scaled_coords(self, x):
        """Final coordinates without the liveness check; hierarchy ancestors may be tombstones."""
        return self.raw_coords(x) * (self.scale_factor / math.sqrt(self.dim))

    def distance(self, x, y):
        return float(np.linalg.norm(self.snowflake_coords(x) - self.snowflake_coords(y)))

    def upper_bound(self, d):
        """Per-coordinate bound on ``|f^(t)(x) - f^(t)(y)|`` for raw coordinates."""
        return 2 ** 7 * self.lam * math.sqrt(d)

    def lower_threshold(self):
        """Ratio ``||f(x) - f(y)|| / d^(1/2)`` below which a pair counts as a lower-tail event."""
        return 2.0 ** -11 / self.lam

    def precompute(self, xs=None):
        """Fill centers for many points at once; later lookups are cache hits."""
        xs = list(self.h.order if xs is None else xs)
        for i in range(self.rh.top_level()):
            self.rh.capture_all(i, xs)
        for x in xs:
            self.raw_coords(x)

    def dump_jsonl(self, xs=None):
        """Per point: level-annotated ``(center, g)`` records and final coordinates."""
        lines = []
        for x in (self.h.order if xs is None else xs):
            if x in self.h.tombstones:
                continue
            levels = [{"level": i, "cluster": v, "g": self.boundary_distance(x, i)}
                      for i, v, _ in self.level_terms(x)]
            lines.append(json.dumps({"point": x, "levels": levels,
                                     "coords": [float(c) for c in self.snowflake_coords(x)]}))
        return "\n".join(lines) + ("\n" if lines else "")
