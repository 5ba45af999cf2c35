"""Point store, distance evaluation, dataset ingestion and the exact oracle."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import DatasetFormatError, DuplicatePointError, EndpointError, UnknownPointError

EXACT_STATS_LIMIT = 10_000


@dataclass(frozen=True)
class SpaceStats:
    n: int
    d_min: float
    d_max: float
    alpha: float
    estimate: bool


class MetricSpace:
    """A finite metric space over dense integer ids.

    Two storage kinds are supported: Euclidean coordinates (any dimension) and an
    explicit symmetric distance matrix.  Coordinate spaces can grow; matrix spaces
    are fixed at construction.  Deleted ids keep their coordinates so structures
    that still reference them (until a rebuild) can evaluate distances.
    """

    def __init__(self, coords=None, matrix=None):
        if (coords is None) == (matrix is None):
            raise ValueError("give exactly one of coords or matrix")
        if coords is not None:
            arr = np.asarray(coords, dtype=float)
            if arr.ndim == 1:
                arr = arr.reshape(-1, 1)
            if arr.ndim != 2:
                raise ValueError("coords must be a 2-D array")
            self.kind = "points"
            self.dim = arr.shape[1]
            self._coords = np.array(arr, dtype=float)
            self._tuples = [tuple(map(float, row)) for row in arr]
            self._matrix = None
            size = arr.shape[0]
        else:
            m = np.asarray(matrix, dtype=float)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ValueError("matrix must be square")
            self.kind = "matrix"
            self.dim = None
            self._matrix = m
            self._rows = [list(map(float, r)) for r in m]
            self._coords = None
            self._tuples = None
            size = m.shape[0]
        self._live = [True] * size
        self._size = size
        self._stats = None

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_points(cls, points):
        return cls(coords=points)

    @classmethod
    def from_matrix(cls, matrix):
        return cls(matrix=matrix)

    def add_point(self, coord):
        """Append a Euclidean point and return its id."""
        if self.kind != "points":
            raise TypeError("matrix spaces are fixed at construction")
        c = np.asarray(coord, dtype=float).reshape(-1)
        if c.shape[0] != self.dim:
            raise ValueError(f"expected {self.dim} coordinates, got {c.shape[0]}")
        pid = self._size
        if pid >= self._coords.shape[0]:
            grow = max(16, self._coords.shape[0])
            self._coords = np.vstack([self._coords, np.zeros((grow, self.dim))])
        self._coords[pid] = c
        self._tuples.append(tuple(map(float, c)))
        self._live.append(True)
        self._size += 1
        self._stats = None
        return pid

    # -- liveness -------------------------------------------------------------

    def __len__(self):
        return self._size

    @property
    def size(self):
        """Number of ids ever created (live or deleted)."""
        return self._size

    def live_ids(self):
        return [i for i in range(self._size) if self._live[i]]

    def n_live(self):
        return sum(self._live)

    def is_live(self, x):
        return 0 <= x < self._size and self._live[x]

    def check_live(self, x):
        if not isinstance(x, (int, np.integer)) or not 0 <= x < self._size:
            raise UnknownPointError(f"unknown point id {x!r}")
        if not self._live[x]:
            raise EndpointError(f"point {x} is deleted")

    def delete(self, x):
        self.check_live(x)
        self._live[x] = False
        self._stats = None

    def coords(self, x):
        if self.kind != "points":
            raise TypeError("matrix spaces have no coordinates")
        return self._coords[x]

    # -- distances --------------------------------------------------------------

    def dist(self, x, y):
        """Distance without liveness checks (structures may hold tombstones)."""
        if self.kind == "points":
            a = self._tuples[x]
            b = self._tuples[y]
            s = 0.0
            for u, v in zip(a, b):
                t = u - v
                s += t * t
            return math.sqrt(s)
        return self._rows[x][y]

    def dists_from(self, x, ids):
        """Vector of distances from ``x`` to every id in ``ids``."""
        ids = np.asarray(ids, dtype=np.int64)
        if self.kind == "points":
            # same left-to-right summation as dist() so both agree bit for bit
            diff = self._coords[ids] - self._coords[x]
            acc = diff[:, 0] * diff[:, 0]
            for k in range(1, self.dim):
                acc += diff[:, k] * diff[:, k]
            return np.sqrt(acc)
        return self._matrix[x, ids]

    def distance_eval(self, x, y):
        self.check_live(x)
        self.check_live(y)
        return self.dist(x, y)

    def exact_query(self, x, y):
        """Ground-truth distance used to audit every approximate answer."""
        return self.distance_eval(x, y)

    # -- summary statistics -----------------------------------------------------

    def stats(self, seed=0):
        if self._stats is None:
            self._stats = self._compute_stats(seed)
        return self._stats

    @property
    def d_min(self):
        return self.stats().d_min

    @property
    def d_max(self):
        return self.stats().d_max

    @property
    def alpha(self):
        return self.stats().alpha

    def _compute_stats(self, seed):
        ids = np.array(self.live_ids(), dtype=np.int64)
        n = len(ids)
        if n < 2:
            return SpaceStats(n, math.inf, 0.0, 1.0, False)
        if n <= EXACT_STATS_LIMIT:
            lo, hi = math.inf, 0.0
            for start in range(0, n - 1, 512):
                block = ids[start:start + 512]
                for k, x in enumerate(block):
                    rest = ids[start + k + 1:]
                    if len(rest) == 0:
                        continue
                    ds = self.dists_from(x, rest)
                    lo = min(lo, float(ds.min()))
                    hi = max(hi, float(ds.max()))
            if lo <= 0:
                raise DuplicatePointError("two points coincide (minimum distance 0)")
            return SpaceStats(n, lo, hi, hi / lo, False)
        rng = np.random.default_rng(seed)
        lo, hi = math.inf, 0.0
        for x in rng.choice(ids, size=min(n, 2000), replace=False):
            ds = self.dists_from(x, ids)
            ds = ds[ds > 0]
            lo = min(lo, float(ds.min()))
            hi = max(hi, float(ds.max()))
        return SpaceStats(n, lo, hi, hi / lo, True)

    def estimate_doubling_dimension(self, samples=64, seed=0):
        """Crude doubling-dimension estimate from greedy half-radius covers.

        Reporting only; oracles take the dimension as configuration.
        """
        ids = np.array(self.live_ids(), dtype=np.int64)
        if len(ids) < 3:
            return 1.0
        rng = np.random.default_rng(seed)
        worst = 1
        for x in rng.choice(ids, size=min(samples, len(ids)), replace=False):
            ds = self.dists_from(x, ids)
            r = float(np.median(ds[ds > 0]))
            ball = ids[ds <= r]
            uncovered = list(ball)
            centers = 0
            while uncovered:
                c = uncovered[0]
                dc = self.dists_from(c, uncovered)
                uncovered = [u for u, dd in zip(uncovered, dc) if dd > r / 2]
                centers += 1
            worst = max(worst, centers)
        return max(1.0, math.log2(worst))


def _clean_lines(text):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, line


def _parse_floats(line, lineno):
    try:
        vals = [float(tok) for tok in line.split()]
    except ValueError as exc:
        raise DatasetFormatError(f"not a number ({exc})", lineno) from None
    if any(not math.isfinite(v) for v in vals):
        raise DatasetFormatError("non-finite value", lineno)
    return vals


def load_dataset(source, fmt="points"):
    """Parse a dataset stream into a :class:`MetricSpace`.

    ``source`` may be bytes, str, or a binary/text file object.  ``fmt`` is
    ``"points"`` (one whitespace-separated coordinate row per line) or
    ``"matrix"`` (a line holding ``n`` followed by ``n`` rows of ``n`` values).
    Lines starting with ``#`` are ignored in both formats.
    """
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, (bytes, bytearray)):
        source = source.decode("utf-8")
    if not isinstance(source, str):
        raise TypeError("source must be bytes, str or a file object")
    lines = list(_clean_lines(source))
    if fmt == "points":
        rows = []
        dim = None
        for lineno, line in lines:
            vals = _parse_floats(line, lineno)
            if not vals:
                continue
            if dim is None:
                dim = len(vals)
            elif len(vals) != dim:
                raise DatasetFormatError(f"expected {dim} coordinates, got {len(vals)}", lineno)
            rows.append(vals)
        if not rows:
            raise DatasetFormatError("no points found")
        space = MetricSpace(coords=np.array(rows))
    elif fmt == "matrix":
        if not lines:
            raise DatasetFormatError("empty matrix file")
        lineno, head = lines[0]
        try:
            n = int(head.split()[0])
        except ValueError:
            raise DatasetFormatError("first line must hold the point count", lineno) from None
        if len(head.split()) != 1 or n < 1:
            raise DatasetFormatError("first line must hold a single positive count", lineno)
        body = lines[1:]
        if len(body) != n:
            where = body[n][0] if len(body) > n else None
            raise DatasetFormatError(f"expected {n} matrix rows, found {len(body)}", where)
        m = np.zeros((n, n))
        for r, (lineno, line) in enumerate(body):
            vals = _parse_floats(line, lineno)
            if len(vals) != n:
                raise DatasetFormatError(f"expected {n} values, got {len(vals)}", lineno)
            if vals[r] != 0:
                raise DatasetFormatError("diagonal entry must be 0", lineno)
            if any(v < 0 for v in vals):
                raise DatasetFormatError("negative distance", lineno)
            m[r] = vals
        for r in range(n):
            for s in range(r):
                if m[r, s] != m[s, r]:
                    raise DatasetFormatError(f"matrix not symmetric at ({s},{r})", body[r][0])
        space = MetricSpace(matrix=m)
    else:
        raise ValueError(f"unknown dataset format {fmt!r}")
    space.stats()
    return space


def dump_dataset(space, fmt=None):
    """Serialise a space back into one of the text formats (live ids only)."""
    fmt = fmt or space.kind
    out = io.StringIO()
    ids = space.live_ids()
    if fmt == "points":
        for x in ids:
            out.write(" ".join(repr(float(v)) for v in space.coords(x)) + "\n")
    else:
        out.write(f"{len(ids)}\n")
        for x in ids:
            out.write(" ".join(repr(float(space.dist(x, y))) for y in ids) + "\n")
    return out.getvalue()
