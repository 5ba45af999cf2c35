"""Seeded synthetic datasets for benchmarks and tests."""

from __future__ import annotations

import math

import numpy as np

from .errors import ParameterError
from .metric import MetricSpace, dump_dataset

KINDS = ("uniform", "clustered", "grid", "line", "matrix-random-metric")
BOX = 1000.0


def _uniform(n, dim, rng):
    return rng.random((n, dim)) * BOX


def _clustered(n, dim, rng):
    k = max(2, n // 100)
    centers = rng.random((k, dim)) * BOX
    spread = BOX / (20.0 * math.sqrt(k))
    labels = rng.integers(0, k, n)
    return centers[labels] + rng.normal(0.0, spread, (n, dim))


def _grid(n, dim):
    side = math.ceil(n ** (1.0 / dim) - 1e-9)
    while side ** dim < n:
        side += 1
    idx = np.arange(n)
    out = np.zeros((n, dim))
    for k in range(dim - 1, -1, -1):
        out[:, k] = idx % side
        idx = idx // side
    return out


def _line(n, rng):
    gaps = rng.exponential(1.0, n) + 0.05
    return np.cumsum(gaps).reshape(-1, 1)


def random_graph_metric(n, rng, extra_edges=2):
    """Shortest-path metric of a connected random weighted graph (ring plus chords)."""
    w = np.full((n, n), np.inf)
    np.fill_diagonal(w, 0.0)
    for i in range(n):
        j = (i + 1) % n
        if i != j:
            w[i, j] = w[j, i] = min(w[i, j], 1.0 + rng.random() * 9.0)
    for _ in range(extra_edges * n):
        i, j = rng.integers(0, n, 2)
        if i != j:
            d = 1.0 + rng.random() * 9.0
            w[i, j] = w[j, i] = min(w[i, j], d)
    for k in range(n):
        np.minimum(w, w[:, k:k + 1] + w[k:k + 1, :], out=w)
    return w


def generate(kind, n, dim=2, seed=0):
    """Build the dataset as a :class:`MetricSpace`."""
    if kind not in KINDS:
        raise ParameterError(f"unknown dataset kind {kind!r}; choose from {', '.join(KINDS)}")
    if n < 1:
        raise ParameterError("n must be positive")
    if dim < 1:
        raise ParameterError("dim must be positive")
    rng = np.random.default_rng(seed)
    if kind == "uniform":
        return MetricSpace(coords=_uniform(n, dim, rng))
    if kind == "clustered":
        return MetricSpace(coords=_clustered(n, dim, rng))
    if kind == "grid":
        return MetricSpace(coords=_grid(n, dim))
    if kind == "line":
        return MetricSpace(coords=_line(n, rng))
    return MetricSpace(matrix=random_graph_metric(n, rng))


def generate_text(kind, n, dim=2, seed=0):
    """Dataset in the text format of :func:`netoracle.metric.load_dataset`."""
    sp = generate(kind, n, dim, seed)
    return dump_dataset(sp), ("matrix" if sp.kind == "matrix" else "points")
