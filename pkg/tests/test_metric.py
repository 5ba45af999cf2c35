import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netoracle.errors import DatasetFormatError, DuplicatePointError, EndpointError, UnknownPointError
from netoracle.metric import MetricSpace, dump_dataset, load_dataset

from conftest import uniform_space


def test_identity_and_345():
    sp = MetricSpace(coords=[[0.0, 0.0], [3.0, 4.0]])
    assert sp.distance_eval(0, 0) == 0.0
    assert sp.distance_eval(0, 1) == 5.0
    assert sp.exact_query(1, 0) == 5.0


def test_distances_match_plain_norm():
    rng = np.random.default_rng(3)
    pts = rng.random((200, 2)) * 50
    sp = MetricSpace(coords=pts)
    for _ in range(2000):
        x, y = rng.integers(0, 200, 2)
        want = math.hypot(pts[x, 0] - pts[y, 0], pts[x, 1] - pts[y, 1])
        assert sp.distance_eval(int(x), int(y)) == pytest.approx(want, rel=1e-12, abs=0)


def test_batched_and_scalar_agree_bitwise():
    sp = uniform_space(300, dim=3, seed=2)
    ds = sp.dists_from(7, list(range(300)))
    assert all(ds[j] == sp.dist(7, j) for j in range(300))


def test_exact_query_equals_distance_eval():
    sp = uniform_space(500, seed=5)
    rng = np.random.default_rng(0)
    for x, y in rng.integers(0, 500, (20000, 2)):
        assert sp.exact_query(int(x), int(y)) == sp.distance_eval(int(x), int(y))


def test_load_small_files():
    sp = load_dataset(b"0 0\n3 4")
    assert sp.n_live() == 2 and sp.d_min == 5 and sp.alpha == 1
    sp = load_dataset("0\n1\n5\n")
    assert (sp.d_min, sp.d_max, sp.alpha) == (1, 5, 5)


def test_alpha_matches_brute_force():
    rng = np.random.default_rng(9)
    pts = rng.random((1000, 2))
    text = "\n".join(f"{float(a)!r} {float(b)!r}" for a, b in pts)
    sp = load_dataset(io.StringIO(text))
    diff = pts[:, None, :] - pts[None, :, :]
    d = np.sqrt((diff ** 2).sum(-1))
    iu = np.triu_indices(1000, 1)
    assert sp.d_min == pytest.approx(d[iu].min(), rel=1e-12)
    assert sp.alpha == pytest.approx(d[iu].max() / d[iu].min(), rel=1e-12)


def test_matrix_space_returns_entry():
    m = [[0, 2, 5], [2, 0, 4], [5, 4, 0]]
    sp = load_dataset("3\n" + "\n".join(" ".join(map(str, r)) for r in m), "matrix")
    assert sp.exact_query(0, 2) == 5.0
    assert sp.exact_query(2, 1) == 4.0


@pytest.mark.parametrize("text,fmt", [
    ("1 2\n3\n", "points"),
    ("", "points"),
    ("2\n0 1\n2 0\n", "matrix"),
    ("2\n0 1\n", "matrix"),
    ("2\n1 1\n1 0\n", "matrix"),
    ("x y\n", "points"),
])
def test_malformed_inputs(text, fmt):
    with pytest.raises(DatasetFormatError):
        load_dataset(text, fmt)


def test_duplicates_rejected():
    with pytest.raises(DuplicatePointError):
        load_dataset("1 1\n1 1\n")


def test_unknown_and_deleted_ids():
    sp = uniform_space(5)
    with pytest.raises(UnknownPointError):
        sp.distance_eval(0, 99)
    sp.delete(3)
    with pytest.raises(EndpointError):
        sp.exact_query(3, 0)


def test_dump_round_trip():
    sp = uniform_space(40, dim=3, seed=4)
    again = load_dataset(dump_dataset(sp))
    assert np.array_equal(again._coords[:40], sp._coords[:40])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)), min_size=3, max_size=12,
                unique=True))
def test_triangle_inequality(points):
    sp = MetricSpace(coords=points)
    n = len(points)
    for x in range(n):
        for y in range(n):
            for z in range(n):
                assert sp.dist(x, z) <= sp.dist(x, y) + sp.dist(y, z) + 1e-9
