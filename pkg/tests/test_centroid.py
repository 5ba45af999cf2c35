import itertools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netoracle.centroid import CentroidIndex
from netoracle.hierarchy import HierarchyConfig, NetHierarchy
from netoracle.metric import MetricSpace
from netoracle.nav import NavTree

from conftest import random_pairs, uniform_space


def static_index(sp, eps=0.25):
    h = NetHierarchy(sp, HierarchyConfig(epsilon=eps, lam=3))
    return h, CentroidIndex(NavTree(h))


def dynamic_index(sp, eps=0.25):
    h = NetHierarchy(sp, HierarchyConfig(epsilon=eps, lam=3), points=[])
    ci = CentroidIndex(NavTree(h), dynamic=True)
    return h, ci


def grid64():
    return MetricSpace(coords=[[float(i)] for i in range(64)])


def test_self_query():
    h, ci = static_index(uniform_space(30))
    assert ci.centroid_query(4, 4).estimate == 0.0
    h, cd = dynamic_index(uniform_space(30))
    for p in range(30):
        h.insert_point(p)
    assert cd.centroid_query(4, 4).estimate == 0.0


def test_grid_routes_cross_at_most_six_paths():
    _, ci = static_index(grid64())
    assert ci.max_route_length() <= int(math.log2(64))


def test_grid_all_pairs_within_eps():
    _, ci = static_index(grid64(), eps=0.25)
    for x, y in itertools.combinations(range(64), 2):
        assert abs(ci.centroid_query(x, y).estimate / (y - x) - 1) <= 0.25 + 1e-9


def test_two_points_decompose_cleanly():
    sp = MetricSpace(coords=[[0.0], [1000.0]])
    _, ci = static_index(sp)
    assert 1 <= ci.size_report()["paths"] <= len(ci.nav.tree)
    assert ci.verify_invariants() == []
    assert ci.centroid_query(0, 1).estimate == 1000.0


@pytest.mark.parametrize("dynamic", [False, True])
def test_answers_are_lowest_ancestral_neighbors(dynamic):
    sp = uniform_space(600, seed=4)
    if dynamic:
        h, ci = dynamic_index(sp)
        for p in range(600):
            h.insert_point(p)
    else:
        h, ci = static_index(sp)
    for x, y in random_pairs(range(600), 2000, seed=1):
        a = ci.centroid_query(x, y)
        assert not a.fallback
        assert a.level == h.lowest_ancestral_neighbors(x, y)[2]


def test_dynamic_matches_frozen_static():
    sp = uniform_space(500, seed=6)
    h, cd = dynamic_index(sp)
    for p in range(500):
        h.insert_point(p)
    cs = CentroidIndex(cd.nav)
    for x, y in random_pairs(range(500), 2000, seed=2):
        a, b = cd.centroid_query(x, y), cs.centroid_query(x, y)
        assert (a.estimate, a.level, a.pair) == (b.estimate, b.level, b.pair)


def test_dynamic_invariants_every_hundred_inserts():
    sp = uniform_space(1000, seed=7)
    h, cd = dynamic_index(sp, eps=0.5)
    for p in range(1000):
        h.insert_point(p)
        if p % 100 == 99:
            assert cd.verify_invariants(check_edges=True) == []


@pytest.mark.slow
def test_dynamic_eps_01_audit():
    sp = uniform_space(1000, seed=8)
    h, cd = dynamic_index(sp, eps=0.1)
    for p in range(1000):
        h.insert_point(p)
    for x, y in random_pairs(range(1000), 10000, seed=3):
        assert abs(cd.centroid_query(x, y).estimate / sp.dist(x, y) - 1) <= 0.1 + 1e-9


@pytest.mark.slow
def test_static_edges_equal_brute_force_2000():
    _, ci = static_index(uniform_space(2000, seed=1), eps=0.5)
    assert ci.verify_invariants(check_edges=True) == []


@pytest.mark.slow
def test_probe_counts_n4096():
    n = 4096
    sp = uniform_space(n, seed=9)
    _, ci = static_index(sp, eps=0.5)
    loglog = math.ceil(math.log2(math.log2(n)))
    worst = max(a.outer_probes + a.inner_probes
                for a in (ci.centroid_query(x, y) for x, y in random_pairs(range(n), 3000)))
    assert worst <= 2 * loglog


pts = st.lists(st.tuples(st.integers(0, 400), st.integers(0, 400)), min_size=2, max_size=40,
               unique=True)


@settings(max_examples=30, deadline=None)
@given(pts, st.sampled_from([0.1, 0.5]), st.randoms(use_true_random=False))
def test_centroid_property(points, eps, rnd):
    sp = MetricSpace(coords=[list(map(float, p)) for p in points])
    order = list(range(len(points)))
    rnd.shuffle(order)
    h = NetHierarchy(sp, HierarchyConfig(epsilon=eps, lam=3), points=[])
    cd = CentroidIndex(NavTree(h), dynamic=True)
    for p in order:
        h.insert_point(p)
    assert cd.verify_invariants() == []
    cs = CentroidIndex(cd.nav)
    for x, y in itertools.combinations(range(len(points)), 2):
        ref = h.lowest_ancestral_neighbors(x, y)
        assert cd.centroid_query(x, y).level == ref[2]
        assert cs.centroid_query(x, y).level == ref[2]
