import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netoracle.forest import DominantForest, check_forest, lemma_c_window
from netoracle.hierarchy import HierarchyConfig, NetHierarchy
from netoracle.metric import MetricSpace
from netoracle.scale import level_containing

from conftest import random_pairs, uniform_space


def grid_forest(n, lam=1.0):
    sp = MetricSpace(coords=[[float(i)] for i in range(n)])
    h = NetHierarchy(sp, HierarchyConfig(epsilon=0.5), points=[])
    f = DominantForest(h, lam=lam)
    sizes = []
    for p in range(n):
        h.insert_point(p)
        sizes.append(f.n_trees)
    return f, sizes


def test_self_query_is_zero():
    sp = uniform_space(20)
    f = DominantForest(NetHierarchy(sp))
    assert f.forest_query(3, 3).estimate == 0.0


def test_two_far_points():
    sp = MetricSpace(coords=[[0.0], [100.0]])
    f = DominantForest(NetHierarchy(sp, HierarchyConfig(epsilon=0.5)))
    ans = f.forest_query(0, 1)
    assert abs(ans.estimate / 100.0 - 1) <= 0.5
    # separated by more than 2*5^j at every shared level, so everything sits in tree 0
    assert {t for t, _ in f.dominant_sets()} == {0}


def test_first_node_of_each_level_is_dominant_in_tree_zero():
    sp = MetricSpace(coords=[[0.0]])
    h = NetHierarchy(sp, HierarchyConfig(epsilon=0.5))
    f = DominantForest(h)
    sp.add_point([7.0])
    h.insert_point(1)
    sets = f.dominant_sets()
    # the root is present at every level and was inserted first
    assert all(0 in sets[(0, j)] for (_, j) in sets)
    for (t, j), members in sets.items():
        if 1 in members:
            assert (t == 0) == (7.0 > 2 * 5.0 ** j)


def test_grid_forest_stays_within_clique_bound():
    # level-j net points on an integer line are more than 5^(j-1) apart and
    # conflict within 2*5^j, so a conflict clique holds at most 11 of them
    _, sizes = grid_forest(1500)
    assert max(sizes) <= 11
    assert sizes == sorted(sizes)


@pytest.mark.xfail(strict=True, reason="nine level-2 grid points lie within one dominance radius")
def test_grid_forest_at_most_eight_trees():
    _, sizes = grid_forest(500)
    assert max(sizes) <= 8


def test_incremental_equals_rebuild():
    sp = uniform_space(300, seed=3)
    h = NetHierarchy(sp, HierarchyConfig(epsilon=0.25), points=[])
    f = DominantForest(h, lam=3)
    for p in range(300):
        h.insert_point(p)
    g = DominantForest(h, lam=3)
    assert (f.dom, f.default, f.paths, f.base) == (g.dom, g.default, g.paths, g.base)
    check_forest(f)


def test_lemma_window_arithmetic():
    # c = 7: ceil(j - 2 - log5 8.6) and ceil(j + 2 - log5 5.4)
    assert lemma_c_window(0, 7.0) == (-3, 1)
    assert lemma_c_window(4, 27.0) == (0, 4)


@pytest.mark.slow
def test_random_2d_eps_01_audit():
    sp = uniform_space(2000, seed=1)
    h = NetHierarchy(sp, HierarchyConfig(epsilon=0.1, lam=3))
    f = DominantForest(h, lam=3)
    worst = 0.0
    for x, y in random_pairs(range(2000), 30000, seed=2):
        a = f.forest_query(x, y)
        worst = max(worst, abs(a.estimate / sp.dist(x, y) - 1))
        assert level_containing(sp.dist(x, y)) - 2 <= a.lca_level_min
    assert worst <= 0.1 + 1e-9
    assert f.diagnostics == []


pts = st.lists(st.tuples(st.integers(0, 300), st.integers(0, 300)), min_size=2, max_size=40,
               unique=True)


@settings(max_examples=40, deadline=None)
@given(pts, st.sampled_from([0.1, 0.25, 0.5]))
def test_forest_property(points, eps):
    sp = MetricSpace(coords=[list(map(float, p)) for p in points])
    h = NetHierarchy(sp, HierarchyConfig(epsilon=eps), points=[])
    f = DominantForest(h, lam=3)
    for p in range(len(points)):
        h.insert_point(p)
    assert f.verify_invariants() == []
    for x in range(len(points)):
        for y in range(x + 1, len(points)):
            a = f.forest_query(x, y)
            d = sp.dist(x, y)
            assert abs(a.estimate / d - 1) <= eps + 1e-9
            i = level_containing(d)
            assert i - 2 <= a.lca_level_min <= i + 1
