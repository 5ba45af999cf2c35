import numpy as np
import pytest

from netoracle import datasets
from netoracle.errors import ParameterError


def test_grid_line():
    sp = datasets.generate("grid", 16, dim=1)
    assert [float(sp.coords(i)[0]) for i in range(16)] == list(range(16))


def test_same_seed_same_bytes():
    a = datasets.generate_text("uniform", 200, 2, 7)
    b = datasets.generate_text("uniform", 200, 2, 7)
    assert a == b
    assert a != datasets.generate_text("uniform", 200, 2, 8)


def test_random_graph_metric_is_a_metric():
    sp = datasets.generate("matrix-random-metric", 120, seed=3)
    m = sp._matrix
    assert np.all(np.isfinite(m)) and np.array_equal(m, m.T)
    assert np.all(np.diag(m) == 0) and np.all(m[~np.eye(120, dtype=bool)] > 0)
    # all triples: d(i,j) <= d(i,k) + d(k,j)
    assert np.all(m[:, None, :] <= m[:, :, None] + m[None, :, :] + 1e-9)


@pytest.mark.parametrize("kind", datasets.KINDS)
def test_every_kind_builds(kind):
    sp = datasets.generate(kind, 50, 2, 1)
    assert sp.n_live() == 50
    assert sp.d_min > 0


def test_bad_parameters():
    with pytest.raises(ParameterError):
        datasets.generate("spiral", 10)
    with pytest.raises(ParameterError):
        datasets.generate("uniform", 0)
