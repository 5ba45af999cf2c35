import numpy as np
import pytest

from netoracle.metric import MetricSpace


def uniform_space(n, dim=2, seed=0, scale=1000.0):
    rng = np.random.default_rng(seed)
    return MetricSpace(coords=rng.random((n, dim)) * scale)


def random_pairs(ids, k, seed=0):
    rng = np.random.default_rng(seed)
    ids = list(ids)
    out = []
    for _ in range(k):
        i, j = rng.choice(len(ids), 2, replace=False)
        out.append((ids[int(i)], ids[int(j)]))
    return out


@pytest.fixture
def space_300():
    return uniform_space(300, seed=11)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS, line
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(RESULTS):
        terminalreporter.write_line(line(k))
