"""Level arithmetic for base-5 radii.

Every comparison between a distance and a level radius goes through these
helpers so the rounding behaviour of ``5.0 ** i`` is applied consistently.
"""

import math

_LOG5 = math.log(5.0)


def radius(i):
    """Radius 5^i of level ``i`` (``i`` may be negative)."""
    return 5.0 ** i


def level_containing(d):
    """Smallest integer ``i`` with ``d <= 5^i``; so ``5^(i-1) < d <= 5^i``."""
    if d <= 0:
        raise ValueError("level_containing needs a positive distance")
    i = math.ceil(math.log(d) / _LOG5)
    while 5.0 ** i < d:
        i += 1
    while 5.0 ** (i - 1) >= d:
        i -= 1
    return i


def min_level_within(d, b):
    """Smallest level ``i`` with ``d <= b * 5^i``."""
    i = level_containing(d / b)
    while b * 5.0 ** i < d:
        i += 1
    while b * 5.0 ** (i - 1) >= d:
        i -= 1
    return i


def packing_level(d):
    """Largest level ``i`` with ``5^(i-1) < d``: a point at distance ``d`` may share it.

    Strict packing keeps a pair at distance exactly ``5^(i-1)`` out of level
    ``i`` together; it coincides with :func:`level_containing`.
    """
    return level_containing(d)


def log5(x):
    return math.log(x) / _LOG5


def ceil_log(x, base):
    """``ceil(log_base x)`` floored at 1, guarding small and degenerate inputs."""
    if x <= base:
        return 1
    k = math.ceil(math.log(x) / math.log(base) - 1e-12)
    return max(1, k)
