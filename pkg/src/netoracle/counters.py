"""Operation counters used as the scaling proxy in place of wall-clock time."""

from collections import Counter


class OpCounter:
    """Named tallies of primitive operations.

    Structures increment categories such as ``"lca"`` or ``"link_test"``; the
    benchmark harness reads totals per query instead of timing anything.
    """

    __slots__ = ("counts",)

    def __init__(self):
        self.counts = Counter()

    def add(self, key, k=1):
        self.counts[key] += k

    def total(self, keys=None):
        if keys is None:
            return sum(self.counts.values())
        return sum(self.counts[k] for k in keys)

    def reset(self):
        self.counts.clear()

    def snapshot(self):
        return dict(self.counts)

    def __getitem__(self, key):
        return self.counts[key]

    def __repr__(self):
        return f"OpCounter({dict(self.counts)})"


class NullCounter:
    """Drop-in counter that records nothing."""

    __slots__ = ()

    def add(self, key, k=1):
        pass


NULL = NullCounter()
