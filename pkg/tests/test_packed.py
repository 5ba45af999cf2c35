import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netoracle.packed import (MAX_BITS, WORD_BITS, block_dim, naive_sq_dist, pack, packed_dot,
                              packed_sq_dist, unpack)


def naive_dot(p, q):
    return sum(a * b for a, b in zip(p, q))


def test_single_coordinate_layout():
    v = pack([3], 2)
    assert v.u_words == (0b0011,)
    assert unpack(v) == [3]


def test_zero_vector():
    v = pack([0] * 5, 3)
    assert all(w == 0 for w in v.u_words + v.v_words)
    assert v.sq == 0


def test_hand_example():
    p, q = pack([3, 1], 2), pack([2, 3], 2)
    assert packed_dot(p, q) == 9
    assert packed_sq_dist(p, q) == 5
    assert packed_sq_dist(p, p) == 0


def test_block_width_respects_word():
    for b in range(1, MAX_BITS + 1):
        for d in range(1, 40):
            w = block_dim(d, b)
            assert 4 * b * w * w <= WORD_BITS


def test_randomized_against_naive_loop():
    rng = random.Random(0)
    mismatches = 0
    for _ in range(20000):
        b = rng.randint(1, MAX_BITS)
        d = rng.randint(1, 24)
        p = [rng.randrange(1 << b) for _ in range(d)]
        q = [rng.randrange(1 << b) for _ in range(d)]
        pp, qq = pack(p, b), pack(q, b)
        mismatches += packed_sq_dist(pp, qq) != naive_sq_dist(p, q)
        mismatches += packed_dot(pp, qq) != naive_dot(p, q)
    assert mismatches == 0


@pytest.mark.parametrize("bad", [[-1], [4]])
def test_out_of_range_coordinates(bad):
    with pytest.raises(ValueError):
        pack(bad, 2)


@settings(max_examples=300, deadline=None)
@given(st.integers(1, MAX_BITS).flatmap(
    lambda b: st.tuples(st.just(b), st.lists(st.integers(0, (1 << b) - 1), min_size=1, max_size=40))))
def test_round_trip_both_forms(case):
    b, coords = case
    v = pack(coords, b)
    assert unpack(v, "u") == coords
    assert unpack(v, "v") == coords


@settings(max_examples=300, deadline=None)
@given(st.integers(1, MAX_BITS).flatmap(
    lambda b: st.integers(1, 30).flatmap(
        lambda d: st.tuples(st.just(b),
                            st.lists(st.integers(0, (1 << b) - 1), min_size=d, max_size=d),
                            st.lists(st.integers(0, (1 << b) - 1), min_size=d, max_size=d)))))
def test_kernel_equals_naive(case):
    b, p, q = case
    assert packed_sq_dist(pack(p, b), pack(q, b)) == naive_sq_dist(p, q)
