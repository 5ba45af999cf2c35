"""Word-packed integer vectors with an O(1)-word squared-distance kernel.

A vector of ``d`` ``b``-bit coordinates is stored twice.  The *u-form* puts
coordinate ``i`` at bit offset ``i*r`` with ``r = 2b``; the *v-form* puts it at
``i*r'`` with ``r' = 2b*d``.  Multiplying a u-form by a v-form lays every
product ``p_i*q_j`` in its own ``r``-bit slot, and the diagonal products land
at offsets ``i*(r'+r)``.  Masking the diagonal and multiplying by a comb of
ones at the same offsets sums the diagonal into the slot at ``(d-1)*(r'+r)``.

When ``4*b*d^2`` exceeds the word size the coordinates are split into blocks
that each satisfy the bound, and one multiply-mask-multiply runs per block.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .counters import NULL

WORD_BITS = 64
WORD_MASK = (1 << WORD_BITS) - 1
MAX_BITS = WORD_BITS // 4


def _next_pow2(k):
    p = 1
    while p < k:
        p <<= 1
    return p


def block_dim(d, b, word_bits=WORD_BITS):
    """Largest power-of-two block width ``w <= next_pow2(d)`` with ``4*b*w^2 <= W``."""
    if 4 * b > word_bits:
        raise ValueError(f"b={b} bits does not fit a {word_bits}-bit word even for d=1")
    w = _next_pow2(d)
    while 4 * b * w * w > word_bits:
        w >>= 1
    return w


@dataclass(frozen=True)
class Layout:
    """Bit layout constants for one block width and coordinate width."""

    dd: int
    b: int
    r: int
    r2: int
    diag_mask: int
    comb: int
    sum_shift: int
    sum_mask: int

    @property
    def word_bits_used(self):
        return 4 * self.b * self.dd * self.dd


@lru_cache(maxsize=None)
def layout(dd, b):
    r = 2 * b
    r2 = 2 * b * dd
    step = r2 + r
    diag = 0
    slot = (1 << r) - 1
    for i in range(dd):
        diag |= slot << (i * step)
    comb = 0
    for i in range(2 * dd):
        pos = i * step
        if pos < WORD_BITS:
            comb |= 1 << pos
    sum_bits = r + max(1, dd.bit_length())
    return Layout(dd, b, r, r2, diag, comb, (dd - 1) * step, (1 << sum_bits) - 1)


@dataclass(frozen=True)
class PackedVector:
    d: int
    b: int
    dd: int
    u_words: tuple
    v_words: tuple
    sq: int

    @property
    def n_words(self):
        return len(self.u_words) + len(self.v_words)


def pack(coords, b):
    """Pack a list of non-negative ``b``-bit integers into u/v word forms."""
    coords = [int(c) for c in coords]
    d = len(coords)
    if d < 1:
        raise ValueError("need at least one coordinate")
    if b < 1:
        raise ValueError("need at least one bit per coordinate")
    top = 1 << b
    for c in coords:
        if c < 0 or c >= top:
            raise ValueError(f"coordinate {c} outside [0, 2^{b})")
    dd = block_dim(d, b)
    lay = layout(dd, b)
    u_words = []
    v_words = []
    for start in range(0, d, dd):
        block = coords[start:start + dd]
        u = 0
        v = 0
        for i, c in enumerate(block):
            u |= c << (i * lay.r)
            v |= c << (i * lay.r2)
        u_words.append(u)
        v_words.append(v)
    return PackedVector(d, b, dd, tuple(u_words), tuple(v_words), sum(c * c for c in coords))


def unpack(vec, form="u"):
    """Decode either bit layout back to the coordinate list."""
    lay = layout(vec.dd, vec.b)
    words = vec.u_words if form == "u" else vec.v_words
    stride = lay.r if form == "u" else lay.r2
    mask = (1 << vec.b) - 1
    out = []
    for w in words:
        for i in range(vec.dd):
            out.append((w >> (i * stride)) & mask)
    return out[:vec.d]


def masked_product(u_word, v_word, lay):
    """The diagonal-masked product word; exposed for bit-exact testing."""
    return ((u_word * v_word) & WORD_MASK) & lay.diag_mask


def packed_dot(p, q, counter=NULL):
    """Sum of ``p_i*q_i`` via multiply, mask, multiply, shift per block."""
    if p.d != q.d or p.b != q.b:
        raise ValueError("vectors differ in dimension or bit width")
    lay = layout(p.dd, p.b)
    total = 0
    blocks = len(p.u_words)
    for k in range(blocks):
        w = (p.u_words[k] * q.v_words[k]) & WORD_MASK
        w &= lay.diag_mask
        y = (w * lay.comb) & WORD_MASK
        total += (y >> lay.sum_shift) & lay.sum_mask
    # mul, and, mul, shift, and per block; one add per extra block
    counter.add("word_ops", 5 * blocks + (blocks - 1))
    return total


def packed_sq_dist(p, q, counter=NULL):
    """Exact ``sum (p_i - q_i)^2`` as ``sum p^2 - 2 sum pq + sum q^2``."""
    dot = packed_dot(p, q, counter)
    counter.add("word_ops", 3)
    return p.sq + q.sq - (dot << 1)


def naive_sq_dist(p, q):
    return sum((a - b) ** 2 for a, b in zip(p, q))


def quantize(values, lo, hi, b):
    """Affine map of reals in ``[lo, hi]`` to ``[0, 2^b - 1]``, flooring."""
    top = (1 << b) - 1
    span = hi - lo
    if span <= 0:
        return [0] * len(values)
    scale = top / span
    out = []
    for v in values:
        k = int((v - lo) * scale)
        out.append(0 if k < 0 else top if k > top else k)
    return out
