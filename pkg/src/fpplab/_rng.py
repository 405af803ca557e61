"""Counter-based hashing used for every random draw in the package.

All randomness is a pure function of a 64-bit key, so weights and replica
seeds never depend on query order or on how work is scheduled.
"""

import hashlib

import numba as nb
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S12 = np.uint64(12)
_INV52 = 1.0 / 4503599627370496.0  # 2**-52

MASK64 = (1 << 64) - 1


@nb.njit(cache=True, inline="always")
def mix64(z):
    """splitmix64 finalizer."""
    z = (z + _GOLDEN)
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@nb.njit(cache=True, inline="always")
def combine(h, v):
    # v is an int64 coordinate or tag; the cast keeps its two's complement bits
    return mix64(h ^ np.uint64(np.int64(v)))


@nb.njit(cache=True, inline="always")
def to_unit(h):
    # 52 high bits, centred in their cell; with 53 the top cell would round to 1.0
    return (np.float64(h >> _S12) + 0.5) * _INV52


@nb.njit(cache=True)
def box_edge_uniforms(seed, lower, shape):
    """Uniforms for every edge (x, axis) with x in the box, shape (d, *shape).

    The key of an edge is its lower endpoint and axis, so overlapping boxes
    built from the same seed agree on shared edges.
    """
    d = lower.shape[0]
    total = 1
    for s in shape:
        total *= s
    out = np.empty(d * total, dtype=np.float64)
    coord = np.empty(d, dtype=np.int64)
    base = mix64(np.uint64(seed))
    for flat in range(total):
        rem = flat
        for k in range(d - 1, -1, -1):
            coord[k] = lower[k] + rem % shape[k]
            rem //= shape[k]
        h = base
        for k in range(d):
            h = combine(h, coord[k])
        for axis in range(d):
            out[axis * total + flat] = to_unit(combine(h, axis))
    return out


@nb.njit(cache=True)
def edge_uniform(seed, coord, axis):
    h = mix64(np.uint64(seed))
    for k in range(coord.shape[0]):
        h = combine(h, coord[k])
    return to_unit(combine(h, axis))


def derive_seed(master_seed, *parts):
    """Stable 64-bit seed from a master seed and any tags/indices.

    Uses blake2b over the textual parts, so it depends only on the values,
    never on process, platform or scheduling.
    """
    text = "\x1f".join(str(p) for p in (int(master_seed) & MASK64, *parts))
    digest = hashlib.blake2b(text.encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")
