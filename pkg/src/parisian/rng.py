"""Counter-based Philox4x64-10 in numba.

Each simulated path owns the stream ``key = (seed, tag)``,
``counter = (block, 0, path, 0)``, so results do not depend on how paths are
scheduled across threads. The block function matches numpy's
``np.random.Philox`` bit for bit (tested).
"""

from __future__ import annotations

import numba as nb
import numpy as np

__all__ = ["philox4x64", "PathStream", "stream_init", "next_uniform", "philox_block"]

_MASK32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


@nb.njit(cache=True, inline="always")
def _mulhilo(a, b):
    a_lo = a & _MASK32
    a_hi = a >> _S32
    b_lo = b & _MASK32
    b_hi = b >> _S32
    lo_lo = a_lo * b_lo
    hi_lo = a_hi * b_lo
    lo_hi = a_lo * b_hi
    hi_hi = a_hi * b_hi
    cross = (lo_lo >> _S32) + (hi_lo & _MASK32) + lo_hi
    hi = hi_hi + (hi_lo >> _S32) + (cross >> _S32)
    lo = a * b
    return hi, lo


@nb.njit(cache=True)
def philox4x64(c0, c1, c2, c3, k0, k1):
    """Ten-round Philox bijection of one 256-bit counter."""
    for _ in range(10):
        hi0, lo0 = _mulhilo(_M0, c0)
        hi1, lo1 = _mulhilo(_M1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = k0 + _W0
        k1 = k1 + _W1
    return c0, c1, c2, c3


@nb.njit(cache=True)
def philox_block(counter, key):
    out = np.empty(4, dtype=np.uint64)
    out[0], out[1], out[2], out[3] = philox4x64(counter[0], counter[1], counter[2], counter[3], key[0], key[1])
    return out


# A path stream is a small uint64 state vector:
#   [k0, k1, block, path, out0, out1, out2, out3, position]
PathStream = np.ndarray


@nb.njit(cache=True)
def stream_init(seed, tag, path):
    s = np.zeros(9, dtype=np.uint64)
    s[0] = np.uint64(seed)
    s[1] = np.uint64(tag)
    s[2] = np.uint64(0)
    s[3] = np.uint64(path)
    s[8] = np.uint64(4)  # buffer empty
    return s


@nb.njit(cache=True)
def next_raw(s):
    if s[8] >= np.uint64(4):
        s[4], s[5], s[6], s[7] = philox4x64(s[2], np.uint64(0), s[3], np.uint64(0), s[0], s[1])
        s[2] += np.uint64(1)
        s[8] = np.uint64(0)
    v = s[4 + np.int64(s[8])]
    s[8] += np.uint64(1)
    return v


@nb.njit(cache=True)
def next_uniform(s):
    """A double strictly inside (0, 1) from the top 53 bits."""
    return (np.float64(next_raw(s) >> _S11) + 0.5) * _INV53
