"""JIT walk kernels.  Semantics mirror the numpy path in walks.py exactly
(same mixers, same field arithmetic), so table-backed runs produce identical
endpoints whichever path executes; tests assert the match.
"""

from __future__ import annotations

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except Exception:  # pragma: no cover
    HAVE_NUMBA = False

_M61 = np.uint64((1 << 61) - 1)
_GOLD = np.uint64(0x9E3779B97F4A7C15)
_K1 = np.uint64(0xBF58476D1CE4E5B9)
_K2 = np.uint64(0x94D049BB133111EB)
_K3 = np.uint64(0xD6E8FEB86659FD93)

if HAVE_NUMBA:

    @numba.njit(numba.uint64(numba.uint64), cache=True, inline="always")
    def _mix64(z):
        z = z + _GOLD
        z = (z ^ (z >> np.uint64(30))) * _K1
        z = (z ^ (z >> np.uint64(27))) * _K2
        return z ^ (z >> np.uint64(31))

    @numba.njit(numba.uint64(numba.uint64), cache=True, inline="always")
    def _fold61(x):
        x = (x >> np.uint64(61)) + (x & _M61)
        x = (x >> np.uint64(61)) + (x & _M61)
        if x >= _M61:
            x -= _M61
        return x

    @numba.njit(numba.uint64(numba.uint64, numba.uint64), cache=True, inline="always")
    def _mulmod61_u32(h, v):
        h_hi = h >> np.uint64(32)
        h_lo = h & np.uint64(0xFFFFFFFF)
        lo = h_lo * v
        z = h_hi * v
        term = (z >> np.uint64(29)) + ((z & np.uint64((1 << 29) - 1)) << np.uint64(32))
        lo_red = (lo >> np.uint64(61)) + (lo & _M61)
        return _fold61(term + lo_red)

    @numba.njit(cache=True)
    def table_walk(padded, d, starts, slots, t, seed):
        m = starts.size
        out = np.empty(m, dtype=np.int64)
        two_d = np.uint64(2 * d)
        du = np.uint64(d)
        one, two, three, four = np.uint64(1), np.uint64(2), np.uint64(3), np.uint64(4)
        for w in range(m):
            lane = _mix64(seed ^ (slots[w] * _K3))
            p = starts[w]
            for s in range(t):
                cell = _mix64(lane ^ (np.uint64(s) * _K1))
                c0 = _mix64(cell ^ (one * _K2)) % _M61
                c1 = _mix64(cell ^ (two * _K2)) % _M61
                c2 = _mix64(cell ^ (three * _K2)) % _M61
                c3 = _mix64(cell ^ (four * _K2)) % _M61
                v = np.uint64(p)
                h = _mulmod61_u32(c3, v)
                h = _mulmod61_u32(_fold61(h + c2), v)
                h = _mulmod61_u32(_fold61(h + c1), v)
                h = _fold61(h + c0)
                coin = h % two_d
                if coin >= du:
                    p = padded[p, np.int64(coin - du)]
            out[w] = p
        return out

    @numba.njit(cache=True)
    def fresh_walk(padded, d, starts, lanes, t):
        m = starts.size
        out = np.empty(m, dtype=np.int64)
        two_d = np.uint64(2 * d)
        du = np.uint64(d)
        for w in range(m):
            lane = lanes[w]
            p = starts[w]
            for s in range(t):
                coin = _mix64(lane ^ (np.uint64(s) * _K1)) % two_d
                if coin >= du:
                    p = padded[p, np.int64(coin - du)]
            out[w] = p
        return out
