"""Lazy random walks, sparse endpoint distributions, and walk randomness sources.

A lazy step from x draws a coin uniform in [0, 2d): coins below d stay put,
coin c >= d moves to neighbor slot c - d (padding slots are self-loops), so
the induced transition matrix is exactly M = I/2 + A/(2d) on the
d-regularized graph.

Two randomness sources are provided.  ``FreshWalks`` keys every coin on
(seed, start vertex, walk length, walk index, step) through a 64-bit mixer,
so walks are independent across all four and reproducible in any execution
order.  ``WalkTable`` realizes the derandomized mode: one 4-wise independent
hash function per (step, walk-slot) cell, evaluated at the walk's *current*
vertex, so that two walks occupying the same cell at the same vertex take
the same step.  Hash functions are degree-3 polynomials over the field
GF(2^61 - 1), with coefficients derived on the fly from the table seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import CapacityError, ConfigError
from .graph import BoundedDegreeGraph

_M61 = np.uint64((1 << 61) - 1)
_GOLD = np.uint64(0x9E3779B97F4A7C15)
_K1 = np.uint64(0xBF58476D1CE4E5B9)
_K2 = np.uint64(0x94D049BB133111EB)
_K3 = np.uint64(0xD6E8FEB86659FD93)


def _mix64(z: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer, vectorized over uint64 arrays (wraparound intended)."""
    with np.errstate(over="ignore"):
        z = (z + _GOLD).astype(np.uint64)
        z = (z ^ (z >> np.uint64(30))) * _K1
        z = (z ^ (z >> np.uint64(27))) * _K2
        return z ^ (z >> np.uint64(31))


def _combine(*parts) -> np.ndarray:
    acc = np.uint64(0)
    with np.errstate(over="ignore"):
        for i, p in enumerate(parts):
            arr = np.asarray(p, dtype=np.uint64)
            acc = _mix64(acc ^ (arr * _K3 + np.uint64(i + 1) * _GOLD))
    return acc


def _fold61(x: np.ndarray) -> np.ndarray:
    x = (x >> np.uint64(61)) + (x & _M61)
    x = (x >> np.uint64(61)) + (x & _M61)
    return np.where(x >= _M61, x - _M61, x)


def _mulmod61_u32(h: np.ndarray, v: np.ndarray) -> np.ndarray:
    """(h * v) mod 2^61-1 for h < 2^61 and v < 2^32, without 128-bit ints."""
    h_hi = h >> np.uint64(32)
    h_lo = h & np.uint64(0xFFFFFFFF)
    lo = h_lo * v
    z = h_hi * v
    # z * 2^32 mod M61: split z at bit 29, since 2^61 = 1 (mod M61)
    term = (z >> np.uint64(29)) + ((z & np.uint64((1 << 29) - 1)) << np.uint64(32))
    lo_red = (lo >> np.uint64(61)) + (lo & _M61)
    return _fold61(term + lo_red)


class _FreshContext:
    __slots__ = ("lanes",)

    def __init__(self, lanes: np.ndarray):
        self.lanes = lanes

    def coins(self, step: int, pos: np.ndarray, two_d: int) -> np.ndarray:
        with np.errstate(over="ignore"):
            keyed = self.lanes ^ (np.uint64(step) * _K1)
        return _mix64(keyed) % np.uint64(two_d)


class FreshWalks:
    """Counter-keyed walk randomness: independent across (x, t, walk, step)."""

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.walks_run = 0

    def begin(self, starts: np.ndarray, t: int, slots: np.ndarray) -> _FreshContext:
        return _FreshContext(_combine(np.uint64(self.seed), starts, np.uint64(t), slots))

    def sign(self, trial: int, x) -> np.ndarray:
        bits = _combine(np.uint64(self.seed) ^ _K2, np.uint64(trial), np.asarray(x, dtype=np.uint64))
        return 1.0 - 2.0 * (bits >> np.uint64(63)).astype(np.float64)


class _TableContext:
    __slots__ = ("coeffs",)

    def __init__(self, coeffs: np.ndarray):
        self.coeffs = coeffs  # (4, t, m) field elements

    def coins(self, step: int, pos: np.ndarray, two_d: int) -> np.ndarray:
        v = pos.astype(np.uint64)
        c = self.coeffs
        h = _mulmod61_u32(c[3, step], v)
        h = _mulmod61_u32(_fold61(h + c[2, step]), v)
        h = _mulmod61_u32(_fold61(h + c[1, step]), v)
        h = _fold61(h + c[0, step])
        return h % np.uint64(two_d)


class WalkTable:
    """Derandomized walk randomness: a T x W grid of 4-wise independent hashes.

    Cell (step, slot) holds a hash h: vertex -> [0, 2d), a degree-3
    polynomial over GF(2^61 - 1) with coefficients derived from the seed, so
    the table costs O(1) persistent memory but still enforces its declared
    capacity (exceeding it raises rather than silently reseeding).  All
    coefficients for a simulation batch are derived up front; the step loop
    only evaluates the polynomials at the current vertices.
    """

    def __init__(self, seed: int, t_cap: int, w_cap: int):
        if t_cap < 1 or w_cap < 1:
            raise ConfigError("walk table capacities must be positive")
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.t_cap = int(t_cap)
        self.w_cap = int(w_cap)
        self.walks_run = 0

    def _check_capacity(self, t: int, slots: np.ndarray) -> None:
        if t > self.t_cap:
            raise CapacityError(f"walk length {t} exceeds table capacity {self.t_cap}")
        if slots.size and int(slots.max()) >= self.w_cap:
            raise CapacityError(
                f"walk slot {int(slots.max())} exceeds table capacity {self.w_cap}"
            )

    def begin(self, starts: np.ndarray, t: int, slots: np.ndarray) -> _TableContext:
        slots = np.asarray(slots, dtype=np.uint64)
        self._check_capacity(t, slots)
        steps = np.arange(t, dtype=np.uint64)[:, None]
        with np.errstate(over="ignore"):
            lane_key = _mix64(np.uint64(self.seed) ^ (slots * _K3))
            cell_key = _mix64(lane_key[None, :] ^ (steps * _K1))
            coeffs = np.empty((4, t, slots.size), dtype=np.uint64)
            for i in range(4):
                coeffs[i] = _mix64(cell_key ^ (np.uint64(i + 1) * _K2)) % _M61
        return _TableContext(coeffs)

    def sign(self, trial: int, x) -> np.ndarray:
        bits = _combine(np.uint64(self.seed) ^ _K2, np.uint64(trial), np.asarray(x, dtype=np.uint64))
        return 1.0 - 2.0 * (bits >> np.uint64(63)).astype(np.float64)


WalkSource = FreshWalks | WalkTable


@dataclass
class WalkParams:
    """Walk-length window [t_min, t_min + t_delta] and walks per (vertex, length)."""

    t_min: int
    t_delta: int
    r: int
    seed: int = 0

    def __post_init__(self):
        if self.t_min < 1 or self.t_delta < 0 or self.r < 1:
            raise ConfigError("need t_min >= 1, t_delta >= 0, r >= 1")


class SparseDistribution:
    """Sparse vector over vertex ids with strictly increasing ids, no stored zeros.

    Empirical walk distributions additionally carry exact integer endpoint
    counts and their denominator, so probability mass is conserved exactly
    (weights are counts/denom and the counts always sum to the denominator).
    """

    __slots__ = ("ids", "weights", "counts", "denom")

    def __init__(self, ids, weights, counts=None, denom=None):
        self.ids = np.asarray(ids, dtype=np.int64)
        self.weights = np.asarray(weights, dtype=np.float64)
        self.counts = None if counts is None else np.asarray(counts, dtype=np.int64)
        self.denom = denom

    @classmethod
    def empty(cls) -> "SparseDistribution":
        return cls(np.empty(0, dtype=np.int64), np.empty(0))

    @classmethod
    def from_counts(cls, ids, counts, denom: int) -> "SparseDistribution":
        counts = np.asarray(counts, dtype=np.int64)
        return cls(ids, counts / float(denom), counts, denom)

    @classmethod
    def point_mass(cls, x: int) -> "SparseDistribution":
        return cls.from_counts(np.array([x], dtype=np.int64), np.array([1]), 1)

    @property
    def support_size(self) -> int:
        return int(self.ids.size)

    def total(self) -> float:
        return float(self.weights.sum())

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SparseDistribution)
            and np.array_equal(self.ids, other.ids)
            and np.array_equal(self.weights, other.weights)
        )

    def __repr__(self) -> str:
        return f"SparseDistribution(nnz={self.ids.size})"


def sparse_dot(u: SparseDistribution, v: SparseDistribution) -> float:
    """Sum over the common support of u(i)*v(i); sorted-merge on the ids."""
    if u.ids.size == 0 or v.ids.size == 0:
        return 0.0
    if u.ids.size > v.ids.size:
        u, v = v, u
    pos = np.searchsorted(v.ids, u.ids)
    pos_c = np.minimum(pos, v.ids.size - 1)
    hit = v.ids[pos_c] == u.ids
    if not hit.any():
        return 0.0
    return float(np.dot(u.weights[hit], v.weights[pos_c[hit]]))


def sparse_axpy(acc: SparseDistribution, coeff: float, v: SparseDistribution) -> SparseDistribution:
    """acc + coeff * v as a new vector; exact zero entries are pruned."""
    return sparse_combine([(1.0, acc), (float(coeff), v)])


def sparse_combine(terms: list[tuple[float, SparseDistribution]]) -> SparseDistribution:
    """Weighted sum of sparse vectors, sorted and zero-pruned."""
    parts_i = [t[1].ids for t in terms if t[1].ids.size]
    if not parts_i:
        return SparseDistribution.empty()
    ids = np.concatenate(parts_i)
    w = np.concatenate([c * t.weights for c, t in terms if t.ids.size])
    uniq, inv = np.unique(ids, return_inverse=True)
    summed = np.bincount(inv, weights=w, minlength=uniq.size)
    keep = summed != 0.0
    return SparseDistribution(uniq[keep], summed[keep])


def lazy_step(g: BoundedDegreeGraph, x: int, coin: int) -> int:
    """One lazy step: stay for coin < d, else move to neighbor slot coin - d."""
    if not 0 <= coin < 2 * g.d:
        raise ConfigError(f"coin {coin} out of range [0,{2 * g.d})")
    if coin < g.d:
        return x
    return g.neighbor(x, coin - g.d)


def walk_endpoints(
    g: BoundedDegreeGraph,
    starts: np.ndarray,
    t: int,
    source: WalkSource,
    slots: np.ndarray,
) -> np.ndarray:
    """Endpoints of len(starts) lazy walks of length t, one per (start, slot)."""
    starts = np.asarray(starts, dtype=np.int64)
    slots = np.asarray(slots, dtype=np.uint64)
    if starts.shape != slots.shape:
        raise ConfigError("starts and slots must align")
    source.walks_run += int(starts.size)
    if _kernels.HAVE_NUMBA and t > 0 and starts.size:
        if isinstance(source, WalkTable):
            source._check_capacity(t, slots)
            return _kernels.table_walk(
                g.padded, g.d, starts, slots, t, np.uint64(source.seed)
            )
        lanes = _combine(np.uint64(source.seed), starts, np.uint64(t), slots)
        return _kernels.fresh_walk(g.padded, g.d, starts, lanes, t)
    ctx = source.begin(starts, t, slots)
    pos = starts.copy()
    d = g.d
    padded = g.padded
    two_d = 2 * d
    for step in range(t):
        coins = ctx.coins(step, pos, two_d).astype(np.int64)
        move = coins >= d
        slot_idx = np.where(move, coins - d, 0)
        pos = np.where(move, padded[pos, slot_idx], pos)
    return pos


def random_walks(
    g: BoundedDegreeGraph,
    r: int,
    t: int,
    x: int,
    source: WalkSource,
    slot_base: int = 0,
) -> SparseDistribution:
    """Empirical endpoint distribution of r lazy walks of length t from x.

    Support is at most r; weights are multiples of 1/r summing to one.  With
    a WalkTable the result is a deterministic function of
    (table seed, x, t, r, slot_base).
    """
    if r < 1 or t < 0:
        raise ConfigError("need r >= 1 and t >= 0")
    if not 0 <= x < g.n:
        raise ConfigError(f"vertex {x} out of range")
    if t == 0:
        return SparseDistribution.from_counts(np.array([x]), np.array([r]), r)
    starts = np.full(r, x, dtype=np.int64)
    slots = np.arange(slot_base, slot_base + r, dtype=np.uint64)
    ends = walk_endpoints(g, starts, t, source, slots)
    ids, counts = np.unique(ends, return_counts=True)
    return SparseDistribution.from_counts(ids, counts, r)
