"""Signed, coefficient-weighted mixtures of empirical walk distributions.

A sketch of an ordered vertex list S at trial index j draws one Rademacher
sign per element (keyed by the randomness seed, the trial, and the vertex
id), runs r walks per (vertex, walk length) with the lengths and weights of
the configured walk polynomial, and returns

    sum_{x in S} sigma_x sum_t c_t * p_hat^t_x .

Walk slots are laid out as trial*(#lengths)*r + length_index*r + walk, so
distinct trials and lengths occupy distinct derandomized-table columns
while different vertices share them (two walks in the same column that meet
at a vertex take the same step; that sharing is what makes table-mode
queries consistent).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .chebpoly import WalkPolynomial
from .errors import ConfigError
from .graph import BoundedDegreeGraph
from .walks import SparseDistribution, WalkSource, sparse_dot, walk_endpoints

# Query-time sketches use trial ids above this base so their walk slots never
# coincide with the slots of stored (tree) sketches of the same vertex.
QUERY_TRIAL_BASE = 1 << 20


@dataclass
class SketchParams:
    """Walk weights, walks per (vertex, length), and the randomness source."""

    wp: WalkPolynomial
    r: int
    source: WalkSource

    def __post_init__(self):
        if self.r < 1:
            raise ConfigError("need r >= 1")
        self._digest: str | None = None

    def digest(self) -> str:
        if self._digest is None:
            h = hashlib.sha256()
            h.update(f"{self.wp.t_min} {self.wp.t_delta} {self.r} ".encode())
            for t in self.wp.lengths():
                h.update(f"{self.wp.coeffs[t]!r} ".encode())
            h.update(f"{type(self.source).__name__} {self.source.seed}".encode())
            self._digest = h.hexdigest()[:16]
        return self._digest

    def _slot_base(self, trial: int, length_index: int) -> int:
        return (trial * (self.wp.t_delta + 1) + length_index) * self.r


@dataclass
class SketchVector:
    v: SparseDistribution
    set_size: int
    params_digest: str

    @property
    def support_size(self) -> int:
        return self.v.support_size


def default_walk_count(n: int, k_hat: int, scale: float = 8.0, exponent: float = 0.5) -> int:
    """ceil(scale * (n/k_hat)^exponent); exponent 0.5 is the symmetric scheme."""
    if k_hat < 1 or n < 1:
        raise ConfigError("need n, k_hat >= 1")
    return int(np.ceil(scale * (n / k_hat) ** exponent))


def rademacher_signs(params: SketchParams, trial: int, items: np.ndarray) -> np.ndarray:
    """One +-1 per list element, keyed by (source seed, trial, vertex id)."""
    return params.source.sign(trial, np.asarray(items, dtype=np.uint64))


def assemble_sketch(
    g: BoundedDegreeGraph,
    items,
    params: SketchParams,
    trial: int,
    signs: np.ndarray,
) -> SketchVector:
    """Sketch with explicitly supplied signs (one per element of items)."""
    return _assemble_batch(g, items, params, [trial], [np.asarray(signs, dtype=np.float64)])[0]


def sketch(g: BoundedDegreeGraph, items, params: SketchParams, trial: int = 0) -> SketchVector:
    """Signed mixture sketch of the ordered vertex list (singleton lists
    realize the per-vertex sketch).  Empty lists give the zero vector."""
    items = np.asarray(list(items), dtype=np.int64)
    signs = rademacher_signs(params, trial, items) if items.size else np.empty(0)
    return _assemble_batch(g, items, params, [trial], [signs])[0]


def sketch_batch(
    g: BoundedDegreeGraph, items, params: SketchParams, trials
) -> list[SketchVector]:
    """Independent sketches of the same list for several trial indices,
    simulated in one batch per walk length."""
    items = np.asarray(list(items), dtype=np.int64)
    trials = list(trials)
    signs = [
        rademacher_signs(params, tr, items) if items.size else np.empty(0) for tr in trials
    ]
    return _assemble_batch(g, items, params, trials, signs)


def _assemble_batch(g, items, params, trials, signs_per_trial) -> list[SketchVector]:
    items = np.asarray(items, dtype=np.int64)
    m = items.size
    digest = params.digest()
    if m == 0:
        return [SketchVector(SparseDistribution.empty(), 0, digest) for _ in trials]
    if items.min() < 0 or items.max() >= g.n:
        raise ConfigError("sketch items out of vertex range")
    r = params.r
    wp = params.wp
    lengths = wp.lengths()
    n_tr = len(trials)
    starts = np.tile(np.repeat(items, r), n_tr)
    per_trial_ids: list[list[np.ndarray]] = [[] for _ in trials]
    per_trial_w: list[list[np.ndarray]] = [[] for _ in trials]
    for li, t in enumerate(lengths):
        c_t = wp.coeffs[t]
        if c_t == 0.0:
            continue
        slots = np.concatenate(
            [
                np.arange(params._slot_base(tr, li), params._slot_base(tr, li) + r, dtype=np.uint64)[
                    None, :
                ].repeat(m, axis=0).ravel()
                for tr in trials
            ]
        )
        ends = walk_endpoints(g, starts, t, params.source, slots)
        block = m * r
        for ti in range(n_tr):
            seg = ends[ti * block : (ti + 1) * block]
            w = np.repeat(signs_per_trial[ti] * (c_t / r), r)
            per_trial_ids[ti].append(seg)
            per_trial_w[ti].append(w)
    out = []
    for ti in range(n_tr):
        if not per_trial_ids[ti]:
            out.append(SketchVector(SparseDistribution.empty(), m, digest))
            continue
        ids = np.concatenate(per_trial_ids[ti])
        w = np.concatenate(per_trial_w[ti])
        uniq, inv = np.unique(ids, return_inverse=True)
        summed = np.bincount(inv, weights=w, minlength=uniq.size)
        keep = summed != 0.0
        out.append(SketchVector(SparseDistribution(uniq[keep], summed[keep]), m, digest))
    return out


def singleton_sketches(
    g: BoundedDegreeGraph, x: int, params: SketchParams, trials
) -> list[SketchVector]:
    return sketch_batch(g, [x], params, trials)


def sketch_self_estimate(
    g: BoundedDegreeGraph, x: int, params: SketchParams, trials: tuple[int, int] = (0, 1)
) -> float:
    """|<sketch(x), sketch(x)>| from two independent singleton sketches.

    The absolute value removes the product of the two trials' Rademacher
    signs; the magnitude estimates the squared embedding norm of x.
    """
    a, b = singleton_sketches(g, x, params, list(trials))
    return abs(sparse_dot(a.v, b.v))


def boosted_params(params: SketchParams, boost: int) -> SketchParams:
    if boost < 1:
        raise ConfigError("boost factor must be >= 1")
    return SketchParams(params.wp, params.r * boost, params.source)


def boosted_sketch(
    g: BoundedDegreeGraph, x: int, params: SketchParams, boost: int, trial: int = 0
) -> SketchVector:
    """Singleton sketch with boost-times more walks (sharper self-estimates)."""
    return sketch(g, [x], boosted_params(params, boost), trial)
