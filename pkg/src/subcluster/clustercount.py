"""Cluster-count estimation from boosted sketch self-estimates.

Sampling L vertices uniformly and averaging their squared-embedding-norm
estimates gives an unbiased estimate of k/n (each vertex contributes
~1/|C_i|, and cluster sizes weight the expectation back to k/n).  The
self-estimates come from pairs of independent singleton sketches run with a
boost factor of extra walks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .preprocess import PreprocessConfig
from .sketch import SketchParams, boosted_params, sketch_self_estimate


@dataclass
class ApproxKConfig:
    """Sample count L and boost factor T, both derived but overridable.

    The derived T = 1/(p2*eps2^2) with eps2 = eps_apx/2 and p2 = 1e-3/(2L)
    targets very small failure probabilities and is far more walks than desk
    runs need; pass boost_override for exploratory use.  eps_apx below
    admissibility_scale*(eps/phi^2)^(1/4) triggers a warning-level report
    field rather than an error.
    """

    pipeline: PreprocessConfig
    eps_apx: float = 0.5
    samples: int | None = None
    boost_override: int | None = None
    admissibility_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.eps_apx <= 0:
            raise ConfigError("eps_apx must be positive")

    def sample_count(self) -> int:
        if self.samples is not None:
            return self.samples
        cfg = self.pipeline
        ratio = cfg.phi**2 / cfg.eps if cfg.eps > 0 else math.e
        return max(16, math.ceil(1e-3 * math.sqrt(ratio)))

    def boost(self) -> int:
        if self.boost_override is not None:
            return self.boost_override
        eps2 = self.eps_apx / 2.0
        p2 = 1e-3 / (2.0 * self.sample_count())
        return max(1, math.ceil(1.0 / (p2 * eps2**2)))

    def admissible(self) -> bool:
        cfg = self.pipeline
        if cfg.eps == 0:
            return True
        return self.eps_apx >= self.admissibility_scale * (cfg.eps / cfg.phi**2) ** 0.25


@dataclass
class ApproxKResult:
    k_over_n: float
    k_estimate: float
    samples: int
    boost: int
    admissible: bool

    def rounded(self) -> int:
        return int(round(self.k_estimate))


def approx_k(g, cfg: ApproxKConfig) -> ApproxKResult:
    """n * mean over L uniform samples of the boosted self-estimate."""
    pipeline = cfg.pipeline
    wp = pipeline.walk_polynomial(g.n)
    source = pipeline.make_source(wp)
    base = SketchParams(wp, pipeline.query_walks(g.n), source)
    params = boosted_params(base, cfg.boost())
    rng = np.random.default_rng(cfg.seed)
    length = cfg.sample_count()
    xs = rng.integers(0, g.n, size=length)
    total = 0.0
    for i, x in enumerate(xs):
        trials = (2 * i, 2 * i + 1)
        total += sketch_self_estimate(g, int(x), params, trials=trials)
    k_over_n = total / length
    return ApproxKResult(k_over_n, k_over_n * g.n, length, cfg.boost(), cfg.admissible())
