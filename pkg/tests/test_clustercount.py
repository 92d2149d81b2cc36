import math

import numpy as np
import pytest

from subcluster.clustercount import ApproxKConfig, approx_k
from subcluster.graph import GeneratorConfig, generate_clusterable
from subcluster.preprocess import PreprocessConfig
from subcluster.spectral import build_reference


def pipeline(k_hat, t_min=40):
    return PreprocessConfig(k_hat=k_hat, phi=0.6, eps=0.004, t_min=t_min)


class TestEstimator:
    def test_exact_embedding_norms_average_to_k_over_n(self, ref_cliques_400):
        ref = ref_cliques_400
        norms = (ref.f**2).sum(axis=1)
        assert norms.mean() == pytest.approx(ref.k / ref.n, abs=1e-12)

    def test_four_cliques(self, cliques_400):
        g, _ = cliques_400
        hits = 0
        for seed in range(10):
            res = approx_k(g, ApproxKConfig(pipeline(4, t_min=12), samples=32, boost_override=4, seed=seed))
            hits += 2.8 <= res.k_estimate <= 5.2
        assert hits >= 9

    def test_single_clique_small_sample(self):
        g, _ = generate_clusterable(GeneratorConfig(n=100, k=1, d=99, cross_edge_budget=0.0, seed=0))
        hits = 0
        for seed in range(20):
            res = approx_k(g, ApproxKConfig(pipeline(1, t_min=10), samples=1, boost_override=4, seed=seed))
            hits += abs(res.k_estimate - 1.0) <= 0.3
        assert hits >= 16

    def test_monotone_precision(self, cliques_400):
        g, _ = cliques_400
        cfgs = {
            boost: [
                approx_k(
                    g,
                    ApproxKConfig(
                        pipeline(4, t_min=12), samples=16, boost_override=boost, seed=500 + run,
                    ),
                ).k_estimate
                for run in range(50)
            ]
            for boost in (1, 2)
        }
        ratio = np.var(cfgs[2]) / np.var(cfgs[1])
        assert ratio <= 0.75


class TestConfig:
    def test_boost_formula_example(self):
        # 1/(p * eps2^2) at p = 0.05, eps2 = 0.25
        assert math.ceil(1.0 / (0.05 * 0.25**2)) == 320

    def test_derived_boost_is_large(self):
        cfg = ApproxKConfig(pipeline(4), eps_apx=0.5, samples=32)
        assert cfg.boost() == math.ceil(1.0 / ((1e-3 / 64) * 0.25**2))

    def test_sample_floor(self):
        cfg = ApproxKConfig(pipeline(4), eps_apx=0.5)
        assert cfg.sample_count() >= 16

    def test_admissibility(self):
        pipe = PreprocessConfig(k_hat=4, phi=0.6, eps=0.01, t_min=40)
        assert ApproxKConfig(pipe, eps_apx=0.5).admissible()
        assert not ApproxKConfig(pipe, eps_apx=0.3).admissible()  # (eps/phi^2)^(1/4) = 0.408
