"""Experiment orchestration: generate -> preprocess -> query -> score, plus
the space/query scaling probe.  All outputs are UTF-8 CSV with '#' comment
headers; rows are deterministic functions of the seeds, so repeated runs
produce byte-identical files (wall-clock columns only appear on request).
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .graph import BoundedDegreeGraph, GeneratorConfig, GroundTruthClustering, generate_clusterable
from .preprocess import PreprocessConfig, preprocessing, query_many, save_artifact
from .spectral import misclassification

FORMAT_VERSION = "subcluster-eval-1"


@dataclass
class EvalRow:
    seed: int
    n: int
    k: int
    d: int
    cross_budget: float
    r_size: int
    miss_count: int
    miss_rate: float
    unclassified: int
    preprocess_walks: int
    query_walks: int
    preprocess_seconds: float = 0.0
    query_seconds: float = 0.0


@dataclass
class EvalReport:
    config_digest: str
    rows: list[EvalRow] = field(default_factory=list)

    def to_csv(self, timings: bool = False) -> str:
        out = io.StringIO()
        out.write(f"# {FORMAT_VERSION} config={self.config_digest}\n")
        cols = [
            "seed", "n", "k", "d", "cross_budget", "r_size", "miss_count",
            "miss_rate", "unclassified", "preprocess_walks", "query_walks",
        ]
        if timings:
            cols += ["preprocess_seconds", "query_seconds"]
        out.write(",".join(cols) + "\n")
        for row in sorted(self.rows, key=lambda r: r.seed):
            vals = [
                row.seed, row.n, row.k, row.d, f"{row.cross_budget:g}", row.r_size,
                row.miss_count, f"{row.miss_rate:.6f}", row.unclassified,
                row.preprocess_walks, row.query_walks,
            ]
            if timings:
                vals += [f"{row.preprocess_seconds:.3f}", f"{row.query_seconds:.3f}"]
            out.write(",".join(str(v) for v in vals) + "\n")
        return out.getvalue()


def _config_digest(gen: GeneratorConfig, pre: PreprocessConfig) -> str:
    blob = json.dumps([gen.__dict__, pre.to_dict()], sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def run_single(gen_cfg: GeneratorConfig, pre_cfg: PreprocessConfig) -> EvalRow:
    g, truth = generate_clusterable(gen_cfg)
    t0 = time.perf_counter()
    artifact = preprocessing(g, pre_cfg)
    t_pre = time.perf_counter() - t0
    stats: dict = {}
    t0 = time.perf_counter()
    predicted = query_many(g, artifact, range(g.n), stats=stats)
    t_query = time.perf_counter() - t0
    count, rate = misclassification(truth, predicted)
    return EvalRow(
        seed=pre_cfg.seed, n=gen_cfg.n, k=gen_cfg.k, d=gen_cfg.d,
        cross_budget=gen_cfg.cross_edge_budget, r_size=len(artifact.representatives),
        miss_count=count, miss_rate=rate, unclassified=int((predicted == -1).sum()),
        preprocess_walks=artifact.diagnostics.get("walks_run", 0),
        query_walks=stats.get("walks_run", 0),
        preprocess_seconds=t_pre, query_seconds=t_query,
    )


def run_eval(
    gen_cfg: GeneratorConfig,
    pre_cfg: PreprocessConfig,
    seeds: list[int],
    threads: int = 1,
) -> EvalReport:
    """One full pipeline per seed (the seed drives both the generator and the
    oracle); rows merge in seed order regardless of scheduling."""
    report = EvalReport(_config_digest(gen_cfg, pre_cfg))
    jobs = [
        (replace(gen_cfg, seed=seed), replace(pre_cfg, seed=seed)) for seed in seeds
    ]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            report.rows = list(pool.map(lambda ab: run_single(*ab), jobs))
    else:
        report.rows = [run_single(*ab) for ab in jobs]
    return report


@dataclass
class ProbeRow:
    k: int
    delta_exp: float
    query_walks_per_query: float
    stored_walks_per_rep: float
    artifact_bytes: int
    miss_rate: float

    @property
    def walk_product(self) -> float:
        return self.query_walks_per_query * self.stored_walks_per_rep


def run_scaling_probe(
    n: int,
    ks: list[int],
    d: int,
    pre_cfg: PreprocessConfig,
    delta_exps: list[float] = (0.5,),
    probe_queries: int = 64,
    seed: int = 0,
) -> list[ProbeRow]:
    """Sweep the cluster count (and optionally the walk-split exponent) and
    record the measured per-query walk cost, per-representative storage, and
    artifact size."""
    rows = []
    for k in ks:
        g, truth = generate_clusterable(GeneratorConfig(n=n, k=k, d=d, seed=seed))
        for dexp in delta_exps:
            cfg = replace(pre_cfg, k_hat=k, delta_exp=dexp, seed=seed)
            artifact = preprocessing(g, cfg)
            stats: dict = {}
            rng = np.random.default_rng(seed)
            xs = rng.integers(0, n, size=probe_queries)
            query_many(g, artifact, xs, stats=stats)
            full = query_many(g, artifact, range(n))
            _, rate = misclassification(truth, full)
            with tempfile.TemporaryDirectory() as td:
                path = os.path.join(td, "probe.bin")
                save_artifact(artifact, path)
                size = os.path.getsize(path)
            stored_per_rep = artifact.diagnostics["stored_walks"] * (
                artifact.wp.t_delta + 1
            ) * artifact.tree.j * _avg_nodes_per_leaf(len(artifact.representatives))
            rows.append(
                ProbeRow(
                    k=k,
                    delta_exp=dexp,
                    query_walks_per_query=stats["walks_run"] / max(stats["queries"], 1),
                    stored_walks_per_rep=stored_per_rep,
                    artifact_bytes=size,
                    miss_rate=rate,
                )
            )
    return rows


def _avg_nodes_per_leaf(leaves: int) -> float:
    """Average number of tree nodes whose range contains a given leaf."""
    if leaves <= 1:
        return 1.0
    total = 0

    def walk(lo: int, hi: int, depth: int):
        nonlocal total
        total += hi - lo
        if hi - lo > 1:
            mid = lo + (hi - lo + 1) // 2
            walk(lo, mid, depth + 1)
            walk(mid, hi, depth + 1)

    walk(0, leaves, 0)
    return total / leaves


def probe_csv(rows: list[ProbeRow]) -> str:
    out = io.StringIO()
    out.write(f"# {FORMAT_VERSION} scaling-probe\n")
    out.write("k,delta_exp,query_walks_per_query,stored_walks_per_rep,walk_product,artifact_bytes,miss_rate\n")
    for row in rows:
        out.write(
            f"{row.k},{row.delta_exp:g},{row.query_walks_per_query:.1f},"
            f"{row.stored_walks_per_rep:.1f},{row.walk_product:.1f},{row.artifact_bytes},{row.miss_rate:.6f}\n"
        )
    return out.getvalue()
