"""Two-phase preprocessing, the serialized oracle artifact, and queries.

Phase 1 samples a multiset S (uniform with replacement), builds a tree of
sketches over it, and runs the neighbor search for every sample; mutual
directed hits form an undirected similarity graph whose connected
components each contribute their minimum-vertex-id member to the candidate
set.  Phase 2 re-tests a fresh sample against the candidates' tree and
keeps the candidates that appear as a singleton answer at least once.  The
artifact stores the representative list, its tree of sketches, the
configuration, and the derandomization seeds, and is bound to its graph by
a digest.

Trial-index layout (derandomized mode): tree nodes of the three build
phases draw from disjoint trial ranges, and all query-time sketches share
one fixed trial base, so a given vertex is always queried with the same
walks -- the oracle answers consistently across calls, runs, and
save/load round trips.
"""

from __future__ import annotations

import io
import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .chebpoly import PolyParams, WalkPolynomial, build_walk_polynomial
from .errors import ArtifactFormatError, ConfigError, PreprocessingFailure, WrongGraphError
from .graph import BoundedDegreeGraph
from .sketch import QUERY_TRIAL_BASE, SketchParams, SketchVector
from .sketchtree import (
    FindResult,
    QueryBudget,
    SketchTree,
    TreeNode,
    build_sketch_tree,
    default_max_leaves,
    find_neighbors,
)
from .walks import FreshWalks, SparseDistribution, WalkTable

ARTIFACT_MAGIC = b"SKORCL01"
ARTIFACT_VERSION = 1

_PHASE_CAND_BASE = 1 << 18
_PHASE_R_BASE = 1 << 19


@dataclass
class PreprocessConfig:
    """Everything the pipeline needs: cluster-count estimate, promise
    parameters, sample sizes, walk weights, vote budgets, and seeds.

    Walk weights default to the plain power x^t at t = ceil(20 ln n /
    phi^2); pass t_min (and optionally t_delta + chebyshev=True) to
    override.  Walk counts realize the space/query tradeoff: stored-side
    sketches use ceil(scale*(n/k_hat)^(1-delta_exp)) walks and query-side
    ceil(scale*(n/k_hat)^delta_exp); below delta_exp = 0.5 the covering
    vote switches to the absolute threshold (1/eta)*(k_hat/n).
    """

    k_hat: int
    phi: float
    eps: float
    seed: int = 0
    sample_multiplier: float = 4.0
    walks_scale: float = 8.0
    delta_exp: float = 0.5
    j_votes: int = 25
    t_min: int | None = None
    t_delta: int = 0
    chebyshev: bool = False
    max_leaves: int | None = None
    vote_fraction: float = 0.3
    dot_fraction: float = 0.5
    eta: float = 1.0
    fresh_randomness: bool = False
    table_w_cap: int = 1 << 48

    def __post_init__(self):
        if self.k_hat < 1:
            raise ConfigError("k_hat must be at least 1")
        if not 0 < self.phi <= 1 or not 0 <= self.eps < 1:
            raise ConfigError("need phi in (0,1] and eps in [0,1)")
        if not 0.0 <= self.delta_exp <= 1.0:
            raise ConfigError("delta_exp must lie in [0,1]")

    def sample_size(self) -> int:
        ratio = self.phi**2 / self.eps if self.eps > 0 else math.e
        size = math.ceil(self.sample_multiplier * self.k_hat * math.log(max(ratio, math.e)))
        return max(size, self.k_hat)

    def walk_polynomial(self, n: int) -> WalkPolynomial:
        if self.chebyshev:
            return build_walk_polynomial(PolyParams(n, self.phi, self.eps), validate=False)
        t = self.t_min if self.t_min is not None else math.ceil(20.0 * math.log(n) / self.phi**2)
        if self.t_delta == 0:
            return WalkPolynomial.plain_power(t)
        coeffs = {t + i: 1.0 if i == 0 else 0.0 for i in range(self.t_delta + 1)}
        return WalkPolynomial(t, self.t_delta, coeffs)

    def stored_walks(self, n: int) -> int:
        return int(math.ceil(self.walks_scale * (n / self.k_hat) ** (1.0 - self.delta_exp)))

    def query_walks(self, n: int) -> int:
        return int(math.ceil(self.walks_scale * (n / self.k_hat) ** self.delta_exp))

    def budget(self, n: int) -> QueryBudget:
        if self.max_leaves is not None:
            cap = self.max_leaves
        else:
            # The phase-1 searches run against the sample's own tree, where a
            # cluster is hit sample_size/k_hat times in expectation; the cap
            # must clear that with Poisson headroom or phase 1 aborts itself.
            rule = default_max_leaves(self.phi, self.eps) if self.eps > 0 else 2 * self.k_hat
            cap = max(rule, math.ceil(4.0 * self.sample_size() / self.k_hat))
        absolute = None
        if self.delta_exp < 0.5:
            absolute = (1.0 / self.eta) * self.k_hat / n
        return QueryBudget(cap, self.j_votes, self.vote_fraction, self.dot_fraction, absolute)

    def make_source(self, wp: WalkPolynomial):
        if self.fresh_randomness:
            return FreshWalks(self.seed)
        t_cap = wp.t_min + wp.t_delta
        return WalkTable(self.seed, t_cap, self.table_w_cap)

    def to_dict(self) -> dict:
        return {
            "k_hat": self.k_hat, "phi": self.phi, "eps": self.eps, "seed": self.seed,
            "sample_multiplier": self.sample_multiplier, "walks_scale": self.walks_scale,
            "delta_exp": self.delta_exp, "j_votes": self.j_votes, "t_min": self.t_min,
            "t_delta": self.t_delta, "chebyshev": self.chebyshev, "max_leaves": self.max_leaves,
            "vote_fraction": self.vote_fraction, "dot_fraction": self.dot_fraction,
            "eta": self.eta, "fresh_randomness": self.fresh_randomness,
            "table_w_cap": self.table_w_cap,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PreprocessConfig":
        return cls(**d)


@dataclass
class OracleArtifact:
    """Representative vertices, their tree of sketches, and session state."""

    config: PreprocessConfig
    graph_digest: bytes
    n: int
    representatives: list[int]
    tree: SketchTree
    wp: WalkPolynomial
    diagnostics: dict = field(default_factory=dict)

    def session(self, g: BoundedDegreeGraph) -> tuple[SketchParams, QueryBudget]:
        if g.digest() != self.graph_digest:
            raise WrongGraphError("artifact was built on a different graph")
        source = self.config.make_source(self.wp)
        return SketchParams(self.wp, self.config.query_walks(self.n), source), self.config.budget(self.n)


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def preprocessing(g: BoundedDegreeGraph, cfg: PreprocessConfig) -> OracleArtifact:
    """Run both phases and return the artifact (raises on an empty result)."""
    rng = np.random.default_rng(cfg.seed)
    wp = cfg.walk_polynomial(g.n)
    source = cfg.make_source(wp)
    stored = SketchParams(wp, cfg.stored_walks(g.n), source)
    query = SketchParams(wp, cfg.query_walks(g.n), source)
    budget = cfg.budget(g.n)
    size = cfg.sample_size()

    sample = rng.integers(0, g.n, size=size).astype(np.int64)
    tree_s = build_sketch_tree(g, sample, stored, cfg.j_votes)

    directed: set[tuple[int, int]] = set()
    aborted_phase1 = 0
    for idx in range(size):
        res = find_neighbors(g, int(sample[idx]), tree_s, query, budget)
        if res.aborted:
            aborted_phase1 += 1
        for pos in res.positions:
            directed.add((idx, pos))

    dsu = _UnionFind(size)
    mutual = 0
    for a, b in directed:
        if a < b and (b, a) in directed:
            dsu.union(a, b)
            mutual += 1
    components: dict[int, list[int]] = {}
    for idx in range(size):
        components.setdefault(dsu.find(idx), []).append(idx)
    r_cand = sorted({int(sample[min(idxs, key=lambda i: int(sample[i]))]) for idxs in components.values()})

    tree_cand = build_sketch_tree(g, r_cand, stored, cfg.j_votes, trial_offset=_PHASE_CAND_BASE)
    sample_test = rng.integers(0, g.n, size=size).astype(np.int64)
    counts = {y: 0 for y in r_cand}
    aborted_phase2 = 0
    for x in sample_test:
        res = find_neighbors(g, int(x), tree_cand, query, budget)
        if res.aborted:
            aborted_phase2 += 1
        hit = res.singleton_vertex()
        if hit is not None:
            counts[hit] += 1
    reps = sorted(y for y, c in counts.items() if c > 0)
    if not reps:
        raise PreprocessingFailure(
            "no representative was ever a singleton answer; retry with a different seed"
        )

    tree_r = build_sketch_tree(g, reps, stored, cfg.j_votes, trial_offset=_PHASE_R_BASE)
    diagnostics = {
        "sample_size": size,
        "components": len(components),
        "mutual_edges": mutual,
        "r_cand_size": len(r_cand),
        "r_size": len(reps),
        "aborted_phase1": aborted_phase1,
        "aborted_phase2": aborted_phase2,
        "stored_walks": stored.r,
        "query_walks": query.r,
        "walks_run": int(source.walks_run),
    }
    return OracleArtifact(cfg, g.digest(), g.n, reps, tree_r, wp, diagnostics)


def query(g: BoundedDegreeGraph, artifact: OracleArtifact, x: int) -> int:
    """Cluster label of x as an index into the representative list, or -1.

    The label is the index of the unique returned representative; any other
    outcome (empty, aborted, or multiple hits) is unclassified.
    """
    params, budget = artifact.session(g)
    res = find_neighbors(g, x, artifact.tree, params, budget, trial_base=QUERY_TRIAL_BASE)
    hit = res.singleton_vertex()
    if hit is None:
        return -1
    return artifact.representatives.index(hit)


def query_many(
    g: BoundedDegreeGraph, artifact: OracleArtifact, xs, stats: dict | None = None
) -> np.ndarray:
    params, budget = artifact.session(g)
    out = np.empty(len(xs), dtype=np.int64)
    rep_index = {y: i for i, y in enumerate(artifact.representatives)}
    covered_calls = 0
    aborted = 0
    for i, x in enumerate(xs):
        res = find_neighbors(g, int(x), artifact.tree, params, budget, trial_base=QUERY_TRIAL_BASE)
        covered_calls += res.covered_calls
        aborted += res.aborted
        hit = res.singleton_vertex()
        out[i] = rep_index.get(hit, -1) if hit is not None else -1
    if stats is not None:
        stats["walks_run"] = int(params.source.walks_run)
        stats["covered_calls"] = covered_calls
        stats["aborted"] = aborted
        stats["queries"] = len(xs)
    return out


# ---------------------------------------------------------------------------
# Serialization: varint-delta sparse vectors inside a length-checked container.


def _write_varint(buf: io.BytesIO, value: int) -> None:
    if value < 0:
        raise ArtifactFormatError("varints are unsigned")
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            buf.write(bytes([byte | 0x80]))
        else:
            buf.write(bytes([byte]))
            return


def _read_varint(view: memoryview, offset: int) -> tuple[int, int]:
    result = 0
    shift = 0
    while True:
        if offset >= len(view):
            raise ArtifactFormatError(f"truncated varint at offset {offset}")
        byte = view[offset]
        offset += 1
        result |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return result, offset
        shift += 7


def _write_sparse(buf: io.BytesIO, dist: SparseDistribution) -> None:
    _write_varint(buf, dist.ids.size)
    prev = 0
    for vid, w in zip(dist.ids.tolist(), dist.weights.tolist()):
        _write_varint(buf, vid - prev)
        prev = vid
        buf.write(struct.pack("<d", w))


def _read_sparse(view: memoryview, offset: int) -> tuple[SparseDistribution, int]:
    count, offset = _read_varint(view, offset)
    ids = np.empty(count, dtype=np.int64)
    weights = np.empty(count)
    prev = 0
    for i in range(count):
        delta, offset = _read_varint(view, offset)
        prev += delta
        ids[i] = prev
        if offset + 8 > len(view):
            raise ArtifactFormatError(f"truncated weight at offset {offset}")
        weights[i] = struct.unpack_from("<d", view, offset)[0]
        offset += 8
    return SparseDistribution(ids, weights), offset


def save_artifact(artifact: OracleArtifact, path) -> None:
    header = {
        "version": ARTIFACT_VERSION,
        "config": artifact.config.to_dict(),
        "graph_digest": artifact.graph_digest.hex(),
        "n": artifact.n,
        "representatives": artifact.representatives,
        "wp": {
            "t_min": artifact.wp.t_min,
            "t_delta": artifact.wp.t_delta,
            "coeffs": [artifact.wp.coeffs[t] for t in artifact.wp.lengths()],
        },
        "diagnostics": artifact.diagnostics,
        "j": artifact.tree.j,
        "params_digest": artifact.tree.params_digest,
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    buf = io.BytesIO()
    buf.write(ARTIFACT_MAGIC)
    buf.write(struct.pack("<I", len(head)))
    buf.write(head)
    _write_varint(buf, len(artifact.tree.nodes))
    for node in artifact.tree.nodes:
        _write_varint(buf, node.lo)
        _write_varint(buf, node.hi)
        _write_varint(buf, node.index)
        _write_varint(buf, len(node.sketches))
        for sk in node.sketches:
            _write_sparse(buf, sk.v)
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_artifact(path) -> OracleArtifact:
    with open(path, "rb") as fh:
        blob = fh.read()
    view = memoryview(blob)
    if blob[:8] != ARTIFACT_MAGIC:
        raise ArtifactFormatError("bad magic: not an oracle artifact")
    if len(blob) < 12:
        raise ArtifactFormatError("truncated header length at offset 8")
    (head_len,) = struct.unpack_from("<I", view, 8)
    if len(blob) < 12 + head_len:
        raise ArtifactFormatError(f"truncated header at offset {len(blob)}")
    header = json.loads(bytes(view[12 : 12 + head_len]))
    if header.get("version") != ARTIFACT_VERSION:
        raise ArtifactFormatError(
            f"format version {header.get('version')} not supported (expected {ARTIFACT_VERSION})"
        )
    cfg = PreprocessConfig.from_dict(header["config"])
    wp_info = header["wp"]
    coeffs = {wp_info["t_min"] + i: c for i, c in enumerate(wp_info["coeffs"])}
    wp = WalkPolynomial(wp_info["t_min"], wp_info["t_delta"], coeffs)
    reps = [int(v) for v in header["representatives"]]

    offset = 12 + head_len
    node_count, offset = _read_varint(view, offset)
    items = np.asarray(reps, dtype=np.int64)
    flat: list[TreeNode] = []
    digest = header["params_digest"]
    for _ in range(node_count):
        lo, offset = _read_varint(view, offset)
        hi, offset = _read_varint(view, offset)
        index, offset = _read_varint(view, offset)
        n_sk, offset = _read_varint(view, offset)
        sketches = []
        for _ in range(n_sk):
            dist, offset = _read_sparse(view, offset)
            sketches.append(SketchVector(dist, hi - lo, digest))
        flat.append(TreeNode(lo, hi, index, sketches))
    if offset != len(blob):
        raise ArtifactFormatError(f"{len(blob) - offset} trailing bytes at offset {offset}")
    root = _rebuild_links(flat)
    tree = SketchTree(items, header["j"], root, flat, digest)
    return OracleArtifact(
        cfg, bytes.fromhex(header["graph_digest"]), int(header["n"]), reps, tree, wp,
        header.get("diagnostics", {}),
    )


def _rebuild_links(nodes: list[TreeNode]) -> TreeNode:
    """Reattach children from the preorder layout (left subtree is contiguous)."""
    if not nodes:
        raise ArtifactFormatError("artifact holds an empty tree")

    def attach(index: int) -> tuple[TreeNode, int]:
        node = nodes[index]
        if node.hi - node.lo == 1:
            return node, index + 1
        node.left, nxt = attach(index + 1)
        node.right, nxt = attach(nxt)
        return node, nxt

    root, consumed = attach(0)
    if consumed != len(nodes):
        raise ArtifactFormatError("tree node list does not form one preorder traversal")
    return root
