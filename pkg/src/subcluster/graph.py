"""Bounded-degree graphs, a clusterable-instance generator, and text file I/O.

Graphs are undirected with a hard degree bound ``d``.  A vertex with fewer
than ``d`` real neighbors behaves as if it carried ``d - deg(x)`` self-loops:
``neighbor(x, i)`` returns ``x`` itself for every padding slot, so walk code
can treat every vertex as having exactly ``d`` neighbor slots.  The padding
is computed on the fly and never stored.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, GraphFormatError


class BoundedDegreeGraph:
    """Undirected graph with per-vertex neighbor lists of length <= d.

    Immutable after construction; the padded adjacency matrix used by the
    walk engine is built lazily and cached.  Neighbor lists are kept sorted
    so that equal graphs serialize identically.
    """

    def __init__(self, n: int, d: int, adjacency: list[list[int]]):
        if d < 1:
            raise ConfigError(f"degree bound must be positive, got {d}")
        if len(adjacency) != n:
            raise ConfigError(f"adjacency has {len(adjacency)} rows for n={n}")
        self.n = n
        self.d = d
        self.adjacency = [sorted(row) for row in adjacency]
        self._validate()
        self.degrees = np.array([len(row) for row in self.adjacency], dtype=np.int64)
        self._padded: np.ndarray | None = None
        self._digest: bytes | None = None

    def _validate(self) -> None:
        seen: set[tuple[int, int]] = set()
        for x, row in enumerate(self.adjacency):
            if len(row) > self.d:
                raise GraphFormatError(f"vertex {x} lists {len(row)} neighbors, bound is {self.d}")
            for y in row:
                if not 0 <= y < self.n:
                    raise GraphFormatError(f"vertex {x} lists out-of-range neighbor {y}")
                if y != x:
                    if (x, y) in seen:
                        raise GraphFormatError(f"vertex {x} lists neighbor {y} more than once")
                    seen.add((x, y))
        for x, row in enumerate(self.adjacency):
            for y in row:
                if y != x and x not in self.adjacency[y]:
                    raise GraphFormatError(f"edge {x}-{y} is not symmetric: {y} does not list {x}")

    @property
    def padded(self) -> np.ndarray:
        """n x d neighbor matrix; slot i of vertex x is x itself when i >= deg(x)."""
        if self._padded is None:
            mat = np.tile(np.arange(self.n, dtype=np.int64)[:, None], (1, self.d))
            for x, row in enumerate(self.adjacency):
                mat[x, : len(row)] = row
            self._padded = mat
        return self._padded

    def neighbor(self, x: int, i: int) -> int:
        """i-th neighbor slot of x; padding slots return x itself."""
        if not 0 <= x < self.n:
            raise ConfigError(f"vertex {x} out of range [0,{self.n})")
        if not 0 <= i < self.d:
            raise ConfigError(f"slot {i} out of range [0,{self.d})")
        row = self.adjacency[x]
        return row[i] if i < len(row) else x

    def digest(self) -> bytes:
        """Hash of (n, d, adjacency) used to tie oracle artifacts to their graph."""
        if self._digest is None:
            h = hashlib.sha256()
            h.update(f"{self.n} {self.d}\n".encode())
            for row in self.adjacency:
                h.update(b" ".join(str(y).encode() for y in row))
                h.update(b"\n")
            self._digest = h.digest()[:16]
        return self._digest

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, BoundedDegreeGraph)
            and self.n == other.n
            and self.d == other.d
            and self.adjacency == other.adjacency
        )

    def edge_count(self) -> int:
        loops = sum(row.count(x) for x, row in enumerate(self.adjacency))
        return (int(self.degrees.sum()) - loops) // 2 + loops


@dataclass
class GroundTruthClustering:
    """Planted cluster labels with per-cluster sizes and the size ratio eta."""

    labels: np.ndarray
    k: int
    cluster_sizes: np.ndarray = field(init=False)
    eta: float = field(init=False)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.min(initial=0) < 0 or (self.k and self.labels.max(initial=0) >= self.k):
            raise ConfigError("labels out of range [0,k)")
        self.cluster_sizes = np.bincount(self.labels, minlength=self.k)
        if self.cluster_sizes.min() == 0:
            raise ConfigError("every cluster must be nonempty")
        self.eta = float(self.cluster_sizes.max() / self.cluster_sizes.min())

    def members(self, i: int) -> np.ndarray:
        return np.nonzero(self.labels == i)[0]


@dataclass
class GeneratorConfig:
    """Parameters for the clusterable-instance generator.

    cross_edge_budget is the target fraction of edge-endpoint slots (out of
    n*d) occupied by cross-cluster edges.  One degree slot per vertex is
    reserved for cross edges whenever the budget is positive, so the inner
    expanders are built with d-1 matchings in that case.
    """

    n: int
    k: int
    d: int
    cross_edge_budget: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if self.d < 3:
            raise ConfigError("degree bound must be at least 3")
        if self.k < 1 or self.n < 2 * self.k:
            raise ConfigError("need at least two vertices per cluster")
        if not 0.0 <= self.cross_edge_budget < 1.0:
            raise ConfigError("cross_edge_budget must lie in [0,1)")
        if self.cross_edge_budget > 0 and self.k < 2:
            raise ConfigError("cross edges require at least two clusters")
        if self.cross_edge_budget * self.d > 1.0:
            raise ConfigError(
                "cross budget needs more than one reserved slot per vertex; "
                f"cross_edge_budget*d = {self.cross_edge_budget * self.d:.3f} > 1"
            )


def _matching_rounds(verts: np.ndarray, rounds: int, rng: np.random.Generator) -> set[tuple[int, int]]:
    """Union of `rounds` random perfect matchings on `verts`, rejecting any
    matching that would duplicate an existing edge (retried a few times,
    then accepted best-effort with the duplicate pairs skipped).

    Odd-size sets leave one vertex unmatched per round; it takes over one
    endpoint of the first usable matched pair, which keeps every vertex at
    one new edge per round and so never breaks the degree bound.
    """
    m = len(verts)
    edges: set[tuple[int, int]] = set()
    if m < 2:
        return edges

    def norm(a: int, b: int) -> tuple[int, int]:
        return (a, b) if a < b else (b, a)

    if rounds >= m - 1:
        # The matching union saturates: every pair ends up matched in some
        # round, so build the complete graph on the set directly.
        for i in range(m):
            for j in range(i + 1, m):
                edges.add((int(verts[i]), int(verts[j])))
        return edges

    for _ in range(rounds):
        pairs: list[tuple[int, int]] | None = None
        leftover = -1
        for _attempt in range(50):
            perm = rng.permutation(m)
            cand = [norm(int(verts[perm[2 * i]]), int(verts[perm[2 * i + 1]])) for i in range(m // 2)]
            if all(e not in edges for e in cand) and len(set(cand)) == len(cand):
                pairs = cand
                leftover = int(verts[perm[-1]]) if m % 2 else -1
                break
        if pairs is None:
            # Saturated small set: keep whatever pairs are still new.
            perm = rng.permutation(m)
            cand = [norm(int(verts[perm[2 * i]]), int(verts[perm[2 * i + 1]])) for i in range(m // 2)]
            pairs = [e for e in dict.fromkeys(cand) if e not in edges]
            leftover = int(verts[perm[-1]]) if m % 2 else -1
        if leftover >= 0 and pairs:
            for idx, (a, b) in enumerate(pairs):
                rewired = norm(leftover, a)
                if rewired not in edges and rewired not in pairs:
                    pairs[idx] = rewired
                    break
        edges.update(pairs)
    return edges


def generate_clusterable(cfg: GeneratorConfig) -> tuple[BoundedDegreeGraph, GroundTruthClustering]:
    """Random graph made of k near-regular expanders plus sparse cross edges.

    Each cluster is the union of random perfect matchings (configuration
    model with per-matching rejection).  Cross edges join uniformly random
    cluster pairs until the fraction of cross endpoints reaches the budget;
    the degree bound is never exceeded.  Deterministic given cfg.seed.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    base, rem = divmod(cfg.n, cfg.k)
    sizes = [base + 1 if i < rem else base for i in range(cfg.k)]
    starts = np.cumsum([0] + sizes[:-1])
    labels = np.repeat(np.arange(cfg.k), sizes)

    reserved = 1 if cfg.cross_edge_budget > 0 else 0
    d_inner = cfg.d - reserved
    edges: set[tuple[int, int]] = set()
    for i in range(cfg.k):
        verts = np.arange(starts[i], starts[i] + sizes[i], dtype=np.int64)
        edges |= _matching_rounds(verts, d_inner, rng)

    deg = np.zeros(cfg.n, dtype=np.int64)
    for a, b in edges:
        deg[a] += 1
        deg[b] += 1

    n_cross = int(round(cfg.cross_edge_budget * cfg.n * cfg.d / 2.0))
    placed = 0
    attempts = 0
    max_attempts = 200 * max(n_cross, 1)
    while placed < n_cross:
        attempts += 1
        if attempts > max_attempts:
            raise ConfigError(
                f"could not place {n_cross} cross edges without exceeding degree {cfg.d} "
                f"(placed {placed}); lower cross_edge_budget"
            )
        ci, cj = rng.choice(cfg.k, size=2, replace=False)
        a = int(starts[ci] + rng.integers(sizes[ci]))
        b = int(starts[cj] + rng.integers(sizes[cj]))
        if deg[a] >= cfg.d or deg[b] >= cfg.d:
            continue
        e = (a, b) if a < b else (b, a)
        if e in edges:
            continue
        edges.add(e)
        deg[a] += 1
        deg[b] += 1
        placed += 1

    adjacency: list[list[int]] = [[] for _ in range(cfg.n)]
    for a, b in sorted(edges):
        adjacency[a].append(b)
        adjacency[b].append(a)
    graph = BoundedDegreeGraph(cfg.n, cfg.d, adjacency)
    return graph, GroundTruthClustering(labels, cfg.k)


def outer_conductance(g: BoundedDegreeGraph, vertices) -> float:
    """|E(S, V \\ S)| / (d * |S|), counting real edges only."""
    members = np.zeros(g.n, dtype=bool)
    idx = np.asarray(list(vertices), dtype=np.int64)
    if idx.size == 0:
        raise ConfigError("outer_conductance needs a nonempty vertex set")
    members[idx] = True
    cut = 0
    for x in idx:
        for y in g.adjacency[int(x)]:
            if y != x and not members[y]:
                cut += 1
    return cut / (g.d * idx.size)


def save_graph(g: BoundedDegreeGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{g.n} {g.d}\n")
        for row in g.adjacency:
            fh.write(" ".join(str(y) for y in row))
            fh.write("\n")


def load_graph(path) -> BoundedDegreeGraph:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise GraphFormatError("line 1: empty file")
    header = lines[0].split()
    if len(header) != 2:
        raise GraphFormatError("line 1: expected 'n d'")
    try:
        n, d = int(header[0]), int(header[1])
    except ValueError as exc:
        raise GraphFormatError(f"line 1: non-integer header: {lines[0]!r}") from exc
    if len(lines) < n + 1:
        raise GraphFormatError(f"line {len(lines) + 1}: expected {n} adjacency lines, file ends early")
    adjacency: list[list[int]] = []
    for x in range(n):
        lineno = x + 2
        parts = lines[x + 1].split()
        try:
            row = [int(p) for p in parts]
        except ValueError as exc:
            raise GraphFormatError(f"line {lineno}: non-integer neighbor id") from exc
        if len(row) > d:
            raise GraphFormatError(f"line {lineno}: vertex {x} lists {len(row)} neighbors, bound is {d}")
        for y in row:
            if not 0 <= y < n:
                raise GraphFormatError(f"line {lineno}: neighbor id {y} out of range")
        adjacency.append(row)
    try:
        return BoundedDegreeGraph(n, d, adjacency)
    except GraphFormatError as exc:
        raise GraphFormatError(str(exc)) from None


def save_labels(gt: GroundTruthClustering, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for lab in gt.labels:
            fh.write(f"{int(lab)}\n")


def load_labels(path, k: int | None = None) -> GroundTruthClustering:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    labels = []
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            labels.append(int(line))
        except ValueError as exc:
            raise GraphFormatError(f"line {i + 1}: non-integer label") from exc
    arr = np.array(labels, dtype=np.int64)
    return GroundTruthClustering(arr, k if k is not None else int(arr.max()) + 1)
