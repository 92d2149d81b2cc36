"""Tree of sketches, the covering vote, and capped binary-search retrieval.

The tree is a complete binary tree over an ordered vertex list; each node
holds J independent sketches of its sublist (left child takes the first
ceil(m/2) elements).  A query asks, node by node, whether the node's
sublist contains a vertex from the query's cluster: J votes compare
|<sketch(x), Sk_j>| against half the query's sketch self-estimate (or half
an absolute scale in asymmetric-walk mode), and the vote passes when more
than a 0.3 fraction agree.  The search descends into children that vote
covered, returns the union of reached leaves, and aborts to the empty set
when it visits more than max_leaves leaves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .graph import BoundedDegreeGraph
from .sketch import QUERY_TRIAL_BASE, SketchParams, SketchVector, singleton_sketches, sketch_batch
from .walks import sparse_dot


@dataclass
class QueryBudget:
    """Vote counts and thresholds for covering tests, plus the leaf cap."""

    max_leaves: int
    j_votes: int = 25
    vote_fraction: float = 0.3
    dot_fraction: float = 0.5
    absolute_threshold: float | None = None  # (1/eta) * k_hat/n when walks are asymmetric

    def __post_init__(self):
        if self.max_leaves < 0 or self.j_votes < 1:
            raise ConfigError("need max_leaves >= 0 and j_votes >= 1")
        if not (0 < self.vote_fraction < 1 and 0 < self.dot_fraction < 1):
            raise ConfigError("vote and dot threshold fractions must lie in (0,1)")


def default_max_leaves(phi: float, eps: float) -> int:
    """ceil(4 * (phi^2/eps)^(1/3)); the per-cluster hit count stays below this."""
    if eps <= 0:
        raise ConfigError("eps must be positive for the leaf-cap rule")
    return int(np.ceil(4.0 * (phi**2 / eps) ** (1.0 / 3.0)))


@dataclass
class TreeNode:
    lo: int
    hi: int  # item range [lo, hi) over the base list order
    index: int  # preorder index; fixes the sketch trial ids
    sketches: list[SketchVector]
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.hi - self.lo == 1


@dataclass
class SketchTree:
    items: np.ndarray  # ordered base vertex list (may repeat vertices)
    j: int
    root: TreeNode
    nodes: list[TreeNode]  # preorder
    params_digest: str

    def node_count(self) -> int:
        return len(self.nodes)

    def stored_support(self) -> int:
        return sum(sk.support_size for node in self.nodes for sk in node.sketches)


def build_sketch_tree(
    g: BoundedDegreeGraph, items, params: SketchParams, j: int, trial_offset: int = 0
) -> SketchTree:
    """All 2|S|-1 nodes, preorder; node i's sketches use trials
    trial_offset + i*j .. + i*j + j - 1, so every sketch in the tree (and
    across trees built with disjoint offsets) has a distinct trial index."""
    items = np.asarray(list(items), dtype=np.int64)
    if items.size == 0:
        raise ConfigError("cannot build a sketch tree over an empty list")
    if j < 1:
        raise ConfigError("need at least one sketch per node")
    nodes: list[TreeNode] = []

    def build(lo: int, hi: int) -> TreeNode:
        index = len(nodes)
        node = TreeNode(lo, hi, index, [])
        nodes.append(node)
        if hi - lo > 1:
            mid = lo + (hi - lo + 1) // 2  # left child takes ceil(m/2)
            node.left = build(lo, mid)
            node.right = build(mid, hi)
        return node

    root = build(0, items.size)
    for node in nodes:
        base = trial_offset + node.index * j
        node.sketches = sketch_batch(g, items[node.lo : node.hi], params, range(base, base + j))
    return SketchTree(items, j, root, nodes, params.digest())


def is_covered(
    g: BoundedDegreeGraph,
    x: int,
    node_sketches: list[SketchVector],
    params: SketchParams,
    budget: QueryBudget,
    query_sketches: list[SketchVector] | None = None,
    self_estimate: float | None = None,
    trial_base: int = QUERY_TRIAL_BASE,
) -> bool:
    """Majority vote on whether the sketched set covers x's cluster.

    Vote j compares |<sketch(x)_j, Sk_j>| against dot_fraction times the
    query self-estimate (one fresh pair per call), strictly: all-zero stored
    sketches fail every vote.  Pass query_sketches/self_estimate to reuse
    one batch of query sketches across several nodes of the same search.
    """
    j = len(node_sketches)
    if query_sketches is None:
        query_sketches = singleton_sketches(g, x, params, range(trial_base, trial_base + j))
    if self_estimate is None:
        pair = singleton_sketches(g, x, params, [trial_base + j, trial_base + j + 1])
        self_estimate = abs(sparse_dot(pair[0].v, pair[1].v))
    if budget.absolute_threshold is not None:
        threshold = budget.dot_fraction * budget.absolute_threshold
    else:
        threshold = budget.dot_fraction * abs(self_estimate)
    votes = 0
    for qs, sk in zip(query_sketches, node_sketches):
        if abs(sparse_dot(qs.v, sk.v)) > threshold:
            votes += 1
    return votes >= budget.vote_fraction * j


@dataclass
class FindResult:
    positions: list[int]  # item indices into the tree's base list
    aborted: bool
    leaves_visited: int
    covered_calls: int
    tree_items: np.ndarray = field(repr=False, default=None)

    @property
    def vertices(self) -> np.ndarray:
        return self.tree_items[self.positions] if len(self.positions) else np.empty(0, dtype=np.int64)

    def singleton_vertex(self) -> int | None:
        verts = np.unique(self.vertices)
        return int(verts[0]) if len(verts) == 1 else None


def find_neighbors(
    g: BoundedDegreeGraph,
    x: int,
    tree: SketchTree,
    params: SketchParams,
    budget: QueryBudget,
    trial_base: int = QUERY_TRIAL_BASE,
) -> FindResult:
    """Binary search for the base-list elements in x's cluster.

    One batch of j+2 query sketches of x is drawn per call and reused at
    every node (fresh trial per vote within the batch); with table-backed
    walks the whole search is a deterministic function of x.  Exceeding the
    leaf cap aborts the entire call with the empty set.
    """
    j = tree.j
    bundle = singleton_sketches(g, x, params, range(trial_base, trial_base + j + 2))
    query_sketches = bundle[:j]
    self_estimate = abs(sparse_dot(bundle[j].v, bundle[j + 1].v))

    state = {"leaves": 0, "calls": 0, "aborted": False}
    found: list[int] = []

    def descend(node: TreeNode) -> None:
        if state["aborted"]:
            return
        if node.is_leaf:
            state["leaves"] += 1
            if state["leaves"] > budget.max_leaves:
                state["aborted"] = True
                return
            found.append(node.lo)
            return
        for child in (node.left, node.right):
            if state["aborted"]:
                return
            state["calls"] += 1
            if is_covered(
                g, x, child.sketches, params, budget,
                query_sketches=query_sketches, self_estimate=self_estimate,
            ):
                descend(child)

    descend(tree.root)
    if state["aborted"]:
        return FindResult([], True, state["leaves"], state["calls"], tree.items)
    return FindResult(sorted(found), False, state["leaves"], state["calls"], tree.items)
