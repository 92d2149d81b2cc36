"""Sublinear-time spectral clustering oracles from random-walk sketches.

The library splits into desk-scale ground truth (dense spectral reference)
and the sublinear machinery it validates: bounded-degree graphs with a
clusterable-instance generator, lazy-walk simulation with optional
derandomized walk tables, Chebyshev-derived walk-weight polynomials, signed
sketch mixtures, a tree-of-sketches nearest-neighbor search, the two-phase
preprocessing that extracts cluster representatives, and a cluster-count
estimator.
"""

from .chebpoly import PolyParams, WalkPolynomial, build_walk_polynomial, eval_p_clenshaw
from .clustercount import ApproxKConfig, ApproxKResult, approx_k
from .graph import (
    BoundedDegreeGraph,
    GeneratorConfig,
    GroundTruthClustering,
    generate_clusterable,
    load_graph,
    load_labels,
    outer_conductance,
    save_graph,
    save_labels,
)
from .preprocess import (
    OracleArtifact,
    PreprocessConfig,
    load_artifact,
    preprocessing,
    query,
    query_many,
    save_artifact,
)
from .sketch import SketchParams, SketchVector, boosted_sketch, sketch, sketch_self_estimate
from .sketchtree import QueryBudget, SketchTree, build_sketch_tree, find_neighbors, is_covered
from .spectral import (
    BDeltaReport,
    CollisionTestParams,
    SpectralReference,
    b_delta,
    build_reference,
    cluster_mean_checks,
    dense_p_of_m,
    eigengap_checks,
    measure_collision_conditions,
    misclassification,
)
from .walks import (
    FreshWalks,
    SparseDistribution,
    WalkParams,
    WalkTable,
    lazy_step,
    random_walks,
    sparse_axpy,
    sparse_dot,
)

__version__ = "0.1.0"
