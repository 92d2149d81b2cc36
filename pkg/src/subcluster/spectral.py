"""Desk-scale ground truth via dense linear algebra.

Everything here is an exact (up to LAPACK) reference against which the
sublinear machinery is tested: the normalized Laplacian eigendecomposition
of the d-regularized graph, per-vertex spectral embeddings and cluster
means, the deviating-vertex set, eigengap and cluster-mean structure
checks, dense application of walk-weight polynomials, the side conditions
of the collision-variance bound, and exact misclassification counting.

Eigenvector conventions: eigenvalues ascend, ties broken by LAPACK's index
order; all derived checks use only rotation-invariant quantities (norms,
dot products, projectors), so the basis ambiguity of degenerate eigenspaces
never surfaces.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

from .chebpoly import WalkPolynomial, evaluate_on_eigenvalues
from .errors import ConfigError
from .graph import BoundedDegreeGraph, GroundTruthClustering, outer_conductance

DENSE_CAP_DEFAULT = 5000


def regularized_adjacency(g: BoundedDegreeGraph) -> np.ndarray:
    """Dense adjacency with d - deg(x) self-loops folded into the diagonal."""
    a = np.zeros((g.n, g.n))
    for x, row in enumerate(g.adjacency):
        for y in row:
            if y == x:
                a[x, x] += 1.0
            else:
                a[x, y] += 1.0
    a[np.diag_indices(g.n)] += g.d - g.degrees
    return a


@dataclass
class SpectralReference:
    """Dense eigendecomposition of L = I - A_reg/d plus cluster statistics.

    With full=False only the bottom k+1 eigenpairs are computed (enough for
    embeddings, cluster means, the deviating set, and the eigengap); the
    operations that need the whole spectrum refuse to run on a partial
    reference.
    """

    g: BoundedDegreeGraph
    truth: GroundTruthClustering
    full: bool = True
    eigenvalues: np.ndarray = field(init=False)
    eigenvectors: np.ndarray = field(init=False)
    walk_eigenvalues: np.ndarray = field(init=False)
    u_k: np.ndarray = field(init=False)
    f: np.ndarray = field(init=False)
    mu: np.ndarray = field(init=False)

    def __post_init__(self):
        lap = np.eye(self.g.n) - regularized_adjacency(self.g) / self.g.d
        k = self.truth.k
        if self.full:
            vals, vecs = np.linalg.eigh(lap)
        else:
            upper = min(k, self.g.n - 1)
            vals, vecs = scipy.linalg.eigh(lap, subset_by_index=(0, upper))
        self.eigenvalues = vals
        self.eigenvectors = vecs
        self.walk_eigenvalues = 1.0 - vals / 2.0
        self.u_k = vecs[:, :k]
        self.f = self.u_k  # row x is the embedding of vertex x
        self.mu = np.zeros((k, k))
        for i in range(k):
            self.mu[i] = self.f[self.truth.members(i)].mean(axis=0)

    def _require_full(self, op: str) -> None:
        if not self.full:
            raise ConfigError(f"{op} needs the full spectrum; build with full=True")

    @property
    def n(self) -> int:
        return self.g.n

    @property
    def k(self) -> int:
        return self.truth.k

    def embedding_dot(self, x: int, y: int) -> float:
        return float(self.f[x] @ self.f[y])

    def measured_eps(self) -> float:
        """Max outer conductance over the planted clusters."""
        return max(outer_conductance(self.g, self.truth.members(i)) for i in range(self.k))

    def cluster_cheeger_phi(self) -> float:
        """Lower bound on the min inner conductance: min_i lambda_2(cluster i)/2.

        Each cluster-induced subgraph is d-regularized before taking its
        normalized Laplacian, matching the d|S| normalization of conductance.
        """
        worst = np.inf
        for i in range(self.k):
            members = self.truth.members(i)
            sub = _induced_regularized(self.g, members)
            lam = np.linalg.eigvalsh(np.eye(len(members)) - sub / self.g.d)
            worst = min(worst, lam[1] / 2.0)
        return float(worst)

    def walk_distribution(self, x: int, t: int) -> np.ndarray:
        """Dense M^t 1_x through the eigendecomposition."""
        self._require_full("walk_distribution")
        w = self.walk_eigenvalues**t
        return self.eigenvectors @ (w * self.eigenvectors[x])


def _induced_regularized(g: BoundedDegreeGraph, members: np.ndarray) -> np.ndarray:
    pos = {int(v): i for i, v in enumerate(members)}
    m = len(members)
    a = np.zeros((m, m))
    for v in members:
        for y in g.adjacency[int(v)]:
            if y == v:
                a[pos[int(v)], pos[int(v)]] += 1.0
            elif int(y) in pos:
                a[pos[int(v)], pos[int(y)]] += 1.0
    a[np.diag_indices(m)] += g.d - a.sum(axis=1)
    return a


def build_reference(
    g: BoundedDegreeGraph,
    truth: GroundTruthClustering,
    dense_cap: int = DENSE_CAP_DEFAULT,
    full: bool = True,
) -> SpectralReference:
    if g.n > dense_cap:
        raise ConfigError(f"n = {g.n} exceeds the dense reference cap {dense_cap}")
    if len(truth.labels) != g.n:
        raise ConfigError("labels length does not match the graph")
    return SpectralReference(g, truth, full=full)


@dataclass
class CheckResult:
    name: str
    measured: float
    bound: float
    passed: bool


def cluster_mean_checks(ref: SpectralReference, alphas: int = 64, seed: int = 0) -> list[CheckResult]:
    """Structure checks on the cluster means, with measured-parameter bounds.

    eps is the measured max outer conductance and phi the per-cluster
    Cheeger lower bound, so every reported bound is one the instance
    actually certifies.
    """
    eps = ref.measured_eps()
    phi = ref.cluster_cheeger_phi()
    slack = 4.0 * np.sqrt(eps) / phi
    sizes = ref.truth.cluster_sizes
    results = []

    worst = 0.0
    for i in range(ref.k):
        worst = max(worst, abs(ref.mu[i] @ ref.mu[i] - 1.0 / sizes[i]) * sizes[i])
    results.append(CheckResult("mean_norm", worst, slack, worst <= slack + 1e-12))

    worst = 0.0
    for i in range(ref.k):
        for j in range(i + 1, ref.k):
            val = abs(ref.mu[i] @ ref.mu[j]) * np.sqrt(sizes[i] * sizes[j])
            worst = max(worst, val)
    results.append(CheckResult("mean_cross_dot", worst, 2 * slack, worst <= 2 * slack + 1e-12))

    gram = sum(sizes[i] * np.outer(ref.mu[i], ref.mu[i]) for i in range(ref.k)) - np.eye(ref.k)
    rng = np.random.default_rng(seed)
    worst = 0.0
    worst_var = 0.0
    centered = ref.f - ref.mu[ref.truth.labels]
    for _ in range(alphas):
        alpha = rng.normal(size=ref.k)
        alpha /= np.linalg.norm(alpha)
        worst = max(worst, abs(alpha @ gram @ alpha))
        worst_var = max(worst_var, float(((centered @ alpha) ** 2).sum()))
    results.append(CheckResult("mean_gram_identity", worst, slack, worst <= slack + 1e-12))

    var_bound = 4.0 * eps / phi**2
    results.append(CheckResult("embedding_variance", worst_var, var_bound, worst_var <= var_bound + 1e-12))
    return results


def eigengap_checks(ref: SpectralReference) -> list[CheckResult]:
    """lambda_k <= 2*eps_measured and lambda_{k+1} >= phi_cheeger^2 / 2."""
    eps = ref.measured_eps()
    phi = ref.cluster_cheeger_phi()
    lam_k = float(ref.eigenvalues[ref.k - 1])
    lam_k1 = float(ref.eigenvalues[ref.k]) if ref.k < ref.n else np.inf
    return [
        CheckResult("lambda_k", lam_k, 2.0 * eps, lam_k <= 2.0 * eps + 1e-12),
        CheckResult("lambda_k_plus_1", lam_k1, phi**2 / 2.0, lam_k1 >= phi**2 / 2.0 - 1e-12),
    ]


def walk_norm_bound(ref: SpectralReference, cap: float = 10.0) -> CheckResult:
    """max_x ||M^t 1_x||_2 / sqrt(k/n) at t = ceil(10 ln n / phi^2)."""
    ref._require_full("walk_norm_bound")
    phi = ref.cluster_cheeger_phi()
    t = int(np.ceil(10.0 * np.log(ref.n) / phi**2))
    w2t = ref.walk_eigenvalues ** (2 * t)
    norms_sq = (ref.eigenvectors**2) @ w2t  # ||M^t 1_x||^2 = sum_i w_i^(2t) u_i(x)^2
    c_b = float(np.sqrt(norms_sq.max() / (ref.k / ref.n)))
    return CheckResult("walk_norm_factor", c_b, cap, c_b <= cap)


@dataclass
class BDeltaReport:
    delta: float
    member: np.ndarray
    size: int
    bound: float

    def fraction(self, n: int) -> float:
        return self.size / n


def default_delta(eps: float, phi: float, c: float = 1.0) -> float:
    return c * (eps / phi**2) ** (2.0 / 3.0)


def b_delta(ref: SpectralReference, delta: float) -> BDeltaReport:
    """Vertices whose embedding deviates from the cluster mean by more than
    delta/|C_i| in squared norm, plus the measured-parameter size bound
    8 * eta * n * eps / (phi^2 * delta).
    """
    if delta <= 0:
        raise ConfigError("delta must be positive")
    sizes = ref.truth.cluster_sizes
    dev = ((ref.f - ref.mu[ref.truth.labels]) ** 2).sum(axis=1)
    member = dev > delta / sizes[ref.truth.labels]
    eps = ref.measured_eps()
    phi = ref.cluster_cheeger_phi()
    bound = 8.0 * ref.truth.eta * ref.n * eps / (phi**2 * delta)
    return BDeltaReport(delta, member, int(member.sum()), bound)


def dense_p_of_m(ref: SpectralReference, wp: WalkPolynomial) -> tuple[np.ndarray, float]:
    """p(M) assembled through the eigendecomposition, and the spectral-norm
    distance to the rank-k projector U_k U_k^T (power iteration, 1e-8 tol).
    """
    ref._require_full("dense_p_of_m")
    pvals = np.array(evaluate_on_eigenvalues(wp, ref.walk_eigenvalues))
    p_m = (ref.eigenvectors * pvals) @ ref.eigenvectors.T
    target = pvals.copy()
    target[: ref.k] -= 1.0
    diff = (ref.eigenvectors * target) @ ref.eigenvectors.T
    return p_m, _power_norm(diff)


def _power_norm(sym: np.ndarray, tol: float = 1e-8, max_iter: int = 5000, seed: int = 7) -> float:
    rng = np.random.default_rng(seed)
    v = rng.normal(size=sym.shape[0])
    v /= np.linalg.norm(v)
    prev = 0.0
    for _ in range(max_iter):
        w = sym @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        if abs(norm - prev) <= tol * max(norm, 1e-300):
            break
        prev = norm
    return float(norm)


@dataclass
class CollisionTestParams:
    """Measured side-condition constants for the collision-variance bound.

    beta/gamma are clamped to >= 1 (the variance thresholds assume that);
    beta_raw/gamma_raw keep the exact measured ratios.
    """

    beta: float
    gamma: float
    xi: float
    rho: float
    q_walks: int
    r_walks: int
    beta_raw: float = 0.0
    gamma_raw: float = 0.0

    def variance_bound(self, n: int, k: int) -> float:
        return self.rho * self.xi**2 * k**2 / n**2

    def thresholds_hold(self, n: int, k: int) -> bool:
        lhs = 7.0 * self.beta / (self.rho * self.xi**2) * n / k
        pair = 7.0 * (self.gamma + self.beta**2) / (self.rho * self.xi**2)
        return self.q_walks * self.r_walks >= lhs and min(self.q_walks, self.r_walks) >= pair


def measure_collision_conditions(
    ref: SpectralReference,
    x: int,
    sample: list[int],
    t1: int,
    t2: int,
    xi: float = 0.5,
    rho: float = 0.1,
) -> CollisionTestParams:
    """Minimal beta, gamma making the two side conditions hold for (x, sample),
    plus the smallest symmetric walk counts meeting the variance thresholds.

    Conditions: p_S^{t1+t2}(x) <= beta * (1/n) * (k/|S|), and both three-way
    collision rates <p_x^{t1}, (p_S^{t2})^2> <= gamma * k^2/(n^2 |S|^2) and
    <(p_x^{t1})^2, p_S^{t2}> <= gamma * k^2/(n^2 |S|).
    """
    n, k = ref.n, ref.k
    s = len(sample)
    p_s_sum = np.zeros(n)
    for y in sample:
        p_s_sum += ref.walk_distribution(int(y), t2)
    p_s = p_s_sum / s
    p_s_long = np.zeros(n)
    for y in sample:
        p_s_long += ref.walk_distribution(int(y), t1 + t2)
    p_s_long /= s
    p_x = ref.walk_distribution(x, t1)

    beta = float(p_s_long[x] / ((1.0 / n) * (k / s)))
    g1 = float((p_x * p_s**2).sum() / (k**2 / (n**2 * s**2)))
    g2 = float(((p_x**2) * p_s).sum() / (k**2 / (n**2 * s)))
    gamma = max(g1, g2)
    beta_c = max(beta, 1.0)
    gamma_c = max(gamma, 1.0)
    pair = 7.0 * (gamma_c + beta_c**2) / (rho * xi**2)
    prod = 7.0 * beta_c / (rho * xi**2) * n / k
    q = int(np.ceil(max(np.sqrt(prod), pair)))
    return CollisionTestParams(beta_c, gamma_c, xi, rho, q, q, beta_raw=beta, gamma_raw=gamma)


def misclassification(
    truth: GroundTruthClustering, predicted: np.ndarray
) -> tuple[int, float]:
    """Total symmetric difference against the best label matching, and its rate.

    ``predicted`` holds one integer label per vertex with -1 for
    unclassified.  Unclassified vertices always count as errors: they belong
    to no matchable predicted cluster, so each contributes one miss.  The
    matching is solved exactly (Hungarian assignment on the overlap counts).
    """
    predicted = np.asarray(predicted, dtype=np.int64)
    n = len(truth.labels)
    if len(predicted) != n:
        raise ConfigError("predicted labels must cover every vertex")
    real = np.unique(predicted[predicted >= 0])
    k, m = truth.k, len(real)
    width = max(k, m)
    cost = np.zeros((k, width))
    if m:
        remap = {int(lab): j for j, lab in enumerate(real)}
        pred_sizes = np.zeros(width)
        overlap = np.zeros((k, width))
        for i in range(n):
            if predicted[i] >= 0:
                j = remap[int(predicted[i])]
                pred_sizes[j] += 1
                overlap[truth.labels[i], j] += 1
        cost = pred_sizes[None, :] - 2.0 * overlap
    rows, cols = linear_sum_assignment(cost)
    total = int(n + cost[rows, cols].sum())
    return total, total / n
