import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subcluster import _kernels
from subcluster.errors import CapacityError, ConfigError
from subcluster.graph import BoundedDegreeGraph, GeneratorConfig, generate_clusterable
from subcluster.spectral import build_reference
from subcluster.walks import (
    FreshWalks,
    SparseDistribution,
    WalkParams,
    WalkTable,
    _combine,
    _fold61,
    _mulmod61_u32,
    lazy_step,
    random_walks,
    sparse_axpy,
    sparse_combine,
    sparse_dot,
    walk_endpoints,
)

M61 = (1 << 61) - 1


def dense_lazy_matrix(g):
    m = np.zeros((g.n, g.n))
    for x in range(g.n):
        for coin in range(2 * g.d):
            m[lazy_step(g, x, coin), x] += 1.0 / (2 * g.d)
    return m


class TestLazyStep:
    def test_isolated_vertex_stays(self):
        g = BoundedDegreeGraph(1, 3, [[]])
        assert all(lazy_step(g, 0, coin) == 0 for coin in range(6))

    def test_single_edge_exact_row(self):
        g = BoundedDegreeGraph(2, 1, [[1], [0]])
        assert lazy_step(g, 0, 0) == 0
        assert lazy_step(g, 0, 1) == 1

    def test_triangle_row_matches_matrix(self):
        g = BoundedDegreeGraph(3, 3, [[1, 2], [0, 2], [0, 1]])
        m = dense_lazy_matrix(g)
        # stay 1/2 plus one padding self-loop slot: 1/2 + 1/6 at a, 1/6 at b and c
        assert m[0, 0] == pytest.approx(0.5 + 1.0 / 6.0)
        assert m[1, 0] == pytest.approx(1.0 / 6.0)
        assert m[2, 0] == pytest.approx(1.0 / 6.0)
        # exact M = I/2 + A_reg/(2d)
        a_reg = np.array([[1.0, 1, 1], [1, 1, 1], [1, 1, 1]])
        np.testing.assert_allclose(m, 0.5 * np.eye(3) + a_reg / 6.0)

    def test_bad_coin_rejected(self):
        g = BoundedDegreeGraph(2, 1, [[1], [0]])
        with pytest.raises(ConfigError):
            lazy_step(g, 0, 2)


class TestRandomWalks:
    def test_zero_length_is_point_mass(self):
        g = BoundedDegreeGraph(2, 1, [[1], [0]])
        p = random_walks(g, 50, 0, 1, FreshWalks(0))
        assert p.ids.tolist() == [1] and p.weights.tolist() == [1.0]

    def test_single_edge_converges_to_half(self):
        g = BoundedDegreeGraph(2, 1, [[1], [0]])
        r = 200_000
        p = random_walks(g, r, 1, 0, FreshWalks(3))
        stderr = 0.5 / np.sqrt(r)
        assert abs(p.weights[p.ids == 0][0] - 0.5) <= 3 * stderr

    def test_walks_stay_in_component(self, expanders_400):
        g, truth = expanders_400
        p = random_walks(g, 500, 25, int(truth.members(2)[0]), FreshWalks(9))
        assert set(truth.labels[p.ids]) == {2}

    def test_mass_conservation_exact(self, expanders_400):
        g, _ = expanders_400
        for r in (1, 7, 333):
            p = random_walks(g, r, 13, 5, FreshWalks(1))
            assert p.counts.sum() == r
            assert p.denom == r

    def test_unbiased_against_dense_power(self):
        g, truth = generate_clusterable(GeneratorConfig(n=60, k=2, d=4, cross_edge_budget=0.0, seed=2))
        ref = build_reference(g, truth)
        t, r, runs = 8, 200, 200
        acc = np.zeros(g.n)
        for run in range(runs):
            p = random_walks(g, r, t, 0, FreshWalks(1000 + run))
            acc[p.ids] += p.weights
        acc /= runs
        exact = ref.walk_distribution(0, t)
        stderr = np.sqrt(np.maximum(exact, 1e-12) / (runs * r))
        assert np.all(np.abs(acc - exact) <= 5 * stderr + 1e-4)

    def test_derandomized_determinism(self, expanders_400):
        g, _ = expanders_400
        tab = WalkTable(5, t_cap=64, w_cap=1 << 40)
        assert random_walks(g, 100, 10, 3, tab) == random_walks(g, 100, 10, 3, tab)

    def test_capacity_errors(self, expanders_400):
        g, _ = expanders_400
        tab = WalkTable(5, t_cap=8, w_cap=100)
        with pytest.raises(CapacityError):
            random_walks(g, 10, 9, 0, tab)
        with pytest.raises(CapacityError):
            random_walks(g, 10, 5, 0, tab, slot_base=95)

    def test_walk_params_validation(self):
        with pytest.raises(ConfigError):
            WalkParams(t_min=0, t_delta=0, r=1)
        with pytest.raises(ConfigError):
            WalkParams(t_min=1, t_delta=-1, r=1)


class TestKernelAgreement:
    def test_table_kernel_matches_numpy_context(self, expanders_400):
        if not _kernels.HAVE_NUMBA:
            pytest.skip("numba unavailable")
        g, _ = expanders_400
        tab = WalkTable(77, 64, 1 << 62)
        rng = np.random.default_rng(0)
        starts = rng.integers(0, g.n, 2000).astype(np.int64)
        slots = np.arange(2000, dtype=np.uint64) + 999
        got = _kernels.table_walk(g.padded, g.d, starts, slots, 23, np.uint64(77))
        ctx = tab.begin(starts, 23, slots)
        pos = starts.copy()
        for s in range(23):
            coins = ctx.coins(s, pos, 2 * g.d).astype(np.int64)
            move = coins >= g.d
            pos = np.where(move, g.padded[pos, np.where(move, coins - g.d, 0)], pos)
        assert np.array_equal(got, pos)

    def test_fresh_kernel_matches_numpy_context(self, expanders_400):
        if not _kernels.HAVE_NUMBA:
            pytest.skip("numba unavailable")
        g, _ = expanders_400
        src = FreshWalks(13)
        starts = np.full(1500, 7, dtype=np.int64)
        slots = np.arange(1500, dtype=np.uint64)
        lanes = _combine(np.uint64(13), starts, np.uint64(17), slots)
        got = _kernels.fresh_walk(g.padded, g.d, starts, lanes, 17)
        ctx = src.begin(starts, 17, slots)
        pos = starts.copy()
        for s in range(17):
            coins = ctx.coins(s, pos, 2 * g.d).astype(np.int64)
            move = coins >= g.d
            pos = np.where(move, g.padded[pos, np.where(move, coins - g.d, 0)], pos)
        assert np.array_equal(got, pos)


class TestFieldHashing:
    def test_mulmod_against_bigints(self):
        rng = np.random.default_rng(0)
        h = rng.integers(0, M61, 5000, dtype=np.uint64)
        v = rng.integers(0, 1 << 32, 5000, dtype=np.uint64)
        got = _mulmod61_u32(h, v)
        want = (h.astype(object) * v.astype(object)) % M61
        assert all(int(a) == int(b) for a, b in zip(got, want))

    def test_fold_is_mod(self):
        vals = np.array([0, 1, M61 - 1, M61, M61 + 5, 2 * M61 + 3, (1 << 63) + 17], dtype=np.uint64)
        got = _fold61(vals)
        want = vals.astype(object) % M61
        assert all(int(a) == int(b) for a, b in zip(got, want))

    def test_table_coin_uniformity(self):
        tab = WalkTable(9, 64, 1 << 40)
        ctx = tab.begin(np.zeros(60000, dtype=np.int64), 3, np.arange(60000, dtype=np.uint64))
        coins = ctx.coins(1, np.arange(60000) % 399, 14)
        hist = np.bincount(coins.astype(int), minlength=14) / 60000
        assert np.abs(hist - 1 / 14).max() < 0.008

    def test_sign_balance(self):
        tab = WalkTable(11, 8, 100)
        signs = tab.sign(3, np.arange(40000, dtype=np.uint64))
        assert set(np.unique(signs)) == {-1.0, 1.0}
        assert abs(signs.mean()) < 0.02


class TestSparseOps:
    def test_dot_examples(self):
        u = SparseDistribution(np.array([0, 3]), np.array([0.25, 0.75]))
        v = SparseDistribution(np.array([3, 7]), np.array([0.5, 0.5]))
        assert sparse_dot(u, v) == 0.375
        w = SparseDistribution(np.array([0, 1]), np.array([0.5, 0.5]))
        assert sparse_dot(w, w) == 0.5
        disjoint = SparseDistribution(np.array([9]), np.array([1.0]))
        assert sparse_dot(u, disjoint) == 0.0

    def test_axpy_examples(self):
        empty = SparseDistribution.empty()
        point = SparseDistribution.point_mass(4)
        assert sparse_axpy(empty, 1.0, point) == point
        gone = sparse_axpy(point, -1.0, point)
        assert gone.support_size == 0
        acc = SparseDistribution(np.array([0]), np.array([1.0]))
        v = SparseDistribution(np.array([0, 1]), np.array([1.0, 1.0]))
        out = sparse_axpy(acc, -1.0, v)
        assert out.ids.tolist() == [1] and out.weights.tolist() == [-1.0]

    @given(
        st.lists(st.tuples(st.integers(0, 50), st.floats(-5, 5, allow_nan=False)), max_size=20),
        st.lists(st.tuples(st.integers(0, 50), st.floats(-5, 5, allow_nan=False)), max_size=20),
    )
    @settings(max_examples=60, deadline=None)
    def test_dot_matches_dense(self, a_pairs, b_pairs):
        def to_sparse(pairs):
            dense = np.zeros(51)
            for i, w in pairs:
                dense[i] += w
            ids = np.nonzero(dense)[0]
            return SparseDistribution(ids, dense[ids]), dense

        u, du = to_sparse(a_pairs)
        v, dv = to_sparse(b_pairs)
        assert sparse_dot(u, v) == pytest.approx(float(du @ dv), abs=1e-9)

    @given(
        st.lists(st.tuples(st.integers(0, 30), st.floats(-3, 3, allow_nan=False)), max_size=15),
        st.floats(-4, 4, allow_nan=False),
    )
    @settings(max_examples=60, deadline=None)
    def test_combine_sorted_and_pruned(self, pairs, coeff):
        dense = np.zeros(31)
        for i, w in pairs:
            dense[i] += w
        ids = np.nonzero(dense)[0]
        u = SparseDistribution(ids, dense[ids])
        out = sparse_combine([(coeff, u), (1.0, u)])
        assert np.all(np.diff(out.ids) > 0)
        assert np.all(out.weights != 0.0)
        want = (coeff + 1.0) * dense
        dense_out = np.zeros(31)
        dense_out[out.ids] = out.weights
        np.testing.assert_allclose(dense_out, np.where(want == 0.0, dense_out, want), atol=1e-12)


class TestWalkEndpointsShape:
    def test_misaligned_inputs_rejected(self, expanders_400):
        g, _ = expanders_400
        with pytest.raises(ConfigError):
            walk_endpoints(g, np.zeros(3, dtype=np.int64), 5, FreshWalks(0), np.zeros(2, dtype=np.uint64))
