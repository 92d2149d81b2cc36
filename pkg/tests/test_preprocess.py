import numpy as np
import pytest

from subcluster.errors import ArtifactFormatError, PreprocessingFailure, WrongGraphError
from subcluster.graph import GeneratorConfig, generate_clusterable
from subcluster.preprocess import (
    OracleArtifact,
    PreprocessConfig,
    load_artifact,
    preprocessing,
    query,
    query_many,
    save_artifact,
)
from subcluster.sketch import SketchParams
from subcluster.sketchtree import build_sketch_tree
from subcluster.spectral import misclassification


def pipeline_config(k_hat, seed=11, **kw):
    base = dict(k_hat=k_hat, phi=0.6, eps=0.004, seed=seed, t_min=40, vote_fraction=0.2)
    base.update(kw)
    return PreprocessConfig(**base)


@pytest.fixture(scope="module")
def separable_artifact(expanders_400):
    g, truth = expanders_400
    return preprocessing(g, pipeline_config(4))


class TestPreprocessing:
    def test_separable_unique_representatives(self, expanders_400, separable_artifact):
        _, truth = expanders_400
        art = separable_artifact
        rep_labels = [int(truth.labels[y]) for y in art.representatives]
        assert len(rep_labels) == len(set(rep_labels))  # one cluster each
        assert len(art.representatives) == 4  # generous sample hits every cluster

    def test_refinement_shrinks(self, separable_artifact):
        d = separable_artifact.diagnostics
        assert d["r_size"] <= d["r_cand_size"] <= d["components"]

    def test_determinism(self, expanders_400, separable_artifact):
        g, _ = expanders_400
        again = preprocessing(g, pipeline_config(4))
        assert again.representatives == separable_artifact.representatives

    def test_duplicates_in_sample_are_handled(self):
        # n small enough that the sample repeats vertices (birthday regime)
        g, truth = generate_clusterable(GeneratorConfig(n=24, k=2, d=5, cross_edge_budget=0.0, seed=2))
        art = preprocessing(g, pipeline_config(2, t_min=20, seed=5))
        rep_labels = [int(truth.labels[y]) for y in art.representatives]
        assert len(rep_labels) == len(set(rep_labels))

    def test_cluster_count_estimate(self):
        g, truth = generate_clusterable(GeneratorConfig(n=1600, k=8, d=10, cross_edge_budget=0.0005, seed=3))
        hits = 0
        for seed in range(6):
            art = preprocessing(g, pipeline_config(8, seed=seed))
            hits += abs(len(art.representatives) - 8) <= 2
        assert hits >= 5


class TestQuery:
    def test_separable_queries_exact(self, expanders_400, separable_artifact):
        g, truth = expanders_400
        rng = np.random.default_rng(0)
        xs = rng.choice(400, 200, replace=False)
        labels = query_many(g, separable_artifact, xs)
        rep_label = {i: truth.labels[y] for i, y in enumerate(separable_artifact.representatives)}
        assert all(int(rep_label[int(lab)]) == truth.labels[x] for x, lab in zip(xs, labels))

    def test_repeat_query_identical(self, expanders_400, separable_artifact):
        g, _ = expanders_400
        assert query(g, separable_artifact, 37) == query(g, separable_artifact, 37)

    def test_missing_cluster_is_unclassified(self, expanders_400, separable_artifact):
        g, truth = expanders_400
        art = separable_artifact
        # rebuild the stored tree over three representatives only
        reps3 = art.representatives[:3]
        cfg = art.config
        wp = art.wp
        stored = SketchParams(wp, cfg.stored_walks(g.n), cfg.make_source(wp))
        tree3 = build_sketch_tree(g, reps3, stored, cfg.j_votes, trial_offset=1 << 19)
        crippled = OracleArtifact(cfg, g.digest(), g.n, reps3, tree3, wp, {})
        missing_label = truth.labels[art.representatives[3]]
        victims = truth.members(missing_label)[:30]
        labels = query_many(g, crippled, victims)
        assert np.mean(labels == -1) >= 0.9

    def test_wrong_graph_rejected(self, separable_artifact):
        other, _ = generate_clusterable(GeneratorConfig(n=400, k=4, d=8, cross_edge_budget=0.0, seed=77))
        with pytest.raises(WrongGraphError):
            query(other, separable_artifact, 0)

    def test_end_to_end_misclassification(self, expanders_400, separable_artifact):
        g, truth = expanders_400
        pred = query_many(g, separable_artifact, range(g.n))
        count, rate = misclassification(truth, pred)
        assert rate <= 0.10


class TestArtifactSerialization:
    def test_round_trip_bytes_and_answers(self, expanders_400, separable_artifact, tmp_path):
        g, _ = expanders_400
        p1 = tmp_path / "a.bin"
        p2 = tmp_path / "b.bin"
        save_artifact(separable_artifact, p1)
        loaded = load_artifact(p1)
        save_artifact(loaded, p2)
        assert p1.read_bytes() == p2.read_bytes()
        xs = list(range(0, 400, 17))
        assert np.array_equal(
            query_many(g, separable_artifact, xs), query_many(g, loaded, xs)
        )

    def test_truncated_rejected(self, separable_artifact, tmp_path):
        p = tmp_path / "t.bin"
        save_artifact(separable_artifact, p)
        blob = p.read_bytes()
        p.write_bytes(blob[: len(blob) // 2])
        with pytest.raises(ArtifactFormatError):
            load_artifact(p)

    def test_bad_magic_rejected(self, separable_artifact, tmp_path):
        p = tmp_path / "m.bin"
        save_artifact(separable_artifact, p)
        blob = bytearray(p.read_bytes())
        blob[0] ^= 0xFF
        p.write_bytes(bytes(blob))
        with pytest.raises(ArtifactFormatError):
            load_artifact(p)

    def test_version_mismatch_rejected(self, separable_artifact, tmp_path):
        import json
        import struct

        p = tmp_path / "v.bin"
        save_artifact(separable_artifact, p)
        blob = p.read_bytes()
        (head_len,) = struct.unpack_from("<I", blob, 8)
        header = json.loads(blob[12 : 12 + head_len])
        header["version"] = 999
        new_head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
        p.write_bytes(blob[:8] + struct.pack("<I", len(new_head)) + new_head + blob[12 + head_len :])
        with pytest.raises(ArtifactFormatError, match="version"):
            load_artifact(p)


class TestFailureModes:
    def test_empty_representatives_raises(self, expanders_400):
        g, _ = expanders_400
        # max_leaves=0 aborts every search, so nothing is ever a singleton
        with pytest.raises(PreprocessingFailure):
            preprocessing(g, pipeline_config(4, max_leaves=0))
