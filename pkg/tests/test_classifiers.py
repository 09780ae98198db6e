import numpy as np
import pytest

from albp.classifiers import (
    KINDS,
    LabeledDataset,
    SoftVoteModel,
    TrainConfig,
    fit,
    fit_ensemble,
    load_model,
    save_model,
    soft_vote,
)
from albp.errors import ModelIOError


def make_clusters(n_per_class=50, n_classes=4, d=16, sep=2.0, noise=0.15, seed=0):
    rng = np.random.default_rng(seed)
    means = rng.normal(0, sep, size=(n_classes, d))
    X = np.concatenate([rng.normal(means[c], noise, size=(n_per_class, d))
                        for c in range(n_classes)])
    y = np.repeat(np.arange(n_classes), n_per_class)
    names = tuple(f"c{i}" for i in range(n_classes))
    return LabeledDataset(X, y, names)


@pytest.fixture(scope="module")
def clusters():
    return make_clusters()


class TestFitBasics:
    def test_knn_stores_training_set(self, clusters):
        model = fit("knn", clusters)
        assert np.array_equal(model.train_x, clusters.features)
        assert np.array_equal(model.train_y, clusters.labels)

    def test_nb_log_prior_counts(self):
        X = np.random.default_rng(1).normal(size=(8, 3))
        y = np.array([0, 0, 0, 0, 0, 0, 1, 1])
        ds = LabeledDataset(X, y, ("a", "b"))
        model = fit("naive_bayes", ds)
        assert model.log_priors[0] == pytest.approx(np.log(0.75))

    def test_forest_deterministic(self, clusters):
        import pickle

        cfg = TrainConfig(forest_trees=5)
        a = fit("random_forest", clusters, cfg)
        b = fit("random_forest", clusters, cfg)
        assert pickle.dumps(a.trees) == pickle.dumps(b.trees)

    def test_empty_class_rejected(self):
        ds = LabeledDataset(np.zeros((2, 3)), np.array([0, 0]), ("a", "b"))
        with pytest.raises(ValueError, match="'b'"):
            fit("knn", ds)

    def test_unknown_kind(self, clusters):
        with pytest.raises(ValueError):
            fit("cnn", clusters)

    def test_identical_features_yield_majority_leaf(self):
        X = np.ones((6, 4))
        y = np.array([0, 0, 0, 0, 1, 1])
        model = fit("decision_tree", LabeledDataset(X, y, ("a", "b")), TrainConfig(tree_min_leaf=1))
        assert "probs" in model.root
        assert model.predict(np.ones(4)) == 0


class TestPredictProba:
    def test_knn_k1_exact_match_is_one_hot(self, clusters):
        model = fit("knn", clusters, TrainConfig(knn_k=1))
        idx = 123
        probs = model.predict_proba(clusters.features[idx])
        expect = np.zeros(4)
        expect[clusters.labels[idx]] = 1.0
        assert np.array_equal(probs, expect)

    def test_nb_symmetric_classes_uniform(self):
        X = np.tile(np.array([[0.0, 1.0], [1.0, 0.0]]), (2, 1))
        y = np.array([0, 0, 1, 1])
        # both classes see the same two points -> identical distributions
        model = fit("naive_bayes", LabeledDataset(X, y, ("a", "b")))
        probs = model.predict_proba(np.array([0.3, 0.3]))
        assert probs == pytest.approx([0.5, 0.5])

    @pytest.mark.parametrize("kind", KINDS)
    def test_probs_sum_to_one(self, clusters, kind):
        model = fit(kind, clusters, TrainConfig(forest_trees=5))
        rng = np.random.default_rng(2)
        probs = model.predict_proba(rng.normal(size=(10, 16)))
        assert probs.shape == (10, 4)
        assert (probs >= 0).all()
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)

    def test_dimension_mismatch(self, clusters):
        model = fit("knn", clusters)
        with pytest.raises(ValueError):
            model.predict_proba(np.zeros(5))

    def test_nb_extreme_inputs_stay_finite(self):
        # log-space posteriors must survive tiny variances and far-out queries
        rng = np.random.default_rng(3)
        X = np.concatenate([np.zeros((20, 8)), np.ones((20, 8))])
        X += rng.normal(0, 1e-6, X.shape)
        y = np.repeat([0, 1], 20)
        model = fit("naive_bayes", LabeledDataset(X, y, ("a", "b")))
        probs = model.predict_proba(np.full(8, 1.0))
        assert np.isfinite(probs).all()
        assert probs.sum() == pytest.approx(1.0)


class TestPredict:
    def test_tie_breaks_to_lowest_index(self, clusters):
        model = fit("knn", clusters, TrainConfig(knn_k=2))
        # argmax on equal probabilities picks class 0
        assert int(np.argmax(np.array([0.5, 0.5]))) == 0

    def test_training_accuracy_tree_unlimited(self, clusters):
        cfg = TrainConfig(tree_max_depth=10_000, tree_min_leaf=1)
        model = fit("decision_tree", clusters, cfg)
        assert (model.predict(clusters.features) == clusters.labels).all()

    def test_training_accuracy_knn_k1(self, clusters):
        model = fit("knn", clusters, TrainConfig(knn_k=1))
        assert (model.predict(clusters.features) == clusters.labels).all()


class TestSoftVote:
    def test_single_member_identity(self, clusters):
        member = fit("naive_bayes", clusters)
        x = clusters.features[0]
        assert np.array_equal(soft_vote([member], x), member.predict_proba(x))

    def test_averaging(self):
        from albp.classifiers import Model

        class Fixed(Model):
            kind = "fixed"

            def __init__(self, p):
                self.p = np.asarray(p, dtype=np.float64)
                self.class_names = ("a", "b")
                self.n_features = 2

            def _proba(self, x):
                return np.tile(self.p, (len(x), 1))

        out = soft_vote([Fixed([1.0, 0.0]), Fixed([0.0, 1.0])], np.zeros(2))
        assert out == pytest.approx([0.5, 0.5])

    def test_five_member_mean(self, clusters):
        members = [fit(k, clusters, TrainConfig(forest_trees=3)) for k in KINDS]
        x = clusters.features[7]
        expect = np.mean([m.predict_proba(x) for m in members], axis=0)
        assert soft_vote(members, x) == pytest.approx(expect)

    def test_empty_members_rejected(self):
        with pytest.raises(ValueError):
            SoftVoteModel([])

    def test_class_set_mismatch_rejected(self, clusters):
        a = fit("naive_bayes", clusters)
        small = make_clusters(n_classes=2, seed=4)
        b = fit("naive_bayes", small)
        with pytest.raises(ValueError):
            SoftVoteModel([a, b])

    def test_agreeing_argmax_preserved(self, clusters):
        ens = fit_ensemble(clusters, TrainConfig(forest_trees=3))
        x = clusters.features[11]
        member_argmax = {int(np.argmax(m.predict_proba(x))) for m in ens.members}
        if len(member_argmax) == 1:
            assert int(np.argmax(ens.predict_proba(x))) == member_argmax.pop()


class TestSerialization:
    @pytest.mark.parametrize("kind", KINDS)
    def test_round_trip_bit_exact(self, clusters, kind, tmp_path):
        model = fit(kind, clusters, TrainConfig(forest_trees=3))
        p = tmp_path / "m.bin"
        save_model(model, p)
        loaded = load_model(p)
        rng = np.random.default_rng(5)
        x = rng.normal(size=(6, 16))
        assert np.array_equal(model.predict_proba(x), loaded.predict_proba(x))

    def test_ensemble_round_trip(self, clusters, tmp_path):
        ens = fit_ensemble(clusters, TrainConfig(forest_trees=3))
        p = tmp_path / "e.bin"
        save_model(ens, p)
        x = clusters.features[:4]
        assert np.array_equal(ens.predict_proba(x), load_model(p).predict_proba(x))

    def test_truncated_file_rejected(self, clusters, tmp_path):
        model = fit("naive_bayes", clusters)
        p = tmp_path / "m.bin"
        save_model(model, p)
        p.write_bytes(p.read_bytes()[:20])
        with pytest.raises(ModelIOError):
            load_model(p)

    def test_future_version_rejected(self, tmp_path):
        import pickle

        p = tmp_path / "m.bin"
        p.write_bytes(pickle.dumps({"format": "albp-model", "version": 99, "kind": "knn", "model": None}))
        with pytest.raises(ModelIOError, match="version"):
            load_model(p)

    def test_non_model_file_rejected(self, tmp_path):
        import pickle

        p = tmp_path / "m.bin"
        p.write_bytes(pickle.dumps({"something": "else"}))
        with pytest.raises(ModelIOError):
            load_model(p)
