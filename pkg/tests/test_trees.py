import numpy as np
import pytest

from alloyopt.dataset import Dataset
from alloyopt.trees import (
    TreesTrainParams,
    load_trees,
    predict_trees,
    save_trees,
    score,
    train_extra_trees,
)

from .conftest import make_dataset, random_compositions


@pytest.fixture
def small_data(reg10):
    rng = np.random.default_rng(30)
    comps = random_compositions(60, 10, rng)
    temps = rng.uniform(-50.0, 250.0, 60)
    return make_dataset(reg10, comps, temps)


class TestTrain:
    def test_single_sample_is_constant(self, reg10):
        rng = np.random.default_rng(31)
        data = make_dataset(reg10, random_compositions(1, 10, rng), [42.0])
        model = train_extra_trees(data, TreesTrainParams(n_trees=7, seed=1))
        for x in random_compositions(5, 10, rng):
            from alloyopt.features import compute_features

            y = compute_features(x, reg10)
            assert predict_trees(model, y) == 42.0

    def test_beats_one_leaf_baseline_on_separated_clusters(self, reg10):
        rng = np.random.default_rng(32)
        comps = []
        temps = []
        for _ in range(20):
            x = np.zeros(10)
            x[0] = 90.0 + rng.uniform(0, 5)
            x[1] = 100.0 - x[0]
            comps.append(x)
            temps.append(300.0 + rng.uniform(-1, 1))
        for _ in range(20):
            x = np.zeros(10)
            x[2] = 90.0 + rng.uniform(0, 5)
            x[3] = 100.0 - x[2]
            comps.append(x)
            temps.append(-100.0 + rng.uniform(-1, 1))
        data = make_dataset(reg10, comps, temps)
        t = data.temperatures()
        one_leaf_mse = float(((t - t.mean()) ** 2).mean())
        model = train_extra_trees(data, TreesTrainParams(n_trees=10, max_depth=3, seed=2))
        pred = model.predict_batch(data.feature_matrix())
        mse = float(((pred - t) ** 2).mean())
        assert mse < one_leaf_mse / 10.0

    def test_paper_configurations_accepted(self, small_data):
        m1 = train_extra_trees(small_data, TreesTrainParams(n_trees=50, max_depth=100, seed=3))
        m2 = train_extra_trees(
            small_data,
            TreesTrainParams(n_trees=40, max_depth=15, bootstrap=True, seed=3),
        )
        assert len(m1.trees) == 50
        assert len(m2.trees) == 40

    def test_deterministic_under_seed(self, small_data):
        p = TreesTrainParams(n_trees=12, max_depth=8, bootstrap=True, seed=9)
        m1 = train_extra_trees(small_data, p)
        m2 = train_extra_trees(small_data, p)
        X = small_data.feature_matrix()
        np.testing.assert_array_equal(m1.predict_batch(X), m2.predict_batch(X))

    def test_deep_single_tree_interpolates_unique_rows(self, small_data):
        p = TreesTrainParams(n_trees=1, max_depth=200, bootstrap=False, seed=4)
        model = train_extra_trees(small_data, p)
        pred = model.predict_batch(small_data.feature_matrix())
        np.testing.assert_allclose(pred, small_data.temperatures(), rtol=1e-12)


class TestPredict:
    def test_prediction_within_target_range(self, small_data, reg10):
        model = train_extra_trees(small_data, TreesTrainParams(n_trees=20, seed=5))
        rng = np.random.default_rng(33)
        for x in random_compositions(40, 10, rng):
            from alloyopt.features import compute_features

            p = predict_trees(model, compute_features(x, reg10))
            assert model.t_min <= p <= model.t_max

    def test_ensemble_mean_equals_per_tree_mean(self, small_data):
        model = train_extra_trees(small_data, TreesTrainParams(n_trees=9, seed=6))
        X = small_data.feature_matrix()[:5]
        per_tree = np.array([t.predict(X) for t in model.trees])
        np.testing.assert_allclose(model.predict_batch(X), per_tree.mean(axis=0), rtol=1e-15)


class TestScore:
    def test_perfect_predictor(self, small_data):
        class Perfect:
            def __init__(self, data):
                self.lookup = {tuple(r.features.as_array()): r.ms_temperature
                               for r in data.records}

            def predict_batch(self, X):
                return np.array([self.lookup[tuple(row)] for row in X])

        s = score(Perfect(small_data), small_data)
        assert s.r_squared == pytest.approx(1.0, abs=1e-15)
        assert s.mae == 0.0

    def test_constant_mean_predictor_r2_zero(self, small_data):
        mean = small_data.temperatures().mean()

        class Mean:
            def predict_batch(self, X):
                return np.full(X.shape[0], mean)

        s = score(Mean(), small_data)
        assert s.r_squared == pytest.approx(0.0, abs=1e-12)

    def test_hand_computed_four_point_fixture(self, reg3):
        data = make_dataset(
            reg3,
            [[100.0, 0.0, 0.0], [0.0, 100.0, 0.0], [0.0, 0.0, 100.0], [50.0, 50.0, 0.0]],
            [10.0, 20.0, 30.0, 40.0],
        )

        class Fixed:
            def predict_batch(self, X):
                return np.array([12.0, 18.0, 33.0, 35.0])

        # manual: residuals (-2, 2, -3, 5); ss_res = 4+4+9+25 = 42
        # mean = 25; ss_tot = 225+25+25+225 = 500; r2 = 1 - 42/500
        s = score(Fixed(), data)
        assert s.r_squared == pytest.approx(1.0 - 42.0 / 500.0, abs=1e-12)
        assert s.mae == pytest.approx(3.0, abs=1e-12)

    def test_zero_variance_degenerate(self, reg3):
        data = make_dataset(reg3, [[100.0, 0.0, 0.0], [0.0, 100.0, 0.0]], [5.0, 5.0])

        class Zero:
            def predict_batch(self, X):
                return np.zeros(X.shape[0])

        s = score(Zero(), data)
        assert s.degenerate_reason == "zero-variance targets"
        assert np.isnan(s.r_squared)


class TestImportanceAndSerialization:
    def test_importance_normalized(self, small_data):
        model = train_extra_trees(small_data, TreesTrainParams(n_trees=15, seed=7))
        imp = model.feature_importance()
        assert imp.shape == (7,)
        assert np.all(imp >= 0.0)
        assert imp.sum() == pytest.approx(1.0, abs=1e-12)

    def test_round_trip_bit_exact(self, small_data, tmp_path):
        model = train_extra_trees(
            small_data, TreesTrainParams(n_trees=8, max_depth=12, bootstrap=True, seed=8)
        )
        path = tmp_path / "model.json"
        save_trees(model, path)
        back = load_trees(path)
        X = small_data.feature_matrix()
        np.testing.assert_array_equal(model.predict_batch(X), back.predict_batch(X))
        assert back.params == model.params
        assert back.t_min == model.t_min and back.t_max == model.t_max
