import numpy as np
import pytest

from alloyopt.cobyla import CobylaConfig, minimize_cobyla
from alloyopt.errors import DatasetError
from alloyopt.pca import (
    PcaModel,
    export_reports,
    export_rho_sweep,
    fit_pca,
    project2d,
)
from alloyopt.trees import TreesTrainParams, score, train_extra_trees

from .conftest import make_dataset, random_compositions


def random_features(n, rng, rank=7):
    base = rng.normal(size=(n, rank))
    mix = rng.normal(size=(rank, 7))
    return base @ mix + rng.normal(size=7) * 5.0


class TestFitPca:
    def test_rank_one_data(self):
        rng = np.random.default_rng(70)
        t = rng.normal(size=40)
        direction = rng.normal(size=7)
        X = np.outer(t, direction) + 3.0
        m = fit_pca(X, standardize=False)
        np.testing.assert_allclose(m.variance_ratios[0], 1.0, atol=1e-12)
        np.testing.assert_allclose(m.variance_ratios[1:], 0.0, atol=1e-12)

    def test_isotropic_two_feature_block(self):
        rng = np.random.default_rng(71)
        X = np.zeros((4000, 7))
        X[:, 0] = rng.normal(size=4000)
        X[:, 1] = rng.normal(size=4000)
        m = fit_pca(X + 1e-9 * rng.normal(size=(4000, 7)), standardize=False)
        assert m.variance_ratios[0] == pytest.approx(0.5, abs=0.05)
        assert m.variance_ratios[1] == pytest.approx(0.5, abs=0.05)

    def test_axes_orthonormal(self):
        rng = np.random.default_rng(72)
        m = fit_pca(random_features(60, rng))
        np.testing.assert_allclose(m.axes @ m.axes.T, np.eye(7), atol=1e-10)

    def test_ratios_descending_and_sum_to_one(self):
        rng = np.random.default_rng(73)
        m = fit_pca(random_features(50, rng))
        assert np.all(np.diff(m.variance_ratios) <= 1e-15)
        assert m.variance_ratios.sum() == pytest.approx(1.0, abs=1e-10)
        assert np.all(m.variance_ratios >= 0.0)

    def test_sign_convention(self):
        rng = np.random.default_rng(74)
        m = fit_pca(random_features(50, rng))
        for axis in m.axes:
            assert axis[np.argmax(np.abs(axis))] > 0.0

    def test_requires_two_distinct_rows(self):
        with pytest.raises(DatasetError):
            fit_pca(np.ones((5, 7)))
        with pytest.raises(DatasetError):
            fit_pca(np.ones((1, 7)))

    def test_rotation_invariance_of_spectrum(self):
        rng = np.random.default_rng(75)
        X = random_features(80, rng)
        q, _ = np.linalg.qr(rng.normal(size=(7, 7)))
        m1 = fit_pca(X, standardize=False)
        m2 = fit_pca(X @ q.T, standardize=False)
        np.testing.assert_allclose(m1.variance_ratios, m2.variance_ratios, atol=1e-10)

    def test_total_variance_conserved(self):
        rng = np.random.default_rng(76)
        X = random_features(60, rng)
        m = fit_pca(X, standardize=False)
        cov = np.cov(X.T, ddof=1)
        projected = m.axes @ cov @ m.axes.T
        assert np.trace(projected) == pytest.approx(np.trace(cov), rel=1e-10)


class TestProject2d:
    def test_mean_maps_to_origin(self):
        rng = np.random.default_rng(77)
        X = random_features(50, rng)
        m = fit_pca(X)
        pc1, pc2 = project2d(m, X.mean(axis=0))
        assert abs(pc1) < 1e-10 and abs(pc2) < 1e-10

    def test_projection_contracts_distances(self):
        rng = np.random.default_rng(78)
        X = random_features(40, rng)
        m = fit_pca(X, standardize=False)
        for _ in range(20):
            i, j = rng.integers(0, 40, 2)
            full = np.linalg.norm(X[i] - X[j])
            a = np.array(project2d(m, X[i]))
            b = np.array(project2d(m, X[j]))
            assert np.linalg.norm(a - b) <= full + 1e-10

    def test_full_basis_reconstruction(self):
        rng = np.random.default_rng(79)
        X = random_features(30, rng)
        m = fit_pca(X)
        for row in X[:10]:
            z = m.transform(row)
            back = m.mean + (m.axes.T @ z) * m.scale
            np.testing.assert_allclose(back, row, atol=1e-10)


class TestReports:
    @pytest.fixture
    def setup(self, reg10):
        rng = np.random.default_rng(80)
        comps = random_compositions(50, 10, rng)
        temps = rng.uniform(0, 300, 50)
        data = make_dataset(reg10, comps, temps)
        model = train_extra_trees(data, TreesTrainParams(n_trees=10, seed=1))
        return data, model

    def test_bundle_written_and_partial(self, setup, reg10, tmp_path):
        data, model = setup
        _, trace = minimize_cobyla(
            lambda v: float(v @ v), [], np.full(10, 10.0),
            CobylaConfig(rhobeg=1.0, rhoend=1e-2, max_evals=60),
        )
        out = export_reports(
            tmp_path, reg10, dataset=data, trees_model=model,
            traces={"demo": trace}, rho_sweep=[(0.5, 1.0, 0.01), (1.0, 0.9, 0.02)],
        )
        expected = {
            "cost_histogram.csv", "feature_correlations.csv",
            "feature_importance.csv", "scatter_trees.csv", "path_demo.csv",
            "objective_vs_rho.csv", "time_vs_rho.csv",
        }
        assert expected <= set(out["written"])
        assert "scatter_mlp.csv" in out["skipped"]

    def test_correlation_diagonal_is_one(self, setup, reg10, tmp_path):
        data, model = setup
        export_reports(tmp_path, reg10, dataset=data)
        lines = (tmp_path / "feature_correlations.csv").read_text().splitlines()
        for i, line in enumerate(lines[1:]):
            cells = line.split(",")
            assert float(cells[1 + i]) == pytest.approx(1.0, abs=1e-12)

    def test_importance_normalized_in_csv(self, setup, reg10, tmp_path):
        data, model = setup
        export_reports(tmp_path, reg10, dataset=data, trees_model=model)
        lines = (tmp_path / "feature_importance.csv").read_text().splitlines()[1:]
        values = [float(line.split(",")[1]) for line in lines]
        assert all(v >= 0.0 for v in values)
        assert sum(values) == pytest.approx(1.0, abs=1e-12)

    def test_scatter_metrics_match_score(self, setup, reg10, tmp_path):
        data, model = setup
        export_reports(tmp_path, reg10, dataset=data, trees_model=model)
        tail = (tmp_path / "scatter_trees.csv").read_text().splitlines()[-1]
        assert tail.startswith("# r_squared: ")
        r2 = float(tail.split("r_squared: ")[1].split(",")[0])
        s = score(model, data)
        assert r2 == pytest.approx(s.r_squared, abs=1e-12)

    def test_deterministic_bytes(self, setup, reg10, tmp_path):
        data, model = setup
        a = tmp_path / "a"
        b = tmp_path / "b"
        export_reports(a, reg10, dataset=data, trees_model=model)
        export_reports(b, reg10, dataset=data, trees_model=model)
        for name in ("cost_histogram.csv", "feature_importance.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()
