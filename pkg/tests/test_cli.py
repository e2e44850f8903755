import json

import numpy as np
import pytest
import yaml
from click.testing import CliRunner

from alloyopt.cli import main
from alloyopt.dataset import write_csv

from .conftest import make_dataset, random_compositions


@pytest.fixture
def workspace(tmp_path, reg8):
    rng = np.random.default_rng(90)
    comps = random_compositions(24, 8, rng, sparsity=0.3)
    # duplicate some alloys so dedup has work to do: 24 + 8 dup rows
    comps = comps + comps[:8]
    temps = list(rng.uniform(0.0, 200.0, 24)) + list(rng.uniform(0.0, 200.0, 8))
    data = make_dataset(reg8, comps, temps)
    csv_path = tmp_path / "alloys.csv"
    write_csv(data, reg8, csv_path)
    return tmp_path, csv_path


def write_manifest(tmp_path, csv_path, **overrides):
    manifest = {
        "schema_version": 1,
        "paths": {"dataset": str(csv_path), "out_dir": str(tmp_path / "out")},
        "pipeline": {"dedup": True, "train_fraction": 0.7, "seed": 11},
        "model": {
            "kind": "trees",
            "trees": {"n_trees": 8, "max_depth": 6, "seed": 1},
            "mlp": {"hidden": [16, 8], "dropout": 0.1, "epochs": 8,
                    "batch_size": 8, "learning_rate": 0.01, "weight_decay": 0.01,
                    "seed": 2},
        },
        "objective": {"lambda1": 0.0, "lambda2": 1.0, "ts_target": 100.0, "tau": 1000.0},
        "optimizer": {
            "kind": "dfo",
            "dfo": {"rhobeg": 1.0, "rhoend": 1e-3, "max_evals": 150},
            "grad": {"max_iter": 60},
        },
        "experiment": {"kind": "cost", "restarts": 2, "n_seeds": 2,
                       "u_grid": [0.0, 10.0]},
    }
    for key, value in overrides.items():
        section, _, leaf = key.partition(".")
        if leaf:
            manifest[section][leaf] = value
        else:
            manifest[section] = value
    path = tmp_path / "manifest.yaml"
    path.write_text(yaml.safe_dump(manifest))
    return path


class TestPipelineCommands:
    def test_dedup_collapses_groups(self, workspace):
        tmp_path, csv_path = workspace
        manifest = write_manifest(tmp_path, csv_path)
        runner = CliRunner()
        result = runner.invoke(main, ["dedup", "--manifest", str(manifest)])
        assert result.exit_code == 0, result.output
        assert "32 -> 24" in result.output
        out_csv = tmp_path / "out" / "dataset_dedup.csv"
        assert len(out_csv.read_text().splitlines()) == 25

    def test_split_byte_identical_across_runs(self, workspace):
        tmp_path, csv_path = workspace
        manifest = write_manifest(tmp_path, csv_path)
        runner = CliRunner()
        outputs = []
        for _ in range(2):
            result = runner.invoke(
                main,
                ["split", "--manifest", str(manifest), "--fraction", "0.7",
                 "--seed", "42"],
            )
            assert result.exit_code == 0, result.output
            outputs.append((tmp_path / "out" / "train.csv").read_bytes())
        assert outputs[0] == outputs[1]

    def test_ingest_malformed_row_exit_2(self, workspace, reg8):
        tmp_path, csv_path = workspace
        lines = csv_path.read_text().splitlines()
        # break row 3 so percentages no longer reach 100
        cells = lines[2].split(",")
        cells[0] = "1.0" if cells[0] != "1.0" else "2.0"
        cells[1] = "1.0"
        cells[2] = "1.0"
        cells[3] = "0.0"
        lines[2] = ",".join(cells)
        bad = tmp_path / "bad.csv"
        bad.write_text("\n".join(lines) + "\n")
        manifest = write_manifest(tmp_path, bad)
        runner = CliRunner()
        result = runner.invoke(main, ["ingest", "--manifest", str(manifest)])
        assert result.exit_code == 2
        assert "row 3" in result.output

    def test_unknown_manifest_key_exit_2(self, workspace):
        tmp_path, csv_path = workspace
        manifest = write_manifest(tmp_path, csv_path, pipeline={"dedupe": True})
        runner = CliRunner()
        result = runner.invoke(main, ["split", "--manifest", str(manifest)])
        assert result.exit_code == 2


class TestTrainEvaluate:
    def test_trees_metrics_file(self, workspace):
        tmp_path, csv_path = workspace
        manifest = write_manifest(tmp_path, csv_path)
        runner = CliRunner()
        result = runner.invoke(main, ["train", "--manifest", str(manifest)])
        assert result.exit_code == 0, result.output
        metrics = (tmp_path / "out" / "metrics.csv").read_text().splitlines()
        assert metrics[0] == "split,r_squared,mae"
        assert len(metrics) == 3
        # metrics reproduce library-level score()
        from alloyopt import dataset as ds
        from alloyopt import trees as trees_mod
        from alloyopt.manifest import load_manifest
        from alloyopt.registry import default_registry

        m = load_manifest(manifest)
        reg = default_registry()
        data = ds.dedup_median(ds.ingest_csv(csv_path, reg))
        train_set, test_set = ds.split(
            data, ds.SplitConfig(train_fraction=0.7, seed=11)
        )
        model = trees_mod.load_trees(tmp_path / "out" / "model_trees.json")
        s = trees_mod.score(model, test_set)
        row = metrics[2].split(",")
        assert float(row[1]) == pytest.approx(s.r_squared, abs=1e-12)
        assert float(row[2]) == pytest.approx(s.mae, abs=1e-12)

    def test_mlp_paper_dedup_config(self, workspace):
        tmp_path, csv_path = workspace
        manifest = write_manifest(
            tmp_path, csv_path, **{"model.kind": "mlp"}
        )
        runner = CliRunner()
        result = runner.invoke(main, ["train", "--manifest", str(manifest)])
        assert result.exit_code == 0, result.output
        assert (tmp_path / "out" / "model_mlp.npz").exists()
        assert (tmp_path / "out" / "loss_history.csv").exists()


class TestOptimizeExperiment:
    def test_cost_experiment_and_metadata(self, workspace):
        tmp_path, csv_path = workspace
        manifest = write_manifest(tmp_path, csv_path)
        runner = CliRunner()
        result = runner.invoke(
            main, ["experiment", "--manifest", str(manifest), "--restarts", "3"]
        )
        assert result.exit_code == 0, result.output
        meta = json.loads((tmp_path / "out" / "run_metadata.json").read_text())
        assert meta["restarts"] == 3
        runs = (tmp_path / "out" / "runs.csv").read_text().splitlines()
        assert len(runs) == 4

    def test_sweep_three_rows(self, workspace):
        tmp_path, csv_path = workspace
        manifest = write_manifest(
            tmp_path, csv_path,
            **{"experiment.kind": "sweep", "objective.lambda1": 0.5,
               "objective.lambda2": 0.5},
        )
        runner = CliRunner()
        result = runner.invoke(main, ["experiment", "--manifest", str(manifest)])
        assert result.exit_code == 0, result.output
        rows = (tmp_path / "out" / "sweep.csv").read_text().splitlines()
        assert len(rows) == 4

    def test_recovery_runs_both_paths(self, workspace):
        tmp_path, csv_path = workspace
        manifest = write_manifest(
            tmp_path, csv_path,
            **{"experiment.kind": "recovery",
               "experiment.u_grid": [0.0, 10.0],
               "experiment.n_seeds": 1,
               "objective.lambda1": 1.0, "objective.lambda2": 0.0},
        )
        runner = CliRunner()
        result = runner.invoke(main, ["experiment", "--manifest", str(manifest)])
        assert result.exit_code == 0, result.output
        rows = (tmp_path / "out" / "recovery.csv").read_text().splitlines()[1:]
        assert len(rows) == 4  # 2 u values x 2 optimizers x 1 seed
        optimizers = {row.split(",")[1] for row in rows}
        assert optimizers == {"dfo", "grad"}

    def test_optimize_reproducible_csv_bytes(self, workspace):
        tmp_path, csv_path = workspace
        manifest = write_manifest(tmp_path, csv_path)
        runner = CliRunner()
        contents = []
        for _ in range(2):
            result = runner.invoke(
                main, ["optimize", "--manifest", str(manifest), "--restarts", "2"]
            )
            assert result.exit_code == 0, result.output
            contents.append(
                (
                    (tmp_path / "out" / "runs.csv").read_bytes(),
                    (tmp_path / "out" / "trace_run000.csv").read_bytes(),
                    (tmp_path / "out" / "best_alloy.csv").read_bytes(),
                )
            )
        assert contents[0] == contents[1]


class TestPcaReport:
    def test_pca_outputs(self, workspace):
        tmp_path, csv_path = workspace
        manifest = write_manifest(tmp_path, csv_path)
        runner = CliRunner()
        result = runner.invoke(main, ["pca", "--manifest", str(manifest)])
        assert result.exit_code == 0, result.output
        axes = (tmp_path / "out" / "pca_axes.csv").read_text().splitlines()
        assert len(axes) == 8

    def test_report_bundle_with_rho_sweep(self, workspace):
        tmp_path, csv_path = workspace
        manifest = write_manifest(
            tmp_path, csv_path,
            **{"experiment.rhobeg_grid": [0.5, 1.0]},
        )
        runner = CliRunner()
        result = runner.invoke(main, ["report", "--manifest", str(manifest)])
        assert result.exit_code == 0, result.output
        reports = tmp_path / "out" / "reports"
        assert (reports / "objective_vs_rho.csv").exists()
        assert (reports / "time_vs_rho.csv").exists()
        assert (reports / "cost_histogram.csv").exists()
