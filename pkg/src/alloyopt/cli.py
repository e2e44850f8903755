"""Command-line entry point wiring the library into manifest-driven runs.

Every command takes ``--manifest`` plus targeted overrides and is
reproducible: identical manifest and seeds give byte-identical result
CSVs. Wall-clock information goes to ``run_metadata.json`` next to the
results, never into them. Exit codes: 0 success (including flagged
non-convergent runs), 1 runtime failure, 2 input error.
"""

from __future__ import annotations

import json
import sys
import time
from dataclasses import replace
from functools import wraps
from pathlib import Path

import click
import numpy as np
import yaml

from . import dataset as ds
from . import mlp as mlp_mod
from . import trees as trees_mod
from .cobyla import minimize_cobyla
from .driver import (
    run_lambda_sweep,
    run_multistart,
    run_recovery_experiment,
    sweep_summary,
)
from .errors import AlloyOptError, ConfigurationError, DatasetError, RegistryLoadError
from .features import N_FEATURES
from .manifest import RunManifest, load_manifest
from .objective import ConstraintSet, eval_scalarized, make_objective_spec, project_simplex
from .pca import export_reports, export_rho_sweep, fit_pca, _write_csv
from .registry import default_registry, load_registry
from .trace import export_trace

_INPUT_ERRORS = (
    ConfigurationError,
    DatasetError,
    RegistryLoadError,
    FileNotFoundError,
    yaml.YAMLError,
)


def _cli_errors(fn):
    @wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except _INPUT_ERRORS as exc:
            click.echo(f"input error: {exc}", err=True)
            sys.exit(2)
        except AlloyOptError as exc:
            click.echo(f"runtime failure: {exc}", err=True)
            sys.exit(1)

    return wrapper


def _load(manifest_path, seed, out) -> RunManifest:
    m = load_manifest(manifest_path)
    if seed is not None:
        m = replace(m, seed=seed)
    if out is not None:
        m = replace(m, paths={**m.paths, "out_dir": str(out)})
    return m


def _registry(m: RunManifest):
    elements = m.path("elements")
    enthalpy = m.path("enthalpy")
    if elements is None and enthalpy is None:
        return default_registry()
    if elements is None or enthalpy is None:
        raise ConfigurationError("paths.elements and paths.enthalpy must be set together")
    return load_registry(elements, enthalpy)


def _out_dir(m: RunManifest) -> Path:
    out = m.path("out_dir", "alloyopt-results")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dataset(m: RunManifest, reg):
    path = m.path("dataset")
    if path is None:
        raise ConfigurationError("paths.dataset is required for this command")
    data = ds.ingest_csv(path, reg)
    if m.dedup:
        data = ds.dedup_median(data)
    return data


def _write_metadata(out: Path, command: str, started: float, extra=None) -> None:
    meta = {
        "command": command,
        "started_unix": started,
        "elapsed_s": time.time() - started,
        **(extra or {}),
    }
    (out / "run_metadata.json").write_text(json.dumps(meta, indent=2), encoding="utf-8")


def _train_model(m: RunManifest, train):
    if m.model_kind == "trees":
        model = trees_mod.train_extra_trees(train, m.trees_params)
        return model, None
    init = mlp_mod.init_mlp(m.mlp_arch, m.mlp_train.seed)
    model, history = mlp_mod.train_adam(init, train, m.mlp_train)
    return model, history


def _load_model(m: RunManifest):
    path = m.path("model_file")
    if path is None:
        raise ConfigurationError("paths.model_file is required for this command")
    if m.model_kind == "trees":
        return trees_mod.load_trees(path)
    return mlp_mod.load_mlp(path)


def _metrics_rows(model, train, test):
    rows = []
    for split_name, data in (("train", train), ("test", test)):
        s = trees_mod.score(model, data)
        rows.append((split_name, s.r_squared, s.mae))
    return rows


@click.group()
def main():
    """Surrogate-based bi-objective alloy composition design."""


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=None, help="Override the pipeline seed.")
@click.option("--out", type=click.Path(), default=None, help="Override the output directory.")
@_cli_errors
def ingest(manifest_path, seed, out):
    """Validate the dataset CSV and write it back normalized."""
    started = time.time()
    m = _load(manifest_path, seed, out)
    reg = _registry(m)
    data = ds.ingest_csv(m.path("dataset"), reg)
    outd = _out_dir(m)
    ds.write_csv(data, reg, outd / "dataset.csv")
    click.echo(f"ingested {len(data)} records -> {outd / 'dataset.csv'}")
    _write_metadata(outd, "ingest", started, {"records": len(data)})


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), default=None)
@_cli_errors
def dedup(manifest_path, seed, out):
    """Collapse duplicated alloys to their median temperature."""
    started = time.time()
    m = _load(manifest_path, seed, out)
    reg = _registry(m)
    data = ds.ingest_csv(m.path("dataset"), reg)
    collapsed = ds.dedup_median(data)
    outd = _out_dir(m)
    ds.write_csv(collapsed, reg, outd / "dataset_dedup.csv")
    click.echo(f"dedup: {len(data)} -> {len(collapsed)} records")
    _write_metadata(outd, "dedup", started, {"before": len(data), "after": len(collapsed)})


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--fraction", type=float, default=None, help="Override train fraction.")
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), default=None)
@_cli_errors
def split(manifest_path, fraction, seed, out):
    """Write deterministic train/test CSVs."""
    started = time.time()
    m = _load(manifest_path, seed, out)
    if fraction is not None:
        m = replace(m, train_fraction=fraction)
    reg = _registry(m)
    data = _dataset(m, reg)
    train, test = ds.split(data, ds.SplitConfig(train_fraction=m.train_fraction, seed=m.seed))
    outd = _out_dir(m)
    ds.write_csv(train, reg, outd / "train.csv")
    ds.write_csv(test, reg, outd / "test.csv")
    click.echo(f"split: {len(train)} train / {len(test)} test")
    _write_metadata(outd, "split", started, {"train": len(train), "test": len(test)})


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), default=None)
@_cli_errors
def train(manifest_path, seed, out):
    """Train the configured surrogate; store the model and metrics."""
    started = time.time()
    m = _load(manifest_path, seed, out)
    reg = _registry(m)
    data = _dataset(m, reg)
    train_set, test_set = ds.split(
        data, ds.SplitConfig(train_fraction=m.train_fraction, seed=m.seed)
    )
    model, history = _train_model(m, train_set)
    outd = _out_dir(m)
    if m.model_kind == "trees":
        model_path = outd / "model_trees.json"
        trees_mod.save_trees(model, model_path)
    else:
        model_path = outd / "model_mlp.npz"
        mlp_mod.save_mlp(model, model_path)
        mlp_mod.export_loss_history(history, outd / "loss_history.csv")
    rows = _metrics_rows(model, train_set, test_set)
    _write_csv(outd / "metrics.csv", ["split", "r_squared", "mae"], rows)
    for split_name, r2, mae in rows:
        click.echo(f"{split_name}: r_squared={r2:.4f} mae={mae:.2f}")
    click.echo(f"model -> {model_path}")
    _write_metadata(outd, "train", started, {"model": str(model_path)})


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), default=None)
@_cli_errors
def evaluate(manifest_path, seed, out):
    """Score a stored model on the manifest dataset split."""
    started = time.time()
    m = _load(manifest_path, seed, out)
    reg = _registry(m)
    data = _dataset(m, reg)
    train_set, test_set = ds.split(
        data, ds.SplitConfig(train_fraction=m.train_fraction, seed=m.seed)
    )
    model = _load_model(m)
    rows = _metrics_rows(model, train_set, test_set)
    outd = _out_dir(m)
    _write_csv(outd / "metrics.csv", ["split", "r_squared", "mae"], rows)
    for split_name, r2, mae in rows:
        click.echo(f"{split_name}: r_squared={r2:.4f} mae={mae:.2f}")
    _write_metadata(outd, "evaluate", started)


def _constraint_set(m: RunManifest, train_set) -> ConstraintSet:
    return ConstraintSet(
        tau=m.tau,
        neighbor_index=ds.build_neighbor_index(train_set, standardize=m.standardize_distance),
    )


def _export_run_csv(path, runs):
    rows = []
    for i, r in enumerate(runs):
        rows.append(
            (i, r.f1, r.f2, r.scalarized, r.scalarized_common,
             r.g2, r.trace.termination, "failed" if r.failed else "ok")
        )
    _write_csv(
        path,
        ["run", "f1", "f2", "scalarized", "scalarized_common", "g2", "termination", "status"],
        rows,
    )


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--restarts", type=int, default=None, help="Override restart count.")
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), default=None)
@_cli_errors
def optimize(manifest_path, restarts, seed, out):
    """One multistart optimization with the manifest objective."""
    started = time.time()
    m = _load(manifest_path, seed, out)
    reg = _registry(m)
    data = _dataset(m, reg)
    train_set, _ = ds.split(data, ds.SplitConfig(train_fraction=m.train_fraction, seed=m.seed))
    model, _ = _train_model(m, train_set)
    cs = _constraint_set(m, train_set)
    n_restarts = restarts if restarts is not None else m.restarts
    result = run_multistart(
        model, reg, train_set, m.lambda1, m.lambda2, m.ts_target, cs,
        m.optimizer_kind, n_restarts, m.seed, dfo_cfg=m.dfo, grad_cfg=m.grad,
    )
    outd = _out_dir(m)
    _export_run_csv(outd / "runs.csv", result.runs)
    best = result.best
    _write_csv(
        outd / "best_alloy.csv",
        ["symbol", "percent"],
        [(s, p) for s, p in zip(reg.symbols, best.x_final) if p > 0.0],
    )
    traces = {}
    for i, r in enumerate(result.runs):
        export_trace(r.trace, outd / f"trace_run{i:03d}.csv")
        traces[f"run{i:03d}"] = r.trace
    export_reports(outd / "reports", reg, dataset=data,
                   trees_model=model if m.model_kind == "trees" else None,
                   mlp_model=model if m.model_kind == "mlp" else None,
                   traces=traces)
    click.echo(f"best run {result.best_index}: f1={best.f1!r} f2={best.f2!r}")
    _write_metadata(outd, "optimize", started, {"best_index": result.best_index,
                                                "restarts": n_restarts})


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--restarts", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), default=None)
@_cli_errors
def experiment(manifest_path, restarts, seed, out):
    """Run the manifest experiment: recovery, cost or sweep."""
    started = time.time()
    m = _load(manifest_path, seed, out)
    if restarts is not None:
        m = replace(m, restarts=restarts)
    reg = _registry(m)
    data = _dataset(m, reg)
    train_set, _ = ds.split(data, ds.SplitConfig(train_fraction=m.train_fraction, seed=m.seed))
    cs = _constraint_set(m, train_set)
    outd = _out_dir(m)
    traces = {}

    if m.experiment_kind == "recovery":
        trees_model = trees_mod.train_extra_trees(train_set, m.trees_params)
        mlp_model, _ = mlp_mod.train_adam(
            mlp_mod.init_mlp(m.mlp_arch, m.mlp_train.seed), train_set, m.mlp_train
        )
        temps = train_set.temperatures()
        if m.target_temperature is not None:
            idx = int(np.argmin(np.abs(temps - m.target_temperature)))
        else:
            idx = int(np.argmin(np.abs(temps - np.median(temps))))
        target = train_set.records[idx]
        runs = run_recovery_experiment(
            target, reg, {"dfo": trees_model, "grad": mlp_model}, cs,
            m.u_grid, range(m.n_seeds),
            dfo_cfg=m.dfo, grad_cfg=m.grad,
        )
        rows = []
        for r in runs:
            tag = f"u{r.u:g}_{r.optimizer}_s{r.seed}"
            export_trace(r.result.trace, outd / f"trace_{tag}.csv")
            traces[tag] = r.result.trace
            rows.append((r.u, r.optimizer, r.seed, r.result.f1, r.target_distance,
                         r.result.trace.termination))
        _write_csv(outd / "recovery.csv",
                   ["u", "optimizer", "seed", "f1", "target_distance", "termination"], rows)
        extra = {"target_temperature": target.ms_temperature, "runs": len(runs)}
    elif m.experiment_kind == "cost":
        model, _ = _train_model(m, train_set)
        result = run_multistart(
            model, reg, train_set, 0.0, 1.0, m.ts_target, cs,
            m.optimizer_kind, m.restarts, m.seed, dfo_cfg=m.dfo, grad_cfg=m.grad,
        )
        _export_run_csv(outd / "runs.csv", result.runs)
        best = result.best
        _write_csv(outd / "best_alloy.csv", ["symbol", "percent"],
                   [(s, p) for s, p in zip(reg.symbols, best.x_final) if p > 0.0])
        for i, r in enumerate(result.runs):
            export_trace(r.trace, outd / f"trace_run{i:03d}.csv")
            traces[f"run{i:03d}"] = r.trace
        extra = {"best_f2": best.f2, "restarts": m.restarts}
    else:  # sweep
        model, _ = _train_model(m, train_set)
        results = run_lambda_sweep(
            m.lambdas, model, reg, train_set, m.ts_target, cs,
            m.optimizer_kind, m.restarts, m.seed, dfo_cfg=m.dfo, grad_cfg=m.grad,
        )
        rows = []
        for res in results:
            best = res.best
            rows.append((res.lambda1, res.lambda2, best.f1, best.f2, best.scalarized_common))
            for i, r in enumerate(res.runs):
                tag = f"l{res.lambda1:g}_run{i:03d}"
                export_trace(r.trace, outd / f"trace_{tag}.csv")
                traces[tag] = r.trace
        _write_csv(outd / "sweep.csv",
                   ["lambda1", "lambda2", "best_f1", "best_f2", "best_scalarized_common"], rows)
        extra = {"pairs": len(results), "restarts": m.restarts}

    trees_model = trees_mod.train_extra_trees(train_set, m.trees_params)
    export_reports(outd / "reports", reg, dataset=data, trees_model=trees_model,
                   traces=traces)
    click.echo(f"experiment {m.experiment_kind} complete -> {outd}")
    _write_metadata(outd, f"experiment:{m.experiment_kind}", started,
                    {**extra, "restarts_recorded": m.restarts})


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), default=None)
@_cli_errors
def pca(manifest_path, seed, out):
    """Fit PCA on the dataset features and export axes/ratios."""
    started = time.time()
    m = _load(manifest_path, seed, out)
    reg = _registry(m)
    data = _dataset(m, reg)
    model = fit_pca(data.feature_matrix())
    outd = _out_dir(m)
    _write_csv(outd / "pca_axes.csv",
               ["component", *[f"w_{i}" for i in range(N_FEATURES)]],
               [(k, *model.axes[k]) for k in range(N_FEATURES)])
    _write_csv(outd / "pca_variance.csv",
               ["component", "variance_ratio"],
               list(enumerate(model.variance_ratios)))
    click.echo(f"first two components: {model.variance_ratios[:2].sum():.1%} of variance")
    _write_metadata(outd, "pca", started)


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), default=None)
@_cli_errors
def report(manifest_path, seed, out):
    """Emit the plot-ready CSV bundle from the manifest inputs.

    Includes the rhobeg sweep (objective and time versus initial radius)
    when the manifest configures a DFO optimizer.
    """
    started = time.time()
    m = _load(manifest_path, seed, out)
    reg = _registry(m)
    data = _dataset(m, reg)
    train_set, _ = ds.split(data, ds.SplitConfig(train_fraction=m.train_fraction, seed=m.seed))
    trees_model = trees_mod.train_extra_trees(train_set, m.trees_params)
    cs = _constraint_set(m, train_set)
    rho_sweep = None
    if m.optimizer_kind == "dfo":
        rho_sweep = []
        x0 = train_set.records[0].composition.percentages
        spec = make_objective_spec(m.lambda1, m.lambda2, m.ts_target, trees_model, reg, x0)
        for rhobeg in m.rhobeg_grid:
            cfg = replace(m.dfo, rhobeg=rhobeg)
            t0 = time.perf_counter()
            x_best, trace = minimize_cobyla(
                lambda v: eval_scalarized(project_simplex(v), spec), [], x0, cfg
            )
            rho_sweep.append(
                (rhobeg, eval_scalarized(project_simplex(x_best), spec),
                 time.perf_counter() - t0)
            )
    outd = _out_dir(m)
    bundle = export_reports(outd / "reports", reg, dataset=data, trees_model=trees_model,
                            rho_sweep=rho_sweep)
    click.echo(f"written: {sorted(bundle['written'])}")
    if bundle["skipped"]:
        click.echo(f"skipped: {bundle['skipped']}")
    _write_metadata(outd, "report", started, {"written": bundle["written"]})


if __name__ == "__main__":
    main()
