"""Principal component analysis and plot-ready CSV report bundles.

Everything here emits headered CSV files with repr-formatted floats, so
a fixed input produces byte-identical output. No charts are rendered;
the CSVs carry exactly the columns a plotting script needs. Formats are
documented in ``docs/report-formats.md``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import Dataset
from .errors import DatasetError
from .features import FEATURE_NAMES, N_FEATURES, FeatureVector
from .objective import eval_f2
from .trace import OptTrace


@dataclass(frozen=True)
class PcaModel:
    """Centered (optionally standardized) orthonormal axes, by variance."""

    mean: np.ndarray
    scale: np.ndarray  # ones when not standardized
    axes: np.ndarray  # (7, 7), rows are components
    variance_ratios: np.ndarray

    def transform(self, y) -> np.ndarray:
        arr = y.as_array() if isinstance(y, FeatureVector) else np.asarray(y, dtype=float)
        return self.axes @ ((arr - self.mean) / self.scale)


def fit_pca(features, standardize: bool = True) -> PcaModel:
    """Eigendecomposition of the sample covariance of the feature rows.

    Features mix units of wildly different magnitude, so unit-variance
    standardization is on by default. Axis signs are fixed so the
    largest-magnitude component of each axis is positive.
    """
    X = np.asarray(
        [f.as_array() if isinstance(f, FeatureVector) else f for f in features],
        dtype=float,
    )
    if X.ndim != 2 or X.shape[0] < 2:
        raise DatasetError("PCA needs at least 2 rows")
    if np.unique(X, axis=0).shape[0] < 2:
        raise DatasetError("PCA needs at least 2 distinct rows")
    mean = X.mean(axis=0)
    if standardize:
        scale = X.std(axis=0, ddof=1)
        scale[scale == 0.0] = 1.0
    else:
        scale = np.ones(X.shape[1])
    Z = (X - mean) / scale
    cov = (Z.T @ Z) / (X.shape[0] - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.maximum(eigvals[order], 0.0)
    axes = eigvecs[:, order].T
    total = eigvals.sum()
    if total <= 0.0:
        raise DatasetError("zero total variance; PCA undefined")
    for k in range(axes.shape[0]):
        if axes[k, np.argmax(np.abs(axes[k]))] < 0.0:
            axes[k] = -axes[k]
    return PcaModel(mean=mean, scale=scale, axes=axes,
                    variance_ratios=eigvals / total)


def project2d(m: PcaModel, y) -> tuple[float, float]:
    z = m.transform(y)
    return float(z[0]), float(z[1])


def _write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, str):
                cells.append(v)
            elif isinstance(v, (int, np.integer)):
                cells.append(str(int(v)))
            else:
                cells.append(repr(float(v)))
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def export_cost_histogram(dataset: Dataset, registry, path, n_bins: int = 30) -> None:
    costs = np.array([eval_f2(r.composition, registry) for r in dataset.records])
    counts, edges = np.histogram(costs, bins=n_bins)
    _write_csv(
        Path(path),
        ["bin_left", "bin_right", "count"],
        [(edges[i], edges[i + 1], counts[i]) for i in range(n_bins)],
    )


def export_feature_importance(trees_model, path) -> None:
    imp = trees_model.feature_importance()
    _write_csv(Path(path), ["feature", "importance"], list(zip(FEATURE_NAMES, imp)))


def export_correlations(dataset: Dataset, path) -> None:
    X = dataset.feature_matrix()
    corr = np.corrcoef(X.T)
    rows = [(FEATURE_NAMES[i], *corr[i]) for i in range(N_FEATURES)]
    _write_csv(Path(path), ["feature", *FEATURE_NAMES], rows)


def export_scatter(model, dataset: Dataset, path) -> None:
    """Predicted-vs-true pairs plus R^2/MAE in a trailing comment."""
    from .trees import score

    truth = dataset.temperatures()
    pred = model.predict_batch(dataset.feature_matrix())
    s = score(model, dataset)
    path = Path(path)
    _write_csv(path, ["true_celsius", "predicted_celsius"], list(zip(truth, pred)))
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(f"# r_squared: {s.r_squared!r}, mae: {s.mae!r}\n")


def export_trace_projection(m: PcaModel, trace: OptTrace, registry, path) -> None:
    """PC1/PC2 path of one optimization run with start/end markers."""
    from .features import compute_features_array

    rows = []
    n = len(trace.records)
    for i, r in enumerate(trace.records):
        y = compute_features_array(r.x, registry)
        pc1, pc2 = project2d(m, y)
        marker = "start" if i == 0 else ("end" if i == n - 1 else "step")
        rows.append((r.index, pc1, pc2, marker))
    _write_csv(Path(path), ["point_index", "pc1", "pc2", "marker"], rows)


def export_rho_sweep(sweep_rows, objective_path, time_path) -> None:
    """Figure-2 style data: final objective and total time per rhobeg.

    ``sweep_rows`` holds (rhobeg, final_objective, total_time_s) tuples.
    """
    _write_csv(
        Path(objective_path),
        ["rhobeg", "final_objective"],
        [(r[0], r[1]) for r in sweep_rows],
    )
    _write_csv(
        Path(time_path),
        ["rhobeg", "wall_time_s"],
        [(r[0], r[2]) for r in sweep_rows],
    )


def export_reports(
    out_dir,
    registry,
    dataset: Dataset | None = None,
    trees_model=None,
    mlp_model=None,
    traces: dict[str, OptTrace] | None = None,
    rho_sweep=None,
    pca_model: PcaModel | None = None,
) -> dict:
    """Emit every report the inputs allow; list what was skipped.

    Returns {"written": [...], "skipped": {artifact: reason}}. Missing
    inputs skip their artifact rather than failing the bundle.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[str] = []
    skipped: dict[str, str] = {}

    def emit(name, fn, *args):
        try:
            fn(*args)
            written.append(name)
        except Exception as exc:  # noqa: BLE001 - partial bundles are the contract
            skipped[name] = f"{type(exc).__name__}: {exc}"

    if dataset is not None:
        emit("cost_histogram.csv", export_cost_histogram, dataset, registry,
             out / "cost_histogram.csv")
        emit("feature_correlations.csv", export_correlations, dataset,
             out / "feature_correlations.csv")
    else:
        skipped["cost_histogram.csv"] = "no dataset"
        skipped["feature_correlations.csv"] = "no dataset"

    if trees_model is not None:
        emit("feature_importance.csv", export_feature_importance, trees_model,
             out / "feature_importance.csv")
    else:
        skipped["feature_importance.csv"] = "no trees model"

    for name, model in (("trees", trees_model), ("mlp", mlp_model)):
        if model is not None and dataset is not None:
            emit(f"scatter_{name}.csv", export_scatter, model, dataset,
                 out / f"scatter_{name}.csv")
        else:
            skipped[f"scatter_{name}.csv"] = "no model or dataset"

    pca = pca_model
    if pca is None and dataset is not None:
        try:
            pca = fit_pca(dataset.feature_matrix())
        except DatasetError as exc:
            skipped["pca"] = str(exc)
    if pca is not None and traces:
        for tag, trace in traces.items():
            emit(f"path_{tag}.csv", export_trace_projection, pca, trace, registry,
                 out / f"path_{tag}.csv")
    elif traces:
        skipped["paths"] = "no PCA basis"

    if rho_sweep:
        emit("objective_vs_rho.csv", export_rho_sweep, rho_sweep,
             out / "objective_vs_rho.csv", out / "time_vs_rho.csv")
        if "objective_vs_rho.csv" in written:
            written.append("time_vs_rho.csv")
    else:
        skipped["objective_vs_rho.csv"] = "no rho sweep data"

    return {"written": written, "skipped": skipped}
