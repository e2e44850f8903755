"""Experiment orchestration: perturbation recovery, cost-only and weighted sweeps.

Each experiment wraps many independent optimizer runs. Initial points
come from the dataset ("multistart"); per-run normalizers are captured
at each run's own start, which makes scalarized values comparable only
within a run, so the best run is selected by re-normalizing every final
(f1, f2) pair at a common reference point (the first restart's start).

Runs never abort an experiment: a failed run is flagged and carries its
diagnostics; only an experiment where every run failed raises.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cobyla import CobylaConfig, minimize_cobyla
from .dataset import Dataset
from .errors import ConfigurationError, ExperimentError
from .features import Composition, compute_features_array
from .objective import (
    ConstraintSet,
    ObjectiveSpec,
    eval_f1,
    eval_f2,
    eval_g2,
    grad_scalarized,
    eval_scalarized,
    grad_g2,
    make_objective_spec,
    project_simplex,
    project_simplex_composition,
)
from .trace import OptTrace
from .trustregion import LinearEquality, TrustConstrConfig, minimize_trust_constr

OPTIMIZERS = ("dfo", "grad")


@dataclass(frozen=True)
class PerturbationConfig:
    u: float  # half-width in percent
    seed: int
    target_record: int = 0

    def __post_init__(self):
        if self.u < 0.0:
            raise ConfigurationError(f"perturbation half-width must be >= 0, got {self.u}")


@dataclass
class RunResult:
    x0: np.ndarray
    x_final: np.ndarray
    f1: float
    f2: float
    scalarized: float  # own-normalizer value at x_final
    scalarized_common: float  # re-normalized at the common reference
    g2: float
    trace: OptTrace
    failed: bool = False
    failure: str = ""


@dataclass
class ExperimentResult:
    runs: list[RunResult]
    best_index: int
    lambda1: float
    lambda2: float
    ts_target: float

    @property
    def best(self) -> RunResult:
        return self.runs[self.best_index]


def perturb_alloy(x, cfg: PerturbationConfig):
    """Jitter the nonzero percentages by U(-u, u), keeping the support.

    Zero components stay exactly zero; the perturbed positive components
    are projected back onto their sub-simplex so the result is a valid
    composition in the same alloy family. With u == 0 the input is
    returned unchanged.
    """
    p = x.percentages if isinstance(x, Composition) else np.asarray(x, dtype=float)
    if cfg.u == 0.0:
        return Composition(p.copy())
    rng = np.random.default_rng(cfg.seed)
    support = p > 0.0
    draws = rng.uniform(-cfg.u, cfg.u, int(support.sum()))
    out = p.copy()
    out[support] = p[support] + draws
    out[support] = project_simplex(out[support], total=100.0)
    out[~support] = 0.0
    out *= 100.0 / out.sum()
    return Composition(out)


def _dfo_run(spec: ObjectiveSpec, cs: ConstraintSet | None, x0, dfo_cfg: CobylaConfig):
    reg = spec.registry

    def objective(v):
        return eval_scalarized(project_simplex(v), spec)

    constraints = []
    if cs is not None:
        constraints.append(lambda v: -eval_g2(project_simplex(v), reg, cs))
    x_raw, trace = minimize_cobyla(objective, constraints, x0, dfo_cfg)
    return project_simplex(x_raw), trace


def _grad_run(spec: ObjectiveSpec, cs: ConstraintSet | None, x0, grad_cfg: TrustConstrConfig):
    reg = spec.registry
    eq = LinearEquality.sum_to(reg.n, 100.0)
    ineqs = []
    if cs is not None:
        ineqs.append(
            (lambda v: eval_g2(v, reg, cs), lambda v: grad_g2(v, reg, cs))
        )
    x, trace = minimize_trust_constr(
        lambda v: eval_scalarized(v, spec),
        lambda v: grad_scalarized(v, spec),
        eq, ineqs, x0, grad_cfg,
    )
    return project_simplex(x), trace


def run_single(
    surrogate,
    registry,
    x0,
    lambda1: float,
    lambda2: float,
    ts_target: float,
    cs: ConstraintSet | None,
    optimizer: str,
    dfo_cfg: CobylaConfig | None = None,
    grad_cfg: TrustConstrConfig | None = None,
) -> RunResult:
    """One optimization run with normalizers captured at its own x0."""
    if optimizer not in OPTIMIZERS:
        raise ConfigurationError(f"optimizer must be one of {OPTIMIZERS}, got {optimizer!r}")
    x0 = x0.percentages if isinstance(x0, Composition) else np.asarray(x0, dtype=float)
    try:
        spec = make_objective_spec(lambda1, lambda2, ts_target, surrogate, registry, x0)
        if optimizer == "dfo":
            x_final, trace = _dfo_run(spec, cs, x0, dfo_cfg or CobylaConfig())
        else:
            x_final, trace = _grad_run(spec, cs, x0, grad_cfg or TrustConstrConfig(nonneg=True))
    except Exception as exc:  # noqa: BLE001 - runs are flagged, never fatal
        return RunResult(
            x0=x0.copy(), x_final=x0.copy(), f1=float("nan"), f2=float("nan"),
            scalarized=float("nan"), scalarized_common=float("nan"),
            g2=float("nan"), trace=OptTrace(kind="dfo", termination="failed"),
            failed=True, failure=f"{type(exc).__name__}: {exc}",
        )
    f1 = eval_f1(x_final, spec) if lambda1 > 0.0 else float("nan")
    f2 = eval_f2(x_final, registry)
    g2 = eval_g2(x_final, registry, cs) if cs is not None else float("nan")
    return RunResult(
        x0=x0.copy(), x_final=x_final, f1=f1, f2=f2,
        scalarized=eval_scalarized(x_final, spec), scalarized_common=float("nan"),
        g2=g2, trace=trace,
    )


def _common_scalarized(run: RunResult, lambda1, lambda2, n1, n2) -> float:
    total = 0.0
    if lambda1 > 0.0:
        total += lambda1 * run.f1 / n1
    if lambda2 > 0.0:
        total += lambda2 * run.f2 / n2
    return total


def run_multistart(
    surrogate,
    registry,
    dataset: Dataset,
    lambda1: float,
    lambda2: float,
    ts_target: float,
    cs: ConstraintSet | None,
    optimizer: str,
    n_restarts: int,
    seed: int,
    dfo_cfg: CobylaConfig | None = None,
    grad_cfg: TrustConstrConfig | None = None,
    n_workers: int = 1,
) -> ExperimentResult:
    """Repeat the run from distinct random dataset alloys, keep the best.

    The seed fixes the start selection; per-run work is independent, so
    the worker count changes wall time only. Best selection re-normalizes
    every run's raw (f1, f2) at the first restart's start.
    """
    if n_restarts < 1:
        raise ConfigurationError("n_restarts must be >= 1")
    rng = np.random.default_rng(seed)
    n_data = len(dataset)
    pick = rng.permutation(n_data)[: min(n_restarts, n_data)]
    starts = [dataset.records[int(i)].composition.percentages for i in pick]
    while len(starts) < n_restarts:  # more restarts than alloys: reuse, reshuffled
        extra = rng.permutation(n_data)[: min(n_restarts - len(starts), n_data)]
        starts.extend(dataset.records[int(i)].composition.percentages for i in extra)

    def work(x0):
        return run_single(
            surrogate, registry, x0, lambda1, lambda2, ts_target, cs,
            optimizer, dfo_cfg=dfo_cfg, grad_cfg=grad_cfg,
        )

    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            runs = list(pool.map(work, starts))
    else:
        runs = [work(x0) for x0 in starts]

    ok = [r for r in runs if not r.failed]
    if not ok:
        raise ExperimentError(
            "all restarts failed", diagnostics=[r.failure for r in runs]
        )

    # common reference normalizers at the first restart's own start
    ref = starts[0]
    n2 = eval_f2(ref, registry)
    if lambda1 > 0.0:
        ref_spec = make_objective_spec(lambda1, lambda2, ts_target, surrogate, registry, ref)
        n1 = ref_spec.f1_normalizer
    else:
        n1 = 1.0
    for r in runs:
        if not r.failed:
            r.scalarized_common = _common_scalarized(r, lambda1, lambda2, n1, n2)
    best_index = min(
        (i for i, r in enumerate(runs) if not r.failed),
        key=lambda i: (runs[i].scalarized_common, i),
    )
    return ExperimentResult(
        runs=runs, best_index=best_index,
        lambda1=lambda1, lambda2=lambda2, ts_target=ts_target,
    )


@dataclass
class RecoveryRun:
    u: float
    optimizer: str
    seed: int
    result: RunResult
    target_distance: float  # feature-space distance of final alloy to target


def run_recovery_experiment(
    target_record,
    registry,
    surrogates: dict,
    cs: ConstraintSet | None,
    u_values,
    seeds,
    ts_target: float | None = None,
    dfo_cfg: CobylaConfig | None = None,
    grad_cfg: TrustConstrConfig | None = None,
) -> list[RecoveryRun]:
    """Temperature-only recovery from perturbed starts, both optimizer paths.

    ``surrogates`` maps optimizer name ("dfo"/"grad") to its trained
    model. The target temperature defaults to the target record's own,
    so an exact surrogate would be minimized at the target alloy.
    """
    target = ts_target if ts_target is not None else target_record.ms_temperature
    y_target = target_record.features.as_array()
    out = []
    for u in u_values:
        for optimizer, surrogate in surrogates.items():
            for seed in seeds:
                x0 = perturb_alloy(
                    target_record.composition, PerturbationConfig(u=u, seed=seed)
                )
                res = run_single(
                    surrogate, registry, x0, 1.0, 0.0, target, cs, optimizer,
                    dfo_cfg=dfo_cfg, grad_cfg=grad_cfg,
                )
                if res.failed:
                    dist = float("nan")
                else:
                    y_final = compute_features_array(res.x_final, registry)
                    dist = float(np.linalg.norm(y_final - y_target))
                out.append(
                    RecoveryRun(u=u, optimizer=optimizer, seed=seed, result=res,
                                target_distance=dist)
                )
    return out


def run_lambda_sweep(
    lambdas,
    surrogate,
    registry,
    dataset: Dataset,
    ts_target: float,
    cs: ConstraintSet | None,
    optimizer: str,
    n_restarts: int,
    seed: int,
    dfo_cfg: CobylaConfig | None = None,
    grad_cfg: TrustConstrConfig | None = None,
) -> list[ExperimentResult]:
    """One multistart experiment per weight pair, identical starts across
    the sweep (same seed), so results differ only through the weights."""
    results = []
    for lam1, lam2 in lambdas:
        if abs(lam1 + lam2 - 1.0) > 1e-12:
            raise ConfigurationError(f"weights must sum to 1, got ({lam1}, {lam2})")
        results.append(
            run_multistart(
                surrogate, registry, dataset, lam1, lam2, ts_target, cs,
                optimizer, n_restarts, seed, dfo_cfg=dfo_cfg, grad_cfg=grad_cfg,
            )
        )
    return results


def sweep_summary(results: list[ExperimentResult]) -> list[dict]:
    rows = []
    for res in results:
        best = res.best
        rows.append(
            {
                "lambda1": res.lambda1,
                "lambda2": res.lambda2,
                "ts_target": res.ts_target,
                "best_f1": best.f1,
                "best_f2": best.f2,
                "best_scalarized_common": best.scalarized_common,
                "best_alloy": best.x_final.tolist(),
            }
        )
    return rows
