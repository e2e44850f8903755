"""Run manifests: versioned YAML files that make experiments reproducible.

A manifest fixes everything a run depends on: file paths, pipeline
options, the model and optimizer configurations, objective weights and
the experiment definition. The schema is documented in
``docs/manifest-schema.md``. Unknown sections or keys are rejected so a
typo cannot silently change an experiment.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .cobyla import CobylaConfig
from .errors import ConfigurationError
from .mlp import MlpArchitecture, MlpTrainConfig
from .trees import TreesTrainParams
from .trustregion import TrustConstrConfig

SCHEMA_VERSION = 1

_SECTIONS = {"schema_version", "paths", "pipeline", "model", "objective", "optimizer", "experiment"}
_PATH_KEYS = {"elements", "enthalpy", "dataset", "out_dir", "model_file"}
_PIPELINE_KEYS = {"dedup", "train_fraction", "seed"}
_MODEL_KEYS = {"kind", "trees", "mlp"}
_TREES_KEYS = {"n_trees", "max_depth", "bootstrap", "min_samples_leaf", "seed"}
_MLP_KEYS = {"hidden", "dropout", "epochs", "batch_size", "learning_rate", "weight_decay", "seed", "decoupled_weight_decay"}
_OBJECTIVE_KEYS = {"lambda1", "lambda2", "ts_target", "tau", "standardize_distance"}
_OPTIMIZER_KEYS = {"kind", "dfo", "grad"}
_DFO_KEYS = {"rhobeg", "rhoend", "max_evals"}
_GRAD_KEYS = {"initial_radius", "gtol", "ctol", "max_iter", "nonneg"}
_EXPERIMENT_KEYS = {"kind", "u_grid", "n_seeds", "seed", "restarts", "lambdas", "target_temperature", "rhobeg_grid"}


def _check_keys(section: str, mapping: dict, allowed: set) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigurationError(f"manifest section {section!r}: unknown keys {sorted(unknown)}")


@dataclass(frozen=True)
class RunManifest:
    paths: dict = field(default_factory=dict)
    dedup: bool = True
    train_fraction: float = 0.7
    seed: int = 0
    model_kind: str = "trees"
    trees_params: TreesTrainParams = TreesTrainParams()
    mlp_arch: MlpArchitecture = MlpArchitecture(hidden=(128, 64, 32), dropout_rate=0.1)
    mlp_train: MlpTrainConfig = MlpTrainConfig()
    lambda1: float = 1.0
    lambda2: float = 0.0
    ts_target: float = 100.0
    tau: float = 0.4
    standardize_distance: bool = False
    optimizer_kind: str = "dfo"
    dfo: CobylaConfig = CobylaConfig()
    grad: TrustConstrConfig = TrustConstrConfig(nonneg=True)
    experiment_kind: str = "cost"
    u_grid: tuple = (0.0, 10.0, 20.0)
    n_seeds: int = 5
    restarts: int = 50
    lambdas: tuple = ((0.25, 0.75), (0.5, 0.5), (0.75, 0.25))
    target_temperature: float | None = None
    rhobeg_grid: tuple = (0.1, 0.5, 1.0, 2.0)

    def path(self, key: str, default=None):
        value = self.paths.get(key, default)
        return Path(value) if value is not None else None


def load_manifest(path) -> RunManifest:
    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path}: manifest must be a mapping")
    _check_keys("<root>", raw, _SECTIONS)
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigurationError(
            f"{path}: schema_version must be {SCHEMA_VERSION}, got {version!r}"
        )
    kwargs: dict = {}

    paths = raw.get("paths", {}) or {}
    _check_keys("paths", paths, _PATH_KEYS)
    kwargs["paths"] = {k: str(v) for k, v in paths.items()}

    pipeline = raw.get("pipeline", {}) or {}
    _check_keys("pipeline", pipeline, _PIPELINE_KEYS)
    if "dedup" in pipeline:
        kwargs["dedup"] = bool(pipeline["dedup"])
    if "train_fraction" in pipeline:
        kwargs["train_fraction"] = float(pipeline["train_fraction"])
    if "seed" in pipeline:
        kwargs["seed"] = int(pipeline["seed"])

    model = raw.get("model", {}) or {}
    _check_keys("model", model, _MODEL_KEYS)
    if "kind" in model:
        if model["kind"] not in ("trees", "mlp"):
            raise ConfigurationError(f"model.kind must be trees or mlp, got {model['kind']!r}")
        kwargs["model_kind"] = model["kind"]
    if "trees" in model:
        t = model["trees"] or {}
        _check_keys("model.trees", t, _TREES_KEYS)
        kwargs["trees_params"] = TreesTrainParams(**t)
    if "mlp" in model:
        m = dict(model["mlp"] or {})
        _check_keys("model.mlp", m, _MLP_KEYS)
        kwargs["mlp_arch"] = MlpArchitecture(
            hidden=tuple(m.pop("hidden", (128, 64, 32))),
            dropout_rate=float(m.pop("dropout", 0.1)),
        )
        kwargs["mlp_train"] = MlpTrainConfig(**m)

    objective = raw.get("objective", {}) or {}
    _check_keys("objective", objective, _OBJECTIVE_KEYS)
    for key in ("lambda1", "lambda2", "ts_target", "tau"):
        if key in objective:
            kwargs[key] = float(objective[key])
    if "standardize_distance" in objective:
        kwargs["standardize_distance"] = bool(objective["standardize_distance"])
    lam1 = kwargs.get("lambda1", 1.0)
    lam2 = kwargs.get("lambda2", 0.0)
    if abs(lam1 + lam2 - 1.0) > 1e-12:
        raise ConfigurationError(f"objective weights must sum to 1, got ({lam1}, {lam2})")

    optimizer = raw.get("optimizer", {}) or {}
    _check_keys("optimizer", optimizer, _OPTIMIZER_KEYS)
    if "kind" in optimizer:
        if optimizer["kind"] not in ("dfo", "grad"):
            raise ConfigurationError(
                f"optimizer.kind must be dfo or grad, got {optimizer['kind']!r}"
            )
        kwargs["optimizer_kind"] = optimizer["kind"]
    if "dfo" in optimizer:
        d = optimizer["dfo"] or {}
        _check_keys("optimizer.dfo", d, _DFO_KEYS)
        kwargs["dfo"] = CobylaConfig(**d)
    if "grad" in optimizer:
        gsec = dict(optimizer["grad"] or {})
        _check_keys("optimizer.grad", gsec, _GRAD_KEYS)
        gsec.setdefault("nonneg", True)
        kwargs["grad"] = TrustConstrConfig(**gsec)

    experiment = raw.get("experiment", {}) or {}
    _check_keys("experiment", experiment, _EXPERIMENT_KEYS)
    if "kind" in experiment:
        if experiment["kind"] not in ("recovery", "cost", "sweep"):
            raise ConfigurationError(
                f"experiment.kind must be recovery, cost or sweep, got {experiment['kind']!r}"
            )
        kwargs["experiment_kind"] = experiment["kind"]
    if "u_grid" in experiment:
        kwargs["u_grid"] = tuple(float(u) for u in experiment["u_grid"])
    if "n_seeds" in experiment:
        kwargs["n_seeds"] = int(experiment["n_seeds"])
    if "restarts" in experiment:
        kwargs["restarts"] = int(experiment["restarts"])
    if "lambdas" in experiment:
        pairs = tuple((float(p[0]), float(p[1])) for p in experiment["lambdas"])
        for p in pairs:
            if abs(p[0] + p[1] - 1.0) > 1e-12:
                raise ConfigurationError(f"experiment lambda pair must sum to 1: {p}")
        kwargs["lambdas"] = pairs
    if "target_temperature" in experiment:
        kwargs["target_temperature"] = float(experiment["target_temperature"])
    if "rhobeg_grid" in experiment:
        kwargs["rhobeg_grid"] = tuple(float(r) for r in experiment["rhobeg_grid"])

    return RunManifest(**kwargs)
