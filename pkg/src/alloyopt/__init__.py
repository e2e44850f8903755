"""Surrogate-based bi-objective design of shape memory alloy compositions.

The pipeline: physics-informed features of a composition, two trained
surrogates of the martensite start temperature (a trees ensemble and a
differentiable MLP), and two constrained optimizers (derivative-free and
gradient-based) searching composition space for a target temperature at
minimal cost.
"""

from .cobyla import CobylaConfig, minimize_cobyla
from .dataset import (
    AlloyRecord,
    Dataset,
    NeighborIndex,
    SplitConfig,
    build_neighbor_index,
    dedup_median,
    ingest_csv,
    min_feature_distance,
    split,
)
from .driver import (
    ExperimentResult,
    PerturbationConfig,
    perturb_alloy,
    run_lambda_sweep,
    run_multistart,
    run_recovery_experiment,
    run_single,
)
from .features import (
    Composition,
    FeatureJacobian,
    FeatureVector,
    compute_features,
    compute_features_array,
    compute_jacobian,
)
from .mlp import (
    MlpArchitecture,
    MlpModel,
    MlpTrainConfig,
    forward,
    init_mlp,
    input_gradient,
    load_mlp,
    save_mlp,
    train_adam,
)
from .objective import (
    ConstraintSet,
    ObjectiveSpec,
    eval_f1,
    eval_f2,
    eval_g1,
    eval_g2,
    eval_scalarized,
    grad_f1,
    grad_f2,
    grad_scalarized,
    make_objective_spec,
    project_simplex,
    project_simplex_composition,
)
from .pca import PcaModel, export_reports, fit_pca, project2d
from .registry import (
    ElementRecord,
    MixingEnthalpyTable,
    Registry,
    default_registry,
    load_registry,
    pair_enthalpy,
    save_registry,
    subset_registry,
)
from .trace import OptTrace, export_trace
from .trees import (
    ExtraTreesModel,
    TreesTrainParams,
    load_trees,
    predict_trees,
    save_trees,
    score,
    train_extra_trees,
)
from .trustregion import LinearEquality, TrustConstrConfig, minimize_trust_constr

__version__ = "0.1.0"
