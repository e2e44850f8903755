"""Cost-only minimization and the weighted temperature/cost trade-off.

First minimizes the relative alloy cost alone (the surrogate is never
evaluated), then sweeps three weight pairs with multistart, showing how
the best alloy shifts from hitting the target temperature toward
cheaper compositions as the cost weight grows. Finishes by exporting
the plot-ready report bundle.
"""

import numpy as np

from alloyopt import (
    Composition,
    ConstraintSet,
    MlpArchitecture,
    MlpTrainConfig,
    build_neighbor_index,
    compute_features,
    default_registry,
    init_mlp,
    run_lambda_sweep,
    run_multistart,
    subset_registry,
    train_adam,
)
from alloyopt.dataset import AlloyRecord, Dataset
from alloyopt.driver import sweep_summary
from alloyopt.pca import export_reports
from alloyopt.trees import TreesTrainParams, train_extra_trees
from alloyopt.trustregion import TrustConstrConfig
from alloyopt.cobyla import CobylaConfig

rng = np.random.default_rng(23)
reg = subset_registry(default_registry(), ("Ni", "Ti", "Hf", "Zr", "Cu", "Al", "Fe", "Nb"))

records = []
for _ in range(400):
    x = rng.dirichlet(np.ones(reg.n)) * 100.0
    comp = Composition(x)
    feats = compute_features(comp, reg)
    y = feats.as_array()
    temp = 120.0 + 4.0 * y[0] + 500.0 * y[2] - 300.0 * y[4] + rng.normal(0.0, 5.0)
    records.append(AlloyRecord(composition=comp, features=feats, ms_temperature=temp))
data = Dataset(records=tuple(records))
cs = ConstraintSet(tau=5.0, neighbor_index=build_neighbor_index(data))

mlp, _ = train_adam(
    init_mlp(MlpArchitecture(hidden=(64, 32)), seed=1),
    data,
    MlpTrainConfig(epochs=200, batch_size=64, learning_rate=0.01, weight_decay=0.01, seed=2),
)


class Untouched:
    def predict(self, y):
        raise AssertionError("cost-only runs never evaluate the surrogate")


print("== cost-only (lambda1=0, lambda2=1), 20 restarts, derivative-free ==")
result = run_multistart(
    Untouched(), reg, data, 0.0, 1.0, 100.0, cs, "dfo",
    n_restarts=20, seed=3,
    dfo_cfg=CobylaConfig(rhobeg=1.0, rhoend=1e-5, max_evals=800),
)
best = result.best
print(f"best relative cost: {best.f2:.4f} $/kg")
for s, p in zip(reg.symbols, best.x_final):
    if p > 0.5:
        print(f"  {s}: {p:.2f}%")

# a target near the top of the temperature range: only a few (pricey)
# corners of composition space reach it, so the weights genuinely trade
ts_hard = float(np.percentile(data.temperatures(), 98))
print(f"\n== weighted sweep at Ts = {ts_hard:.0f}, gradient path, 20 restarts each ==")
results = run_lambda_sweep(
    [(0.25, 0.75), (0.5, 0.5), (0.75, 0.25)],
    mlp, reg, data, ts_hard, cs, "grad",
    n_restarts=20, seed=4,
    grad_cfg=TrustConstrConfig(nonneg=True, max_iter=150),
)
print(f"{'l1':>5} {'l2':>5} {'best f1':>11} {'best f2 ($/kg)':>15}")
for row in sweep_summary(results):
    print(f"{row['lambda1']:5.2f} {row['lambda2']:5.2f} "
          f"{row['best_f1']:11.4e} {row['best_f2']:15.4f}")

trees = train_extra_trees(data, TreesTrainParams(n_trees=20, max_depth=10, seed=5))
traces = {f"sweep_l2_{r.lambda2:g}": r.best.trace for r in results}
bundle = export_reports("demo-reports", reg, dataset=data, trees_model=trees,
                        mlp_model=mlp, traces=traces)
print(f"\nreport bundle written to demo-reports/: {sorted(bundle['written'])}")
