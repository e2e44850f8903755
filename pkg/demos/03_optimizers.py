"""Exercise both constrained optimizers on problems with known answers.

The derivative-free path runs the classic Rosenbrock valley and a linear
objective over the percentage simplex; the gradient path solves
equality- and inequality-constrained quadratics whose KKT solutions are
closed-form.
"""

import numpy as np

from alloyopt import (
    CobylaConfig,
    LinearEquality,
    TrustConstrConfig,
    minimize_cobyla,
    minimize_trust_constr,
    project_simplex,
)

print("== derivative-free (linear interpolation trust region) ==")

x, trace = minimize_cobyla(
    lambda v: 100.0 * (v[1] - v[0] ** 2) ** 2 + (1.0 - v[0]) ** 2,
    [], np.array([-1.2, 1.0]),
    CobylaConfig(rhobeg=1.0, rhoend=1e-6, max_evals=2000),
)
print(f"rosenbrock: x={x.round(5)} after {len(trace.records)} evals ({trace.termination})")

c = np.array([3.0, 1.0, 2.0])
x, trace = minimize_cobyla(
    lambda v: float(c @ project_simplex(v, total=1.0)),
    [lambda v, i=i: v[i] for i in range(3)],
    np.full(3, 1 / 3),
    CobylaConfig(rhobeg=0.2, rhoend=1e-6, max_evals=2000),
)
print(f"cheapest simplex vertex: {project_simplex(x, total=1.0).round(6)} "
      f"(cost coefficients {c})")

print("\n== gradient-based (tangent space + augmented Lagrangian) ==")

center = np.array([10.0, -5.0, 40.0])
x, trace = minimize_trust_constr(
    lambda v: float((v - center) @ (v - center)),
    lambda v: 2.0 * (v - center),
    LinearEquality.sum_to(3, 100.0), [],
    np.array([30.0, 30.0, 40.0]),
)
expected = center + (100.0 - center.sum()) / 3.0
print(f"equality-constrained quadratic: x={x.round(6)}")
print(f"closed-form KKT solution:       {expected.round(6)}")
print(f"every iterate satisfied |sum(x)-100| <= "
      f"{max(r.g1_abs for r in trace.records):.1e}")

a = np.array([80.0, 40.0])
b = np.array([40.0, 50.0])
x, trace = minimize_trust_constr(
    lambda v: float((v - a) @ (v - a)),
    lambda v: 2.0 * (v - a),
    LinearEquality.sum_to(2, 100.0),
    [(lambda v: float((v - b) @ (v - b)) - 64.0, lambda v: 2.0 * (v - b))],
    np.array([50.0, 50.0]),
    TrustConstrConfig(),
)
t = 45.0 + np.sqrt(7.0)
print(f"\nactive-inequality quadratic: x={x.round(6)}")
print(f"hand KKT solution:           [{t:.6f} {100 - t:.6f}]")
