"""Walk through the physics features of an alloy composition.

Loads the bundled 39-element registry, evaluates the seven descriptors
for a NiTi-like alloy, and verifies the analytic Jacobian against a
finite-difference probe.
"""

import numpy as np

from alloyopt import (
    Composition,
    compute_features,
    compute_jacobian,
    default_registry,
    pair_enthalpy,
)

reg = default_registry()
print(f"registry: {reg.n} elements, first five: {reg.symbols[:5]}")

ni, ti = reg.index_of("Ni"), reg.index_of("Ti")
print(f"H_mix(Ni, Ti) = {pair_enthalpy(reg, ni, ti)} kJ/mol")

# a NiTiHf-flavoured composition: percentages must sum to 100
x = np.zeros(reg.n)
x[ni] = 50.0
x[ti] = 35.0
x[reg.index_of("Hf")] = 15.0
comp = Composition(x)

feats = compute_features(comp, reg)
print("\nfeatures:")
for name, value in zip(
    ("dh_mix", "lattice_a", "vec", "r_mean", "r_delta", "chi_mean", "chi_delta"),
    feats.as_array(),
):
    print(f"  {name:10s} = {value:.6g}")

# the 39x7 Jacobian: column j is the gradient of feature j
jac = compute_jacobian(comp, reg)
print(f"\nJacobian shape: {jac.matrix.shape}, flagged columns: {jac.flagged_columns}")

# quick finite-difference spot check along the Ni axis
h = 1e-5


def raw_features(v):
    s = v / 100.0
    H = reg.enthalpy.values
    y4 = s @ reg.radius
    y6 = s @ reg.chi
    return np.array(
        [
            2.0 * s @ (H @ s),
            s @ reg.lattice_coeff,
            (s @ reg.valence) / (s @ reg.atomic_number),
            y4,
            np.sqrt(max(s @ (1 - reg.radius / y4) ** 2, 0.0)),
            y6,
            np.sqrt(max(s @ (1 - reg.chi / y6) ** 2, 0.0)),
        ]
    )


xp, xm = x.copy(), x.copy()
xp[ni] += h
xm[ni] -= h
fd = (raw_features(xp) - raw_features(xm)) / (2 * h)
print("\nanalytic vs finite-difference, d(features)/d(Ni%):")
for j in range(7):
    print(f"  column {j}: {jac.matrix[ni, j]:+.6e}  vs  {fd[j]:+.6e}")
