"""Physics-informed composition features and their analytic Jacobian.

A composition ``x`` is a vector of element percentages summing to 100.
Seven scalar descriptors are derived from it: pairwise mixing enthalpy,
a lattice-constant aggregate, electron concentration, mean atomic radius
and its spread, and mean electronegativity and its spread. All formulas
use mole fractions ``x_i / 100`` uniformly.

Both the feature map and its n-by-7 Jacobian are exact, closed-form
functions of ``(x, registry)`` with no internal state, so they are safe
to call from any number of workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CompositionError, DegenerateRegistryError, DimensionMismatchError
from .registry import Registry

COMPOSITION_TOTAL = 100.0
SUM_TOLERANCE = 1e-9

FEATURE_NAMES = ("dh_mix", "lattice_a", "vec", "r_mean", "r_delta", "chi_mean", "chi_delta")
N_FEATURES = 7


@dataclass(frozen=True)
class Composition:
    """Element percentages; nonnegative and summing to 100."""

    percentages: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.percentages, dtype=float)
        object.__setattr__(self, "percentages", p)
        if p.ndim != 1:
            raise CompositionError(f"composition must be a vector, got shape {p.shape}")
        if not np.all(np.isfinite(p)):
            raise CompositionError("composition has non-finite entries")
        if np.any(p < 0.0):
            i = int(np.argmin(p))
            raise CompositionError(f"negative percentage at component {i}: {p[i]}")
        total = float(p.sum())
        if abs(total - COMPOSITION_TOTAL) > SUM_TOLERANCE:
            raise CompositionError(f"percentages sum to {total!r}, expected 100")

    @property
    def n(self) -> int:
        return self.percentages.size


@dataclass(frozen=True)
class FeatureVector:
    """The seven descriptors, in the fixed order of FEATURE_NAMES."""

    dh_mix: float  # kJ/mol
    lattice_a: float  # m
    vec: float  # dimensionless
    r_mean: float  # angstrom
    r_delta: float  # dimensionless
    chi_mean: float  # Pauling
    chi_delta: float  # dimensionless

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.dh_mix, self.lattice_a, self.vec, self.r_mean,
             self.r_delta, self.chi_mean, self.chi_delta]
        )

    @classmethod
    def from_array(cls, a) -> "FeatureVector":
        a = np.asarray(a, dtype=float)
        if a.shape != (N_FEATURES,):
            raise ValueError(f"expected 7 features, got shape {a.shape}")
        return cls(*[float(v) for v in a])


@dataclass(frozen=True)
class FeatureJacobian:
    """Partial derivatives d(feature_j)/d(x_i), one column per feature.

    ``flagged_columns`` lists features whose derivative is undefined at
    this point (a spread feature evaluated at exactly zero spread); those
    columns are returned as zeros by convention.
    """

    matrix: np.ndarray  # (n, 7)
    flagged_columns: tuple[int, ...] = ()


def _fractions(x, reg: Registry) -> np.ndarray:
    # Composition inputs are validated at construction; raw arrays are the
    # optimizers' internal path, where iterates may sit slightly off the
    # feasible set while penalties pull them back, so only shape and
    # finiteness are enforced here.
    if isinstance(x, Composition):
        p = x.percentages
    else:
        p = np.asarray(x, dtype=float)
        if p.ndim != 1 or not np.all(np.isfinite(p)):
            raise CompositionError("composition vector must be finite and 1-d")
    if p.size != reg.n:
        raise DimensionMismatchError(
            f"composition has {p.size} components, registry has {reg.n}"
        )
    return p / COMPOSITION_TOTAL


def _feature_values(s: np.ndarray, reg: Registry):
    H = reg.enthalpy.values
    hs = H @ s
    dh_mix = 2.0 * float(s @ hs)  # 4 * sum_{i<j} s_i s_j H_ij
    lattice_a = float(s @ reg.lattice_coeff)
    if reg.vec_convention == "valence":
        num, den = reg.valence, reg.atomic_number
    else:
        num, den = reg.atomic_number, reg.valence
    vec_num = float(s @ num)
    vec_den = float(s @ den)
    r_mean = float(s @ reg.radius)
    chi_mean = float(s @ reg.chi)
    if r_mean == 0.0 or chi_mean == 0.0 or vec_den == 0.0:
        raise DegenerateRegistryError(
            "mean radius, mean electronegativity and the electron-count mean "
            "must be nonzero; registry properties are not strictly positive"
        )
    r_dev = 1.0 - reg.radius / r_mean
    chi_dev = 1.0 - reg.chi / chi_mean
    r_q = float(s @ r_dev**2)
    chi_q = float(s @ chi_dev**2)
    return {
        "hs": hs,
        "dh_mix": dh_mix,
        "lattice_a": lattice_a,
        "vec_num": vec_num,
        "vec_den": vec_den,
        "num": num,
        "den": den,
        "r_mean": r_mean,
        "chi_mean": chi_mean,
        "r_dev": r_dev,
        "chi_dev": chi_dev,
        "r_q": max(r_q, 0.0),
        "chi_q": max(chi_q, 0.0),
    }


def compute_features(x, reg: Registry) -> FeatureVector:
    """Evaluate the seven descriptors at composition ``x``."""
    s = _fractions(x, reg)
    v = _feature_values(s, reg)
    return FeatureVector(
        dh_mix=v["dh_mix"],
        lattice_a=v["lattice_a"],
        vec=v["vec_num"] / v["vec_den"],
        r_mean=v["r_mean"],
        r_delta=float(np.sqrt(v["r_q"])),
        chi_mean=v["chi_mean"],
        chi_delta=float(np.sqrt(v["chi_q"])),
    )


def compute_features_array(x, reg: Registry) -> np.ndarray:
    """Same as :func:`compute_features` but returned as a plain array."""
    return compute_features(x, reg).as_array()


def compute_jacobian(x, reg: Registry) -> FeatureJacobian:
    """Exact partial derivatives of every feature w.r.t. every percentage.

    Linear features differentiate to constant per-element coefficients;
    the enthalpy feature is quadratic, the electron-concentration feature
    uses the quotient rule, and the two spread features chain through
    their respective means. At zero spread the corresponding column is
    not differentiable: it is set to 0 and reported in
    ``flagged_columns``.
    """
    s = _fractions(x, reg)
    v = _feature_values(s, reg)
    n = s.size
    J = np.zeros((n, N_FEATURES))
    inv = 1.0 / COMPOSITION_TOTAL

    J[:, 0] = 4.0 * v["hs"] * inv
    J[:, 1] = reg.lattice_coeff * inv
    J[:, 2] = (v["num"] * v["vec_den"] - v["den"] * v["vec_num"]) / v["vec_den"] ** 2 * inv
    J[:, 3] = reg.radius * inv
    J[:, 5] = reg.chi * inv

    flagged = []
    # d/dx_k of sqrt(q) with q = sum_i s_i (1 - c_i/mean)^2 and
    # mean = sum_i s_i c_i:
    #   dq/dx_k = [dev_k^2 + 2 (c_k / mean^2) * sum_i s_i dev_i c_i] / 100
    for col, (coeff, mean, dev, q) in {
        4: (reg.radius, v["r_mean"], v["r_dev"], v["r_q"]),
        6: (reg.chi, v["chi_mean"], v["chi_dev"], v["chi_q"]),
    }.items():
        root = np.sqrt(q)
        if root == 0.0:
            flagged.append(col)
            continue
        t = float(s @ (dev * coeff))
        dq = (dev**2 + 2.0 * coeff / mean**2 * t) * inv
        J[:, col] = dq / (2.0 * root)

    return FeatureJacobian(matrix=J, flagged_columns=tuple(flagged))
