"""Objectives, constraints and the simplex projection for the design problem.

The temperature objective is the relative squared miss of the surrogate
prediction against the target; the cost objective is the mass-weighted
mean element price. Both are combined by a weighted sum after dividing
each by its value at the run's starting point, so the scalarized value
at the start is exactly 1.

The sum-to-100 equality is ``g1``; the proximity constraint ``g2`` keeps
candidate compositions within feature distance tau of the training data,
bounding surrogate extrapolation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dataset import NeighborIndex, min_feature_distance
from .errors import ConfigurationError, UnsupportedSurrogateError
from .features import (
    COMPOSITION_TOTAL,
    Composition,
    compute_features_array,
    compute_jacobian,
)
from .registry import Registry

LAMBDA_SUM_TOL = 1e-12


@dataclass(frozen=True)
class ConstraintSet:
    """Feature-space trust envelope: stay within tau of some dataset alloy."""

    tau: float
    neighbor_index: NeighborIndex

    def __post_init__(self):
        if not self.tau > 0.0:
            raise ConfigurationError(f"tau must be positive, got {self.tau}")


@dataclass(frozen=True)
class ObjectiveSpec:
    """Weights, target, surrogate and per-run normalizers of the objective."""

    lambda1: float
    lambda2: float
    ts_target: float
    surrogate: object  # needs .predict(features); .input_gradient for gradients
    registry: Registry
    f1_normalizer: float
    f2_normalizer: float
    degenerate_f1_normalizer: bool = False

    def __post_init__(self):
        if self.lambda1 < 0.0 or self.lambda2 < 0.0:
            raise ConfigurationError("weights must be nonnegative")
        if abs(self.lambda1 + self.lambda2 - 1.0) > LAMBDA_SUM_TOL:
            raise ConfigurationError("weights must sum to 1")
        if self.ts_target == 0.0:
            raise ConfigurationError("target temperature must be nonzero (it divides f1)")
        if self.lambda1 > 0.0 and not self.f1_normalizer > 0.0:
            raise ConfigurationError("f1 normalizer must be positive when lambda1 > 0")
        if self.lambda2 > 0.0 and not self.f2_normalizer > 0.0:
            raise ConfigurationError("f2 normalizer must be positive when lambda2 > 0")


def make_objective_spec(
    lambda1: float,
    lambda2: float,
    ts_target: float,
    surrogate,
    registry: Registry,
    x0,
) -> ObjectiveSpec:
    """Capture normalizers at the starting point ``x0`` and build the spec.

    With ``lambda1 == 0`` the surrogate is never evaluated and the f1
    normalizer is a placeholder 1. A start that already hits the target
    exactly (f1(x0) == 0) cannot normalize by itself; the normalizer
    falls back to 1 and the spec records the degeneracy.
    """
    f2_norm = eval_f2(x0, registry)
    degenerate = False
    if lambda1 == 0.0:
        f1_norm = 1.0
    else:
        probe = ObjectiveSpec(
            lambda1=lambda1, lambda2=lambda2, ts_target=ts_target,
            surrogate=surrogate, registry=registry,
            f1_normalizer=1.0, f2_normalizer=f2_norm,
        )
        f1_norm = eval_f1(x0, probe)
        if f1_norm == 0.0:
            warnings.warn(
                "f1(x0) is exactly zero; normalizer replaced by 1",
                stacklevel=2,
            )
            f1_norm = 1.0
            degenerate = True
    return ObjectiveSpec(
        lambda1=lambda1, lambda2=lambda2, ts_target=ts_target,
        surrogate=surrogate, registry=registry,
        f1_normalizer=f1_norm, f2_normalizer=f2_norm,
        degenerate_f1_normalizer=degenerate,
    )


def eval_f1(x, spec: ObjectiveSpec) -> float:
    """Relative squared temperature miss ((Ts - That) / Ts)^2."""
    y = compute_features_array(x, spec.registry)
    predicted = spec.surrogate.predict(y)
    return ((spec.ts_target - predicted) / spec.ts_target) ** 2


def eval_f2(x, reg: Registry) -> float:
    """Mass-weighted average element cost in $/kg; surrogate-free."""
    p = x.percentages if isinstance(x, Composition) else np.asarray(x, dtype=float)
    mass = p * reg.molar_mass
    return float(reg.cost @ mass / mass.sum())


def grad_f1(x, spec: ObjectiveSpec) -> np.ndarray:
    """Chain rule through features and the surrogate's input gradient.

    Differentiates the implemented f1, so the 1/Ts^2 factor is included.
    Only differentiable surrogates qualify; the trees ensemble is
    piecewise constant and is rejected.
    """
    if not hasattr(spec.surrogate, "input_gradient"):
        raise UnsupportedSurrogateError(
            "surrogate exposes no input gradient; its response is piecewise "
            "constant, so the objective gradient is undefined or zero"
        )
    y = compute_features_array(x, spec.registry)
    predicted = spec.surrogate.predict(y)
    dz = np.asarray(spec.surrogate.input_gradient(y), dtype=float)
    J = compute_jacobian(x, spec.registry).matrix
    return (-2.0 * (spec.ts_target - predicted) / spec.ts_target**2) * (J @ dz)


def grad_f2(x, reg: Registry) -> np.ndarray:
    """Quotient-rule derivative of the mass-weighted cost."""
    p = x.percentages if isinstance(x, Composition) else np.asarray(x, dtype=float)
    mass_coeff = reg.molar_mass
    s = float(p @ mass_coeff)
    w = float(reg.cost @ (p * mass_coeff))
    return mass_coeff * (reg.cost * s - w) / s**2


def eval_scalarized(x, spec: ObjectiveSpec) -> float:
    """Weighted sum of the normalized objectives; exactly 1 at x0.

    When the temperature weight is zero the surrogate is not evaluated at
    all, matching the cost-only experiments.
    """
    total = 0.0
    if spec.lambda1 > 0.0:
        total += spec.lambda1 * eval_f1(x, spec) / spec.f1_normalizer
    if spec.lambda2 > 0.0:
        total += spec.lambda2 * eval_f2(x, spec.registry) / spec.f2_normalizer
    return total


def grad_scalarized(x, spec: ObjectiveSpec) -> np.ndarray:
    g = np.zeros(spec.registry.n)
    if spec.lambda1 > 0.0:
        g += spec.lambda1 * grad_f1(x, spec) / spec.f1_normalizer
    if spec.lambda2 > 0.0:
        g += spec.lambda2 * grad_f2(x, spec.registry) / spec.f2_normalizer
    return g


def eval_g1(x) -> float:
    p = x.percentages if isinstance(x, Composition) else np.asarray(x, dtype=float)
    return float(p.sum() - COMPOSITION_TOTAL)


def eval_g2(x, spec_registry, cs: ConstraintSet) -> float:
    """Signed distance margin: negative strictly inside the trust envelope."""
    y = compute_features_array(x, spec_registry)
    dist, _ = min_feature_distance(cs.neighbor_index, y)
    return dist - cs.tau


def grad_g2(x, reg: Registry, cs: ConstraintSet) -> np.ndarray:
    """Subgradient of g2 through the current nearest neighbor.

    The min over dataset rows is nonsmooth; ties resolve to the lowest
    row id. At zero distance (on a dataset alloy) the convention value is
    the zero vector; g2 is at its minimum -tau there anyway.
    """
    y = compute_features_array(x, reg)
    idx = cs.neighbor_index
    dist, k = min_feature_distance(idx, y)
    if dist == 0.0:
        return np.zeros(reg.n)
    diff = y - idx.features[k]
    if idx.std is not None:
        diff = diff / idx.std**2
    J = compute_jacobian(x, reg).matrix
    return (J @ diff) / dist


def project_simplex(v, total: float = COMPOSITION_TOTAL) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum(x) = total}.

    Sort-and-threshold algorithm: the projection is max(v - theta, 0)
    where theta is fixed by the active support found from the sorted
    cumulative sums. O(n log n), exact up to floating rounding.
    """
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - total
    j = np.arange(1, v.size + 1)
    rho = int(np.nonzero(u - css / j > 0.0)[0][-1])
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def project_simplex_composition(v, total: float = COMPOSITION_TOTAL) -> Composition:
    x = project_simplex(v, total)
    # pin the sum exactly; the sort-threshold result is off by rounding only
    x *= total / x.sum()
    return Composition(x)
