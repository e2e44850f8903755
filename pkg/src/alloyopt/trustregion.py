"""Gradient-based trust-region minimizer with hard constraint handling.

The single linear equality (the percentage sum) is eliminated exactly:
iterates live in the tangent space ``x = x_ref + Z w`` where Z is an
orthonormal basis of the constraint null space, so every recorded
iterate satisfies the equality to rounding. Inequalities (the dataset
proximity constraint, optionally the nonnegativity bounds) are handled
by an augmented-Lagrangian outer loop with standard multiplier and
penalty updates; each subproblem is minimized by a damped-BFGS dogleg
trust-region method.

Inequalities use the <= 0 feasible convention. Termination requires the
projected gradient of the augmented Lagrangian below tolerance and all
violations within the constraint tolerance (or the iteration cap, which
is flagged, never raised).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space

from .errors import ConfigurationError, InfeasibleStartError, NonFiniteEvaluationError
from .trace import OptTrace, TraceRecord

_ACCEPT_RATIO = 1e-4
_SHRINK_THRESHOLD = 0.25
_GROW_THRESHOLD = 0.75
_MAX_RADIUS = 1e8
_MIN_RADIUS = 1e-14


@dataclass(frozen=True)
class LinearEquality:
    """Constraint coeffs @ x == rhs."""

    coeffs: np.ndarray
    rhs: float

    @classmethod
    def sum_to(cls, n: int, total: float) -> "LinearEquality":
        return cls(coeffs=np.ones(n), rhs=total)


@dataclass(frozen=True)
class TrustConstrConfig:
    initial_radius: float = 1.0
    gtol: float = 1e-8
    ctol: float = 1e-8
    max_iter: int = 1000
    penalty_init: float = 10.0
    penalty_increase: float = 10.0
    max_outer: int = 40
    nonneg: bool = False  # add x >= 0 to the inequality set

    def __post_init__(self):
        if self.gtol <= 0 or self.ctol <= 0:
            raise ConfigurationError("tolerances must be positive")
        if self.initial_radius <= 0 or self.max_iter < 1:
            raise ConfigurationError("initial_radius and max_iter must be positive")


@dataclass
class _Problem:
    objective: object
    gradient: object
    ineqs: list  # (fun, grad) pairs, <= 0 feasible
    Z: np.ndarray
    x_ref: np.ndarray
    eq: LinearEquality
    nonneg: bool

    def x_of(self, w: np.ndarray) -> np.ndarray:
        x = self.x_ref + self.Z @ w
        a = self.eq.coeffs
        # pin the equality exactly; Z keeps it to rounding already
        return x - a * ((a @ x - self.eq.rhs) / (a @ a))

    def constraint_values(self, x: np.ndarray) -> np.ndarray:
        vals = [float(f(x)) for f, _ in self.ineqs]
        if self.nonneg:
            vals.extend(-x)
        return np.asarray(vals, dtype=float)

    def constraint_grad_w(self, x: np.ndarray, j: int) -> np.ndarray:
        m = len(self.ineqs)
        if j < m:
            return self.Z.T @ np.asarray(self.ineqs[j][1](x), dtype=float)
        return -self.Z[j - m, :]

    def n_cons(self, n: int) -> int:
        return len(self.ineqs) + (n if self.nonneg else 0)


def _al_value_grad(prob: _Problem, w, lam, mu):
    """Augmented Lagrangian (PHR form) and its tangent-space gradient."""
    x = prob.x_of(w)
    f = float(prob.objective(x))
    g_w = prob.Z.T @ np.asarray(prob.gradient(x), dtype=float)
    c = prob.constraint_values(x)
    val = f
    grad = g_w
    for j, cj in enumerate(c):
        t = lam[j] + mu * cj
        if t > 0.0:
            val += (t * t - lam[j] * lam[j]) / (2.0 * mu)
            grad = grad + t * prob.constraint_grad_w(x, j)
        else:
            val -= lam[j] * lam[j] / (2.0 * mu)
    return val, grad, f, c, x


def _dogleg(g, B, radius):
    """Dogleg step for a positive-definite model."""
    newton = np.linalg.solve(B, -g)
    if np.linalg.norm(newton) <= radius:
        return newton
    gBg = float(g @ B @ g)
    gg = float(g @ g)
    if gBg <= 0.0:
        return -(radius / np.sqrt(gg)) * g
    cauchy = -(gg / gBg) * g
    nc = float(np.linalg.norm(cauchy))
    if nc >= radius:
        return (radius / nc) * cauchy
    # intersection of the cauchy->newton segment with the sphere
    dvec = newton - cauchy
    a = float(dvec @ dvec)
    bq = 2.0 * float(cauchy @ dvec)
    cq = nc * nc - radius * radius
    tau = (-bq + np.sqrt(bq * bq - 4.0 * a * cq)) / (2.0 * a)
    return cauchy + tau * dvec


def _damped_bfgs_update(B, s, y):
    """Powell-damped BFGS update keeping B positive definite."""
    Bs = B @ s
    sBs = float(s @ Bs)
    if sBs <= 0.0:
        return B
    sy = float(s @ y)
    if sy < 0.2 * sBs:
        theta = 0.8 * sBs / (sBs - sy)
        y = theta * y + (1.0 - theta) * Bs
        sy = float(s @ y)
    if sy <= 1e-16 * sBs:
        return B
    return B - np.outer(Bs, Bs) / sBs + np.outer(y, y) / sy


def minimize_trust_constr(
    objective,
    gradient,
    eq_constraint: LinearEquality,
    ineq_constraints,
    x0,
    cfg: TrustConstrConfig = TrustConstrConfig(),
) -> tuple[np.ndarray, OptTrace]:
    """Minimize with the equality hard at every iterate.

    ``ineq_constraints`` is a sequence of ``(fun, grad)`` pairs with the
    ``fun(x) <= 0`` feasible convention; ``cfg.nonneg`` appends ``x >= 0``
    bounds. Returns the final iterate and the iteration trace. The start
    must satisfy the equality within ``cfg.ctol``.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    a = np.asarray(eq_constraint.coeffs, dtype=float)
    if abs(a @ x0 - eq_constraint.rhs) > cfg.ctol * max(1.0, abs(eq_constraint.rhs)):
        raise InfeasibleStartError(
            f"equality violated at x0: {a @ x0 - eq_constraint.rhs!r}"
        )
    x_ref = x0 - a * ((a @ x0 - eq_constraint.rhs) / (a @ a))
    Z = null_space(a[None, :])
    prob = _Problem(
        objective=objective, gradient=gradient, ineqs=list(ineq_constraints),
        Z=Z, x_ref=x_ref, eq=eq_constraint, nonneg=cfg.nonneg,
    )
    m = prob.n_cons(n)

    trace = OptTrace(kind="grad")
    t0 = time.perf_counter()

    def record(idx, x, f, c, gnorm, radius, merit, cycle):
        viol = float(np.max(c, initial=0.0))
        trace.records.append(
            TraceRecord(
                index=idx, x=x.copy(), objective=f,
                max_violation=max(viol, 0.0), radius=radius,
                wall_time=time.perf_counter() - t0, merit=merit,
                g1_abs=abs(float(a @ x - eq_constraint.rhs)),
                g2=viol if m else float("nan"),
                grad_norm=gnorm, cycle=cycle,
            )
        )

    w = np.zeros(Z.shape[1])
    lam = np.zeros(m)
    mu = cfg.penalty_init
    omega = max(cfg.gtol, 1.0 / mu)
    eta = max(cfg.ctol, 1.0 / mu**0.1)

    val, grad, f, c, x = _al_value_grad(prob, w, lam, mu)
    if not np.isfinite(val) or not np.all(np.isfinite(grad)):
        raise NonFiniteEvaluationError("objective or gradient non-finite at x0")
    gnorm = float(np.linalg.norm(grad))
    radius = cfg.initial_radius
    total_iters = 0
    record(total_iters, x, f, c, gnorm, radius, val, 0)
    termination = "max_iterations"

    for outer in range(cfg.max_outer):
        if total_iters >= cfg.max_iter:
            break
        B = np.eye(Z.shape[1]) * max(1.0, gnorm)
        val, grad, f, c, x = _al_value_grad(prob, w, lam, mu)
        gnorm = float(np.linalg.norm(grad))
        inner_tol = max(omega, cfg.gtol)
        radius = max(radius, cfg.initial_radius)  # fresh subproblem, fresh radius
        stalled = False
        while gnorm > inner_tol and total_iters < cfg.max_iter:
            step = _dogleg(grad, B, radius)
            pred = -(float(grad @ step) + 0.5 * float(step @ B @ step))
            if pred <= 0.0 or not np.all(np.isfinite(step)):
                radius *= 0.25
                if radius < _MIN_RADIUS:
                    stalled = True
                    break
                continue
            w_new = w + step
            val_new, grad_new, f_new, c_new, x_new = _al_value_grad(prob, w_new, lam, mu)
            if not np.isfinite(val_new):
                radius *= 0.25
                if radius < _MIN_RADIUS:
                    stalled = True
                    break
                continue
            ratio = (val - val_new) / pred
            step_norm = float(np.linalg.norm(step))
            if ratio < _SHRINK_THRESHOLD:
                radius = 0.25 * step_norm
            elif ratio > _GROW_THRESHOLD and step_norm >= 0.99 * radius:
                radius = min(2.0 * radius, _MAX_RADIUS)
            if radius < _MIN_RADIUS:
                stalled = True
                break
            if ratio > _ACCEPT_RATIO:
                B = _damped_bfgs_update(B, step, grad_new - grad)
                w, val, grad, f, c, x = w_new, val_new, grad_new, f_new, c_new, x_new
                gnorm = float(np.linalg.norm(grad))
                total_iters += 1
                record(total_iters, x, f, c, gnorm, radius, val, outer)

        violation = float(np.max(c, initial=0.0)) if m else 0.0
        if violation <= max(cfg.ctol, 0.0) and gnorm <= max(cfg.gtol, omega * 0.999):
            if gnorm <= cfg.gtol or m == 0:
                termination = "converged"
                break
        if stalled and violation <= cfg.ctol:
            termination = "stalled"
            break
        if m == 0:
            termination = "converged" if gnorm <= cfg.gtol else "stalled"
            break
        if violation <= eta:
            lam = np.maximum(0.0, lam + mu * c)
            omega = max(cfg.gtol, omega / mu)
            eta = max(cfg.ctol, eta / mu**0.9)
        else:
            mu = min(mu * cfg.penalty_increase, 1e14)
            omega = max(cfg.gtol, 1.0 / mu)
            eta = max(cfg.ctol, 1.0 / mu**0.1)
    else:
        termination = "max_outer"

    if total_iters >= cfg.max_iter:
        termination = "max_iterations"
    trace.termination = termination
    return x.copy(), trace
