"""Derivative-free constrained minimizer by linear interpolation models.

The algorithm keeps a simplex of n+1 evaluated points, interpolates the
objective and every constraint linearly on it, and takes steps that
minimize the interpolated merit (objective plus an adaptive penalty
times the worst violation) inside a shrinking trust region. Geometry
steps keep the simplex well conditioned; the resolution radius rho only
ever decreases, from ``rhobeg`` down to ``rhoend``.

Constraints use the >= 0 feasible convention. They are soft: the
returned point minimizes the merit over everything evaluated and may
violate constraints. The trust-region subproblem is solved exactly in
two stages (first minimize the worst linearized violation, then the
linearized objective subject to not worsening it) as linear programs
over a box inscribed in the trust sphere; penalty management, simplex
updates and the radius schedule follow the classic linear-interpolation
scheme.

Runs never raise on non-convergence: budget exhaustion, non-finite
evaluations and damaging rounding all return the best point found, with
the reason recorded on the trace.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import ConfigurationError
from .trace import OptTrace, TraceRecord

_ETA1 = 0.1
_ETA2 = 0.7
_GAMMA1 = 0.5
_GAMMA2 = 2.0
_GAMMA3 = 1.5  # delta snaps to rho below gamma3 * rho
_SHORTD_FACTOR = 0.1
_MAX_EXTENSIONS = 5
_CPEN_MIN = np.finfo(float).eps
_CPEN_MAX = 1e30
_DUPLICATE_FACTOR = 1e-4  # skip evaluation within this * rhoend of a vertex


@dataclass(frozen=True)
class CobylaConfig:
    rhobeg: float = 1.0
    rhoend: float = 1e-6
    max_evals: int = 10_000

    def validate(self, n: int) -> None:
        if not self.rhobeg > self.rhoend > 0.0:
            raise ConfigurationError("need rhobeg > rhoend > 0")
        if self.max_evals < n + 2:
            raise ConfigurationError(f"max_evals must be at least n + 2 = {n + 2}")


class _Budget(Exception):
    pass


class _NonFinite(Exception):
    pass


class _Rounding(Exception):
    pass


class _State:
    """Simplex bookkeeping: absolute vertices, values, pole at column n."""

    def __init__(self, objective, constraints, cfg, n, trace, t0):
        self.objective = objective
        self.constraints = constraints
        self.cfg = cfg
        self.n = n
        self.m = len(constraints)
        self.trace = trace
        self.t0 = t0
        self.nf = 0
        self.verts = np.zeros((n, n + 1))
        self.fval = np.zeros(n + 1)
        self.conmat = np.zeros((self.m, n + 1))
        self.cviol = np.zeros(n + 1)
        self.simi = np.eye(n)
        self.rho = cfg.rhobeg

    def evaluate(self, x: np.ndarray):
        if self.nf >= self.cfg.max_evals:
            raise _Budget
        try:
            f = float(self.objective(x))
            con = np.array([float(c(x)) for c in self.constraints])
        except (OverflowError, FloatingPointError):
            f = float("nan")
            con = np.full(self.m, np.nan)
        self.nf += 1
        viol = float(max(0.0, -(con.min()))) if self.m else 0.0
        self.trace.records.append(
            TraceRecord(
                index=self.nf - 1, x=x.copy(), objective=f, max_violation=viol,
                radius=self.rho, wall_time=time.perf_counter() - self.t0,
            )
        )
        if not np.isfinite(f) or (self.m and not np.all(np.isfinite(con))):
            raise _NonFinite
        return f, con, viol

    def set_vertex(self, j, x, f, con, viol, refresh=True):
        self.verts[:, j] = x
        self.fval[j] = f
        self.conmat[:, j] = con
        self.cviol[j] = viol
        if refresh and j != self.n:
            self.refresh_simi()

    def edges(self) -> np.ndarray:
        return self.verts[:, : self.n] - self.verts[:, self.n][:, None]

    def refresh_simi(self):
        E = self.edges()
        try:
            simi = np.linalg.inv(E)
        except np.linalg.LinAlgError:
            raise _Rounding from None
        resid = np.abs(simi @ E - np.eye(self.n)).max()
        if not np.isfinite(resid) or resid > 0.1:
            raise _Rounding
        self.simi = simi

    def phi(self, cpen) -> np.ndarray:
        return self.fval + cpen * self.cviol

    def find_pole(self, cpen) -> int:
        values = self.phi(cpen)
        j = int(np.argmin(values))
        # keep the current pole unless some vertex is strictly better
        return j if values[j] < values[self.n] else self.n

    def update_pole(self, cpen):
        j = self.find_pole(cpen)
        if j == self.n:
            return
        for arr in (self.fval, self.cviol):
            arr[j], arr[self.n] = arr[self.n], arr[j]
        self.verts[:, [j, self.n]] = self.verts[:, [self.n, j]]
        self.conmat[:, [j, self.n]] = self.conmat[:, [self.n, j]]
        self.refresh_simi()

    def models(self):
        """Gradients of the linear interpolants and values at the pole."""
        df = self.fval[: self.n] - self.fval[self.n]
        g = self.simi.T @ df
        b = self.conmat[:, self.n]
        A = self.simi.T @ (self.conmat[:, : self.n] - b[:, None]).T  # (n, m)
        return g, A, b

    def nearest_vertex_sq(self, x) -> tuple[float, int]:
        d2 = np.sum((self.verts - x[:, None]) ** 2, axis=0)
        j = int(np.argmin(d2))
        return float(d2[j]), j


def _lin_violation(A, b, d) -> float:
    if b.size == 0:
        return 0.0
    return float(max(0.0, -(b + d @ A).min()))


def _ball_step(g: np.ndarray, delta: float) -> np.ndarray:
    norm = float(np.linalg.norm(g))
    if norm == 0.0 or not np.isfinite(norm):
        return np.zeros_like(g)
    return (-delta / norm) * g


def _trstlp_single(A, b, delta, g) -> np.ndarray:
    """Exact two-stage step for a single constraint (the common case).

    Stage 1: the worst achievable linearized violation inside the ball is
    max(0, -b1 - delta * ||a1||), attained along +a1. Stage 2 minimizes
    g.d on {a1.d >= -(b1 + v*)} inside the ball, whose KKT candidates are
    the free ball step, the sphere/hyperplane intersection, and the
    min-norm hyperplane point.
    """
    a = A[:, 0]
    b1 = np.float64(b[0])
    na = np.float64(np.linalg.norm(a))
    if na == 0.0 or not np.isfinite(na):
        return _ball_step(g, delta)
    vstar = max(0.0, -b1 - delta * na)
    c = -(b1 + vstar)  # stage-2 feasibility: a.d >= c
    candidates = []
    free = _ball_step(g, delta)
    if a @ free >= c - 1e-13 * max(1.0, abs(c)):
        candidates.append(free)
    base = (c / na**2) * a
    rad_sq = delta**2 - (c / na) ** 2
    if rad_sq >= 0.0:
        g_perp = g - (g @ a) / na**2 * a
        npv = float(np.linalg.norm(g_perp))
        if npv > 0.0:
            candidates.append(base - np.sqrt(max(rad_sq, 0.0)) / npv * g_perp)
        candidates.append(base)
    candidates = [d for d in candidates if np.all(np.isfinite(d))]
    if not candidates:
        return (delta / na) * a
    return min(candidates, key=lambda d: float(g @ d))


_LP_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}


def _slide_step(A, b, delta, g, vstar) -> np.ndarray | None:
    """Steepest descent projected onto the near-active constraint normals.

    This is the tangential slide along the (linearized) boundary, which
    the box LPs can miss by a solver-tolerance margin when the iterate
    hugs a constraint."""
    scale = max(1.0, float(np.abs(b).max()))
    act = np.where(b - vstar <= 1e-8 * scale)[0]
    if act.size == 0 or act.size >= g.size:
        return None
    q, _ = np.linalg.qr(A[:, act])
    p = -(g - q @ (q.T @ g))
    norm = float(np.linalg.norm(p))
    if norm == 0.0 or not np.isfinite(norm):
        return None
    return (delta / norm) * p


def _trstlp_lp(A, b, delta, g) -> np.ndarray:
    """General-m step: exact LPs over the box inscribed in the sphere,
    plus steepest-ball and tangential-slide candidates, chosen by the
    two-stage criterion (stay in the stage-1 violation band, then
    minimize the linearized objective)."""
    n = g.size
    m = b.size
    bound = delta / np.sqrt(n)
    viol0 = float(max(0.0, -(b.min())))
    vstar = viol0
    candidates = [np.zeros(n)]
    if viol0 > 0.0:
        c = np.zeros(n + 1)
        c[n] = 1.0
        a_ub = np.hstack([-A.T, -np.ones((m, 1))])
        res = linprog(
            c, A_ub=a_ub, b_ub=b,
            bounds=[(-bound, bound)] * n + [(0.0, None)],
            method="highs", options=_LP_OPTIONS,
        )
        if res.status == 0:
            d1 = res.x[:n]
            vstar = min(viol0, _lin_violation(A, b, d1))
            candidates.append(d1)
        # steepest feasibility direction: reduce the worst violation
        worst = int(np.argmin(b))
        candidates.append(_ball_step(-A[:, worst], delta))
    res = linprog(
        g, A_ub=-A.T, b_ub=b + vstar + 1e-10 * max(1.0, vstar),
        bounds=[(-bound, bound)] * n,
        method="highs", options=_LP_OPTIONS,
    )
    if res.status == 0:
        candidates.append(res.x)
    candidates.append(_ball_step(g, delta))
    slide = _slide_step(A, b, delta, g, vstar)
    if slide is not None:
        candidates.append(slide)
    candidates = [d for d in candidates if np.all(np.isfinite(d))]
    if not candidates:
        return np.zeros(n)
    tol = 1e-8 * max(1.0, vstar)

    def key(d):
        # within the stage-1 violation band the objective decides
        v = _lin_violation(A, b, d)
        return (max(v - vstar, 0.0) > tol, float(g @ d), v)

    return min(candidates, key=key)


def _trstlp(A: np.ndarray, b: np.ndarray, delta: float, g: np.ndarray) -> np.ndarray:
    """Trust-region step on the linear models, Powell's two-stage rule:
    first drive the worst linearized violation as low as the ball allows,
    then minimize the linearized objective without worsening it.

    Exact for zero or one constraint; with more constraints the step is
    the best of exact box-LP solutions and steepest ball directions under
    the same two-stage criterion.
    """
    if b.size == 0:
        return _ball_step(g, delta)
    if b.size == 1:
        return _trstlp_single(A, b, delta, g)
    return _trstlp_lp(A, b, delta, g)


def _trrad(delta, dnorm, ratio) -> float:
    if ratio <= _ETA1:
        return _GAMMA1 * dnorm
    if ratio <= _ETA2:
        return max(_GAMMA1 * delta, dnorm)
    return max(_GAMMA1 * delta, _GAMMA2 * dnorm)


def _redrho(rho, rhoend) -> float:
    ratio = rho / rhoend
    if ratio > 250.0:
        return 0.1 * rho
    if ratio <= 16.0:
        return rhoend
    return float(np.sqrt(ratio)) * rhoend


def _fcratio(fval, conmat) -> float:
    """Typical objective change over typical constraint change."""
    if conmat.shape[0] == 0:
        return 0.0
    cmin = conmat.min(axis=1)
    cmax = conmat.max(axis=1)
    fmin, fmax = fval.min(), fval.max()
    active = cmin < 0.5 * cmax
    if not (np.any(active) and fmin < fmax):
        return 0.0
    denom = (np.maximum(cmax, 0.0) - cmin)[active].min()
    return float((fmax - fmin) / denom)


def _getcpen(state: _State, cpen, delta):
    """Raise the penalty until the predicted merit reduction is positive.

    Returns the new penalty plus the step and models computed for the
    final pole, which the caller reuses for the trust-region step.
    """
    d = g = A = b = None
    for _ in range(state.n + 1):
        state.update_pole(cpen)
        g, A, b = state.models()
        d = _trstlp(A, b, delta, g)
        preref = -float(d @ g)
        prerec = state.cviol[state.n] - _lin_violation(A, b, d)
        if not (prerec > 0.0 and preref < 0.0):
            break
        cpen = max(cpen, min(-2.0 * preref / prerec, _CPEN_MAX))
        if state.find_pole(cpen) == state.n:
            break
    return cpen, d, g, A, b


def minimize_cobyla(
    objective,
    inequality_constraints,
    x0,
    cfg: CobylaConfig = CobylaConfig(),
) -> tuple[np.ndarray, OptTrace]:
    """Minimize ``objective(x)`` subject to soft ``c_i(x) >= 0`` constraints.

    Returns the best evaluated point by final merit (objective plus final
    penalty times violation) and the full evaluation trace. Constraint
    violation at the result is possible and reported via the trace.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    cfg.validate(n)
    if not np.all(np.isfinite(x0)):
        raise ConfigurationError("x0 must be finite")

    trace = OptTrace(kind="dfo")
    t0 = time.perf_counter()
    state = _State(objective, list(inequality_constraints), cfg, n, trace, t0)
    rho = delta = cfg.rhobeg
    cpen = _CPEN_MIN
    termination = "max_trust_iterations"

    errstate = np.errstate(over="ignore", invalid="ignore", divide="ignore")
    try:
        errstate.__enter__()
        f, con, viol = state.evaluate(x0)
        state.set_vertex(n, x0, f, con, viol)
        for j in range(n):
            xj = x0.copy()
            xj[j] += cfg.rhobeg
            f, con, viol = state.evaluate(xj)
            state.set_vertex(j, xj, f, con, viol, refresh=False)
        state.refresh_simi()
        cpen = max(_CPEN_MIN, min(1e3, _fcratio(state.fval, state.conmat)))

        shortd = False
        d = np.zeros(n)
        for _ in range(10 * cfg.max_evals):
            state.rho = rho
            cpen, d, g, A, b = _getcpen(state, cpen, delta)
            state.update_pole(cpen)

            edge_sq = np.sum(state.edges() ** 2, axis=0)
            adequate_geo = bool(np.all(edge_sq <= 4.0 * delta**2))

            dnorm = min(delta, float(np.linalg.norm(d)))
            shortd = dnorm <= _SHORTD_FACTOR * rho
            preref = -float(d @ g)
            prerec = state.cviol[n] - _lin_violation(A, b, d)
            prerem = preref + cpen * prerec
            trfail = not (prerem > 1e-6 * min(cpen, 1.0) * rho)

            ratio = -1.0
            jdrop = None
            if shortd or trfail:
                delta *= 0.1
                if delta <= _GAMMA3 * rho:
                    delta = rho
            else:
                x = state.verts[:, n] + d
                dist_sq, jnear = state.nearest_vertex_sq(x)
                if dist_sq <= (_DUPLICATE_FACTOR * cfg.rhoend) ** 2:
                    f, con, viol = state.fval[jnear], state.conmat[:, jnear], state.cviol[jnear]
                else:
                    f, con, viol = state.evaluate(x)
                actrem = (state.fval[n] + cpen * state.cviol[n]) - (f + cpen * viol)
                ratio = actrem / prerem if np.isfinite(actrem) else -1.0

                # extension: while the step is very successful, keep doubling
                # along the same direction as long as the merit improves
                for _ in range(_MAX_EXTENSIONS):
                    if ratio <= _ETA2 or state.nf >= cfg.max_evals:
                        break
                    d_try = 2.0 * d
                    x_try = state.verts[:, n] + d_try
                    f2, con2, viol2 = state.evaluate(x_try)
                    if f2 + cpen * viol2 < f + cpen * viol:
                        d, x, f, con, viol = d_try, x_try, f2, con2, viol2
                        dnorm = float(np.linalg.norm(d))
                        actrem = (state.fval[n] + cpen * state.cviol[n]) - (f + cpen * viol)
                    else:
                        break

                delta = _trrad(delta, dnorm, ratio)
                if delta <= _GAMMA3 * rho:
                    delta = rho

                ximproved = actrem > 0.0
                sigma = np.abs(state.simi @ d)
                if ximproved:
                    ref = x
                else:
                    ref = state.verts[:, n]
                dist2 = np.sum((state.verts[:, :n] - ref[:, None]) ** 2, axis=0)
                score = np.maximum(1.0, dist2 / max(rho, delta / 10.0) ** 2) * sigma
                score = np.where(np.isfinite(score), score, 0.0)
                if ximproved:
                    jdrop = int(np.argmax(score)) if score.max() > 0.0 else None
                else:
                    jdrop = int(np.argmax(score)) if score.max() > 1.0 else None
                if jdrop is not None:
                    state.set_vertex(jdrop, x, f, con, viol)
                    state.update_pole(cpen)

            bad_trstep = shortd or trfail or ratio <= 0.0 or jdrop is None
            improve_geo = bad_trstep and not adequate_geo
            reduce_rho = bad_trstep and adequate_geo and max(delta, dnorm) <= rho

            if improve_geo:
                edge_sq = np.sum(state.edges() ** 2, axis=0)
                if not np.all(edge_sq <= 4.0 * delta**2):
                    jgeo = int(np.argmax(edge_sq))
                    row = state.simi[jgeo]
                    norm = float(np.linalg.norm(row))
                    if norm == 0.0 or not np.isfinite(norm):
                        raise _Rounding
                    v = row / norm
                    delbar = 0.5 * delta
                    g, A, b = state.models()

                    def model_merit(step):
                        return float(g @ step) + cpen * _lin_violation(A, b, step)

                    d_geo = delbar * v
                    if model_merit(-d_geo) < model_merit(d_geo):
                        d_geo = -d_geo
                    x = state.verts[:, n] + d_geo
                    dist_sq, jnear = state.nearest_vertex_sq(x)
                    if dist_sq <= (_DUPLICATE_FACTOR * cfg.rhoend) ** 2:
                        f, con, viol = state.fval[jnear], state.conmat[:, jnear], state.cviol[jnear]
                    else:
                        f, con, viol = state.evaluate(x)
                    state.set_vertex(jgeo, x, f, con, viol)
                    state.update_pole(cpen)

            if reduce_rho:
                if rho <= cfg.rhoend:
                    termination = "rho_min"
                    break
                delta = max(0.5 * rho, _redrho(rho, cfg.rhoend))
                rho = _redrho(rho, cfg.rhoend)
                state.rho = rho
                cpen = max(_CPEN_MIN, min(cpen, _fcratio(state.fval, state.conmat)))
                state.update_pole(cpen)

        # one last evaluation of the pending short step, as in the classic code
        if termination == "rho_min" and shortd and state.nf < cfg.max_evals:
            x = state.verts[:, n] + d
            if np.linalg.norm(d) > 1e-3 * cfg.rhoend:
                state.evaluate(x)
    except _Budget:
        termination = "max_evals"
    except _NonFinite:
        termination = "non_finite"
    except (_Rounding, np.linalg.LinAlgError, OverflowError, FloatingPointError):
        termination = "damaging_rounding"
    finally:
        errstate.__exit__(None, None, None)

    trace.termination = termination
    for r in trace.records:
        r.merit = r.objective + cpen * r.max_violation
    best = trace.best_record()
    return best.x.copy(), trace
