"""Dense deterministic solvers for the placement subproblems.

Two problem shapes appear in the placement loops:

- ConvexSubproblem: maximize a linear objective over a box, affine rows, and
  quadratic rows (g.w + d)^2 <= (h1.w + e1)(h2.w + e2) with both factors
  nonnegative. Each quadratic row is a rotated second-order cone; rows with a
  constant second factor are the plain square-under-affine case.
- LinearProgram: the same without quadratic rows.

ConvexSubproblem is solved by a primal-dual path-following interior-point
method on the slack-augmented epigraph maximize c.w - LAMBDA*s subject to
f_i(w) <= s, s >= 0, so any warm start (even one sitting exactly on constraint
boundaries, which every SCA re-linearization produces) is strictly feasible
after lifting. At the optimum the slack collapses to ~gap/LAMBDA, far below
the feasibility tolerance, and the achieved objective can never fall below the
warm start's because (w0, s > 0) stays feasible throughout.

The method runs centering phases with a fixed barrier parameter t per phase;
within a phase the merit function |r_t(v, lambda)|_2 (norm of the stacked
dual and centrality residuals) decreases monotonically by backtracking line
search, and the per-phase merit values are reported in the solve trace.

LinearProgram delegates to scipy's HiGHS and re-derives the KKT residual from
the returned marginals (convention: c - A_ub^T y - mu_lo - mu_hi = 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import ConfigError

__all__ = [
    "QuadRow",
    "ConvexSubproblem",
    "LinearProgram",
    "SolveReport",
    "solve_convex",
    "solve_lp",
]

_SMOOTH_EPS = 1e-9  # curvature floor inside the cone norms; O(eps^2) feasibility cost


@dataclass(frozen=True)
class QuadRow:
    """(g.w + d)^2 <= (h1.w + e1)(h2.w + e2), both factors nonnegative.

    A constant second factor (h2 = 0, e2 > 0) recovers the plain
    square-below-affine row.
    """

    g: np.ndarray
    d: float
    h1: np.ndarray
    e1: float
    h2: np.ndarray
    e2: float

    def __post_init__(self):
        for name in ("g", "h1", "h2"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))

    def factors(self, w: np.ndarray) -> tuple[float, float]:
        return float(self.h1 @ w + self.e1), float(self.h2 @ w + self.e2)

    def violation(self, w: np.ndarray) -> float:
        u, v = self.factors(w)
        lhs = float(self.g @ w + self.d) ** 2
        return max(lhs - u * v, -u, -v)


@dataclass(frozen=True)
class ConvexSubproblem:
    """maximize objective.w over box, lin_a.w >= lin_b, and quadratic rows."""

    objective: np.ndarray
    box_lo: np.ndarray
    box_hi: np.ndarray
    lin_a: np.ndarray
    lin_b: np.ndarray
    quads: tuple[QuadRow, ...] = ()

    def __post_init__(self):
        obj = np.asarray(self.objective, dtype=float)
        lo = np.asarray(self.box_lo, dtype=float)
        hi = np.asarray(self.box_hi, dtype=float)
        a = np.asarray(self.lin_a, dtype=float)
        b = np.asarray(self.lin_b, dtype=float)
        n = obj.size
        if a.size == 0:
            a = np.zeros((0, n))
            b = np.zeros(0)
        if lo.shape != (n,) or hi.shape != (n,) or a.shape[1] != n or b.shape != (a.shape[0],):
            raise ConfigError("inconsistent subproblem dimensions")
        if np.any(lo > hi) or not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)):
            raise ConfigError("box bounds must be finite with lo <= hi")
        for row in self.quads:
            if row.g.shape != (n,) or row.h1.shape != (n,) or row.h2.shape != (n,):
                raise ConfigError("quad row dimension mismatch")
        object.__setattr__(self, "objective", obj)
        object.__setattr__(self, "box_lo", lo)
        object.__setattr__(self, "box_hi", hi)
        object.__setattr__(self, "lin_a", a)
        object.__setattr__(self, "lin_b", b)
        object.__setattr__(self, "quads", tuple(self.quads))

    @property
    def dim(self) -> int:
        return self.objective.size

    def violation(self, w: np.ndarray) -> float:
        """Largest constraint violation at w, in original row units."""
        worst = 0.0
        worst = max(worst, float(np.max(self.box_lo - w, initial=0.0)))
        worst = max(worst, float(np.max(w - self.box_hi, initial=0.0)))
        if self.lin_a.shape[0]:
            worst = max(worst, float(np.max(self.lin_b - self.lin_a @ w, initial=0.0)))
        for row in self.quads:
            worst = max(worst, row.violation(w))
        return worst


@dataclass(frozen=True)
class LinearProgram:
    """maximize objective.w over box and lin_a.w >= lin_b."""

    objective: np.ndarray
    box_lo: np.ndarray
    box_hi: np.ndarray
    lin_a: np.ndarray
    lin_b: np.ndarray

    def __post_init__(self):
        checked = ConvexSubproblem(self.objective, self.box_lo, self.box_hi, self.lin_a, self.lin_b)
        object.__setattr__(self, "objective", checked.objective)
        object.__setattr__(self, "box_lo", checked.box_lo)
        object.__setattr__(self, "box_hi", checked.box_hi)
        object.__setattr__(self, "lin_a", checked.lin_a)
        object.__setattr__(self, "lin_b", checked.lin_b)


@dataclass(frozen=True)
class SolveReport:
    """Solution plus the optimality evidence the caller is expected to check."""

    solution: np.ndarray
    objective: float
    status: str  # "optimal" | "max-iter" | "infeasible"
    kkt_residual: float
    feasibility: float
    quad_duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    merit_trace: tuple = ()
    iterations: int = 0


class _SmoothCone:
    """f(w) = sqrt(|p|^2 + eps^2) - (r.w + s0) for p = A w + b: convex, smooth."""

    def __init__(self, a_mat, b_vec, r_vec, s0):
        self.a = a_mat
        self.b = b_vec
        self.r = r_vec
        self.s0 = s0

    def value(self, w):
        p = self.a @ w + self.b
        return math.sqrt(float(p @ p) + _SMOOTH_EPS**2) - float(self.r @ w + self.s0)

    def grad(self, w):
        p = self.a @ w + self.b
        z = math.sqrt(float(p @ p) + _SMOOTH_EPS**2)
        return self.a.T @ p / z - self.r

    def hess(self, w):
        p = self.a @ w + self.b
        z = math.sqrt(float(p @ p) + _SMOOTH_EPS**2)
        ap = self.a.T @ p
        return self.a.T @ self.a / z - np.outer(ap, ap) / z**3


def _build_cones(problem: ConvexSubproblem) -> list[_SmoothCone]:
    cones = []
    for row in problem.quads:
        # |(g.w+d, (u-v)/2)| <= (u+v)/2 with u = h1.w+e1, v = h2.w+e2
        a = np.vstack([row.g, 0.5 * (row.h1 - row.h2)])
        b = np.array([row.d, 0.5 * (row.e1 - row.e2)])
        cones.append(_SmoothCone(a, b, 0.5 * (row.h1 + row.h2), 0.5 * (row.e1 + row.e2)))
    return cones


def solve_convex(
    problem: ConvexSubproblem,
    warm_start: np.ndarray,
    tol: float = 1e-6,
    max_iter: int = 200,
) -> SolveReport:
    """Interior-point solve; deterministic for identical inputs.

    The warm start should be feasible (SCA always has one); mild violations
    are absorbed by the slack lifting and simply start the solve deeper in
    phase-one territory.
    """
    w0 = np.asarray(warm_start, dtype=float)
    if w0.shape != (problem.dim,):
        raise ConfigError(f"warm start shape {w0.shape} != ({problem.dim},)")
    for row in problem.quads:
        u, v = row.factors(w0)
        if u < -1e-7 or v < -1e-7:
            raise ConfigError("quad row factor negative at warm start; row is not convex there")

    report = _pdip_solve(problem, w0, tol, max_iter, lam_penalty=1e4)
    if report.status == "infeasible" and problem.violation(w0) <= 1e-8:
        report = _pdip_solve(problem, w0, tol, max_iter, lam_penalty=1e6)

    warm_obj = float(problem.objective @ w0)
    if report.objective < warm_obj and problem.violation(w0) <= 1e-8:
        # never hand back something worse than the caller already had
        return SolveReport(
            solution=w0,
            objective=warm_obj,
            status="max-iter",
            kkt_residual=math.inf,
            feasibility=problem.violation(w0),
            quad_duals=np.zeros(len(problem.quads)),
            merit_trace=report.merit_trace,
            iterations=report.iterations,
        )
    return report


def _pdip_solve(problem, w0, tol, max_iter, lam_penalty):
    n = problem.dim
    n_aug = n + 1  # trailing coordinate is the shared slack
    c_aug = np.zeros(n_aug)
    c_aug[:n] = -problem.objective  # minimized
    c_aug[-1] = lam_penalty

    # static affine rows in f(v) <= 0 form: box, linear, slack positivity
    rows, consts = [np.eye(n), -np.eye(n)], [-problem.box_hi, problem.box_lo]
    if problem.lin_a.shape[0]:
        rows.append(-problem.lin_a)
        consts.append(problem.lin_b)
    a_w = np.vstack(rows)
    b_aff = np.concatenate(consts)
    scale_aff = np.maximum(1.0, np.linalg.norm(a_w, axis=1))
    a_w = a_w / scale_aff[:, None]
    b_aff = b_aff / scale_aff
    j_aff = np.hstack([a_w, -np.ones((a_w.shape[0], 1))])
    slack_row = np.zeros(n_aug)
    slack_row[-1] = -1.0
    j_static = np.vstack([j_aff, slack_row])

    cones = _build_cones(problem)
    n_cone = len(cones)
    scale_q = np.array([max(1.0, float(np.linalg.norm(c.grad(w0)))) for c in cones])
    m = j_static.shape[0] + n_cone

    def eval_all(v):
        """Constraint values f (m,), Jacobian (m, n_aug) at the lifted point."""
        w, s = v[:n], v[-1]
        f = np.empty(m)
        f[: j_aff.shape[0]] = a_w @ w + b_aff - s
        f[j_aff.shape[0]] = -s
        jac = np.empty((m, n_aug))
        jac[: j_static.shape[0]] = j_static
        for i, cone in enumerate(cones):
            k = j_static.shape[0] + i
            f[k] = cone.value(w) / scale_q[i] - s
            jac[k, :n] = cone.grad(w) / scale_q[i]
            jac[k, -1] = -1.0
        return f, jac

    v = np.append(w0, 0.0)
    f0, _ = eval_all(v)
    v[-1] = max(1.0, 2.0 * float(f0.max() + v[-1]))  # undo the -s already in f0
    f_cur, jac_cur = eval_all(v)
    lam = 1.0 / np.maximum(-f_cur, 1e-2)

    obj_scale = max(1.0, abs(float(problem.objective @ w0)))
    gap_target = 1e-10 * obj_scale
    t = 1.0
    mu = 20.0
    total = 0
    merit_trace = []

    def residual(f, jac, lam, t):
        r_dual = c_aug + jac.T @ lam
        r_cent = -lam * f - 1.0 / t
        return r_dual, r_cent

    done = False
    while total < max_iter and not done:
        phase_merit = []
        for _ in range(40):
            if total >= max_iter:
                break
            r_dual, r_cent = residual(f_cur, jac_cur, lam, t)
            merit = math.sqrt(float(r_dual @ r_dual) + float(r_cent @ r_cent))
            phase_merit.append(merit)
            if merit <= max(0.3 * math.sqrt(m) / t, 1e-13):
                break
            hess = np.zeros((n_aug, n_aug))
            for i, cone in enumerate(cones):
                k = j_static.shape[0] + i
                hess[:n, :n] += (lam[k] / scale_q[i]) * cone.hess(v[:n])
            ratio = -lam / f_cur
            hess += (jac_cur * ratio[:, None]).T @ jac_cur
            hess[np.diag_indices_from(hess)] += 1e-12 * np.abs(np.diag(hess)) + 1e-18
            rhs = -r_dual - jac_cur.T @ (r_cent / f_cur)
            try:
                dv = np.linalg.solve(hess, rhs)
            except np.linalg.LinAlgError:
                dv = np.linalg.lstsq(hess, rhs, rcond=None)[0]
            dlam = (r_cent - lam * (jac_cur @ dv)) / f_cur
            total += 1

            step = 1.0
            neg = dlam < 0.0
            if np.any(neg):
                step = min(step, 0.99 * float(np.min(-lam[neg] / dlam[neg])))
            accepted = False
            for _ in range(50):
                v_new = v + step * dv
                f_new, jac_new = eval_all(v_new)
                if np.all(f_new < 0.0):
                    lam_new = lam + step * dlam
                    rd, rc = residual(f_new, jac_new, lam_new, t)
                    m_new = math.sqrt(float(rd @ rd) + float(rc @ rc))
                    if m_new <= (1.0 - 0.01 * step) * merit:
                        v, f_cur, jac_cur, lam = v_new, f_new, jac_new, lam_new
                        accepted = True
                        break
                step *= 0.5
            if not accepted:
                break
        merit_trace.append(tuple(phase_merit))
        if m / t <= gap_target:
            done = True
        else:
            t *= mu

    w = v[:n]
    slack = v[-1]
    duals_aff = lam[: j_aff.shape[0]] / scale_aff
    duals_cone = lam[j_static.shape[0] :] / scale_q if n_cone else np.zeros(0)
    stationarity = -problem.objective + (a_w * scale_aff[:, None]).T @ duals_aff
    duals_q = np.zeros(n_cone)
    for i, cone in enumerate(cones):
        stationarity += duals_cone[i] * cone.grad(w)
        # rescale the cone-form dual to the published quadratic-row form:
        # f_quad = f_cone * (|p| + (u+v)/2), so gradients differ by that factor
        p = cone.a @ w + cone.b
        denom = math.sqrt(float(p @ p) + _SMOOTH_EPS**2) + float(cone.r @ w + cone.s0)
        duals_q[i] = duals_cone[i] / max(denom, 1e-300)
    surrogate_gap = float(-f_cur @ lam)
    kkt = max(float(np.max(np.abs(stationarity))), surrogate_gap)

    feas = problem.violation(w)
    objective = float(problem.objective @ w)
    if slack > 1e-6:
        status = "infeasible"
    elif feas <= 1e-8 and kkt <= tol:
        status = "optimal"
    else:
        status = "max-iter"
    return SolveReport(
        solution=w,
        objective=objective,
        status=status,
        kkt_residual=kkt,
        feasibility=feas,
        quad_duals=duals_q,
        merit_trace=tuple(merit_trace),
        iterations=total,
    )


def solve_lp(problem: LinearProgram, tol: float = 1e-6) -> SolveReport:
    """HiGHS solve of the boxed LP, with KKT residual rebuilt from marginals."""
    c = -problem.objective  # maximize -> minimize
    a_ub = -problem.lin_a if problem.lin_a.shape[0] else None
    b_ub = -problem.lin_b if problem.lin_a.shape[0] else None
    bounds = list(zip(problem.box_lo, problem.box_hi))
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status == 3:
        raise ConfigError("LP is unbounded; the box should prevent this")
    if res.status == 2 or res.x is None:
        return SolveReport(
            solution=np.full(problem.objective.size, np.nan),
            objective=-math.inf,
            status="infeasible",
            kkt_residual=math.inf,
            feasibility=math.inf,
        )
    x = np.asarray(res.x, dtype=float)
    stationarity = c.copy()
    if a_ub is not None:
        stationarity -= a_ub.T @ res.ineqlin.marginals
    stationarity -= res.lower.marginals
    stationarity -= res.upper.marginals
    feas = 0.0
    feas = max(feas, float(np.max(problem.box_lo - x, initial=0.0)))
    feas = max(feas, float(np.max(x - problem.box_hi, initial=0.0)))
    if problem.lin_a.shape[0]:
        feas = max(feas, float(np.max(problem.lin_b - problem.lin_a @ x, initial=0.0)))
    kkt = float(np.max(np.abs(stationarity)))
    status = "optimal" if res.status == 0 and kkt <= tol and feas <= 1e-8 else "max-iter"
    return SolveReport(
        solution=x,
        objective=float(problem.objective @ x),
        status=status,
        kkt_residual=kkt,
        feasibility=feas,
        iterations=int(res.nit),
    )
