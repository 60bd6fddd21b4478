"""Numerical solution of the convex relaxations built in :mod:`formulations`.

Programs are handed to cvxpy with the Clarabel interior point solver. Variable
fixings are cvxpy parameters, so a compiled program is reused across
branch-and-bound nodes.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass
from typing import Dict, Optional

import cvxpy as cp
import numpy as np

from .core import Instance, Point
from .formulations import ConvexProgram, FormulationKind
from .hulls import pair_key

DEFAULT_SOLVER = "CLARABEL"
_SOLVER_OPTS = {
    "CLARABEL": {"tol_gap_abs": 1e-9, "tol_gap_rel": 1e-9, "tol_feas": 1e-9, "max_iter": 400},
    "CVXOPT": {"abstol": 1e-9, "reltol": 1e-9, "feastol": 1e-9},
    "SCS": {"eps": 1e-9, "max_iters": 200000},
}


CONVERGED = "converged"
ITER_LIMIT = "iter_limit"
INFEASIBLE = "infeasible"
ERROR = "error"


@dataclass
class RelaxationResult:
    """``bound`` is a certified lower bound; ``value`` the primal objective of ``point``."""

    status: str
    bound: float
    value: float
    point: Optional[Point]
    y_original: Optional[np.ndarray] = None
    wall_time: float = 0.0
    iters: int = 0
    solver: str = DEFAULT_SOLVER

    @property
    def ok(self) -> bool:
        return self.status in (CONVERGED, ITER_LIMIT) and self.point is not None


def rimp(bound_basic: float, bound_kind: float, obj_best: float) -> float:
    """Percentage of the Basic root gap closed by ``bound_kind``."""
    den = obj_best - bound_basic
    if den <= 1e-12:
        return 0.0
    return 100.0 * (bound_kind - bound_basic) / den


def _looser(solver: str, kw: dict, tol: Optional[float]) -> dict:
    out = {k: v for k, v in kw.items() if not k.startswith(("tol", "abstol", "reltol", "feastol", "eps"))}
    if tol is not None:
        base = _SOLVER_OPTS.get(solver, {})
        out.update({k: tol for k in base if k.startswith(("tol", "abstol", "reltol", "feastol", "eps"))})
    return out


def _factor(M: np.ndarray, tol: float = 1e-12) -> Optional[np.ndarray]:
    """``F`` with ``F'F = M`` for PSD ``M`` (small negative eigenvalues clipped)."""
    if not np.any(M):
        return None
    w, V = np.linalg.eigh((M + M.T) / 2)
    keep = w > tol * max(1.0, abs(w).max())
    if not np.any(keep):
        return None
    return (V[:, keep] * np.sqrt(w[keep])).T


def _sumsq(F, v):
    return 0 if F is None else cp.sum_squares(F @ v)


def _rotated_soc(num, a, b):
    """``num^2 <= a * b`` with ``a, b >= 0`` (vectorized)."""
    return cp.SOC(a + b, cp.vstack([2 * num, a - b]), axis=0)


class CompiledProgram:
    """cvxpy model of a :class:`ConvexProgram` with parametric ``x`` bounds."""

    def __init__(self, prog: ConvexProgram):
        self.prog = prog
        n = prog.n
        self.lo = cp.Parameter(n, value=np.zeros(n))
        self.hi = cp.Parameter(n, value=np.ones(n))
        x = cp.Variable(n, name="x")
        self.x = x
        self.tmap: Dict[str, cp.Expression] = {}
        cons = [x >= self.lo, x <= self.hi]
        split = prog.split
        if prog.kind == FormulationKind.BINARY_MINCUT_LP:
            y = x
            self.y = x
            pairs = split.pairs
            tq_expr = (split.d + split.e) @ x
            if pairs:
                t = cp.Variable(len(pairs), nonneg=True)
                I = np.array([p[0] for p in pairs])
                J = np.array([p[1] for p in pairs])
                w = np.array([p[2] for p in pairs])
                cons += [t >= x[I] - x[J], t >= x[J] - x[I]]
                tq_expr = tq_expr + w @ t
            tq = cp.Variable(name="tq")
            cons.append(tq >= tq_expr)
        else:
            y = cp.Variable(n, name="y", nonneg=True)
            self.y = y
            cons.append(y <= cp.multiply(prog.ymax, x))
            tq = cp.Variable(name="tq")
            if prog.kind == FormulationKind.BASIC:
                cons.append(tq >= _sumsq(_factor(split.QM), y))
            else:
                z = cp.Variable(n, name="z", nonneg=True)
                cons.append(_rotated_soc(y, x, z))
                for i in range(n):
                    self.tmap[f"z:{i}"] = z[i]
                expr = split.d @ z + split.e @ y + _sumsq(_factor(prog.rest_laplacian), y)
                if prog.strengthened:
                    tp, extra = self._pair_terms(prog, x, y, z)
                    cons += extra
                    w = np.array([p[2] for p in prog.strengthened])
                    expr = expr + w @ tp
                cons.append(tq >= expr)
        self.tq = tq
        self.tmap["tq"] = tq
        for c in prog.constraints:
            lhs = c.coeffs_x @ x + (c.coeffs_y @ y if prog.kind != FormulationKind.BINARY_MINCUT_LP
                                     else c.coeffs_y @ x)
            cons.append({"le": lhs <= c.rhs, "ge": lhs >= c.rhs, "eq": lhs == c.rhs}[c.sense])
        for cut in prog.cuts:
            lhs = cut.coeffs_x @ x + cut.coeffs_y @ y
            for k, v in cut.coeff_t.items():
                lhs = lhs + v * self.tmap[k]
            cons.append(lhs <= cut.rhs)
        obj = prog.constant + prog.cx @ x + prog.cy @ y + tq + _sumsq(_factor(split.R), y)
        self.problem = cp.Problem(cp.Minimize(obj), cons)

    def _pair_terms(self, prog, x, y, z):
        m = len(prog.strengthened)
        I = np.array([p[0] for p in prog.strengthened])
        J = np.array([p[1] for p in prog.strengthened])
        t = cp.Variable(m, name="t", nonneg=True)
        for k, (i, j, _) in enumerate(prog.strengthened):
            self.tmap[pair_key(i, j)] = t[k]
        cons = []
        if prog.pair_mode == "conic":
            cons.append(_rotated_soc(y[I] - y[J], np.ones(m), t))
            cons.append(z[I] + z[J] - 2 * y[I] <= t)
            cons.append(z[I] + z[J] - 2 * y[J] <= t)
            return t, cons
        # disjunctive hull over the four indicator patterns of (x_i, x_j)
        lam = cp.Variable(m, nonneg=True)
        yi = cp.Variable(m, nonneg=True)
        yj = cp.Variable(m, nonneg=True)
        t10 = cp.Variable(m, nonneg=True)
        t01 = cp.Variable(m, nonneg=True)
        t11 = cp.Variable(m, nonneg=True)
        xi, xj = x[I], x[J]
        cons += [lam <= xi, lam <= xj, lam >= xi + xj - 1,
                 y[I] - yi >= 0, y[J] - yj >= 0,
                 _rotated_soc(y[I] - yi, xi - lam, t10),
                 _rotated_soc(y[J] - yj, xj - lam, t01),
                 _rotated_soc(yi - yj, lam, t11),
                 t >= t10 + t01 + t11]
        if prog.pair_mode == "g":
            cons += [yi <= lam, yj <= lam, y[I] - yi <= xi - lam, y[J] - yj <= xj - lam,
                     z[I] + z[J] - 2 * y[I] <= t, z[I] + z[J] - 2 * y[J] <= t]
        return t, cons

    def solve(self, fixings=None, solver: str = DEFAULT_SOLVER, iter_limit: Optional[int] = None,
              **opts) -> RelaxationResult:
        n = self.prog.n
        lo = np.zeros(n)
        hi = np.ones(n)
        if fixings is not None:
            f = np.asarray(fixings, dtype=float)
            lo = np.where(f == 1, 1.0, 0.0)
            hi = np.where(f == 0, 0.0, 1.0)
        self.lo.value = lo
        self.hi.value = hi
        kw = dict(_SOLVER_OPTS.get(solver, {}))
        if iter_limit is not None:
            kw[{"CLARABEL": "max_iter", "CVXOPT": "max_iters", "SCS": "max_iters"}.get(solver, "max_iter")] = iter_limit
        kw.update(opts)
        t0 = time.perf_counter()
        status = "error"
        # strict tolerances first; relax them when the solver stalls numerically
        for attempt in (kw, _looser(solver, kw, 1e-8), _looser(solver, kw, None)):
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", UserWarning)
                    self.problem.solve(solver=solver, **attempt)
                status = self.problem.status
            except cp.error.SolverError:
                status = "error"
            if status in ("optimal", "infeasible", "unbounded"):
                break
        dt = time.perf_counter() - t0
        iters = int(getattr(self.problem.solver_stats, "num_iters", 0) or 0)
        if status in ("infeasible", "infeasible_inaccurate"):
            return RelaxationResult(INFEASIBLE, np.inf, np.inf, None, wall_time=dt, iters=iters,
                                    solver=solver)
        if status not in ("optimal", "optimal_inaccurate"):
            return RelaxationResult(ERROR, -np.inf, np.nan, None, wall_time=dt, iters=iters,
                                    solver=solver)
        value = float(self.problem.value)
        # the solver stops once the duality gap is below its tolerances, so the
        # dual objective (a valid bound) is within this margin of the primal
        margin = 1e-8 + 1e-9 * abs(value) if status == "optimal" else 1e-5 * (1 + abs(value))
        x = np.clip(np.asarray(self.x.value, dtype=float), 0.0, 1.0)
        y = np.clip(np.asarray(self.y.value, dtype=float), 0.0, None)
        t = {k: float(v.value) for k, v in self.tmap.items()}
        pt = Point(x=x, y=y, t=t)
        return RelaxationResult(CONVERGED if status == "optimal" else ITER_LIMIT, value - margin,
                                value, pt, y_original=self.prog.to_original_y(y), wall_time=dt,
                                iters=iters, solver=solver)


def compile_program(prog: ConvexProgram) -> CompiledProgram:
    return CompiledProgram(prog)


def solve_relaxation(prog: ConvexProgram, fixings=None, solver: str = DEFAULT_SOLVER,
                     iter_limit: Optional[int] = None, **opts) -> RelaxationResult:
    """Solve ``prog`` once; ``fixings`` holds -1 (free), 0 or 1 per indicator."""
    if fixings is None:
        fixings = prog.fixings
    return CompiledProgram(prog).solve(fixings, solver=solver, iter_limit=iter_limit, **opts)


# --- continuous subproblem for fixed indicators ------------------------------

@dataclass
class FixedXResult:
    value: float
    y: Optional[np.ndarray]
    feasible: bool
    iterations: int = 0


def _box_qp(Q, b, ub, tol, max_iter=20000):
    """min b'y + y'Qy over 0 <= y <= ub by accelerated projected gradient + active-set polish."""
    m = b.shape[0]
    if m == 0:
        return np.zeros(0), 0
    H = 2 * Q
    L = max(np.linalg.eigvalsh(H).max(), 1e-12)
    y = np.clip(np.zeros(m), 0, ub)
    v = y.copy()
    tk = 1.0
    it = 0
    for it in range(1, max_iter + 1):
        grad = H @ v + b
        ynew = np.clip(v - grad / L, 0, ub)
        tk1 = (1 + np.sqrt(1 + 4 * tk * tk)) / 2
        v = ynew + (tk - 1) / tk1 * (ynew - y)
        if np.max(np.abs(ynew - y)) < tol * 1e-2:
            y = ynew
            break
        y = ynew
        tk = tk1
    # active-set polish: solve the KKT system on the free set, repeat while it improves
    for _ in range(2 * m + 2):
        g = H @ y + b
        at_lo = (y <= 1e-10) & (g >= 0)
        at_hi = (y >= ub - 1e-10) & (g <= 0)
        free = ~(at_lo | at_hi)
        cand = np.where(at_hi, ub, 0.0)
        if np.any(free):
            fixed = ~free
            rhs = -b[free] - H[np.ix_(free, fixed)] @ cand[fixed]
            try:
                cand[free] = np.linalg.solve(H[np.ix_(free, free)], rhs)
            except np.linalg.LinAlgError:
                break
        if np.any(cand < -1e-12) or np.any(cand > ub + 1e-12):
            break
        f_old = b @ y + y @ Q @ y
        f_new = b @ cand + cand @ Q @ cand
        if f_new <= f_old + 1e-14 * (1 + abs(f_old)):
            if np.allclose(cand, y, atol=1e-14):
                y = cand
                break
            y = cand
        else:
            break
    return y, it


def solve_fixed_x(inst: Instance, x, tol: float = 1e-9) -> FixedXResult:
    """Minimize the objective over ``y`` with the binary vector ``x`` held fixed."""
    x = np.round(np.asarray(x, dtype=float))
    n = inst.n
    for c in inst.constraints:
        if c.x_only and c.violation(x, np.zeros(n)) > 1e-9:
            return FixedXResult(np.inf, None, False)
    ub = inst.u * x
    on = ub > 0
    y = np.zeros(n)
    base = inst.constant + float(inst.a @ x)
    y_cons = [c for c in inst.constraints if not c.x_only]
    if not y_cons:
        if not np.all(np.isfinite(ub)):
            raise ValueError("solve_fixed_x needs finite bounds u")
        ys, it = _box_qp(inst.Q[np.ix_(on, on)], inst.b[on], ub[on], tol)
        y[on] = ys
        return FixedXResult(inst.objective(x, y), y, True, it)
    idx = np.flatnonzero(on)
    if idx.size == 0:
        ok = all(c.violation(x, y) <= 1e-9 for c in y_cons)
        return FixedXResult(inst.objective(x, y) if ok else np.inf, y if ok else None, ok)
    v = cp.Variable(idx.size)
    Qs = inst.Q[np.ix_(idx, idx)]
    F = _factor(Qs)
    cons = [v >= 0]
    fin = np.isfinite(ub[idx])
    if np.any(fin):
        cons.append(v[np.flatnonzero(fin)] <= ub[idx][fin])
    for c in inst.constraints:
        lhs = c.coeffs_x @ x + c.coeffs_y[idx] @ v
        cons.append({"le": lhs <= c.rhs, "ge": lhs >= c.rhs, "eq": lhs == c.rhs}[c.sense])
    prob = cp.Problem(cp.Minimize(base + inst.b[idx] @ v + _sumsq(F, v)), cons)
    try:
        prob.solve(solver=DEFAULT_SOLVER, **_SOLVER_OPTS[DEFAULT_SOLVER])
    except cp.error.SolverError:
        return FixedXResult(np.inf, None, False)
    if prob.status not in ("optimal", "optimal_inaccurate"):
        return FixedXResult(np.inf, None, False)
    y[idx] = np.clip(v.value, 0, ub[idx])
    # report the exact objective of a (repaired) feasible point
    return FixedXResult(inst.objective(x, y), y, True)
