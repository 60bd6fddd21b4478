"""Brute-force and numeric oracles for tests.

Nothing here shares code with :mod:`relax` or :mod:`bnb`: continuous
subproblems use scipy (projected gradient, SLSQP, linprog) and the hull
checks use scalar searches and a seeded cutting-plane LP.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import linprog, minimize, minimize_scalar, nnls

from . import hulls
from .core import Instance

MAX_ORACLE_SIZE = 14
_BIG = 1e300


class OracleTooLarge(ValueError):
    pass


def _q(num: float, den: float) -> float:
    """``num^2 / den`` with 0/0 = 0 and c/0 = inf."""
    if den <= 0.0:
        return 0.0 if abs(num) <= 1e-15 else math.inf
    return num * num / den


# --- enumeration oracle for the MIQP ---------------------------------------------

def oracle_size(inst: Instance) -> int:
    """Number of independent indicator choices; complementary pairs count once."""
    return inst.n - len(inst.meta.get("complement_pairs", []))


def _feasible_xs(inst: Instance) -> np.ndarray:
    n = inst.n
    if n > 22:
        raise OracleTooLarge(f"cannot enumerate 2^{n} indicator vectors")
    xs = np.array(list(itertools.product((0.0, 1.0), repeat=n))) if n else np.zeros((1, 0))
    keep = np.ones(xs.shape[0], dtype=bool)
    for c in inst.constraints:
        if not c.x_only:
            continue
        act = xs @ c.coeffs_x
        if c.sense == "le":
            keep &= act <= c.rhs + 1e-9
        elif c.sense == "ge":
            keep &= act >= c.rhs - 1e-9
        else:
            keep &= np.abs(act - c.rhs) <= 1e-9
    return xs[keep]


def _pg_box(Q, b, ub, y0, iters=5000):
    L = 2 * max(np.linalg.norm(Q, 2), 1e-12)
    y = np.clip(y0, 0, ub)
    for _ in range(iters):
        ynew = np.clip(y - (2 * Q @ y + b) / L, 0, ub)
        if np.max(np.abs(ynew - y)) < 1e-13:
            y = ynew
            break
        y = ynew
    return y


def _kkt_refine(Q, b, ub, y, A=None, r=None, senses=None, tol=1e-7):
    """Re-solve the equality-constrained QP on the active set guessed from ``y``."""
    m = y.size
    lo_act = y <= tol
    hi_act = y >= ub - tol
    rows = []
    rhs = []
    if A is not None:
        for k in range(A.shape[0]):
            if senses[k] == "eq" or abs(A[k] @ y - r[k]) <= tol * (1 + abs(r[k])):
                rows.append(A[k])
                rhs.append(r[k])
    for j in range(m):
        if lo_act[j] or hi_act[j]:
            e = np.zeros(m)
            e[j] = 1
            rows.append(e)
            rhs.append(0.0 if lo_act[j] else ub[j])
    E = np.array(rows) if rows else np.zeros((0, m))
    K = np.block([[2 * Q, E.T], [E, np.zeros((E.shape[0], E.shape[0]))]])
    sol = np.linalg.lstsq(K, np.concatenate([-b, np.array(rhs)]), rcond=None)[0]
    cand = sol[:m]
    if np.any(cand < -1e-10) or np.any(cand > ub + 1e-10):
        return y
    if A is not None:
        for k in range(A.shape[0]):
            v = A[k] @ cand - r[k]
            if (senses[k] == "le" and v > 1e-9) or (senses[k] == "eq" and abs(v) > 1e-9):
                return y
    cand = np.clip(cand, 0, ub)
    f = lambda z: b @ z + z @ Q @ z
    return cand if f(cand) <= f(y) + 1e-14 else y


def _continuous(inst: Instance, x: np.ndarray, rng) -> Tuple[float, Optional[np.ndarray]]:
    ub = inst.u * x
    on = np.flatnonzero(ub > 0)
    n = inst.n
    Q = inst.Q[np.ix_(on, on)]
    b = inst.b[on]
    u = ub[on]
    base = inst.constant + inst.a @ x
    rows = [c for c in inst.constraints if not c.x_only]
    # convert side rows to A y <= r or == r on the active variables
    A, r, senses = [], [], []
    for c in rows:
        shift = c.coeffs_x @ x
        if c.sense == "ge":
            A.append(-c.coeffs_y[on])
            r.append(-(c.rhs - shift))
            senses.append("le")
        else:
            A.append(c.coeffs_y[on])
            r.append(c.rhs - shift)
            senses.append(c.sense)
    A = np.array(A) if A else None
    r = np.array(r) if r else None
    if on.size == 0:
        if A is not None and any((s == "le" and -rr > 1e-9) or (s == "eq" and abs(rr) > 1e-9)
                                 for rr, s in zip(r, senses)):
            return math.inf, None
        return base, np.zeros(n)
    starts = [np.zeros(on.size), u.copy(), u / 2, rng.uniform(0, 1, on.size) * u,
              rng.uniform(0, 1, on.size) * u]
    best, best_y = math.inf, None
    if A is None:
        for s in starts:
            y = _pg_box(Q, b, u, s)
            for _ in range(3):
                y = _kkt_refine(Q, b, u, y)
            val = b @ y + y @ Q @ y
            if val < best:
                best, best_y = val, y
    else:
        le = [k for k, s in enumerate(senses) if s == "le"]
        eq = [k for k, s in enumerate(senses) if s == "eq"]
        lp = linprog(np.zeros(on.size), A_ub=A[le] if le else None, b_ub=r[le] if le else None,
                     A_eq=A[eq] if eq else None, b_eq=r[eq] if eq else None,
                     bounds=list(zip(np.zeros(on.size), u)), method="highs")
        if lp.status != 0:
            return math.inf, None
        starts.append(lp.x)
        cons = []
        if le:
            cons.append({"type": "ineq", "fun": lambda z: r[le] - A[le] @ z, "jac": lambda z: -A[le]})
        if eq:
            cons.append({"type": "eq", "fun": lambda z: A[eq] @ z - r[eq], "jac": lambda z: A[eq]})
        for s in starts:
            res = minimize(lambda z: b @ z + z @ Q @ z, s, jac=lambda z: b + 2 * Q @ z,
                           bounds=list(zip(np.zeros(on.size), u)), constraints=cons,
                           method="SLSQP", options={"ftol": 1e-15, "maxiter": 1000})
            y = np.clip(res.x, 0, u)
            y = _kkt_refine(Q, b, u, y, A, r, senses, tol=1e-6)
            viol = A @ y - r
            if np.any(viol[le] > 1e-7) or (eq and np.any(np.abs(viol[eq]) > 1e-7)):
                continue
            val = b @ y + y @ Q @ y
            if val < best:
                best, best_y = val, y
        if best_y is None:
            return math.inf, None
    y = np.zeros(n)
    y[on] = best_y
    return base + best, y


def brute_force_miqp(inst: Instance, seed: int = 0):
    """Exact optimum by enumerating every indicator vector; returns ``(x, y, value)``."""
    if oracle_size(inst) > MAX_ORACLE_SIZE:
        raise OracleTooLarge(f"oracle limited to {MAX_ORACLE_SIZE} indicator choices")
    if np.any(~np.isfinite(inst.u)):
        raise ValueError("brute_force_miqp needs finite bounds u")
    rng = np.random.default_rng(seed)
    best = (None, None, math.inf)
    for x in _feasible_xs(inst):
        val, y = _continuous(inst, x, rng)
        if val < best[2] - 1e-12:
            best = (x.copy(), y, val)
    return best


# --- 2x2 hull oracles ---------------------------------------------------------------

def _brent(fun, lo, hi):
    if hi - lo <= 1e-15:
        z = 0.5 * (lo + hi)
        return z, fun(z)
    res = minimize_scalar(fun, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    z, v = float(res.x), float(res.fun)
    for e in (lo, hi):
        fe = fun(e)
        if fe <= v:
            z, v = e, fe
    return z, v


def _m1_objective(x, y1, y2):
    return lambda yh2: _q(y2 - x * yh2, 1 - x) + _q(x * yh2 - y1, x)


def _m1_bounds(x, y1, y2):
    if x <= 0:
        return 0.0, 1.0
    return max(0.0, y2 / x - (1 - x) / x), min(1.0, y2 / x)


def minimize_m1(x: float, y1: float, y2: float) -> float:
    """Value of the projection problem that defines the hull of the one-indicator set."""
    if not (0 <= y1 <= x + 1e-12 and 0 <= x <= 1 and 0 <= y2 <= 1):
        return math.inf
    lo, hi = _m1_bounds(x, y1, y2)
    if lo > hi + 1e-12:
        return math.inf
    return _brent(_m1_objective(x, y1, y2), lo, max(lo, hi))[1]


@dataclass
class M2Solution:
    value: float
    xh1: float
    yh1: float
    case: int


def _m2_psi(x1, x2, y1, y2):
    r2 = min(y2 / x2, 1.0)

    def psi(xh, yh):
        if yh > xh:
            return math.inf
        return _q(y1 - x2 * yh, x1 - x2 * xh) + x2 * float(hulls.g1_eval(xh, yh, r2))
    return psi


def predicted_case(x1: float, x2: float, y1: float, y2: float) -> Tuple[int, float]:
    """Case (1, 2 or 3) of the projection problem predicted for ``y1 >= y2``, with its slack."""
    if x1 <= x2:
        return 1, x2 - x1
    s = x2 * x1 - (y2 * (x1 - x2) + y1 * x2)
    return (2 if s >= 0 else 3), min(x1 - x2, abs(s))


def solve_m2(x1: float, x2: float, y1: float, y2: float) -> M2Solution:
    """Nested scalar searches on the two-variable projection problem (needs ``y1 >= y2``)."""
    if not (0 <= y1 <= x1 <= 1 and 0 <= y2 <= x2 <= 1) or y1 < y2 - 1e-12:
        return M2Solution(math.inf, math.nan, math.nan, 0)
    if x2 <= 0:
        return M2Solution(_q(y1, x1), 0.0, 0.0, 0)
    psi = _m2_psi(x1, x2, y1, y2)
    xlo = max(0.0, x1 / x2 - (1 - x2) / x2)
    xhi = min(1.0, x1 / x2)
    if xlo > xhi + 1e-12:
        return M2Solution(math.inf, math.nan, math.nan, 0)

    def inner(xh):
        lo = max(0.0, xh - (x1 - y1) / x2)
        hi = min(xh, y1 / x2)
        if lo > hi + 1e-12:
            return math.nan, math.inf
        return _brent(lambda yh: psi(xh, yh), lo, max(lo, hi))

    xh, val = _brent(lambda xh: inner(xh)[1], xlo, max(xlo, xhi))
    # the optimal set can be a segment; prefer its largest xh
    top = max(xlo, xhi)
    vtop = inner(top)[1]
    if vtop <= val + 1e-10 * (1 + abs(val)):
        xh, val = top, vtop
    yh = inner(xh)[0]
    if xh < 1 - 1e-6:
        case = 1
    elif yh < 1 - 1e-6:
        case = 2
    else:
        case = 3
    return M2Solution(val, xh, yh, case)


def minimize_m2(x1: float, x2: float, y1: float, y2: float) -> float:
    return solve_m2(x1, x2, y1, y2).value


def hull_lp_check(vertices, point, tol: float = 1e-7) -> bool:
    """Is ``point`` a convex combination of the rows of ``vertices``?"""
    V = np.asarray(vertices, dtype=float)
    p = np.asarray(point, dtype=float)
    scale = max(1.0, float(np.abs(V).max()))
    M = np.vstack([V.T / scale, np.ones(V.shape[0])])
    rhs = np.concatenate([p / scale, [1.0]])
    _, resid = nnls(M, rhs, maxiter=50 * V.shape[0])
    return bool(resid <= tol)


# --- exactness of the hull functions for linear objectives --------------------------

def _pair_box_qp(b1, b2, u1, u2):
    """Exact ``min b'y + (y1-y2)^2`` over ``[0,u1] x [0,u2]`` by active-set enumeration."""
    best = (math.inf, 0.0, 0.0)
    for v1 in ("lo", "hi", "free"):
        for v2 in ("lo", "hi", "free"):
            if v1 == v2 == "free":
                continue
            cands = []
            if v1 != "free" and v2 != "free":
                cands.append((0.0 if v1 == "lo" else u1, 0.0 if v2 == "lo" else u2))
            elif v1 == "free":
                y2 = 0.0 if v2 == "lo" else u2
                cands.append((y2 - b1 / 2, y2))
            else:
                y1 = 0.0 if v1 == "lo" else u1
                cands.append((y1, y1 - b2 / 2))
            for y1, y2 in cands:
                if -1e-15 <= y1 <= u1 + 1e-15 and -1e-15 <= y2 <= u2 + 1e-15:
                    y1 = min(max(y1, 0.0), u1)
                    y2 = min(max(y2, 0.0), u2)
                    v = b1 * y1 + b2 * y2 + (y1 - y2) ** 2
                    if v < best[0]:
                        best = (v, y1, y2)
    return best


def integer_pair_optimum(a, b, ybound: float = 1.0):
    """Optimum of ``a'x + b'y + (y1-y2)^2`` over the four indicator patterns.

    Returns ``(value, (x1, x2, y1, y2))``; continuous variables live in
    ``[0, ybound * x_i]``.
    """
    best = (math.inf, None)
    for x1, x2 in itertools.product((0.0, 1.0), repeat=2):
        v, y1, y2 = _pair_box_qp(b[0], b[1], ybound * x1, ybound * x2)
        v += a[0] * x1 + a[1] * x2
        if v < best[0]:
            best = (v, (x1, x2, y1, y2))
    return best


def minimize_hull_linear(a, b, mode: str = "g", ybound: float = 1.0, seed_point=None,
                         max_rounds: int = 200, tol: float = 1e-8):
    """Cutting-plane minimization of ``a'x + b'y + h(x, y)`` with ``h`` = g or f.

    ``mode="g"`` works on ``0 <= y <= x <= 1``; ``mode="f"`` on
    ``x in [0,1]^2, 0 <= y <= ybound``. Every cut is a tangent of the convex
    ``h``, so the LP value is a valid lower bound; returns ``(lower, upper)``.
    """
    sub = {"g": hulls.g_subgrad, "f": hulls.f_subgrad}[mode]
    h = {"g": hulls.g_eval, "f": hulls.f_eval}[mode]
    c = np.array([a[0], a[1], b[0], b[1], 1.0])
    A_ub, b_ub = [], []

    def add_cut(p):
        x1, x2 = float(hulls.shift_x(p[0])), float(hulls.shift_x(p[1]))
        y1, y2 = p[2], p[3]
        if mode == "g":
            y1, y2 = min(y1, x1), min(y2, x2)
        sg = sub(x1, x2, y1, y2)
        g = np.array([sg.dx1, sg.dx2, sg.dy1, sg.dy2])
        if np.abs(g).max() > hulls.MAX_CUT_COEFF:
            return
        const = sg.value - g @ np.array([x1, x2, y1, y2])
        A_ub.append([*g, -1.0])
        b_ub.append(-const)

    seeds = [(x1, x2, 0.5 * x1 * min(ybound, 1), 0.5 * x2 * min(ybound, 1))
             for x1 in (0.0, 1.0) for x2 in (0.0, 1.0)]
    if seed_point is not None:
        seeds.append(tuple(seed_point))
        for d in (1e-6, 1e-4, 1e-2, 1e-1):
            for k in range(4):
                for sgn in (-1, 1):
                    q = list(seed_point)
                    q[k] = q[k] + sgn * d
                    seeds.append(tuple(q))
    for s in seeds:
        s = np.clip(np.array(s, dtype=float), 0, [1, 1, ybound, ybound])
        if mode == "g":
            s[2:] = np.minimum(s[2:], s[:2])
        add_cut(s)
    if mode == "g":
        A_dom = [[-1, 0, 1, 0, 0], [0, -1, 0, 1, 0]]
        bounds = [(0, 1), (0, 1), (0, None), (0, None), (None, None)]
    else:
        A_dom = []
        bounds = [(0, 1), (0, 1), (0, ybound), (0, ybound), (None, None)]
    lower, upper = -math.inf, math.inf
    for _ in range(max_rounds):
        res = linprog(c, A_ub=np.array(A_dom + A_ub), b_ub=np.array([0.0] * len(A_dom) + b_ub),
                      bounds=bounds, method="highs")
        if res.status != 0:
            raise RuntimeError(f"cutting-plane LP failed: {res.message}")
        v = res.x
        lower = max(lower, float(res.fun))
        pt = np.clip(v[:4], 0, None)
        if mode == "g":
            pt[2:] = np.minimum(pt[2:], pt[:2])
        hv = float(h(*pt))
        upper = min(upper, float(c[:4] @ pt + hv))
        if upper - lower <= tol:
            break
        add_cut(pt)
    return lower, upper
