"""Closed-form convex-hull functions for two-indicator quadratic sets and cuts.

The pair functions work on ``(x1, x2, y1, y2)`` and broadcast over numpy
arrays, so property checks can evaluate millions of points at once.

* :func:`f_eval` -- hull of ``(y1-y2)^2 <= t`` with ``y_i (1 - x_i) = 0``
  (continuous variables unbounded above).
* :func:`g1_eval` -- hull with one indicator, ``y1 <= x``, ``y2 <= 1``.
* :func:`g_eval` -- hull with ``0 <= y_i <= x_i``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Cut
from .mmatrix import PairDecomposition, decompose, is_m_matrix, NotMMatrixError

X_SHIFT = 1e-5
MAX_CUT_COEFF = 1e12
DOMAIN_TOL = 1e-9


class DomainError(ValueError):
    pass


def _pdiv(num, den):
    """Closed perspective division: 0/0 = 0, a/0 = inf for a > 0."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.where(num > 0, np.inf, 0.0))
    return out if out.ndim else float(out)


def _ret(v):
    v = np.asarray(v, dtype=float)
    return v if v.ndim else float(v)


def _check_bounded(x1, x2, y1, y2):
    if np.any(np.asarray(y1) > np.asarray(x1) + DOMAIN_TOL) or np.any(
            np.asarray(y2) > np.asarray(x2) + DOMAIN_TOL):
        raise DomainError("point violates y_i <= x_i")
    if np.any(np.asarray(y1) < -DOMAIN_TOL) or np.any(np.asarray(y2) < -DOMAIN_TOL):
        raise DomainError("point violates y_i >= 0")


# --- hull functions --------------------------------------------------------

def f_eval(x1, x2, y1, y2):
    """``(y1-y2)^2/x1`` when ``y1 >= y2``, else ``(y2-y1)^2/x2``."""
    x1, x2, y1, y2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x1, x2, y1, y2)))
    d2 = (y1 - y2) ** 2
    return _ret(np.where(y1 >= y2, _pdiv(d2, x1), _pdiv(d2, x2)))


def g1_eval(x, y1, y2):
    x, y1, y2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y1, y2)))
    case1 = x - y1 <= x * (y2 - y1)
    v1 = _pdiv((y2 - x) ** 2, 1.0 - x) + _pdiv((x - y1) ** 2, x)
    v2 = _pdiv((y1 - y2) ** 2, x)
    v3 = (y2 - y1) ** 2
    return _ret(np.where(case1, v1, np.where(y2 <= y1, v2, v3)))


def _g_cases(x1, x2, y1, y2):
    c1 = (y2 <= x2) & (x2 <= y1) & (x2 * (x1 - y1) <= y2 * (x1 - x2))
    c2 = (y1 <= x1) & (x1 <= y2) & (x1 * (x2 - y2) <= y1 * (x2 - x1)) & ~c1
    return c1, c2


def g_eval(x1, x2, y1, y2):
    """Hull function of ``{(y1-y2)^2 <= t, 0 <= y_i <= x_i, x binary}``."""
    x1, x2, y1, y2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x1, x2, y1, y2)))
    _check_bounded(x1, x2, y1, y2)
    c1, c2 = _g_cases(x1, x2, y1, y2)
    v1 = _pdiv((y1 - x2) ** 2, np.maximum(x1 - x2, 0.0)) + _pdiv((x2 - y2) ** 2, x2)
    v2 = _pdiv((y2 - x1) ** 2, np.maximum(x2 - x1, 0.0)) + _pdiv((x1 - y1) ** 2, x1)
    return _ret(np.where(c1, v1, np.where(c2, v2, f_eval(x1, x2, y1, y2))))


def g_case(x1, x2, y1, y2) -> int:
    """Active piece of :func:`g_eval`: 1, 2 or 0 for the ``f`` piece."""
    c1, c2 = _g_cases(*(np.asarray(v, dtype=float) for v in (x1, x2, y1, y2)))
    return 1 if c1 else (2 if c2 else 0)


# --- subgradients ----------------------------------------------------------

@dataclass(frozen=True)
class Subgradient:
    value: float
    dx1: float
    dx2: float
    dy1: float
    dy2: float

    def linear(self, x1, x2, y1, y2, at):
        """Affine minorant evaluated at ``(x1, x2, y1, y2)``; ``at`` is the expansion point."""
        a1, a2, b1, b2 = at
        return (self.value + self.dx1 * (x1 - a1) + self.dx2 * (x2 - a2)
                + self.dy1 * (y1 - b1) + self.dy2 * (y2 - b2))


def shift_x(x):
    """Replace indicator values below ``1e-5`` by ``1e-5`` before linearizing."""
    return np.maximum(np.asarray(x, dtype=float), X_SHIFT)


def _swap(sg: Subgradient) -> Subgradient:
    return Subgradient(sg.value, sg.dx2, sg.dx1, sg.dy2, sg.dy1)


def _f_piece_grad(x1, y1, y2) -> Subgradient:
    r = (y1 - y2) / x1
    return Subgradient(value=r * (y1 - y2), dx1=-r * r, dx2=0.0, dy1=2 * r, dy2=-2 * r)


def f_subgrad(x1, x2, y1, y2) -> Subgradient:
    """Gradient of the active piece of ``f`` at the (shifted) point."""
    x1, x2 = float(shift_x(x1)), float(shift_x(x2))
    y1, y2 = float(y1), float(y2)
    if y1 >= y2:
        return _f_piece_grad(x1, y1, y2)
    return _swap(_f_piece_grad(x2, y2, y1))


def _g_case1_grad(x1, x2, y1, y2) -> Subgradient:
    den = x1 - x2
    # den == 0 forces y1 == x1 == x2; take the limit along y = x
    r = (y1 - x2) / den if den > 0 else 1.0
    s = (x2 - y2) / x2
    value = (y1 - x2) * r + (x2 - y2) * s
    return Subgradient(value=value, dx1=-r * r, dx2=-2 * r + r * r + 2 * s - s * s,
                       dy1=2 * r, dy2=-2 * s)


def g_subgrad(x1, x2, y1, y2) -> Subgradient:
    """Gradient of the active piece of ``g`` at the (shifted) point."""
    x1, x2 = float(shift_x(x1)), float(shift_x(x2))
    y1, y2 = min(float(y1), x1), min(float(y2), x2)
    case = g_case(x1, x2, y1, y2)
    if case == 1:
        return _g_case1_grad(x1, x2, y1, y2)
    if case == 2:
        return _swap(_g_case1_grad(x2, x1, y2, y1))
    return f_subgrad(x1, x2, y1, y2)


# --- valid inequalities (left-hand sides, compared against t) -------------

def jeon_ineq_eval(x1, x2, y1, y2, which: int):
    """Limiting inequalities for the pair set; returns the left-hand side."""
    if which == 1:
        return _ret(_pdiv(np.square(y2), x2) - np.asarray(x1, dtype=float))
    if which == 2:
        return _ret(_pdiv(np.square(y1), x1) - np.asarray(x2, dtype=float))
    if which == 3:
        return _ret(_pdiv(np.square(np.subtract(y1, y2)), np.add(x1, x2)))
    raise ValueError("which must be 1, 2 or 3")


def valid12_eval(x1, x2, y1, y2):
    return _ret(_pdiv(np.square(y1), x1) + _pdiv(np.square(y2), x2) - 2 * np.minimum(y1, y2))


def validplus_eval(x1, x2, y1, y2):
    """Left-hand side for the positive cross-term set ``(y1+y2)^2 <= t``."""
    return _ret(_pdiv(np.square(y1), x1) + _pdiv(np.square(y2), x2))


def validpm_eval(x1, x2, y1):
    """Left-hand side for sign-unrestricted continuous variables."""
    return _ret(_pdiv(np.square(y1), x1) - np.asarray(x2, dtype=float))


# --- cuts ------------------------------------------------------------------

def _accept(cut: Cut) -> Optional[Cut]:
    return cut if cut.max_abs_coeff() <= MAX_CUT_COEFF else None


def pair_key(i: int, j: int) -> str:
    return f"t:{i},{j}"


def pair_cut(n: int, i: int, j: int, x: np.ndarray, y: np.ndarray, mode: str = "g") -> Optional[Cut]:
    """Subgradient cut ``h(x_i,x_j,y_i,y_j) <= t_ij`` linearized at ``(x, y)``."""
    sub = {"g": g_subgrad, "f": f_subgrad}[mode]
    p = (float(shift_x(x[i])), float(shift_x(x[j])), float(y[i]), float(y[j]))
    sg = sub(*p)
    cx = np.zeros(n)
    cy = np.zeros(n)
    cx[i], cx[j], cy[i], cy[j] = sg.dx1, sg.dx2, sg.dy1, sg.dy2
    const = sg.value - sg.dx1 * p[0] - sg.dx2 * p[1] - sg.dy1 * p[2] - sg.dy2 * p[3]
    return _accept(Cut(cx, cy, {pair_key(i, j): -1.0}, -const, tag=f"subgrad-{mode}"))


def polymatroid_cut(Q: np.ndarray, perm) -> Cut:
    """Linear cut ``sum pi_i x_i - sum alpha_i (x_i - y_i) + sum_{Qbar_i<=0} Qbar_i (x_i - y_i) <= t``.

    ``perm`` lists indices in decreasing order of the continuous values;
    ``pi_i = Q_ii + 2 sum_{j before i} Q_ij`` and
    ``alpha_i = 2 sum_{j up to and including i} Q_ij``.
    """
    Q = np.asarray(Q, dtype=float)
    if not is_m_matrix(Q):
        raise NotMMatrixError("polymatroid_cut requires an M-matrix")
    n = Q.shape[0]
    perm = [int(k) for k in perm]
    if sorted(perm) != list(range(n)):
        raise ValueError("perm must be a permutation of range(n)")
    qbar = Q.sum(axis=1)
    pi, alpha = polymatroid_vectors(Q, perm)
    nonpos = qbar <= 0
    cx = pi - alpha + np.where(nonpos, qbar, 0.0)
    cy = alpha - np.where(nonpos, qbar, 0.0)
    return Cut(cx, cy, {"tq": -1.0}, 0.0, tag="polymatroid")


def polymatroid_vectors(Q: np.ndarray, perm):
    """Return ``(pi, alpha)`` indexed by original variable."""
    Q = np.asarray(Q, dtype=float)
    pi = np.zeros(Q.shape[0])
    alpha = np.zeros(Q.shape[0])
    before = []
    for i in perm:
        s = Q[i, before].sum() if before else 0.0
        pi[i] = Q[i, i] + 2 * s
        alpha[i] = 2 * (s + Q[i, i])
        before.append(i)
    return pi, alpha


def decomposed_value(dec: PairDecomposition, x, y, mode: str = "g") -> float:
    """Convex underestimator of ``y'Qy`` built from the pair decomposition."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    h = {"g": g_eval, "f": f_eval}[mode]
    qbar = dec.diag_weights
    pos = qbar > 0
    val = float(np.sum(qbar[pos] * _pdiv(y[pos] ** 2, x[pos])) + np.sum(qbar[~pos] * y[~pos]))
    for i, j, w in dec.neg_pairs:
        val += w * float(h(x[i], x[j], y[i], y[j]))
    return val


def aggregate_subgrad_cut(dec: PairDecomposition, x, y, mode: str = "g") -> Optional[Cut]:
    """One linear cut in ``(x, y, tq)`` from the tangent of the decomposed underestimator."""
    n = dec.n
    xs = shift_x(x)
    y = np.minimum(np.asarray(y, dtype=float), xs) if mode == "g" else np.asarray(y, dtype=float)
    sub = {"g": g_subgrad, "f": f_subgrad}[mode]
    qbar = dec.diag_weights
    cx = np.zeros(n)
    cy = np.zeros(n)
    const = 0.0
    for i in range(n):
        if qbar[i] > 0:
            r = y[i] / xs[i]
            cx[i] -= qbar[i] * r * r
            cy[i] += 2 * qbar[i] * r
        else:
            cy[i] += qbar[i]
    for i, j, w in dec.neg_pairs:
        sg = sub(xs[i], xs[j], y[i], y[j])
        cx[i] += w * sg.dx1
        cx[j] += w * sg.dx2
        cy[i] += w * sg.dy1
        cy[j] += w * sg.dy2
        const += w * (sg.value - sg.dx1 * xs[i] - sg.dx2 * xs[j] - sg.dy1 * y[i] - sg.dy2 * y[j])
    return _accept(Cut(cx, cy, {"tq": -1.0}, -const, tag=f"aggregate-{mode}"))


def greedy_order(y) -> list:
    """Indices sorted by decreasing value, ties broken by index."""
    y = np.asarray(y, dtype=float)
    return sorted(range(y.shape[0]), key=lambda i: (-y[i], i))


__all__ = [
    "DomainError", "Subgradient", "f_eval", "g1_eval", "g_eval", "g_case", "f_subgrad",
    "g_subgrad", "jeon_ineq_eval", "valid12_eval", "validplus_eval", "validpm_eval",
    "pair_cut", "pair_key", "polymatroid_cut", "polymatroid_vectors", "aggregate_subgrad_cut",
    "decomposed_value", "greedy_order", "shift_x", "decompose",
]
