"""Convex relaxations of an :class:`Instance` and root cut separation.

All programs live in *scaled* continuous variables ``yh = y / u`` so that every
link reads ``0 <= yh_i <= x_i``. The quadratic is split as::

    y'Ay = yh' Q_M yh + yh' R yh,
    yh' Q_M yh = sum_i (d_i + e_i) yh_i^2 + sum_{pairs} w_ij (yh_i - yh_j)^2

with ``d >= 0`` (perspective-strengthened diagonal), ``e <= 0`` (concave part of
the row sums, under-estimated by ``e_i yh_i``), ``w > 0`` (negative
off-diagonals) and a PSD residual ``R``. An aggregate epigraph variable ``tq``
bounds the ``Q_M`` part; every formulation differs only in how ``tq`` is
bounded below.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

import numpy as np

from . import hulls
from .core import Cut, Instance, LinearConstraint, Point
from .mmatrix import PairDecomposition, decompose, extract_m_part, is_m_matrix

VIOLATION_TOL = 1e-6


class FormulationKind(str, enum.Enum):
    BASIC = "basic"
    PERSPECTIVE = "perspective"
    CONIC = "conic"
    CONIC_CUTS = "conic+cuts"
    HULL_F = "hullf"
    HULL_G = "hullg"
    BINARY_MINCUT_LP = "mincut"

    @classmethod
    def parse(cls, value) -> "FormulationKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "")
        aliases = {"coniccuts": "conic+cuts", "binarymincutlp": "mincut", "mincutlp": "mincut"}
        key = aliases.get(key, key)
        for kind in cls:
            if kind.value == key:
                return kind
        raise ValueError(f"unknown formulation {value!r}; choose from {[k.value for k in cls]}")


class FormulationError(ValueError):
    pass


# --- typed term records (mirrors of what the solver compiles) ---------------

@dataclass(frozen=True)
class Box:
    var: str
    lo: float
    hi: float


@dataclass(frozen=True)
class Linear:
    constraint: LinearConstraint


@dataclass(frozen=True)
class PerspectiveCone:
    i: int
    weight: float


@dataclass(frozen=True)
class QuadEpigraph:
    """``yh' M yh`` contributes to the ``tq`` bound (or the pair epigraph ``key``)."""
    key: str
    matrix: np.ndarray


@dataclass(frozen=True)
class PairConic:
    """``(yh_i-yh_j)^2 <= t_ij`` plus the two linearized ``valid12`` rows."""
    i: int
    j: int
    weight: float


@dataclass(frozen=True)
class HullEpigraph:
    i: int
    j: int
    weight: float
    mode: str


@dataclass(frozen=True)
class Residual:
    matrix: np.ndarray


@dataclass(frozen=True)
class QuadSplit:
    """Decomposition data of the scaled quadratic."""

    QM: np.ndarray
    R: np.ndarray
    d: np.ndarray
    e: np.ndarray
    pairs: List[Tuple[int, int, float]]
    general: bool

    def decomposition(self) -> PairDecomposition:
        return PairDecomposition(diag_weights=self.d + self.e, neg_pairs=list(self.pairs))


@dataclass(frozen=True)
class ConvexProgram:
    kind: FormulationKind
    n: int
    cx: np.ndarray
    cy: np.ndarray
    constant: float
    scale: np.ndarray
    ymax: np.ndarray
    split: QuadSplit
    strengthened: Tuple[Tuple[int, int, float], ...]
    constraints: Tuple[LinearConstraint, ...]
    cuts: Tuple[Cut, ...] = ()
    fixings: Optional[np.ndarray] = None
    pool_capacity: int = 0
    cut_activity: Tuple[int, ...] = ()
    name: str = ""

    @property
    def uses_perspective(self) -> bool:
        return self.kind not in (FormulationKind.BASIC, FormulationKind.BINARY_MINCUT_LP)

    @property
    def pair_mode(self) -> Optional[str]:
        return {FormulationKind.CONIC: "conic", FormulationKind.CONIC_CUTS: "conic",
                FormulationKind.HULL_G: "g", FormulationKind.HULL_F: "f"}.get(self.kind)

    @property
    def rest_laplacian(self) -> np.ndarray:
        """Laplacian of pairs kept as a plain quadratic (not strengthened)."""
        keep = {(i, j) for i, j, _ in self.strengthened}
        rest = [(i, j, w) for i, j, w in self.split.pairs if (i, j) not in keep]
        return PairDecomposition(np.zeros(self.n), rest).laplacian()

    def epigraph_keys(self) -> List[str]:
        keys = ["tq"]
        if self.uses_perspective:
            keys += [f"z:{i}" for i in range(self.n)]
        if self.pair_mode:
            keys += [hulls.pair_key(i, j) for i, j, _ in self.strengthened]
        return keys

    def terms(self) -> list:
        out = [Box(f"x{i}", 0.0, 1.0) for i in range(self.n)]
        out += [Box(f"y{i}", 0.0, float(self.ymax[i])) for i in range(self.n)]
        out += [Linear(c) for c in self.constraints]
        if self.kind == FormulationKind.BASIC:
            out.append(QuadEpigraph("tq", self.split.QM))
        elif self.kind == FormulationKind.BINARY_MINCUT_LP:
            pass
        else:
            out += [PerspectiveCone(i, float(self.split.d[i])) for i in range(self.n)]
            if self.pair_mode == "conic":
                out += [PairConic(i, j, w) for i, j, w in self.strengthened]
            elif self.pair_mode in ("f", "g"):
                out += [HullEpigraph(i, j, w, self.pair_mode) for i, j, w in self.strengthened]
            out.append(QuadEpigraph("tq", self.rest_laplacian))
        if np.any(self.split.R):
            out.append(Residual(self.split.R))
        return out

    def to_original_y(self, yh: np.ndarray) -> np.ndarray:
        return np.where(self.ymax > 0, yh * self.scale, 0.0)


# --- building --------------------------------------------------------------

def quad_split(inst: Instance, scale: np.ndarray, residual_diag=None) -> QuadSplit:
    A = inst.Q * np.outer(scale, scale)
    if is_m_matrix(A):
        dec = decompose(A)
        qbar = dec.diag_weights
        return QuadSplit(QM=A, R=np.zeros_like(A), d=np.maximum(qbar, 0.0),
                         e=np.minimum(qbar, 0.0), pairs=dec.neg_pairs, general=False)
    if residual_diag is None and "residual_diag" in inst.meta:
        residual_diag = np.asarray(inst.meta["residual_diag"], dtype=float)
    if residual_diag is None:
        off = np.abs(A - np.diag(np.diag(A))).sum(axis=1)
        ups = np.maximum(np.diag(A) - off, 0.0)
    else:
        ups = np.asarray(residual_diag, dtype=float) * scale * scale
    Qm, R, ok = extract_m_part(A, ups)
    if not ok:
        raise FormulationError("residual A - Q - diag(v) is not positive semidefinite")
    pairs = [(i, j, float(-Qm[i, j])) for i in range(inst.n) for j in range(i + 1, inst.n)
             if -Qm[i, j] > 1e-12]
    return QuadSplit(QM=Qm + np.diag(ups), R=R, d=ups.copy(), e=np.zeros(inst.n),
                     pairs=pairs, general=True)


def _select_pairs(pairs, pair_subset):
    if pair_subset is None:
        return tuple(pairs)
    if isinstance(pair_subset, int):
        ranked = sorted(pairs, key=lambda p: (-p[2], p[0], p[1]))[:pair_subset]
        return tuple(sorted(ranked, key=lambda p: (p[0], p[1])))
    wanted = {(min(i, j), max(i, j)) for i, j in pair_subset}
    return tuple(p for p in pairs if (p[0], p[1]) in wanted)


def build(inst: Instance, kind, residual_diag=None, pair_subset=None,
          pool_capacity: Optional[int] = None) -> ConvexProgram:
    """Relaxation of ``inst`` for formulation ``kind``.

    ``pair_subset`` restricts the strengthened pair terms: ``None`` for all
    negative pairs, an int ``k`` for the ``k`` heaviest, or explicit ``(i, j)``
    index pairs; remaining pairs stay as a plain quadratic.
    """
    kind = FormulationKind.parse(kind)
    n = inst.n
    ymax = (inst.u > 0).astype(float)
    scale = np.where(np.isfinite(inst.u) & (inst.u > 0), inst.u, 1.0)
    if np.any(~np.isfinite(inst.u)):
        raise FormulationError("links y <= u x need finite u; box the instance first")
    split = quad_split(inst, scale, residual_diag)
    if kind != FormulationKind.BASIC and split.general and not np.any(split.d > 0) \
            and kind == FormulationKind.PERSPECTIVE:
        raise FormulationError("no diagonal to extract for the perspective split")
    if kind == FormulationKind.BINARY_MINCUT_LP and split.general:
        raise FormulationError("the binary min-cut bound needs an M-matrix instance")
    cons = tuple(LinearConstraint(c.coeffs_x, c.coeffs_y * scale, c.sense, c.rhs)
                 for c in inst.constraints)
    strengthened = _select_pairs(split.pairs, pair_subset) if kind not in (
        FormulationKind.BASIC, FormulationKind.PERSPECTIVE, FormulationKind.BINARY_MINCUT_LP) else ()
    cap = 5 * n if pool_capacity is None else pool_capacity
    return ConvexProgram(kind=kind, n=n, cx=inst.a.copy(), cy=inst.b * scale,
                         constant=inst.constant, scale=scale, ymax=ymax, split=split,
                         strengthened=strengthened, constraints=cons, pool_capacity=cap,
                         name=inst.name)


def with_fixings(prog: ConvexProgram, fixings: np.ndarray) -> ConvexProgram:
    return replace(prog, fixings=np.asarray(fixings, dtype=float))


# --- cut pool --------------------------------------------------------------

def add_cut(prog: ConvexProgram, cut: Cut) -> ConvexProgram:
    """Append ``cut``; when the pool is full the least often tight cut is evicted."""
    keys = set(prog.epigraph_keys())
    unknown = set(cut.coeff_t) - keys
    if unknown:
        raise FormulationError(f"cut references unknown epigraph terms {sorted(unknown)}")
    cuts = list(prog.cuts)
    act = list(prog.cut_activity) or [0] * len(cuts)
    if prog.pool_capacity and len(cuts) >= prog.pool_capacity:
        drop = int(np.argmin(act))
        del cuts[drop]
        del act[drop]
    return replace(prog, cuts=tuple(cuts) + (cut,), cut_activity=tuple(act) + (0,))


def record_activity(prog: ConvexProgram, point: Point, tol: float = 1e-6) -> ConvexProgram:
    act = list(prog.cut_activity) or [0] * len(prog.cuts)
    for k, cut in enumerate(prog.cuts):
        if abs(cut.violation(point.x, point.y, point.t)) <= tol:
            act[k] += 1
    return replace(prog, cut_activity=tuple(act))


def _candidate_cuts(prog: ConvexProgram, point: Point, mode: str) -> List[Cut]:
    x, y = point.x, np.minimum(point.y, point.x)
    n = prog.n
    out = []
    if prog.pair_mode:
        for i, j, _ in prog.strengthened:
            cut = hulls.pair_cut(n, i, j, x, y, mode)
            if cut is not None:
                out.append(cut)
    dec = prog.split.decomposition()
    agg = hulls.aggregate_subgrad_cut(dec, x, y, mode)
    if agg is not None:
        out.append(agg)
    out.append(hulls.polymatroid_cut(prog.split.QM, hulls.greedy_order(y)))
    return out


def separate(prog: ConvexProgram, point: Point, budget: Optional[int] = None,
             mode: str = "g", tol: float = VIOLATION_TOL) -> List[Cut]:
    """Violated cuts at ``point`` in decreasing order of violation."""
    scored = []
    for k, cut in enumerate(_candidate_cuts(prog, point, mode)):
        v = cut.violation(point.x, point.y, point.t)
        if v > tol:
            scored.append((-v, k, cut))
    scored.sort(key=lambda s: (s[0], s[1]))
    cuts = [c for _, _, c in scored]
    return cuts if budget is None else cuts[:budget]


# --- textual dump ----------------------------------------------------------

def _num(v):
    return float(v)


def program_to_dict(prog: ConvexProgram) -> dict:
    terms = []
    for t in prog.terms():
        if isinstance(t, Box):
            terms.append({"type": "box", "var": t.var, "lo": t.lo, "hi": t.hi})
        elif isinstance(t, Linear):
            c = t.constraint
            terms.append({"type": "linear", "cx": c.coeffs_x.tolist(), "cy": c.coeffs_y.tolist(),
                          "sense": c.sense, "rhs": _num(c.rhs)})
        elif isinstance(t, PerspectiveCone):
            terms.append({"type": "perspective_cone", "i": t.i, "weight": t.weight})
        elif isinstance(t, QuadEpigraph):
            terms.append({"type": "quad_epigraph", "key": t.key, "matrix": t.matrix.tolist()})
        elif isinstance(t, PairConic):
            terms.append({"type": "pair_conic", "i": t.i, "j": t.j, "weight": t.weight})
        elif isinstance(t, HullEpigraph):
            terms.append({"type": "hull_epigraph", "i": t.i, "j": t.j, "weight": t.weight,
                          "mode": t.mode})
        elif isinstance(t, Residual):
            terms.append({"type": "residual", "matrix": t.matrix.tolist()})
    return {
        "name": prog.name,
        "kind": prog.kind.value,
        "n": prog.n,
        "objective": {"x": prog.cx.tolist(), "y": prog.cy.tolist(), "tq": 1.0,
                      "constant": _num(prog.constant),
                      "z": prog.split.d.tolist() if prog.uses_perspective else [],
                      "y_linearized": prog.split.e.tolist() if prog.uses_perspective else []},
        "y_scale": prog.scale.tolist(),
        "terms": terms,
        "cuts": [{"cx": c.coeffs_x.tolist(), "cy": c.coeffs_y.tolist(), "ct": dict(c.coeff_t),
                  "rhs": _num(c.rhs), "tag": c.tag} for c in prog.cuts],
    }


def dump_program(prog: ConvexProgram) -> str:
    return json.dumps(program_to_dict(prog), indent=1, sort_keys=True) + "\n"


# --- evaluation at integer completions ---------------------------------------

def completion(prog: ConvexProgram, x, yh) -> Point:
    """Epigraph values that make ``(x, yh)`` tight: ``z = yh^2``, ``t_ij = (yh_i - yh_j)^2``."""
    x = np.asarray(x, dtype=float)
    yh = np.asarray(yh, dtype=float)
    t = {"tq": float(yh @ prog.split.QM @ yh)}
    for i in range(prog.n):
        t[f"z:{i}"] = float(yh[i] ** 2 / x[i]) if x[i] > 0 else 0.0
    for i, j, _ in prog.split.pairs:
        t[hulls.pair_key(i, j)] = float((yh[i] - yh[j]) ** 2)
    return Point(x=x, y=yh, t=t)


def tq_expression(prog: ConvexProgram, point: Point) -> float:
    """Lower bound on ``tq`` imposed by the formulation at ``point``."""
    y = point.y
    s = prog.split
    if prog.kind == FormulationKind.BASIC:
        return float(y @ s.QM @ y)
    if prog.kind == FormulationKind.BINARY_MINCUT_LP:
        x = point.x
        return float((s.d + s.e) @ x + sum(w * abs(x[i] - x[j]) for i, j, w in s.pairs))
    z = np.array([point.t[f"z:{i}"] for i in range(prog.n)])
    val = float(s.d @ z + s.e @ y + y @ prog.rest_laplacian @ y)
    for i, j, w in prog.strengthened:
        val += w * point.t[hulls.pair_key(i, j)]
    return val


def program_objective(prog: ConvexProgram, point: Point) -> float:
    """Objective of ``prog`` at ``point`` with ``tq`` set to its formulation lower bound."""
    y = point.y
    return float(prog.constant + prog.cx @ point.x + prog.cy @ y + tq_expression(prog, point)
                 + y @ prog.split.R @ y)


def scale_y(prog: ConvexProgram, y) -> np.ndarray:
    """Original continuous values -> program variables."""
    return np.where(prog.ymax > 0, np.asarray(y, dtype=float) / prog.scale, 0.0)
