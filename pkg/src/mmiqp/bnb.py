"""Branch-and-bound over the indicator variables.

Node relaxations are the parametric programs from :mod:`relax`; cuts are only
separated at the root.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from . import formulations as fm
from .core import Instance, Point
from .relax import CompiledProgram, rimp as rimp_pct, solve_fixed_x

OPTIMAL = "optimal"
LIMIT = "limit"
INFEASIBLE = "infeasible"
CSV_HEADER = ["instance", "kind", "igap", "rimp", "nodes", "time_s", "egap", "status"]


@dataclass
class SolveConfig:
    tol: float = 1e-7
    time_limit: float = math.inf
    node_limit: int = 1_000_000
    cuts: bool = False
    cut_rounds: int = 20
    cut_budget: Optional[int] = None
    int_tol: float = 1e-5
    dive_every: int = 10
    tie_seed: Optional[int] = None
    solver: str = "CLARABEL"
    pair_subset: object = None


@dataclass
class SolveReport:
    instance: str
    kind: str
    status: str
    incumbent_value: float
    best_bound: float
    gap_pct: float
    nodes: int
    root_bound_before_cuts: float
    root_bound_after_cuts: float
    rimp: float
    wall_time: float
    incumbent_point: Optional[Point]
    basic_root_bound: float = math.nan
    cuts_added: int = 0
    # (depth, parent bound, relaxation bound) per processed node
    node_bounds: List[tuple] = field(default_factory=list, repr=False)

    gap_offset: float = 0.0

    @property
    def igap(self) -> float:
        return gap_pct(self.incumbent_value, self.basic_root_bound, self.gap_offset)


def gap_pct(inc: float, bound: float, offset: float = 0.0) -> float:
    """``100 (inc - bound) / |inc - offset|``; ``offset`` removes a reporting constant."""
    inc = inc - offset
    bound = bound - offset
    if not math.isfinite(inc) or not math.isfinite(bound):
        return math.inf
    if abs(inc) <= 1e-12:
        return 0.0
    return 100.0 * (inc - bound) / abs(inc)


def kind_label(kind, cuts: bool) -> str:
    kind = fm.FormulationKind.parse(kind)
    if kind == fm.FormulationKind.CONIC_CUTS:
        return kind.value
    return kind.value + ("+cuts" if cuts else "")


def parse_kind(label: str):
    """``"basic+cuts"`` -> ``(BASIC, True)``; ``"conic+cuts"`` is Conic with cuts."""
    label = label.strip().lower()
    cuts = label.endswith("+cuts")
    base = label[:-5] if cuts else label
    kind = fm.FormulationKind.parse(base)
    return kind, cuts


# --- propagation of indicator-only rows ----------------------------------------

def _x_rows(inst: Instance):
    rows = []
    for c in inst.constraints:
        if not c.x_only:
            continue
        if c.sense in ("le", "eq"):
            rows.append((c.coeffs_x, c.rhs))
        if c.sense in ("ge", "eq"):
            rows.append((-c.coeffs_x, -c.rhs))
    return rows


def propagate(rows, fix: np.ndarray) -> Optional[np.ndarray]:
    """Fix indicators forced by ``cx'x <= rhs`` rows; ``None`` when infeasible."""
    fix = fix.copy()
    changed = True
    while changed:
        changed = False
        for cx, rhs in rows:
            free = fix < 0
            minact = float(cx[fix == 1].sum() + cx[free & (cx < 0)].sum())
            if minact > rhs + 1e-9:
                return None
            for j in np.flatnonzero(free & (np.abs(cx) > 0)):
                if minact + abs(cx[j]) > rhs + 1e-9:
                    fix[j] = 0 if cx[j] > 0 else 1
                    changed = True
            if changed:
                break
    return fix


# --- the search -------------------------------------------------------------------

@dataclass
class _Node:
    bound: float
    fix: np.ndarray
    depth: int
    order: int


class _Search:
    def __init__(self, inst: Instance, cfg: SolveConfig):
        self.inst = inst
        self.cfg = cfg
        self.rows = _x_rows(inst)
        self.inc_value = math.inf
        self.inc_x: Optional[np.ndarray] = None
        self.inc_y: Optional[np.ndarray] = None
        self.rng = np.random.default_rng(cfg.tie_seed) if cfg.tie_seed is not None else None
        self._tried: Dict[bytes, float] = {}

    def try_x(self, x: np.ndarray) -> float:
        x = np.round(x).astype(float)
        key = x.astype(np.int8).tobytes()
        if key in self._tried:
            return self._tried[key]
        if propagate(self.rows, x) is None:
            self._tried[key] = math.inf
            return math.inf
        res = solve_fixed_x(self.inst, x)
        val = res.value if res.feasible else math.inf
        self._tried[key] = val
        if val < self.inc_value:
            self.inc_value, self.inc_x, self.inc_y = val, x, res.y
        return val

    def branch_var(self, x: np.ndarray, fix: np.ndarray) -> Optional[int]:
        free = np.flatnonzero(fix < 0)
        if free.size == 0:
            return None
        frac = np.minimum(x[free], 1 - x[free])
        best = frac.max()
        if best <= self.cfg.int_tol:
            return None
        ties = free[frac >= best - 1e-12]
        if self.rng is not None and ties.size > 1:
            return int(self.rng.choice(ties))
        return int(ties[0])


def _root_cuts(prog, compiled, root, cfg, fix0):
    added = 0
    for _ in range(cfg.cut_rounds):
        if not root.ok:
            break
        budget = cfg.cut_budget if cfg.cut_budget is not None else max(1, prog.n)
        cuts = fm.separate(prog, root.point, budget=budget)
        if not cuts:
            break
        prog = fm.record_activity(prog, root.point)
        for c in cuts:
            prog = fm.add_cut(prog, c)
        added += len(cuts)
        compiled = CompiledProgram(prog)
        root = compiled.solve(fix0, solver=cfg.solver)
    return prog, compiled, root, added


def basic_root_bound(inst: Instance, solver: str = "CLARABEL") -> float:
    prog = fm.build(inst, fm.FormulationKind.BASIC)
    return CompiledProgram(prog).solve(None, solver=solver).bound


def solve(inst: Instance, kind="conic", config: Optional[SolveConfig] = None, **overrides) -> SolveReport:
    """Solve ``inst`` to optimality (within ``tol``) with the ``kind`` relaxation."""
    cfg = replace(config or SolveConfig(), **overrides)
    if isinstance(kind, str) and kind.lower().endswith("+cuts") and kind.lower() != "conic+cuts":
        kind, with_cuts = parse_kind(kind)
        cfg = replace(cfg, cuts=True)
    kind = fm.FormulationKind.parse(kind)
    if kind == fm.FormulationKind.CONIC_CUTS:
        cfg = replace(cfg, cuts=True)
    t0 = time.perf_counter()
    search = _Search(inst, cfg)
    n = inst.n
    prog = fm.build(inst, kind, pair_subset=cfg.pair_subset)
    compiled = CompiledProgram(prog)
    fix0 = propagate(search.rows, -np.ones(n))
    label = kind_label(kind, cfg.cuts)
    basic = basic_root_bound(inst, cfg.solver) if kind != fm.FormulationKind.BASIC else None
    if fix0 is None:
        return _report(inst, label, INFEASIBLE, search, math.inf, 0, math.inf, math.inf, t0, basic)
    root = compiled.solve(fix0, solver=cfg.solver)
    before = root.bound
    added = 0
    if root.ok and cfg.cuts:
        prog, compiled, root, added = _root_cuts(prog, compiled, root, cfg, fix0)
    after = root.bound
    if basic is None:
        basic = before
    open_nodes: List[_Node] = []
    if root.status != "infeasible":
        open_nodes.append(_Node(-math.inf, fix0, 0, 0))
    counter = 1
    nodes = 0
    trace = []
    cached_root = root
    limited = False
    while open_nodes:
        if nodes >= cfg.node_limit or time.perf_counter() - t0 > cfg.time_limit:
            limited = True
            break
        dive = cfg.dive_every > 0 and nodes % cfg.dive_every == cfg.dive_every - 1
        if dive:
            k = max(range(len(open_nodes)), key=lambda i: (open_nodes[i].depth, open_nodes[i].order))
        else:
            k = min(range(len(open_nodes)), key=lambda i: (open_nodes[i].bound, open_nodes[i].order))
        node = open_nodes.pop(k)
        if node.bound >= search.inc_value - cfg.tol:
            continue
        nodes += 1
        res = cached_root if node.depth == 0 and cached_root is not None else compiled.solve(node.fix, solver=cfg.solver)
        cached_root = None
        if not res.ok:
            if res.status == "infeasible":
                continue
            # numerical trouble: fall back to the parent bound and keep branching
            res_bound, x = node.bound, None
        else:
            res_bound, x = res.bound, res.point.x
        nb = max(res_bound, node.bound)
        trace.append((node.depth, node.bound, res_bound))
        if x is not None:
            rounded = np.where(node.fix >= 0, node.fix, (x >= 0.5).astype(float))
            search.try_x(rounded)
        if nb >= search.inc_value - cfg.tol:
            continue
        if x is None:
            j = int(np.flatnonzero(node.fix < 0)[0]) if np.any(node.fix < 0) else None
        else:
            j = search.branch_var(x, node.fix)
            if j is None:
                xi = np.where(node.fix >= 0, node.fix, np.round(x))
                val = search.try_x(xi)
                if val <= nb + cfg.tol or not np.any(node.fix < 0):
                    continue
                # relaxation is not exact at this integral point: split further
                j = int(np.flatnonzero(node.fix < 0)[0])
        if j is None:
            continue
        for v in (0.0, 1.0):
            child = node.fix.copy()
            child[j] = v
            child = propagate(search.rows, child)
            if child is None:
                continue
            if np.all(child >= 0):
                search.try_x(child)
                continue
            open_nodes.append(_Node(nb, child, node.depth + 1, counter))
            counter += 1
    if limited:
        bound = min([nd.bound for nd in open_nodes] + [search.inc_value])
        status = LIMIT
    else:
        bound = search.inc_value
        status = OPTIMAL if math.isfinite(search.inc_value) else INFEASIBLE
    rep = _report(inst, label, status, search, bound, nodes, before, after, t0, basic)
    rep.cuts_added = added
    rep.node_bounds = trace
    return rep


def _report(inst, label, status, search, bound, nodes, before, after, t0, basic) -> SolveReport:
    inc = search.inc_value
    point = None
    if search.inc_x is not None:
        point = Point(x=search.inc_x, y=search.inc_y, t={})
    r = rimp_pct(basic, after, inc) if math.isfinite(inc) and basic is not None else math.nan
    off = float(inst.meta.get("gap_offset", 0.0))
    return SolveReport(instance=inst.name, kind=label, status=status, incumbent_value=inc,
                       best_bound=bound, gap_pct=gap_pct(inc, bound, off), nodes=nodes,
                       root_bound_before_cuts=before, root_bound_after_cuts=after, rimp=r,
                       wall_time=time.perf_counter() - t0, incumbent_point=point,
                       basic_root_bound=basic if basic is not None else math.nan, gap_offset=off)


# --- comparison tables ---------------------------------------------------------

@dataclass
class CompareRow:
    instance: str
    kind: str
    igap: float
    rimp: float
    nodes: int
    time_s: float
    egap: float
    status: str

    def as_list(self) -> list:
        def fmt(v, digits=4):
            s = f"{v:.{digits}f}"
            return s[1:] if s.startswith("-") and float(s) == 0 else s
        return [self.instance, self.kind, fmt(self.igap), fmt(self.rimp), str(self.nodes),
                fmt(self.time_s, 3), fmt(self.egap), self.status]


def compare(instances: Iterable[Instance], kinds: Sequence[str],
            config: Optional[SolveConfig] = None) -> List[CompareRow]:
    """One row per (instance, kind); ``obj_best`` is the best incumbent over all kinds."""
    rows = []
    for inst in instances:
        reports = [solve(inst, k, config) for k in kinds]
        best = min(r.incumbent_value for r in reports)
        basic = reports[0].basic_root_bound
        for rep in reports:
            rows.append(CompareRow(instance=inst.name, kind=rep.kind,
                                   igap=gap_pct(best, basic, rep.gap_offset),
                                   rimp=rimp_pct(basic, rep.root_bound_after_cuts, best),
                                   nodes=rep.nodes, time_s=rep.wall_time,
                                   egap=max(0.0, rep.gap_pct) if rep.status != OPTIMAL else 0.0,
                                   status=rep.status))
    return rows


def rows_to_csv(rows: Sequence[CompareRow], header: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(r.as_list())
    return buf.getvalue()
