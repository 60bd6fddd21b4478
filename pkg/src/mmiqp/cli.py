"""Command-line front end: ``mmiqp generate|solve|bound|compare|verify``."""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import bnb, formulations as fm, hulls, instances, oracle
from .core import InstanceError, read_instance, write_instance
from .mmatrix import is_m_matrix, is_psd
from .relax import CompiledProgram

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_LIMIT = 4

SOLVE_KINDS = ["basic", "perspective", "conic", "hullg", "hullf", "conic+cuts", "mincut"]


class UsageError(Exception):
    pass


def _kind(label: str):
    try:
        return bnb.parse_kind(label)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _load(path):
    try:
        return read_instance(path)
    except (OSError, InstanceError, ValueError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


def cmd_generate(args) -> int:
    fam = args.family
    if fam == "mrf":
        if args.grid is None or args.n is not None:
            raise UsageError("mrf needs --grid K (and no --n)")
        if any(v is not None for v in (args.beta, args.rho, args.delta)):
            raise UsageError("--beta/--rho/--delta do not apply to mrf")
        inst = instances.gen_mrf(args.grid, args.seed, raw_fixed_cost=args.raw_fixed_cost)
    elif args.raw_fixed_cost:
        raise UsageError("--raw-fixed-cost applies to mrf only")
    elif fam == "portfolio":
        if args.n is None or args.grid is not None or args.beta is None:
            raise UsageError("portfolio needs --n N --beta B")
        if args.rho is not None or args.delta is not None:
            raise UsageError("--rho/--delta do not apply to portfolio")
        inst = instances.gen_portfolio(args.n, args.beta, args.seed, k_card=args.k_card)
    else:
        if args.n is None or args.grid is not None or args.beta is not None:
            raise UsageError("factor needs --n N [--rho R --delta D]")
        rho = 0.0 if args.rho is None else args.rho
        delta = 1.0 if args.delta is None else args.delta
        inst = instances.gen_factor(args.n, rho, delta, args.seed, k_card=args.k_card,
                                    r_frac=args.r_frac)
    write_instance(inst, args.out)
    print(f"generated {fam} n={inst.n} seed={args.seed}")
    return EXIT_OK


def _config(args) -> bnb.SolveConfig:
    cfg = bnb.SolveConfig()
    if args.tol is not None:
        cfg.tol = args.tol
    if args.time_limit is not None:
        cfg.time_limit = args.time_limit
    if getattr(args, "node_limit", None) is not None:
        cfg.node_limit = args.node_limit
    return cfg


def _append_csv(path, rows):
    p = Path(path)
    header = not p.exists() or p.stat().st_size == 0
    with open(p, "a", encoding="utf-8") as fh:
        fh.write(bnb.rows_to_csv(rows, header=header))


def cmd_solve(args) -> int:
    kind, cuts = _kind(args.formulation)
    inst = _load(args.file)
    cfg = _config(args)
    cfg.cuts = cuts or args.cuts
    if args.dump_model:
        Path(args.dump_model).write_text(fm.dump_program(fm.build(inst, kind)), encoding="utf-8")
    rep = bnb.solve(inst, kind, cfg)
    if rep.status == bnb.INFEASIBLE:
        print("infeasible: no indicator assignment admits a feasible point")
        return EXIT_INFEASIBLE
    print(f"value={rep.incumbent_value:.10g} bound={rep.best_bound:.10g} gap={rep.gap_pct:.4f}% "
          f"nodes={rep.nodes} time={rep.wall_time:.3f}s")
    if args.report:
        row = bnb.CompareRow(inst.name, rep.kind, rep.igap, rep.rimp, rep.nodes, rep.wall_time,
                             max(rep.gap_pct, 0.0) if rep.status != bnb.OPTIMAL else 0.0, rep.status)
        _append_csv(args.report, [row])
    return EXIT_LIMIT if rep.status == bnb.LIMIT else EXIT_OK


def cmd_bound(args) -> int:
    kind, cuts = _kind(args.formulation)
    inst = _load(args.file)
    rep_cuts = cuts or args.cuts
    prog = fm.build(inst, kind)
    comp = CompiledProgram(prog)
    res = comp.solve(None)
    if res.status == "infeasible":
        print("infeasible relaxation")
        return EXIT_INFEASIBLE
    if rep_cuts and res.ok:
        for _ in range(20):
            cuts_found = fm.separate(prog, res.point, budget=max(1, prog.n))
            if not cuts_found:
                break
            for c in cuts_found:
                prog = fm.add_cut(prog, c)
            res = CompiledProgram(prog).solve(None)
    print(f"bound={res.bound:.10g}")
    return EXIT_OK


def cmd_compare(args) -> int:
    labels = [s for s in args.formulations.split(",") if s]
    for lab in labels:
        _kind(lab)
    insts = [_load(f) for f in args.files]
    rows = bnb.compare(insts, labels, _config(args))
    text = bnb.rows_to_csv(rows)
    if args.csv:
        Path(args.csv).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_LIMIT if any(r.status == bnb.LIMIT for r in rows) else EXIT_OK


def verify_instance(inst, use_oracle: bool = False, seed: int = 0, samples: int = 200):
    """Invariant checks; returns a list of ``(name, ok, detail)``."""
    out = []
    rng = np.random.default_rng(seed)
    fam = inst.meta.get("family")
    mcheck = is_m_matrix(inst.Q)
    if fam in ("mrf", "portfolio") or (fam == "factor" and inst.meta.get("params", {}).get("rho", 1) == 0):
        out.append(("m-matrix", bool(mcheck), f"min eigenvalue {mcheck.min_eigenvalue:.3g}"))
    else:
        out.append(("psd", is_psd(inst.Q), ""))
    prog = fm.build(inst, "conic")
    worst = 0.0
    pts = []
    for _ in range(samples):
        x = rng.integers(0, 2, inst.n).astype(float)
        y = rng.uniform(0, 1, inst.n) * inst.u * x
        pt = fm.completion(prog, x, fm.scale_y(prog, y))
        pts.append(pt)
        if np.all(prog.split.e == 0):
            worst = max(worst, abs(fm.program_objective(prog, pt) - inst.objective(x, y)))
    out.append(("reconstruction", worst <= 1e-8 * (1 + abs(inst.Q).max()), f"max |diff| {worst:.3g}"))
    res = CompiledProgram(prog).solve(None)
    cut_ok = True
    ncuts = 0
    if res.ok:
        cuts = fm.separate(prog, res.point)
        cuts.append(hulls.polymatroid_cut(prog.split.QM, hulls.greedy_order(res.point.y)))
        ncuts = len(cuts)
        for c in cuts:
            for pt in pts:
                if c.violation(pt.x, pt.y, pt.t) > 1e-8 * (1 + c.max_abs_coeff()):
                    cut_ok = False
    out.append(("cut-validity", cut_ok, f"{ncuts} cuts x {len(pts)} points"))
    if use_oracle:
        _, _, val = oracle.brute_force_miqp(inst)
        rep = bnb.solve(inst, "conic")
        d = abs(rep.incumbent_value - val) if math.isfinite(val) else (0.0 if rep.status == bnb.INFEASIBLE else math.inf)
        out.append(("oracle", d <= 1e-6, f"bnb={rep.incumbent_value:.10g} oracle={val:.10g} |delta|={d:.3g}"))
    return out


def cmd_verify(args) -> int:
    inst = _load(args.file)
    if args.oracle and oracle.oracle_size(inst) > oracle.MAX_ORACLE_SIZE:
        raise UsageError(f"--oracle needs at most {oracle.MAX_ORACLE_SIZE} indicator choices")
    checks = verify_instance(inst, use_oracle=args.oracle)
    ok = True
    for name, passed, detail in checks:
        print(f"{name}: {'ok' if passed else 'FAIL'} {detail}".rstrip())
        ok &= passed
    print("OK" if ok else "FAILED")
    return EXIT_OK if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mmiqp", description=__doc__)
    sub = p.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("generate", help="write a seeded benchmark instance")
    g.add_argument("--family", required=True, choices=["mrf", "portfolio", "factor"])
    g.add_argument("--grid", type=int)
    g.add_argument("--n", type=int)
    g.add_argument("--beta", type=float)
    g.add_argument("--rho", type=float)
    g.add_argument("--delta", type=float)
    g.add_argument("--k-card", type=int, dest="k_card")
    g.add_argument("--r-frac", type=float, dest="r_frac", default=0.25)
    g.add_argument("--raw-fixed-cost", action="store_true", dest="raw_fixed_cost",
                   help="mrf only: fixed cost a_i = unscaled draw (nontrivial optima)")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    def solve_flags(sp):
        sp.add_argument("--tol", type=float)
        sp.add_argument("--time-limit", type=float, dest="time_limit")
        sp.add_argument("--node-limit", type=int, dest="node_limit")

    s = sub.add_parser("solve", help="branch-and-bound solve")
    s.add_argument("file")
    s.add_argument("--formulation", required=True)
    s.add_argument("--cuts", action="store_true")
    s.add_argument("--report")
    s.add_argument("--dump-model", dest="dump_model")
    s.add_argument("--threads", type=int, default=1)
    solve_flags(s)
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bound", help="root relaxation bound")
    b.add_argument("file")
    b.add_argument("--formulation", required=True)
    b.add_argument("--cuts", action="store_true")
    b.set_defaults(func=cmd_bound)

    c = sub.add_parser("compare", help="CSV table over instances and formulations")
    c.add_argument("files", nargs="+")
    c.add_argument("--formulations", required=True)
    c.add_argument("--csv")
    solve_flags(c)
    c.set_defaults(func=cmd_compare)

    v = sub.add_parser("verify", help="invariant checks, optionally against the enumeration oracle")
    v.add_argument("file")
    v.add_argument("--oracle", action="store_true")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except fm.FormulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
