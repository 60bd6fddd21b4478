import numpy as np
import pytest

from conftest import random_instance
from mmiqp.bnb import (CSV_HEADER, INFEASIBLE, LIMIT, OPTIMAL, SolveConfig, compare, gap_pct,
                       parse_kind, propagate, rows_to_csv, solve, _x_rows)
from mmiqp.core import Instance, LinearConstraint
from mmiqp.formulations import FormulationKind
from mmiqp.instances import gen_mrf, gen_portfolio
from mmiqp.oracle import brute_force_miqp

ONE = Instance("one", [1.0], [-2.0], [[2.0]], [1.0])
KINDS = ["basic", "perspective", "conic", "hullg"]


@pytest.mark.parametrize("kind", KINDS)
def test_n1_optimum_zero(kind):
    rep = solve(ONE, kind)
    assert rep.status == OPTIMAL
    assert rep.incumbent_value == pytest.approx(0.0, abs=1e-7)
    assert rep.incumbent_point.x.tolist() == [0.0]


def test_sign_argument():
    inst = Instance("s", [-1.0, 0.5, -0.2], [0.1, 0.0, 2.0], np.eye(3) * 2, [1.0, 1.0, 1.0])
    rep = solve(inst, "conic")
    assert rep.incumbent_value == pytest.approx(-1.2, abs=1e-7)
    assert np.allclose(rep.incumbent_point.x, [1, 0, 1]) and np.allclose(rep.incumbent_point.y, 0)


@pytest.mark.parametrize("kind", KINDS)
def test_matches_brute_force(kind):
    rng = np.random.default_rng(7)
    for k in range(4):
        inst = random_instance(rng, 6, kind=("box", "card", "budget", "box")[k])
        _, _, opt = brute_force_miqp(inst)
        rep = solve(inst, kind)
        assert rep.status == OPTIMAL
        assert rep.incumbent_value == pytest.approx(opt, abs=1e-6)
        assert rep.best_bound <= rep.incumbent_value + 1e-6


def test_portfolio_complements():
    inst = gen_portfolio(4, 0.9, seed=3)
    rep = solve(inst, "conic")
    x = rep.incumbent_point.x
    assert np.all(x[0::2] + x[1::2] <= 1)
    assert rep.incumbent_value == pytest.approx(brute_force_miqp(inst)[2], abs=1e-6)


def test_tie_break_invariance():
    inst = random_instance(np.random.default_rng(11), 8, kind="card")
    base = solve(inst, "perspective").incumbent_value
    for seed in range(3):
        assert solve(inst, "perspective", tie_seed=seed).incumbent_value == pytest.approx(base, abs=1e-7)


def test_node_bounds_monotone():
    inst = random_instance(np.random.default_rng(5), 8, kind="card")
    rep = solve(inst, "basic")
    assert rep.nodes > 1
    assert len(rep.node_bounds) == rep.nodes
    for _, parent, raw in rep.node_bounds:
        assert raw >= parent - 1e-6


def test_cuts_never_lower_root():
    inst = gen_mrf(3, seed=2)
    rep = solve(inst, "conic", cuts=True)
    assert rep.root_bound_after_cuts >= rep.root_bound_before_cuts - 1e-7
    assert rep.status == OPTIMAL


def test_node_limit():
    inst = random_instance(np.random.default_rng(5), 10, kind="card")
    rep = solve(inst, "basic", node_limit=1)
    assert rep.status == LIMIT and rep.nodes == 1
    assert rep.best_bound <= rep.incumbent_value


def test_infeasible():
    inst = Instance("inf", [0.0, 0.0], [0.0, 0.0], np.eye(2), [1.0, 1.0],
                    (LinearConstraint([1.0, 1.0], [0.0, 0.0], "ge", 3.0),))
    assert solve(inst, "conic").status == INFEASIBLE


def test_propagate():
    rows = _x_rows(Instance("p", [0.0] * 3, [0.0] * 3, np.eye(3), [1.0] * 3,
                            (LinearConstraint([1.0, 1.0, 0.0], [0.0] * 3, "le", 1.0),
                             LinearConstraint([0.0, 1.0, 1.0], [0.0] * 3, "ge", 1.0))))
    fix = propagate(rows, np.array([1.0, -1.0, -1.0]))
    assert fix.tolist() == [1.0, 0.0, 1.0]
    assert propagate(rows, np.array([1.0, 1.0, -1.0])) is None


def test_gap_and_labels():
    assert gap_pct(10.0, 5.0) == pytest.approx(50.0)
    assert gap_pct(0.0, -1.0) == 0.0
    assert gap_pct(11.0, 5.0, offset=1.0) == pytest.approx(60.0)
    assert parse_kind("conic+cuts") == (FormulationKind.CONIC, True)
    assert parse_kind("hullg") == (FormulationKind.HULL_G, False)


def test_compare_rows_and_csv():
    insts = [Instance("diag", [1.0, 0.5], [-3.0, -2.0], np.diag([2.0, 1.0]), [1.0, 1.0])]
    rows = compare(insts, ["basic", "perspective", "conic"])
    by = {r.kind: r for r in rows}
    assert by["perspective"].rimp == pytest.approx(100.0, abs=1e-4)
    assert by["conic"].rimp == pytest.approx(100.0, abs=1e-4)
    text = rows_to_csv(rows)
    assert text.splitlines()[0] == ",".join(CSV_HEADER)
    assert len(text.splitlines()) == 4


def test_compare_motif_hierarchy():
    motif = Instance("motif", [1.0, 1.0], [-2.0, -2.0], [[1.0, -1.0], [-1.0, 1.0]], [1.0, 1.0])
    by = {r.kind: r for r in compare([motif], ["perspective", "conic"])}
    assert by["conic"].rimp >= by["perspective"].rimp - 1e-6


def test_report_reproducible():
    inst = gen_mrf(3, seed=4)
    a, b = solve(inst, "conic"), solve(inst, "conic")
    assert (a.incumbent_value, a.best_bound, a.nodes) == (b.incumbent_value, b.best_bound, b.nodes)


def test_config_object():
    cfg = SolveConfig(cuts=True, cut_rounds=2)
    rep = solve(gen_mrf(2, seed=1), "conic", cfg)
    assert rep.kind == "conic+cuts"


def test_csv_no_negative_zero():
    from mmiqp.bnb import CompareRow
    row = CompareRow("i", "conic", 1.0, -1e-9, 3, 0.01, -0.0, "optimal").as_list()
    assert row[3] == "0.0000" and row[6] == "0.0000"
