import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mmiqp.core import (Cut, Instance, InstanceError, LinearConstraint, dumps_instance,
                        instance_from_dict, instances_equal, read_instance, safe_div,
                        safe_div_array, write_instance)
from mmiqp.instances import gen_portfolio


def test_safe_div_examples():
    assert safe_div(0, 0) == 0
    assert safe_div(3, 0) == math.inf
    assert safe_div(1, 4) == 0.25


def test_safe_div_rejects_negative():
    with pytest.raises(ValueError):
        safe_div(-1, 2)
    with pytest.raises(ValueError):
        safe_div_array(np.array([1.0]), np.array([-1.0]))


@given(st.floats(0, 10), st.floats(0, 10), st.floats(0, 10))
def test_safe_div_monotone(num, d1, d2):
    lo, hi = sorted((d1, d2))
    assert safe_div(num, hi) <= safe_div(num, lo)
    assert safe_div(num, lo) <= safe_div(num + 1.0, lo)


def test_safe_div_array_matches_scalar():
    num = np.array([0.0, 3.0, 1.0])
    den = np.array([0.0, 0.0, 4.0])
    assert safe_div_array(num, den).tolist() == [0.0, math.inf, 0.25]


def _minimal():
    return {"name": "m", "n": 1, "a": [1], "b": [-2], "Q": [[2]], "u": [1], "constraints": []}


def test_minimal_file(tmp_path):
    p = tmp_path / "m.json"
    p.write_text(json.dumps(_minimal()))
    inst = read_instance(p)
    assert inst.n == 1 and inst.a.tolist() == [1.0] and inst.b.tolist() == [-2.0]
    assert inst.Q.tolist() == [[2.0]]


def test_asymmetric_q_rejected():
    d = {"name": "m", "n": 2, "a": [0, 0], "b": [0, 0], "Q": [[1, 0.5], [0.2, 1]], "u": [1, 1]}
    with pytest.raises(InstanceError, match="symmetric"):
        instance_from_dict(d)


@pytest.mark.parametrize("key,value", [("a", [1, 2]), ("b", "x"), ("Q", [[1, 2]]), ("u", ["bad"]),
                                       ("n", 0), ("name", 3)])
def test_schema_errors_name_field(key, value):
    d = _minimal()
    d[key] = value
    with pytest.raises(InstanceError, match=repr(key)):
        instance_from_dict(d)


def test_bad_constraint_sense():
    d = _minimal()
    d["constraints"] = [{"cx": [1], "cy": [0], "sense": "lt", "rhs": 1}]
    with pytest.raises(InstanceError, match="constraints\\[0\\].sense"):
        instance_from_dict(d)


def test_negative_u_rejected():
    with pytest.raises(InstanceError, match="'u'"):
        Instance("x", [0.0], [0.0], [[1.0]], [-1.0])


def test_portfolio_round_trip(tmp_path):
    inst = gen_portfolio(6, 0.9, seed=4)
    p = tmp_path / "p.json"
    write_instance(inst, p)
    assert instances_equal(inst, read_instance(p))


def test_infinity_survives(tmp_path):
    inst = Instance("inf", [1.0, 0.0], [0.0, -1.0], np.eye(2), [math.inf, 2.0],
                    (LinearConstraint([1.0, 1.0], [0.0, 0.0], "le", math.inf),))
    text = dumps_instance(inst)
    assert '"inf"' in text
    p = tmp_path / "i.json"
    write_instance(inst, p)
    back = read_instance(p)
    assert back.u[0] == math.inf and back.constraints[0].rhs == math.inf


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 5).flatmap(lambda n: st.tuples(
    st.just(n), st.lists(finite, min_size=n, max_size=n), st.lists(finite, min_size=n, max_size=n),
    st.lists(finite, min_size=n * n, max_size=n * n),
    st.lists(st.floats(0, 1e6), min_size=n, max_size=n))))
def test_round_trip_identity(data):
    n, a, b, q, u = data
    Q = np.array(q).reshape(n, n)
    Q = np.triu(Q) + np.triu(Q, 1).T
    inst = Instance("h", a, b, Q, u, (LinearConstraint(a, b, "ge", 1.5),), {"seed": 3})
    back = instance_from_dict(json.loads(dumps_instance(inst)))
    assert instances_equal(inst, back)


def test_linear_constraint_violation():
    c = LinearConstraint([1.0, 0.0], [0.0, 2.0], "ge", 3.0)
    assert c.violation(np.array([1.0, 0.0]), np.array([0.0, 0.5])) == pytest.approx(1.0)
    assert not c.x_only
    assert LinearConstraint([1.0], [0.0], "le", 1.0).x_only


def test_cut_requires_finite():
    with pytest.raises(ValueError):
        Cut(np.array([math.inf]), np.zeros(1), {"tq": -1.0}, 0.0)
    cut = Cut(np.array([1.0]), np.array([2.0]), {"tq": -1.0}, 0.5)
    assert cut.violation(np.array([1.0]), np.array([1.0]), {"tq": 2.0}) == pytest.approx(0.5)


def test_objective_and_feasibility():
    inst = Instance("o", [1.0], [-2.0], [[2.0]], [1.0], meta={"objective_constant": 0.5})
    assert inst.objective(np.array([1.0]), np.array([0.5])) == pytest.approx(1.0)
    assert inst.is_feasible(np.array([1.0]), np.array([0.5]))
    assert not inst.is_feasible(np.array([0.0]), np.array([0.5]))
