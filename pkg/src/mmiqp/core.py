"""Domain types, instance file I/O and numeric conventions."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict

import numpy as np

ABS_TOL = 1e-9
SYM_TOL = 1e-12

SENSES = ("le", "ge", "eq")


class InstanceError(ValueError):
    """Raised when an instance file or object violates the schema."""


def safe_div(num: float, den: float) -> float:
    """Division with the conventions 0/0 = 0 and a/0 = inf for a > 0."""
    if num < 0 or den < 0:
        raise ValueError(f"safe_div expects nonnegative arguments, got ({num}, {den})")
    if den == 0:
        return 0.0 if num == 0 else math.inf
    return num / den


def safe_div_array(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """Elementwise :func:`safe_div` for arrays."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    if np.any(num < 0) or np.any(den < 0):
        raise ValueError("safe_div_array expects nonnegative arguments")
    out = np.zeros(np.broadcast(num, den).shape)
    num, den = np.broadcast_arrays(num, den)
    pos = den > 0
    out[pos] = num[pos] / den[pos]
    out[(~pos) & (num > 0)] = math.inf
    return out


@dataclass(frozen=True)
class LinearConstraint:
    """Row ``cx'x + cy'y (sense) rhs`` over the indicator and continuous vectors."""

    coeffs_x: np.ndarray
    coeffs_y: np.ndarray
    sense: str
    rhs: float

    def __post_init__(self):
        object.__setattr__(self, "coeffs_x", np.asarray(self.coeffs_x, dtype=float))
        object.__setattr__(self, "coeffs_y", np.asarray(self.coeffs_y, dtype=float))
        if self.sense not in SENSES:
            raise InstanceError(f"constraint sense must be one of {SENSES}, got {self.sense!r}")
        if self.coeffs_x.shape != self.coeffs_y.shape or self.coeffs_x.ndim != 1:
            raise InstanceError("constraint coefficient vectors must be 1-d and of equal length")

    def activity(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(self.coeffs_x @ x + self.coeffs_y @ y)

    def violation(self, x: np.ndarray, y: np.ndarray) -> float:
        lhs = self.activity(x, y)
        if self.sense == "le":
            return max(0.0, lhs - self.rhs)
        if self.sense == "ge":
            return max(0.0, self.rhs - lhs)
        return abs(lhs - self.rhs)

    @property
    def x_only(self) -> bool:
        return not np.any(self.coeffs_y)


@dataclass(frozen=True)
class Instance:
    """Minimize ``a'x + b'y + y'Qy + constant`` s.t. ``0 <= y <= u*x``, x binary, side rows."""

    name: str
    a: np.ndarray
    b: np.ndarray
    Q: np.ndarray
    u: np.ndarray
    constraints: tuple = ()
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        for key in ("a", "b", "u"):
            object.__setattr__(self, key, np.asarray(getattr(self, key), dtype=float))
        object.__setattr__(self, "Q", np.asarray(self.Q, dtype=float))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        n = self.a.shape[0] if self.a.ndim == 1 else -1
        if n < 1:
            raise InstanceError("field 'a' must be a nonempty vector")
        for key in ("b", "u"):
            if getattr(self, key).shape != (n,):
                raise InstanceError(f"field {key!r} must have length n={n}")
        if self.Q.shape != (n, n):
            raise InstanceError(f"field 'Q' must be {n}x{n}, got {self.Q.shape}")
        if np.any(np.abs(self.Q - self.Q.T) > SYM_TOL):
            i, j = np.unravel_index(np.argmax(np.abs(self.Q - self.Q.T)), self.Q.shape)
            raise InstanceError(f"field 'Q' is not symmetric: Q[{i}][{j}] != Q[{j}][{i}]")
        if np.any(self.u < 0):
            raise InstanceError("field 'u' must be nonnegative")
        for k, con in enumerate(self.constraints):
            if con.coeffs_x.shape != (n,):
                raise InstanceError(f"constraint {k} has length {con.coeffs_x.shape[0]}, expected {n}")

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def constant(self) -> float:
        return float(self.meta.get("objective_constant", 0.0))

    def objective(self, x: np.ndarray, y: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return float(self.a @ x + self.b @ y + y @ self.Q @ y + self.constant)

    def is_feasible(self, x: np.ndarray, y: np.ndarray, tol: float = 1e-7) -> bool:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if np.any(y < -tol) or np.any(y > self.u * x + tol):
            return False
        return all(c.violation(x, y) <= tol for c in self.constraints)


@dataclass(frozen=True)
class Point:
    """Primal point of a relaxation: indicators, continuous values, epigraph values."""

    x: np.ndarray
    y: np.ndarray
    t: Dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class Cut:
    """Linear inequality ``cx'x + cy'y + sum_k coeff_t[k] * t_k <= rhs``.

    Keys of ``coeff_t`` name epigraph variables of a relaxation: ``"tq"`` for the
    aggregate epigraph of the M-part quadratic, ``"t:i,j"`` for pair terms and
    ``"z:i"`` for perspective terms.
    """

    coeffs_x: np.ndarray
    coeffs_y: np.ndarray
    coeff_t: Dict[str, float]
    rhs: float
    tag: str = ""

    def __post_init__(self):
        object.__setattr__(self, "coeffs_x", np.asarray(self.coeffs_x, dtype=float))
        object.__setattr__(self, "coeffs_y", np.asarray(self.coeffs_y, dtype=float))
        vals = [self.rhs, *self.coeff_t.values()]
        if not (np.all(np.isfinite(self.coeffs_x)) and np.all(np.isfinite(self.coeffs_y))
                and all(math.isfinite(v) for v in vals)):
            raise ValueError("cut coefficients must be finite")

    def lhs(self, x: np.ndarray, y: np.ndarray, t: Dict[str, float]) -> float:
        return float(self.coeffs_x @ x + self.coeffs_y @ y
                     + sum(c * t[k] for k, c in self.coeff_t.items()))

    def violation(self, x: np.ndarray, y: np.ndarray, t: Dict[str, float]) -> float:
        return self.lhs(x, y, t) - self.rhs

    def max_abs_coeff(self) -> float:
        parts = [np.abs(self.coeffs_x).max(initial=0.0), np.abs(self.coeffs_y).max(initial=0.0)]
        parts += [abs(v) for v in self.coeff_t.values()]
        return float(max(parts))


# --- serialization ---------------------------------------------------------

def _encode_number(v: float):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        raise InstanceError("NaN is not allowed in instance files")
    return float(v)


def _decode_number(v, field_name: str) -> float:
    if isinstance(v, str):
        if v in ("inf", "-inf"):
            return float(v)
        raise InstanceError(f"field {field_name!r}: expected a number, got string {v!r}")
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise InstanceError(f"field {field_name!r}: expected a number, got {type(v).__name__}")
    return float(v)


def _decode_vector(obj: dict, key: str, n: int) -> np.ndarray:
    if key not in obj:
        raise InstanceError(f"missing field {key!r}")
    vals = obj[key]
    if not isinstance(vals, list) or len(vals) != n:
        raise InstanceError(f"field {key!r} must be an array of {n} numbers")
    return np.array([_decode_number(v, key) for v in vals], dtype=float)


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_json_safe(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _encode_number(float(obj))
    return obj


def instance_to_dict(inst: Instance) -> dict:
    return {
        "name": inst.name,
        "n": inst.n,
        "a": [_encode_number(v) for v in inst.a],
        "b": [_encode_number(v) for v in inst.b],
        "Q": [[_encode_number(v) for v in row] for row in inst.Q],
        "u": [_encode_number(v) for v in inst.u],
        "constraints": [
            {
                "cx": [_encode_number(v) for v in c.coeffs_x],
                "cy": [_encode_number(v) for v in c.coeffs_y],
                "sense": c.sense,
                "rhs": _encode_number(c.rhs),
            }
            for c in inst.constraints
        ],
        "meta": _json_safe(inst.meta),
    }


def instance_from_dict(obj: dict) -> Instance:
    if not isinstance(obj, dict):
        raise InstanceError("instance file must contain a JSON object")
    name = obj.get("name")
    if not isinstance(name, str):
        raise InstanceError("field 'name' must be a string")
    n = obj.get("n")
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise InstanceError("field 'n' must be a positive integer")
    a = _decode_vector(obj, "a", n)
    b = _decode_vector(obj, "b", n)
    u = _decode_vector(obj, "u", n)
    rows = obj.get("Q")
    if not isinstance(rows, list) or len(rows) != n or any(
            not isinstance(r, list) or len(r) != n for r in rows):
        raise InstanceError(f"field 'Q' must be an array of {n} arrays of {n} numbers")
    Q = np.array([[_decode_number(v, "Q") for v in r] for r in rows], dtype=float)
    cons = []
    for k, c in enumerate(obj.get("constraints", [])):
        if not isinstance(c, dict):
            raise InstanceError(f"field 'constraints[{k}]' must be an object")
        sense = c.get("sense")
        if sense not in SENSES:
            raise InstanceError(f"field 'constraints[{k}].sense' must be one of {SENSES}")
        if "rhs" not in c:
            raise InstanceError(f"missing field 'constraints[{k}].rhs'")
        cons.append(LinearConstraint(
            _decode_vector(c, "cx", n), _decode_vector(c, "cy", n), sense,
            _decode_number(c["rhs"], f"constraints[{k}].rhs")))
    meta = obj.get("meta", {})
    if not isinstance(meta, dict):
        raise InstanceError("field 'meta' must be an object")
    return Instance(name=name, a=a, b=b, Q=Q, u=u, constraints=tuple(cons), meta=meta)


def dumps_instance(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst), indent=1) + "\n"


def write_instance(inst: Instance, path) -> None:
    Path(path).write_text(dumps_instance(inst), encoding="utf-8")


def read_instance(path) -> Instance:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{path}: invalid JSON ({exc})") from exc
    return instance_from_dict(obj)


def instances_equal(p: Instance, q: Instance) -> bool:
    """Field-by-field bit-exact comparison."""
    if p.name != q.name or p.n != q.n or len(p.constraints) != len(q.constraints):
        return False
    for key in ("a", "b", "u", "Q"):
        if not np.array_equal(getattr(p, key), getattr(q, key)):
            return False
    for c, d in zip(p.constraints, q.constraints):
        if (c.sense != d.sense or c.rhs != d.rhs or not np.array_equal(c.coeffs_x, d.coeffs_x)
                or not np.array_equal(c.coeffs_y, d.coeffs_y)):
            return False
    return _json_safe(p.meta) == _json_safe(q.meta)
