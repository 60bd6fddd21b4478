"""Set-function view of the M-matrix problem with unbounded continuous variables.

For fixed support ``T`` the continuous minimum is ``-b_T' Q_T^{-1} b_T / 4``,
so the problem reduces to minimizing ``v(T) = a(T) - b_T' Q_T^{-1} b_T / 4``.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from typing import Callable, FrozenSet, Iterable, Optional, Tuple

import numpy as np

from .core import Instance
from .mmatrix import min_eigenvalue

MAX_BRUTE_N = 22


@dataclass(frozen=True)
class SetFunction:
    a: np.ndarray
    b: np.ndarray
    Q: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if np.any(b > 0):
            warnings.warn("positive entries of b clamped to 0 (y = 0 is optimal for them)")
            b = np.minimum(b, 0.0)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "Q", np.asarray(self.Q, dtype=float))

    @property
    def n(self) -> int:
        return self.a.shape[0]

    def __call__(self, T: Iterable[int]) -> float:
        return eval_set(self, T)


def eval_set(sf: SetFunction, T: Iterable[int]) -> float:
    idx = sorted(set(int(i) for i in T))
    if not idx:
        return 0.0
    if idx[0] < 0 or idx[-1] >= sf.n:
        raise IndexError("set element out of range")
    Qt = sf.Q[np.ix_(idx, idx)]
    bt = sf.b[idx]
    try:
        sol = np.linalg.solve(Qt, bt)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("singular principal submatrix") from exc
    return float(sf.a[idx].sum() - 0.25 * bt @ sol)


def theta(Q: np.ndarray, i: int, j: int) -> Callable[[FrozenSet[int]], float]:
    """``T -> (Q_T^{-1})_ij``, zero when ``i`` or ``j`` is outside ``T``."""
    Q = np.asarray(Q, dtype=float)

    def f(T) -> float:
        T = sorted(T)
        if i not in T or j not in T:
            return 0.0
        inv = np.linalg.inv(Q[np.ix_(T, T)])
        return float(inv[T.index(i), T.index(j)])
    return f


def _subsets(n: int):
    for mask in range(1 << n):
        yield mask, frozenset(k for k in range(n) if mask >> k & 1)


def minimize_bruteforce(sf: SetFunction) -> Tuple[Tuple[int, ...], float]:
    """Exact minimizer over all subsets; ties go to the lexicographically smallest set."""
    n = sf.n
    if n > MAX_BRUTE_N:
        raise ValueError(f"brute force limited to n <= {MAX_BRUTE_N}")
    best_val, best_set = np.inf, None
    for T in _lex_subsets(n):
        v = eval_set(sf, T)
        if v < best_val - 1e-12 or (abs(v - best_val) <= 1e-12 and T < best_set):
            best_val, best_set = v, T
    return best_set, best_val


def _lex_subsets(n: int):
    for r in range(n + 1):
        for T in itertools.combinations(range(n), r):
            yield T


@dataclass
class Witness:
    kind: str
    T: Tuple[int, ...]
    j: int
    k: int
    gap: float


def check_supermodular(fun: Callable, n: int, tol: float = 1e-10,
                       check_monotone: bool = False) -> Tuple[bool, Optional[Witness]]:
    """Enumerate the local condition ``f(T+j+k) - f(T+j) >= f(T+k) - f(T)``.

    The local form over all ``T`` and ``j, k`` outside ``T`` is equivalent to
    nondecreasing marginals over every chain ``T1 <= T2``. With
    ``check_monotone`` also verify ``f(T+k) >= f(T)``.
    """
    if n > 12:
        raise ValueError("enumeration limited to n <= 12")
    cache = {}

    def val(S):
        if S not in cache:
            cache[S] = float(fun(S))
        return cache[S]

    for _, T in _subsets(n):
        rest = [k for k in range(n) if k not in T]
        if check_monotone:
            for k in rest:
                gap = val(T | {k}) - val(T)
                if gap < -tol:
                    return False, Witness("monotone", tuple(sorted(T)), k, k, gap)
        for j, k in itertools.combinations(rest, 2):
            gap = (val(T | {j, k}) - val(T | {j})) - (val(T | {k}) - val(T))
            if gap < -tol:
                return False, Witness("supermodular", tuple(sorted(T)), j, k, gap)
    return True, None


def check_submodular(fun: Callable, n: int, tol: float = 1e-10):
    ok, w = check_supermodular(lambda S: -fun(S), n, tol)
    if w is not None:
        w.kind = "submodular"
    return ok, w


def box_bound(Q: np.ndarray, b: np.ndarray) -> float:
    """Finite box ``10 max|b| / lambda_min(Q)`` containing the unconstrained minimizer."""
    lam = min_eigenvalue(np.asarray(Q, dtype=float))
    if lam <= 0:
        raise ValueError("Q must be positive definite")
    return 10.0 * float(np.max(np.abs(b))) / lam


def to_instance(sf: SetFunction, name: str = "setfn") -> Instance:
    """Boxed MIQP whose optimum equals the set-function minimum."""
    ub = box_bound(sf.Q, sf.b) if np.any(sf.b) else 1.0
    return Instance(name=name, a=sf.a.copy(), b=sf.b.copy(), Q=sf.Q.copy(),
                    u=np.full(sf.n, ub), constraints=(), meta={"family": "setfn"})
