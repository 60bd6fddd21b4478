"""Seeded generators for the three benchmark families.

Randomness comes from xoshiro256** seeded through splitmix64, so a
``GenSpec`` maps to a byte-identical instance file on any platform. Uniform
draws are ``(next() >> 11) * 2**-53``. Draw order is listed per generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from .core import Instance, LinearConstraint

MASK64 = (1 << 64) - 1
MAX_RETRIES = 100


def _rotl(v: int, k: int) -> int:
    return ((v << k) | (v >> (64 - k))) & MASK64


def splitmix64(state: int):
    """Return ``(next_state, output)``."""
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


class Xoshiro256:
    """xoshiro256** with splitmix64 seeding."""

    def __init__(self, seed: int):
        sm = int(seed) & MASK64
        s = []
        for _ in range(4):
            sm, out = splitmix64(sm)
            s.append(out)
        self.s = s

    def next_u64(self) -> int:
        s = self.s
        result = (_rotl((s[1] * 5) & MASK64, 7) * 9) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def random(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        return lo + (hi - lo) * self.random()

    def uniforms(self, count: int, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
        return np.array([self.uniform(lo, hi) for _ in range(count)])


@dataclass(frozen=True)
class GenSpec:
    family: str
    seed: int
    params: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        p = self.params
        if self.family not in ("mrf", "portfolio", "factor"):
            raise ValueError(f"unknown family {self.family!r}")
        if self.family == "mrf" and int(p.get("k", 0)) < 2:
            raise ValueError("mrf needs k >= 2")
        if self.family in ("portfolio", "factor") and int(p.get("n", 0)) < 2:
            raise ValueError(f"{self.family} needs n >= 2")
        if self.family == "portfolio" and not float(p.get("beta", 0)) > 0:
            raise ValueError("portfolio needs beta > 0")
        if self.family == "factor" and (float(p.get("rho", 0)) < 0 or float(p.get("delta", 0)) < 0):
            raise ValueError("factor needs rho >= 0 and delta >= 0")


def generate(spec: GenSpec) -> Instance:
    p = dict(spec.params)
    if spec.family == "mrf":
        return gen_mrf(int(p["k"]), spec.seed, raw_fixed_cost=bool(p.get("raw_fixed_cost", False)))
    if spec.family == "portfolio":
        return gen_portfolio(int(p["n"]), float(p["beta"]), spec.seed, k_card=p.get("k_card"))
    return gen_factor(int(p["n"]), float(p.get("rho", 0.0)), float(p.get("delta", 1.0)), spec.seed,
                      k_card=p.get("k_card"), r_frac=float(p.get("r_frac", 0.25)))


def grid_edges(k: int) -> List[tuple]:
    """4-neighbour edges of a ``k x k`` grid, row-major, right neighbour before down."""
    edges = []
    for r in range(k):
        for c in range(k):
            i = r * k + c
            if c + 1 < k:
                edges.append((i, i + 1))
            if r + 1 < k:
                edges.append((i, i + k))
    return edges


def gen_mrf(k: int, seed: int, raw_fixed_cost: bool = False) -> Instance:
    """Sparse-deviation MRF energy on a ``k x k`` grid.

    Draw order: ``p`` (n values, redrawn while no ``p_i >= 0.5``), ``c~`` (n),
    then one ``c_ij`` per grid edge in :func:`grid_edges` order.

    By default the fixed cost equals the scaled deviation weight, ``a_i = c_i``.
    Then switching a pixel on saves at most ``c_i p_i^2 <= a_i``, so ``x = 0``
    is optimal. ``raw_fixed_cost=True`` uses ``a_i = c~_i``, which balances the
    total fixed cost against the total deviation gain and gives nontrivial
    optima.
    """
    GenSpec("mrf", seed, {"k": k})
    n = k * k
    rng = Xoshiro256(seed)
    for _ in range(MAX_RETRIES):
        p = rng.uniforms(n)
        c2 = float(np.sum(2 * p[p >= 0.5] - 1))
        if c2 > 0:
            break
    else:
        raise RuntimeError("could not draw p with C2 > 0")
    ct = rng.uniforms(n)
    edges = grid_edges(k)
    cij = rng.uniforms(len(edges))
    c = ct * float(ct.sum()) / c2
    Q = np.diag(c)
    for (i, j), w in zip(edges, cij):
        Q[i, i] += w
        Q[j, j] += w
        Q[i, j] -= w
        Q[j, i] -= w
    params = {"k": k}
    if raw_fixed_cost:
        params["raw_fixed_cost"] = True
    meta = {"family": "mrf", "seed": int(seed), "params": params,
            "objective_constant": float(np.sum(c * p * p)), "p": p.tolist()}
    a = ct.copy() if raw_fixed_cost else c.copy()
    tag = "r" if raw_fixed_cost else ""
    return Instance(name=f"mrf{tag}-k{k}-s{seed}", a=a, b=-2 * c * p, Q=Q, u=np.ones(n),
                    constraints=(), meta=meta)


def _ceil_div(n: int, d: int) -> int:
    return max(1, math.ceil(n / d))


def gen_portfolio(n: int, beta: float, seed: int, k_card=None) -> Instance:
    """Buy/sell portfolio with fixed transaction costs.

    Variable ``2i`` buys asset ``i`` and ``2i+1`` sells it. Draw order per
    asset: ``sigma, mu, c+, c-, a+, a-``. The instance is redrawn (continuing
    the same stream) until transacting nothing meets the return row or some
    transaction plan can, so the instance is feasible.
    """
    GenSpec("portfolio", seed, {"n": n, "beta": beta})
    k = _ceil_div(n, 10) if k_card is None else int(k_card)
    rng = Xoshiro256(seed)
    for attempt in range(MAX_RETRIES):
        draws = np.array([[rng.uniform() for _ in range(6)] for _ in range(n)])
        sigma = draws[:, 0]
        mu = draws[:, 1] * 2 * sigma
        cp_ = draws[:, 2] * mu
        cm = draws[:, 3] * mu
        ap = draws[:, 4] * (mu - cp_)
        am = draws[:, 5] * (mu - cm)
        target = beta * float(mu.sum())
        base = float(mu.sum())
        # the best return gain from at most k purchases
        gains = np.sort((mu - cp_) - ap)[::-1]
        best = base + float(np.sum(np.maximum(gains[:k], 0.0)))
        if best >= target - 1e-12:
            break
    else:
        raise RuntimeError("could not draw a feasible portfolio instance")
    N = 2 * n
    Q = np.zeros((N, N))
    b = np.zeros(N)
    for i in range(n):
        s2 = sigma[i] ** 2
        Q[2 * i:2 * i + 2, 2 * i:2 * i + 2] = s2 * np.array([[1.0, -1.0], [-1.0, 1.0]])
        b[2 * i] = 2 * s2
        b[2 * i + 1] = -2 * s2
    cx = np.zeros(N)
    cy = np.zeros(N)
    cx[0::2], cx[1::2] = -ap, -am
    cy[0::2], cy[1::2] = mu - cp_, -(mu - cm)
    cons = [LinearConstraint(cx, cy, "ge", target - base),
            LinearConstraint(np.ones(N), np.zeros(N), "le", float(k))]
    for i in range(n):
        e = np.zeros(N)
        e[2 * i] = e[2 * i + 1] = 1.0
        cons.append(LinearConstraint(e, np.zeros(N), "le", 1.0))
    meta = {"family": "portfolio", "seed": int(seed),
            "params": {"n": n, "beta": beta, "k_card": k, "attempts": attempt + 1},
            "objective_constant": float(np.sum(sigma ** 2)),
            # gaps are reported on the variance change, i.e. without sum sigma^2 w^2
            "gap_offset": float(np.sum(sigma ** 2)),
            "complement_pairs": [[2 * i, 2 * i + 1] for i in range(n)]}
    return Instance(name=f"portfolio-n{n}-b{beta:g}-s{seed}", a=np.zeros(N), b=b, Q=Q,
                    u=np.ones(N), constraints=tuple(cons), meta=meta)


def gen_factor(n: int, rho: float, delta: float, seed: int, k_card=None,
               r_frac: float = 0.25) -> Instance:
    """Mean-variance problem with a factor-model covariance.

    Draw order: ``G`` (20x20 row-major), ``X`` (n x 20 row-major, one draw for
    the zero test and a second for the value when nonzero), ``v`` (n),
    returns ``b`` (n).
    """
    GenSpec("factor", seed, {"n": n, "rho": rho, "delta": delta})
    k = _ceil_div(n, 5) if k_card is None else int(k_card)
    rng = Xoshiro256(seed)
    G = rng.uniforms(400, -1.0, 1.0).reshape(20, 20)
    F = G @ G.T
    X = np.zeros((n, 20))
    for i in range(n):
        for j in range(20):
            if rng.random() >= 0.8:
                X[i, j] = rng.random()
    Abar = X @ F @ X.T
    A = np.where(Abar <= 0, Abar, rho * Abar)
    np.fill_diagonal(A, 0.0)
    A = (A + A.T) / 2
    sbar = float(np.abs(A).sum()) / n
    ups = rng.uniforms(n, 0.0, delta * sbar)
    np.fill_diagonal(A, np.abs(A).sum(axis=1) + ups)
    ret = np.array([rng.uniform(0.5 * A[i, i], 1.5 * A[i, i]) for i in range(n)])
    r = r_frac * float(ret.sum())
    cons = (LinearConstraint(np.zeros(n), ret, "ge", r),
            LinearConstraint(np.ones(n), np.zeros(n), "le", float(k)))
    meta = {"family": "factor", "seed": int(seed),
            "params": {"n": n, "rho": rho, "delta": delta, "k_card": k, "r_frac": r_frac},
            "objective_constant": 0.0, "residual_diag": ups.tolist(), "returns": ret.tolist()}
    return Instance(name=f"factor-n{n}-r{rho:g}-d{delta:g}-s{seed}", a=np.zeros(n), b=np.zeros(n),
                    Q=A, u=np.ones(n), constraints=cons, meta=meta)
