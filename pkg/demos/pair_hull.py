"""The 2x2 indicator set {(y1-y2)^2 <= t, 0 <= y_i <= x_i, x binary}.

Compares the relaxation values of four formulations of one small problem
against the integer optimum. Only the hull formulation closes the gap for
every objective; the conic one with valid12 rows closes it for most.
"""

import numpy as np

from mmiqp.core import Instance
from mmiqp.formulations import build
from mmiqp.oracle import integer_pair_optimum
from mmiqp.relax import solve_relaxation

PAIR = np.array([[1.0, -1.0], [-1.0, 1.0]])


def main(seed=0, count=8):
    rng = np.random.default_rng(seed)
    kinds = ["basic", "perspective", "conic", "hullg"]
    print("a1      a2      b1      b2     " + "".join(f"{k:>12}" for k in kinds) + "     integer")
    for _ in range(count):
        a = rng.uniform(-1, 1, 2)
        b = rng.uniform(-2, 2, 2)
        inst = Instance("pair", a, b, PAIR, [1.0, 1.0])
        vals = [solve_relaxation(build(inst, k)).value for k in kinds]
        opt, _ = integer_pair_optimum(a, b)
        print(" ".join(f"{v:6.3f}" for v in (*a, *b)) + "".join(f"{v:12.5f}" for v in vals)
              + f"{opt:12.5f}")


if __name__ == "__main__":
    main()
