"""Root gap closed by each formulation on the three instance families.

Prints the bnb CSV rows (igap, rimp, nodes, time, egap) for a few seeds of
MRF, portfolio and factor-model instances.
"""

import sys

from mmiqp.bnb import compare, rows_to_csv
from mmiqp.instances import gen_factor, gen_mrf, gen_portfolio


def main(seeds=(0, 1)):
    insts = []
    for s in seeds:
        insts.append(gen_mrf(4, s, raw_fixed_cost=True))
        insts.append(gen_portfolio(20, 1.0, s))
        insts.append(gen_factor(20, 0.0, 1.0, s))
    rows = compare(insts, ["basic", "perspective", "conic", "conic+cuts"])
    sys.stdout.write(rows_to_csv(rows))


if __name__ == "__main__":
    main()
