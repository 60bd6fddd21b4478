"""GenSpecs behind the stored golden instance files in ``tests/golden``.

Run ``python3 tests/golden_specs.py`` to rewrite them (only after a deliberate
generator change).
"""

from pathlib import Path

from mmiqp.instances import GenSpec

GOLDEN_DIR = Path(__file__).parent / "golden"

GOLDEN_SPECS = {
    "mrf_k3_s1.json": GenSpec("mrf", 1, {"k": 3}),
    "mrf_k4_s7.json": GenSpec("mrf", 7, {"k": 4}),
    "portfolio_n5_b1_s2.json": GenSpec("portfolio", 2, {"n": 5, "beta": 1.0}),
    "factor_n8_r0_s3.json": GenSpec("factor", 3, {"n": 8, "rho": 0.0, "delta": 1.0}),
    "factor_n8_r03_s4.json": GenSpec("factor", 4, {"n": 8, "rho": 0.3, "delta": 1.0}),
}


if __name__ == "__main__":
    from mmiqp.core import write_instance
    from mmiqp.instances import generate

    for fname, spec in GOLDEN_SPECS.items():
        write_instance(generate(spec), GOLDEN_DIR / fname)
        print("wrote", fname)
