"""Eigenvalue counts against the Weyl main term on the sphere and the flat torus.

    python scripts/weyl_sweep.py --L 100 400 2500 10000
"""

import argparse
import math

from bandlimit import Sphere, Torus, build_basis, weyl_defect
from bandlimit.bandlimited import kernel_diagonal_defect


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    p.add_argument("--L", type=float, nargs="+", default=[100, 400, 2500, 10000])
    args = p.parse_args()
    print(f"{'backend':8} {'L':>8} {'k_L':>7} {'weyl_defect':>13} {'diag_defect':>13} {'3/sqrt(L)':>10}")
    for L in args.L:
        for name, M in (("sphere", Sphere.for_bandwidth(L, 1)),
                        ("torus", Torus.for_bandwidth(2 * math.pi, 2 * math.pi, L, 1))):
            b = build_basis(M, L)
            print(f"{name:8} {L:8g} {b.k:7d} {weyl_defect(b):13.3e} "
                  f"{kernel_diagonal_defect(b):13.3e} {3 / math.sqrt(L):10.4f}")


if __name__ == "__main__":
    main()
