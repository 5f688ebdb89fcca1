"""Cotangent-Laplacian eigenvalues of icospheres against l(l+1).

    python scripts/mesh_spectrum.py --subdivisions 2 3 4
"""

import argparse

import numpy as np

from bandlimit import Mesh, build_basis


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    p.add_argument("--subdivisions", type=int, nargs="+", default=[2, 3, 4])
    p.add_argument("--count", type=int, default=25, help="nonzero eigenvalues to compare")
    args = p.parse_args()
    degrees = np.arange(1, 64)
    exact = np.repeat(degrees * (degrees + 1.0), 2 * degrees + 1)[: args.count]
    for s in args.subdivisions:
        M = Mesh.icosphere(s)
        b = build_basis(M, exact[-1] * 1.1)
        got = b.eigenvalues[1: args.count + 1]
        gap = np.abs(got / exact - 1.0)
        print(f"subdivisions={s} vertices={len(M)} max relative gap {gap.max():.4f} "
              f"(worst at lambda={exact[int(np.argmax(gap))]:g})")


if __name__ == "__main__":
    main()
