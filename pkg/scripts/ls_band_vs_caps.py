"""L-S constants of a fixed equatorial band and of shrinking cap unions on the sphere.

The band keeps a fixed volume but misses the polar balls, so its relative
density at scale 1/sqrt(L) is zero and its L-S constant drops to the
rounding floor.  Cap unions around a 3/sqrt(L)-net stay relatively dense at
every r0, and their L-S constants fall as the caps shrink.

    python scripts/ls_band_vs_caps.py --L 100 400 1600
"""

import argparse
import math

from bandlimit import Sphere, build_basis
from bandlimit import carleson as cs
from bandlimit import logvinenko as lv


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    p.add_argument("--L", type=float, nargs="+", default=[100, 400, 1600])
    p.add_argument("--half-width", type=float, default=0.5)
    p.add_argument("--caps-L", type=float, default=400)
    p.add_argument("--delta", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=3)
    args = p.parse_args()

    band = lv.Band(args.half_width)
    for L in args.L:
        b = build_basis(Sphere.for_bandwidth(L, 2), L)
        G = lv.set_gram(band, b)
        print(f"band  L={L:<6g} ls={lv.ls_constant(band, b):.3e}  "
              f"trace/k={G.trace() / b.k:.4f}  (volume fraction {math.sin(args.half_width):.4f})")

    L = args.caps_L
    b = build_basis(Sphere.for_bandwidth(L, 8), L)
    net = cs.separated_net(b.manifold, L, args.delta, args.seed)
    print(f"caps  L={L:g}, net of {len(net)} points at separation {args.delta}/sqrt(L)")
    for r0 in (4.0, 2.0, 1.0, 0.5):
        region = lv.NetCaps(net, r0 / math.sqrt(L))
        dens = lv.relative_density(region, b, 2.0 * args.delta)
        print(f"  r0={r0:<4g} ls={lv.ls_constant(region, b):.4e}  relative density (r={2 * args.delta:g}) {dens:.4f}")


if __name__ == "__main__":
    main()
