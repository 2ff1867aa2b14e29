"""Graph and Riesz moduli of the pole-crossing family over grid doublings.

Writes one CSV row per level: the graph modulus tracks the step while the
Riesz modulus stays near 2.
"""

import argparse
import csv
import sys

from reglab.families import ParamGrid, analyze
from reglab.gallery import pole_crossing


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--kmin", type=int, default=4)
    ap.add_argument("--kmax", type=int, default=12)
    ap.add_argument("--N", type=int, default=1)
    ap.add_argument("--K", type=int, default=1)
    ap.add_argument("--out", default="-", help="CSV path, '-' for stdout")
    args = ap.parse_args(argv)

    F = pole_crossing(args.N, args.K)
    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["k", "points", "step", "graph_modulus", "riesz_modulus", "graph_over_step"])
    for k in range(args.kmin, args.kmax + 1):
        grid = ParamGrid(0.0, 1.0, 2**k + 1)
        r = analyze(F, grid)
        w.writerow([k, grid.points, grid.step, r.graph_modulus, r.riesz_modulus, r.graph_modulus / grid.step])
    if fh is not sys.stdout:
        fh.close()


if __name__ == "__main__":
    main()
