"""Right multiplication by the reflection family vs conjugation.

For each factor count m and leading weight c1, prints the constancy deviation
of A(x) r(x), the half-turn displacement of f(A(x)) before and after a fixed
unitary conjugation, and the closed-form value 2 c1 / sqrt(1 + c1^2).
"""

import argparse
import math

from reglab.families import ParamGrid
from reglab.gallery import dd_constancy_check


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, default=65)
    ap.add_argument("--c1", type=float, nargs="+", default=[0.5, 1.0, 2.0, 5.0, 20.0])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    print("m,c1,deviation,raw_displacement,conjugated_displacement,closed_form,right_multiplied_modulus")
    for m in (1, 2, 3):
        for c1 in args.c1:
            r = dd_constancy_check(m, c=[c1] + [1.0] * (m - 1), grid=ParamGrid(0, 1, args.points), seed=args.seed)
            print(f"{m},{c1},{r['deviation']:.3e},{r['raw_displacement']:.12f},"
                  f"{r['conjugated_displacement']:.12f},{2 * c1 / math.sqrt(1 + c1 * c1):.12f},"
                  f"{r['right_multiplied_modulus']:.3e}")


if __name__ == "__main__":
    main()
