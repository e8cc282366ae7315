#!/usr/bin/env python3
"""Energy-norm distance of a localized corrector to the saturated one, k = 0..k_max.

usage: python3 scripts/corrector_decay.py [--problem MP2] [--H 3] [--h 6] [--kmax 6]
"""

import argparse

import numpy as np

from lodwave.assembly import build_fine_operators, sample_coefficient
from lodwave.correctors import build_corrector_basis
from lodwave.interpolation import build_clement
from lodwave.mesh import build_two_level
from lodwave.problems import get_problem


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--problem", default="MP2")
    p.add_argument("--H", type=int, default=3)
    p.add_argument("--h", type=int, default=6)
    p.add_argument("--kmax", type=int, default=6)
    args = p.parse_args()

    problem = get_problem(args.problem)
    hier = build_two_level(problem.domain, 2.0**-args.H, 2.0**-args.h)
    field = sample_coefficient(problem.coefficient, hier.fine)
    ops = build_fine_operators(hier.fine, field)
    clement = build_clement(hier)
    side = int(round(problem.domain.side * 2.0**args.H)) + 1
    z = (side // 2) * side + side // 2
    j = int(hier.coarse.interior_node_index[z])

    def column(k):
        b = build_corrector_basis(hier, ops.A_full, field, clement, k, nodes=[z])
        return b.Q[:, j].toarray().ravel()

    ref = column(2 * (side - 1))
    prev = None
    print(" k   ||q(k) - q_sat||_A   ratio")
    for k in range(args.kmax + 1):
        d = column(k) - ref
        e = float(np.sqrt(d @ ops.A_h @ d))
        ratio = "" if prev in (None, 0.0) else f"{e / prev:.3f}"
        print(f"{k:2d}   {e:18.6e}   {ratio}")
        prev = e


if __name__ == "__main__":
    main()
