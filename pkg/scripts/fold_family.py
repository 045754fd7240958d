"""Two opposite crossings merging in S = [[-p, a], [a, q]], nu = 1.

Locates the fold a* by bisection on the crossing count and tabulates the
crossings, both indices and the regularisation shift across it.

    python scripts/fold_family.py
"""
import math

import numpy as np

from indexflow import hamiltonian_maslov as hm
from indexflow import presets
from indexflow import spectral_flow as sfm

P, Q = (1.5 * math.pi) ** 2, (1.3 * math.pi) ** 2


def spec(a):
    return presets.constant([[-P, a], [a, Q]], nu=1)


def main():
    lo, hi = 2.0, 3.0
    while hi - lo > 1e-13:
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if hm.detect_conjugate_radii(spec(mid)) else (lo, mid)
    print(f"a* = {lo!r}")
    for a in np.concatenate([np.linspace(0, 2.7, 4), [lo - 1e-6, lo, hi, 3.0]]):
        ms = hm.maslov_details(spec(a))
        radii = [(round(c.r_star, 7), c.signature) for c in ms.crossings]
        print(f"a={a:.12f}  crossings={radii}  maslov={ms.value}  graph={hm.graph_maslov(spec(a))}  "
              f"sfl={sfm.spectral_flow(spec(a))}  delta={ms.delta:.2e}")


if __name__ == "__main__":
    main()
