"""Absolute versus relative symplecticity defect on the random suite.

For each instance this prints the largest ``||Psi^T sigma Psi - sigma||_F``
over the scan, ``||Psi||_2`` at that radius and the rounding level
``eps ||Psi||_2^2`` that storing ``Psi`` in double precision already implies.

    python scripts/defect_floor.py
"""
import numpy as np

from indexflow import hamiltonian_maslov as hm
from indexflow import presets


def main():
    eps = np.finfo(float).eps
    print(f"{'instance':<24}{'abs defect':>12}{'rel defect':>12}{'||Psi||':>11}{'eps|Psi|^2':>12}")
    for inst in presets.random_suite(20):
        fl = hm.flow_for(inst.spec)
        fss = fl.solutions(hm.default_grid(inst.spec).array())
        w = max(fss, key=lambda f: f.defect)
        n = np.linalg.norm(w.Psi1, 2)
        print(f"{inst.spec.name:<24}{w.defect:12.2e}{w.defect_rel:12.2e}{n:11.2e}{eps * n * n:12.2e}")


if __name__ == "__main__":
    main()
