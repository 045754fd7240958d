"""Export eigenvalue paths (CSV + gnuplot script) for the built-in problems.

    python scripts/eigenpaths.py [--out results/eigenpaths]
"""
import argparse
import math
from pathlib import Path

from indexflow import presets
from indexflow import spectral_flow as sfm
from indexflow.cli import GNUPLOT_TEMPLATE
from indexflow.core import RadiusGrid


def export(name, spec, N, out: Path, count=241):
    grid = RadiusGrid.uniform(count, spec.r_max)
    path = sfm.eigen_path(spec, grid, N)
    lo = max(0, int(path.neg_counts.min()) - 4)
    path.to_csv(out / f"{name}.csv", 8, lo)
    (out / f"{name}.gp").write_text(GNUPLOT_TEMPLATE.format(script=f"{name}.gp", csv=f"{name}.csv", last=9))
    print(f"{name}: neg {path.neg_counts[0]} -> {path.neg_counts[-1]}, sfl {path.neg_counts[0] - path.neg_counts[-1]}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/eigenpaths")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    export("scalar", presets.scalar((3.5 * math.pi) ** 2), 48, out)
    export("example_II", presets.example_II()[0], 48, out)
    export("example_I", presets.example_I()[0], 48, out)
    export("square", presets.square_smale(60.0), 16, out, count=81)


if __name__ == "__main__":
    main()
