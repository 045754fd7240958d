"""Run the seeded random suite and write a JSON verdict.

    python scripts/run_suite.py [--count 20] [--out results/suite]
"""
import argparse
import json
import time
from pathlib import Path

from indexflow import verify


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=20)
    ap.add_argument("--modes", type=int, default=32)
    ap.add_argument("--out", default="results/suite")
    args = ap.parse_args()
    t = time.perf_counter()
    res = verify.run_suite(args.count, N=args.modes)
    elapsed = time.perf_counter() - t
    print(f"{'instance':<24}{'sfl':>5}{'mas':>5}{'graph':>6}  crossings  abs defect  rel defect")
    for rep in res.reports:
        print(f"{rep.name:<24}{rep.sfl:>5}{rep.maslov:>5}{rep.graph_maslov:>6}  {len(rep.conjugate_radii):>9}"
              f"  {rep.extra['max_symplectic_defect_abs']:10.2e}  {rep.extra['max_symplectic_defect']:10.2e}")
    print(f"all agree: {res.all_agree}   ({elapsed:.1f}s)")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "verdict.json").write_text(json.dumps(res.to_dict(), indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
