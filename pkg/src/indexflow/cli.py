"""Command line front end.

Exit codes: 0 success, 1 a verification check disagreed, 2 invalid input
or a failed precondition, 3 a convergence failure, 64 usage errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from . import bifurcation as bf
from . import hamiltonian_maslov as hm
from . import presets
from . import spectral_flow as sfm
from . import verify as vf
from .core import (
    DEFAULT_TOL,
    ConfigurationError,
    ConvergenceError,
    DomainError,
    IndexFlowError,
    PreconditionError,
    RadiusGrid,
)
from .geodesics import SphereConstCurv, parse_preset, to_problem
from .problem_io import load_problem

log = logging.getLogger("indexflow")

EXIT_OK, EXIT_DISAGREE, EXIT_PRECONDITION, EXIT_CONVERGENCE, EXIT_USAGE = 0, 1, 2, 3, 64

GNUPLOT_TEMPLATE = """\
# gnuplot -p {script}
set datafile separator ","
set key autotitle columnhead
set xlabel "r"
set ylabel "eigenvalue"
set yrange [-2:2]
plot for [i=2:{last}] "{csv}" using 1:i with lines notitle, 0 with lines lc rgb "black" notitle
"""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _common(p: argparse.ArgumentParser, preset: bool = True) -> None:
    p.add_argument("--file", help="JSON problem file (bundled names such as pitchfork.json also work)")
    if preset:
        p.add_argument("--preset", help="geodesic preset, e.g. sphere:k=2,kappa=1,length=1.5pi")
    p.add_argument("--grid", type=int, default=None, metavar="COUNT", help="radius scan points (default 241)")
    p.add_argument("--modes", type=int, default=32, metavar="N", help="initial Galerkin modes per dimension")
    p.add_argument("--tol", type=float, default=1e-10, help="root refinement tolerance in r")
    p.add_argument("--out", default=None, metavar="DIR", help="directory for JSON/CSV output")
    p.add_argument("--debug", action="store_true", help="verbose log and diagnostic CSV dumps")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="indexflow", description="Spectral flow, Maslov index and conjugate radii.")
    p.add_argument("--version", action="version", version=f"indexflow {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    for name, text in [
        ("conjugate", "conjugate radii with multiplicities"),
        ("sfl", "spectral flow over (r_min, r_max]"),
        ("maslov", "Maslov index (n = 1)"),
        ("report", "full index report as JSON"),
    ]:
        _common(sub.add_parser(name, help=text, description=text))
    v = sub.add_parser("verify", help="check the index identities", description="check the index identities")
    _common(v)
    v.add_argument("--suite", type=int, default=None, metavar="COUNT",
                   help="run the seeded random suite with COUNT instances")
    b = sub.add_parser("bifurcate", help="bifurcation radii of a semilinear problem",
                       description="bifurcation radii of a semilinear problem")
    _common(b, preset=False)
    e = sub.add_parser("example", help="built-in worked examples", description="built-in worked examples")
    e.add_argument("which", choices=["I", "II", "sphere"])
    _common(e, preset=False)
    return p


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------


def _resolve(path: str) -> Path:
    p = Path(path)
    if p.exists():
        return p
    bundled = resources.files("indexflow") / "problems" / p.name
    if bundled.is_file():
        return Path(str(bundled))
    raise ConfigurationError(f"problem file {path!r} not found")


def _load(args, need_nonlinear: bool = False):
    if getattr(args, "preset", None):
        if args.file:
            raise ConfigurationError("give either --file or --preset")
        pr = parse_preset(args.preset)
        return to_problem(pr), None, pr
    if not args.file:
        raise ConfigurationError("a problem is required (--file or --preset)")
    spec, nspec = load_problem(_resolve(args.file))
    if need_nonlinear and nspec is None:
        raise ConfigurationError("the problem file has no 'nonlinear' block")
    return spec, nspec, None


def _grid(args, spec) -> RadiusGrid:
    count = args.grid or sfm.SCAN_COUNT
    if count < 3:
        raise ConfigurationError("--grid needs at least 3 points")
    return RadiusGrid.uniform(count, spec.r_max, refinement_tol=args.tol)


def _outdir(args) -> Path | None:
    if not args.out:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _eigen_plot(spec, grid, N, out: Path) -> None:
    path = sfm.eigen_path(spec, grid, N)
    avail = min(len(e) for e in path.eigs)
    lo = max(0, min(int(path.neg_counts.min()) - 4, avail - 8))  # eigenvalues near zero
    q = min(8, avail - lo)
    path.to_csv(out / "eigenpath.csv", q, lo)
    (out / "eigenpath.gp").write_text(
        GNUPLOT_TEMPLATE.format(script="eigenpath.gp", csv="eigenpath.csv", last=q + 1)
    )


def _debug_dumps(spec, grid, out: Path | None) -> None:
    if out is None or spec.n != 1:
        return
    fl = hm.flow_for(spec)
    rs = grid.array()
    sv, det = fl.boundary_path().scan(rs)
    _write_rows(out / "singular_values.csv", ["r", "smin", "det"],
                [[f"{r:.12g}", f"{s:.12g}", f"{d:.12g}"] for r, s, d in zip(rs, sv, det)])
    fs = hm.integrate_fundamental(spec, spec.r_max)
    xs = np.linspace(0.0, 1.0, 65)
    k2 = 2 * spec.k
    rows = [[f"{x:.6g}"] + [f"{v:.12g}" for v in fs.Psi(x).ravel()] for x in xs]
    _write_rows(out / "psi_samples.csv", ["x"] + [f"psi{i}{j}" for i in range(k2) for j in range(k2)], rows)


def _radii_text(radii) -> str:
    if not radii:
        return "none"
    return ", ".join(f"r={r:.10g} (m={m}{'' if s is None else f', signature {s}'})" for r, m, s in radii)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_conjugate(args) -> int:
    spec, _, _ = _load(args)
    grid = _grid(args, spec)
    if spec.n == 1:
        pairs = hm.detect_conjugate_radii(spec, grid)
        radii = [(r, m, hm.crossing_form_graph(spec, r, m, DEFAULT_TOL, grid).signature) for r, m in pairs]
    else:
        loc = sfm.locate_details(spec, grid, args.modes)
        radii = [(c.r, c.m, sfm.form_crossing_details(spec, c.r, loc.N_used, m=c.m).signature)
                 for c in loc.crossings]
    print(f"conjugate radii: {_radii_text(radii)}")
    print(f"sum m = {sum(m for _, m, _ in radii)}")
    out = _outdir(args)
    if out:
        _write_rows(out / "conjugate.csv", ["r", "m", "signature"],
                    [[f"{r:.12g}", m, s] for r, m, s in radii])
    return EXIT_OK


def cmd_sfl(args) -> int:
    spec, _, _ = _load(args)
    grid = _grid(args, spec)
    res = sfm.spectral_flow_details(spec, (grid.r_min, grid.r_max), args.modes)
    print(f"sfl = {res.value}")
    print(f"neg(r_min) = {res.neg_a}, neg(r_max) = {res.neg_b}, N = {res.N_used}")
    out = _outdir(args)
    if out:
        _dump({"sfl": res.value, "interval": list(res.interval), "N_used": res.N_used,
               "levels": [[n, k] for n, k in res.levels]}, out / "sfl.json")
        _eigen_plot(spec, grid, res.N_used, out)
    return EXIT_OK


def cmd_maslov(args) -> int:
    spec, _, _ = _load(args)
    if spec.n != 1:
        raise PreconditionError("the Maslov index is available for n = 1 only")
    grid = _grid(args, spec)
    ms = hm.maslov_details(spec, None, grid)
    gm = hm.graph_maslov(spec, None, grid)
    print(f"maslov = {ms.value}")
    print(f"graph maslov = {gm}")
    print(f"crossings: {_radii_text(ms.radii())}")
    if ms.delta:
        print(f"note: irregular crossing, computed for S + {ms.delta:.3e} I")
    out = _outdir(args)
    if out:
        _dump({"maslov": ms.value, "graph_maslov": gm, "delta": ms.delta,
               "crossings": [c.to_dict() for c in ms.crossings]}, out / "maslov.json")
    return EXIT_OK if gm == ms.value else EXIT_DISAGREE


def _report_for(spec, pr, grid, N):
    if pr is not None:
        return vf.verify_geodesic_corollaries(pr, grid, N)
    if spec.n == 1:
        rep = vf.verify_main_theorem(spec, grid, N)
        if spec.nu == 0:
            sm = vf.verify_smale(spec, grid, N)
            rep.agreement.update(sm.agreement)
        return rep
    if spec.nu != 0:
        raise PreconditionError("in two dimensions only nu = 0 problems can be verified")
    return vf.verify_smale(spec, grid, N)


def _print_report(rep) -> None:
    print(f"problem: {rep.name or '(unnamed)'}")
    print(f"sfl = {rep.sfl}")
    if rep.maslov is not None:
        print(f"maslov = {rep.maslov}")
    if rep.graph_maslov is not None:
        print(f"graph maslov = {rep.graph_maslov}")
    if rep.morse_index is not None:
        print(f"morse index = {rep.morse_index}")
    print(f"conjugate radii: {_radii_text(rep.conjugate_radii)}")
    for key in sorted(rep.agreement):
        print(f"  {key}: {'ok' if rep.agreement[key] else 'FAILED'}")
    for n in rep.notes:
        print(f"note: {n}")
    print(f"agreement {'true' if rep.all_agree else 'false'}")


def cmd_verify(args) -> int:
    out = _outdir(args)
    if args.suite is not None:
        res = vf.run_suite(args.suite)
        for i, rep in enumerate(res.reports):
            sm = res.smale.get(i)
            ok = rep.all_agree and (sm is None or sm.all_agree)
            print(f"{rep.name}: sfl={rep.sfl} maslov={rep.maslov} graph={rep.graph_maslov} "
                  f"{'ok' if ok else 'FAILED'}")
        print(f"agreement {'true' if res.all_agree else 'false'}")
        if out:
            _dump(res.to_dict(), out / "verdict.json")
        return EXIT_OK if res.all_agree else EXIT_DISAGREE
    if not args.file and not args.preset:
        reps = [vf.reproduce_example_II(), vf.reproduce_example_I(),
                vf.verify_geodesic_corollaries(presets_sphere())]
        for rep in reps:
            _print_report(rep)
        ok = all(r.all_agree for r in reps)
        if out:
            _dump({"all_agree": ok, "reports": [r.to_dict() for r in reps]}, out / "verdict.json")
        return EXIT_OK if ok else EXIT_DISAGREE
    spec, _, pr = _load(args)
    grid = _grid(args, spec)
    rep = _report_for(spec, pr, grid, args.modes)
    _print_report(rep)
    if args.debug:
        _debug_dumps(spec, grid, out)
    if out:
        _dump({"all_agree": rep.all_agree, "report": rep.to_dict()}, out / "verdict.json")
    return EXIT_OK if rep.all_agree else EXIT_DISAGREE


def presets_sphere():
    return SphereConstCurv(1.0, 2, presets.EXAMPLE_LENGTH)


def cmd_report(args) -> int:
    spec, _, pr = _load(args)
    grid = _grid(args, spec)
    rep = _report_for(spec, pr, grid, args.modes)
    text = json.dumps(rep.to_dict(), indent=2, sort_keys=True)
    print(text)
    out = _outdir(args)
    if out:
        (out / "report.json").write_text(text + "\n")
        if args.debug:
            _debug_dumps(spec, grid, out)
    return EXIT_OK if rep.all_agree else EXIT_DISAGREE


def _print_bifurcation(br) -> None:
    print(f"conjugate radii: {_radii_text(br.conjugate_radii)}")
    print(f"sfl = {br.sfl}")
    pred = br.predicted if isinstance(br.predicted, str) else [round(r, 10) for r in br.predicted]
    print(f"predicted bifurcation radii: {pred}")
    print(f"lower bound on bifurcation radii: {br.lower_bound}")
    if br.detected:
        print("bifurcation radii: " + ", ".join(f"r={r:.10g}" for r in br.detected_radii))
    else:
        print("no bifurcation radii")
    for n in br.notes:
        print(f"note: {n}")


def cmd_bifurcate(args) -> int:
    spec, nspec, _ = _load(args, need_nonlinear=True)
    grid = _grid(args, spec)
    br = bf.detect_bifurcation_radii(nspec, spec, grid, args.modes)
    _print_bifurcation(br)
    out = _outdir(args)
    if out:
        _dump(br.to_dict(), out / "bifurcation.json")
        br.branches_csv(out / "branches.csv")
    return EXIT_OK


def cmd_example(args) -> int:
    out = _outdir(args)
    if args.which == "sphere":
        rep = vf.verify_geodesic_corollaries(presets_sphere(), None, args.modes)
        _print_report(rep)
        if out:
            _dump(rep.to_dict(), out / "example_sphere.json")
        return EXIT_OK if rep.all_agree else EXIT_DISAGREE
    rep = vf.reproduce_example_II(None, args.modes) if args.which == "II" else vf.reproduce_example_I(None, args.modes)
    print(f"sfl={rep.sfl}")
    print(f"maslov={rep.maslov}")
    for r, m, s in rep.conjugate_radii:
        print(f"crossing (m={m}, signature {s}) at r={r:.10g}")
    print(f"stated location r=pi on [0, 3pi/2]; normalized location r={2 / 3:.10g}")
    b = rep.extra["bifurcation"]
    print("no bifurcation radii" if not b["detected"] else
          "bifurcation radii: " + ", ".join(f"{d['r']:.10g}" for d in b["detected"]))
    if args.which == "I":
        print(f"all Newton probes trivial: {'true' if b['all_probes_trivial'] else 'false'}")
    for key in sorted(rep.agreement):
        print(f"  {key}: {'ok' if rep.agreement[key] else 'FAILED'}")
    if out:
        _dump(rep.to_dict(), out / f"example_{args.which}.json")
    return EXIT_OK if rep.all_agree else EXIT_DISAGREE


COMMANDS = {
    "conjugate": cmd_conjugate, "sfl": cmd_sfl, "maslov": cmd_maslov, "verify": cmd_verify,
    "bifurcate": cmd_bifurcate, "example": cmd_example, "report": cmd_report,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.debug else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigurationError, PreconditionError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except ConvergenceError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except IndexFlowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
