"""Cross-method checks of the index identities and the worked examples.

Each check returns an :class:`IndexReport` whose ``agreement`` maps a
short label to a boolean.  Reports contain no timings so that identical
inputs serialise to identical JSON.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import bifurcation as bf
from . import hamiltonian_maslov as hm
from . import presets
from . import spectral_flow as sfm
from ._parallel import pmap
from .core import DEFAULT_TOL, ConfigurationError, IndexReport, ProblemSpec, RadiusGrid, Tolerances
from .geodesics import GeodesicPreset, expected_conjugate_parameters, to_problem

log = logging.getLogger(__name__)

#: Galerkin and Hamiltonian radii must agree to this absolute tolerance
RADIUS_MATCH = 1e-6


def _match_radii(a: list, b: list, atol: float = RADIUS_MATCH) -> bool:
    if len(a) != len(b):
        return False
    return all(abs(ra - rb) <= atol and ma == mb for (ra, ma), (rb, mb) in zip(a, b))


def _hamiltonian_crossings(spec: ProblemSpec, grid: RadiusGrid, tol: Tolerances):
    """Radii with both crossing forms; ``(rows, methods_agree)``."""
    rows, agree = [], True
    for r, m in hm.detect_conjugate_radii(spec, grid, tol):
        g = hm.crossing_form_graph(spec, r, m, tol, grid)
        try:
            b = hm.crossing_form_boundary(spec, r, m=m, tol=tol)
        except hm.IllConditionedKernelError as exc:
            log.warning("boundary formula unavailable at r=%.10g: %s", r, exc)
            b = None
        regular = g.regular and (b is None or b.regular)
        if b is not None and g.regular and b.regular:
            agree &= g.signature == b.signature
        rows.append({
            "r": r, "m": m, "regular": bool(regular),
            "graph_fd": g.signature if g.regular else None,
            "boundary_formula": None if b is None else (b.signature if b.regular else None),
            "graph_fd_eigs": np.linalg.eigvalsh(g.gamma_normalized).tolist(),
            "boundary_eigs": None if b is None else np.linalg.eigvalsh(b.gamma_normalized).tolist(),
        })
    return rows, agree


def verify_main_theorem(spec: ProblemSpec, grid: RadiusGrid | None = None, N: int = 32,
                        tol: Tolerances = DEFAULT_TOL) -> IndexReport:
    """Spectral flow against the Maslov index (both routes) for ``n = 1``."""
    if spec.n != 1:
        raise ConfigurationError("verify_main_theorem needs n = 1; use verify_smale in 2D")
    grid = grid or hm.default_grid(spec)
    interval = (grid.r_min, grid.r_max)
    sf = sfm.spectral_flow_details(spec, interval, N, tol)
    ms = hm.maslov_details(spec, interval, grid, tol)
    gm = hm.graph_maslov_details(spec, interval, grid, tol)
    fl = hm.flow_for(spec, tol)
    rows, methods_agree = _hamiltonian_crossings(spec, grid, tol)
    ham = [(c["r"], c["m"]) for c in rows]
    gal = sfm.locate_details(spec, grid, N, tol)
    gal_pairs = gal.pairs()
    sig = {round(c.r_star, 8): c.signature for c in ms.crossings} if ms.delta == 0 else {}
    radii = [(c["r"], c["m"], sig.get(round(c["r"], 8), c["graph_fd"])) for c in rows]
    rep = IndexReport(
        sfl=sf.value, maslov=ms.value, graph_maslov=gm.value, conjugate_radii=radii,
        morse_index=sfm.morse_index(spec, N, tol) if spec.nu == 0 else "infinite",
        agreement={
            "sfl=maslov": sf.value == ms.value,
            "graph=maslov": gm.value == ms.value,
            "conjugacy": _match_radii(ham, gal_pairs),
            "crossing_methods": bool(methods_agree),
        },
        detectors={"hamiltonian": ham, "galerkin": gal_pairs, "crossing_forms": rows},
        N_used=sf.N_used, name=spec.name,
    )
    rep.extra.update({
        "interval": list(interval),
        "sfl_levels": sf.levels,
        "locate_N": gal.N_used,
        "regularization_delta": ms.delta,
        "max_symplectic_defect": fl.max_defect,
        "max_symplectic_defect_abs": fl.max_defect_abs,
        "max_isotropy_defect": fl.max_isotropy,
    })
    if ms.delta:
        rep.notes.append(f"irregular crossing: Maslov index taken for S + {ms.delta:.3e} I")
    return rep


def verify_smale(spec: ProblemSpec, grid: RadiusGrid | None = None, N: int = 32,
                 tol: Tolerances = DEFAULT_TOL) -> IndexReport:
    """``sfl = -Morse = -sum m(r)`` for ``J = -I`` in one or two dimensions."""
    if spec.nu != 0:
        raise ConfigurationError("verify_smale needs nu = 0")
    grid = grid or sfm.default_grid(spec)
    interval = (grid.r_min, grid.r_max)
    sf = sfm.spectral_flow_details(spec, interval, N, tol)
    morse = sfm.morse_index(spec, N, tol)
    if spec.n == 1:
        pairs = hm.detect_conjugate_radii(spec, grid, tol)
        radii = [(r, m, hm.crossing_form_graph(spec, r, m, tol, grid).signature) for r, m in pairs]
        det = "hamiltonian"
        Nloc = None
    else:
        loc = sfm.locate_details(spec, grid, N, tol)
        Nloc = loc.N_used
        radii = [(c.r, c.m, sfm.form_crossing_details(spec, c.r, Nloc, tol, m=c.m).signature)
                 for c in loc.crossings]
        det = "galerkin"
    total = sum(m for _, m, _ in radii)
    rep = IndexReport(
        sfl=sf.value, morse_index=morse, conjugate_radii=radii,
        agreement={
            "sfl=-morse": sf.value == -morse,
            "morse=sum_m": morse == total,
            "signatures=-m": all(s == -m for _, m, s in radii),
        },
        detectors={det: [(r, m) for r, m, _ in radii]},
        N_used=sf.N_used, name=spec.name,
    )
    rep.extra.update({"sum_m": total, "sfl_levels": sf.levels, "locate_N": Nloc})
    return rep


# --------------------------------------------------------------------------
# worked examples
# --------------------------------------------------------------------------

PAPER_RADIUS_NOTE = (
    "the source states the crossing at r = pi on [0, 3 pi / 2], i.e. on the unnormalised "
    "domain [0, r]; on the fixed reference domain this is r = pi / (3 pi / 2) = 2/3"
)


def reproduce_example_II(grid: RadiusGrid | None = None, N: int = 32,
                         tol: Tolerances = DEFAULT_TOL, bifurcation: bool = True) -> IndexReport:
    """Conjugate radius of the gradient example that is not a bifurcation radius."""
    spec, nspec = presets.example_II()
    rep = verify_main_theorem(spec, grid, N, tol)
    rows = rep.detectors["crossing_forms"]
    one = len(rows) == 1
    c = rows[0] if one else {}
    rep.agreement.update({
        "one_crossing": one,
        "m=2": one and c["m"] == 2,
        "nondegenerate": one and c["regular"],
        "signature=0": one and c["graph_fd"] == 0,
        "sfl=0": rep.sfl == 0,
        "maslov=0": rep.maslov == 0,
    })
    rep.extra["paper_location"] = {"r": float(np.pi), "interval": [0.0, 1.5 * float(np.pi)]}
    rep.extra["normalized_location"] = c.get("r")
    rep.notes.append(PAPER_RADIUS_NOTE)
    if bifurcation:
        br = bf.detect_bifurcation_radii(nspec, spec, grid, N, tol)
        rep.agreement["no_bifurcation"] = not br.detected
        rep.agreement["predicted_empty"] = br.predicted == []
        rep.extra["bifurcation"] = br.to_dict()
    return rep


def reproduce_example_I(grid: RadiusGrid | None = None, N: int = 32,
                        tol: Tolerances = DEFAULT_TOL) -> IndexReport:
    """Non-gradient example: a conjugate radius without nontrivial solutions."""
    spec, nspec = presets.example_I()
    rep = verify_main_theorem(spec, grid, N, tol)
    br = bf.detect_bifurcation_radii(nspec, spec, grid, N, tol)
    rep.agreement.update({
        "conjugate_radius_exists": len(rep.conjugate_radii) > 0,
        "all_probes_trivial": bool(br.probes) and br.all_probes_trivial,
        "no_bifurcation": not br.detected,
    })
    rep.extra["bifurcation"] = br.to_dict()
    rep.notes.append(PAPER_RADIUS_NOTE)
    rep.notes.append("non-gradient field: index predictions for bifurcation are not applicable")
    return rep


# --------------------------------------------------------------------------
# geodesics
# --------------------------------------------------------------------------


def verify_geodesic_corollaries(preset: GeodesicPreset, grid: RadiusGrid | None = None, N: int = 32,
                                tol: Tolerances = DEFAULT_TOL) -> IndexReport:
    """Morse index = conjugate count (Riemannian) or sfl = Maslov (otherwise)."""
    spec = to_problem(preset)
    grid = grid or hm.default_grid(spec)
    rep = verify_main_theorem(spec, grid, N, tol)
    count = sum(m for _, m, _ in rep.conjugate_radii)
    params = [preset.parameter(r) for r, _, _ in rep.conjugate_radii]
    expected = expected_conjugate_parameters(preset)
    calib = len(params) == len(expected) and all(
        abs(p - e) <= grid.refinement_tol * preset.length + 1e-9 for p, e in zip(params, expected)
    ) and all(m == preset.k for _, m, _ in rep.conjugate_radii)
    rep.agreement["calibration"] = bool(calib)
    if preset.riemannian:
        rep.agreement["morse=sum_m"] = rep.morse_index == count
    rep.extra.update({
        "preset": preset.label(), "conjugate_count": count,
        "conjugate_parameters": params, "expected_parameters": expected,
    })
    return rep


# --------------------------------------------------------------------------
# randomised suite
# --------------------------------------------------------------------------


@dataclass
class SuiteResult:
    reports: list
    smale: dict = field(default_factory=dict)

    @property
    def all_agree(self) -> bool:
        return all(r.all_agree for r in self.reports) and all(r.all_agree for r in self.smale.values())

    def to_dict(self) -> dict:
        return {
            "all_agree": self.all_agree,
            "instances": [r.to_dict() for r in self.reports],
            "smale": {str(i): r.to_dict() for i, r in sorted(self.smale.items())},
        }


def run_suite(count: int = 20, seed: int = presets.SUITE_SEED, N: int = 32,
              tol: Tolerances = DEFAULT_TOL, threads: int | None = None) -> SuiteResult:
    insts = presets.random_suite(count, seed)

    def one(inst):
        rep = verify_main_theorem(inst.spec, None, N, tol)
        rep.extra["resamples"] = inst.resamples
        rep.extra["S"] = inst.spec.S.expressions()
        sm = verify_smale(inst.spec, None, N, tol) if inst.spec.nu == 0 else None
        return rep, sm

    out = pmap(one, insts, threads)
    return SuiteResult([r for r, _ in out], {i: s for i, (_, s) in enumerate(out) if s is not None})
