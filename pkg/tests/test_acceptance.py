"""Acceptance criteria, one test each, at the stated tolerances.

Every test records a single pass/fail line; the lines are printed in the
``acceptance criteria`` section of the pytest summary.
"""
import json
import math
import time

import numpy as np
import pytest

from indexflow import bifurcation as bf
from indexflow import hamiltonian_maslov as hm
from indexflow import presets
from indexflow import spectral_flow as sfm
from indexflow import verify as vf
from indexflow.geodesics import LorentzConstCurv, SphereConstCurv

PI = math.pi
SYMPLECTIC_TOL = 1e-10


def stable(levels, agree=3):
    keys = [k for _, k in levels]
    Ns = [n for n, _ in levels]
    return len(keys) >= agree and len(set(keys[-agree:])) == 1 and all(
        b - a == 8 for a, b in zip(Ns[-agree:], Ns[-agree + 1:]))


@pytest.fixture(scope="module")
def suite_run():
    t = time.perf_counter()
    res = vf.run_suite(20)
    return res, time.perf_counter() - t


@pytest.fixture(scope="module")
def stability_log():
    return {}


def test_criterion_01_scalar_chain(criterion, stability_log):
    t = time.perf_counter()
    spec = presets.scalar((3.5 * PI) ** 2)
    radii = hm.detect_conjugate_radii(spec)
    sf = sfm.spectral_flow_details(spec)
    mas = hm.maslov_index(spec)
    morse = sfm.morse_index(spec)
    elapsed = time.perf_counter() - t
    expected = [1 / 3.5, 2 / 3.5, 3 / 3.5]
    ok_r = len(radii) == 3 and all(abs(r - e) <= 1e-6 and m == 1 for (r, m), e in zip(radii, expected))
    total = sum(m for _, m in radii)
    ok = ok_r and sf.value == -3 and mas == -3 and morse == 3 and total == 3 and elapsed < 10
    stability_log["scalar sfl"] = sf.levels
    err = max(abs(r - e) for (r, _), e in zip(radii, expected)) if ok_r else float("nan")
    criterion(1, ok, f"radii err {err:.1e}, sfl={sf.value}, maslov={mas}, morse={morse}, sum m={total}, "
                     f"{elapsed:.2f}s")
    assert ok


def test_criterion_02_square_smale(criterion, stability_log):
    t = time.perf_counter()
    spec = presets.square_smale(60.0)
    rep = vf.verify_smale(spec, None, 64)
    elapsed = time.perf_counter() - t
    radii = [(r, m) for r, m, _ in rep.conjugate_radii]
    exp = [(PI * math.sqrt(2 / 60), 1), (PI * math.sqrt(5 / 60), 2)]
    ok_r = len(radii) == 2 and all(abs(r - e) <= 1e-3 and m == em for (r, m), (e, em) in zip(radii, exp))
    total = sum(m for _, m in radii)
    ok = ok_r and rep.morse_index == 3 and -rep.sfl == total == 3 and elapsed < 60
    stability_log["square sfl"] = rep.extra["sfl_levels"]
    criterion(2, ok, f"radii {[round(r, 6) for r, _ in radii]}, m {[m for _, m in radii]}, morse={rep.morse_index}, "
                     f"-sfl={-rep.sfl}, sum m={total}, {elapsed:.1f}s")
    assert ok


def test_criterion_03_example_II(criterion, stability_log):
    a = vf.reproduce_example_II()
    b = vf.reproduce_example_II()
    same = json.dumps(a.to_dict(), sort_keys=True) == json.dumps(b.to_dict(), sort_keys=True)
    rows = a.detectors["crossing_forms"]
    one = len(rows) == 1
    ok = (one and rows[0]["m"] == 2 and rows[0]["regular"] and rows[0]["graph_fd"] == 0
          and rows[0]["boundary_formula"] == 0 and a.sfl == 0 and a.maslov == 0
          and a.extra["bifurcation"]["detected"] == [] and same)
    stability_log["example II sfl"] = a.extra["sfl_levels"]
    detail = (f"crossings={len(rows)}, m={rows[0]['m'] if one else '-'}, "
              f"signature={rows[0]['graph_fd'] if one else '-'}, nondegenerate={rows[0]['regular'] if one else '-'}, "
              f"sfl={a.sfl}, maslov={a.maslov}, detected={len(a.extra['bifurcation']['detected'])}, "
              f"deterministic={same}")
    criterion(3, ok, detail)
    assert ok


def test_criterion_04_example_I(criterion):
    spec, ns = presets.example_I()
    a = bf.detect_bifurcation_radii(ns, spec)
    b = bf.detect_bifurcation_radii(ns, spec)
    same = json.dumps(a.to_dict(), sort_keys=True) == json.dumps(b.to_dict(), sort_keys=True)
    ok = (not ns.is_gradient and len(a.probes) > 0 and a.all_probes_trivial and a.detected == []
          and len(a.conjugate_radii) > 0 and same)
    criterion(4, ok, f"non-gradient, {len(a.probes)} probes all trivial={a.all_probes_trivial}, "
                     f"conjugate radii={len(a.conjugate_radii)}, detected={len(a.detected)}, deterministic={same}")
    assert ok


def test_criterion_05_random_suite(criterion, suite_run, stability_log):
    res, elapsed = suite_run
    n_eq = sum(r.sfl == r.maslov for r in res.reports)
    regular, agree = 0, 0
    for r in res.reports:
        for c in r.detectors["crossing_forms"]:
            if c["regular"] and c["boundary_formula"] is not None:
                regular += 1
                agree += c["graph_fd"] == c["boundary_formula"]
    for i, r in enumerate(res.reports):
        stability_log[f"suite {i} sfl"] = r.extra["sfl_levels"]
    ok = len(res.reports) == 20 and n_eq == 20 and agree == regular and elapsed < 300
    criterion(5, ok, f"sfl=maslov on {n_eq}/20, crossing signatures agree {agree}/{regular}, {elapsed:.1f}s")
    assert ok


def test_criterion_06_graph_formula(criterion, suite_run):
    res, _ = suite_run
    n = sum(r.graph_maslov == r.maslov for r in res.reports)
    criterion(6, n == 20, f"graph_maslov = maslov_index on {n}/20")
    assert n == 20


def test_criterion_07_invariants(criterion, suite_run):
    # the stated bound is absolute: ||Psi^T sigma Psi - sigma||_F <= 1e-10
    res, _ = suite_run
    absd = [r.extra["max_symplectic_defect_abs"] for r in res.reports]
    reld = [r.extra["max_symplectic_defect"] for r in res.reports]
    iso = [r.extra["max_isotropy_defect"] for r in res.reports]
    bad = [i for i, d in enumerate(absd) if d > SYMPLECTIC_TOL]
    ok = not bad and max(iso) <= SYMPLECTIC_TOL
    criterion(7, ok, f"max abs symplectic defect {max(absd):.1e} ({len(bad)}/20 above 1e-10: {bad}), "
                     f"max relative {max(reld):.1e}, max isotropy {max(iso):.1e}")
    assert ok


def test_criterion_08_pitchfork(criterion):
    t = time.perf_counter()
    spec, ns = presets.pitchfork((2.5 * PI) ** 2)
    rep = bf.detect_bifurcation_radii(ns, spec)
    elapsed = time.perf_counter() - t
    det = rep.detected_radii
    conj = [r for r, _, _ in rep.conjugate_radii]
    ok = (len(det) == 2 and all(abs(r - e) <= 2e-2 for r, e in zip(det, [0.4, 0.8]))
          and np.allclose(det, conj, atol=1e-10) and len(det) >= abs(rep.sfl) // 1 == 2 and elapsed < 120)
    criterion(8, ok, f"detected {[round(r, 8) for r in det]}, conjugate {[round(r, 8) for r in conj]}, "
                     f"sfl={rep.sfl}, lower bound={rep.lower_bound}, {elapsed:.1f}s")
    assert ok


def test_criterion_09_geodesics(criterion):
    sph = vf.verify_geodesic_corollaries(SphereConstCurv(1.0, 2, 1.5 * PI))
    lor = vf.verify_geodesic_corollaries(LorentzConstCurv())
    count = sph.extra["conjugate_count"]
    ok = sph.morse_index == 2 == count and lor.sfl == lor.maslov
    criterion(9, ok, f"sphere morse={sph.morse_index}, sum M={count}; lorentz sfl={lor.sfl}, maslov={lor.maslov}")
    assert ok


def test_criterion_10_refinement(criterion, stability_log):
    spec = presets.scalar((3.5 * PI) ** 2)
    loc = sfm.locate_details(spec)
    stability_log["scalar locate"] = loc.levels
    sq = sfm.locate_details(presets.square_smale(60.0), None, 64)
    stability_log["square locate"] = sq.levels
    missing = [k for k in ("scalar sfl", "square sfl", "example II sfl") if k not in stability_log]
    unstable = [k for k, lv in stability_log.items() if not stable(lv)]
    ok = not unstable and not missing
    criterion(10, ok, f"{len(stability_log)} ladders, unstable={unstable}, missing={missing}")
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
