import csv
import json
import math

import numpy as np
import pytest

from indexflow import bifurcation as bf
from indexflow import presets
from indexflow.core import ConfigurationError, NonlinearSpec

PI = math.pi


def first_mode(N, eps):
    c = np.zeros(N)
    c[0] = eps / PI  # unit H^1_0 norm times eps
    return c


def test_zero_is_a_solution():
    spec, ns = presets.example_II()
    res = bf.newton_solve(ns, spec, 0.5, np.zeros(2 * 24), 24)
    assert res.converged and res.trivial and res.iterations == 0
    assert res.point.residual == 0.0


def test_wrong_initial_size():
    spec, ns = presets.pitchfork()
    with pytest.raises(ConfigurationError):
        bf.newton_solve(ns, spec, 0.5, np.zeros(3), 24)


@pytest.mark.parametrize("offset", [0.02, 0.01, 0.005])
def test_pitchfork_amplitude_oracle(offset):
    # one-mode truncation: pi^2 A - r^2 c A + (3/2) r^2 A^3 = 0
    c = (1.5 * PI) ** 2
    spec, ns = presets.pitchfork(c)
    r = 2 / 3 + offset
    res = bf.newton_solve(ns, spec, r, first_mode(32, 0.1), 32, deflate=True)
    assert res.nontrivial
    A = math.sqrt((r * r * c - PI ** 2) / (1.5 * r * r))
    assert res.point.norm_H10 == pytest.approx(PI * A, rel=5e-3)
    assert res.point.residual <= 1e-10 * (1 + res.point.norm_H10)


def test_pitchfork_branch_shrinks():
    c = (1.5 * PI) ** 2
    spec, ns = presets.pitchfork(c)
    norms = [bf.newton_solve(ns, spec, 2 / 3 + d, first_mode(32, 0.1), 32, deflate=True).point.norm_H10
             for d in (0.02, 0.01, 0.005, 0.001)]
    assert all(a > b for a, b in zip(norms, norms[1:]))


def test_plain_newton_falls_to_trivial_root():
    c = (1.5 * PI) ** 2
    spec, ns = presets.pitchfork(c)
    assert bf.newton_solve(ns, spec, 2 / 3 + 0.02, first_mode(32, 0.1), 32).trivial


@pytest.mark.parametrize("offset", [-0.01, 0.01])
def test_example_I_probe_is_trivial(offset):
    spec, ns = presets.example_I()
    K = bf._kernel(spec, 2 / 3, 24, 2, bf.DEFAULT_TOL)
    for j in range(2):
        res = bf.newton_solve(ns, spec, 2 / 3 + offset, 0.1 * K[:, j], 24)
        assert res.trivial


def test_detect_pitchfork():
    spec, ns = presets.pitchfork()
    rep = bf.detect_bifurcation_radii(ns, spec)
    assert np.allclose(rep.detected_radii, [0.4, 0.8], atol=1e-8)
    assert np.allclose(rep.predicted, [0.4, 0.8], atol=1e-8)
    assert rep.lower_bound == 2 and rep.sfl == -2
    for r, pts in rep.detected:
        norms = [b.norm_H10 for b in pts]
        assert len(pts) >= 3 and all(a > b for a, b in zip(norms, norms[1:]))
        assert max(norms) <= 25
        assert all(abs(b.r - r) <= 0.02 + 1e-12 for b in pts)
        assert all(b.residual <= 1e-10 * (1 + b.norm_H10) for b in pts)


def test_example_II_has_no_bifurcation():
    spec, ns = presets.example_II()
    rep = bf.detect_bifurcation_radii(ns, spec)
    assert rep.detected == [] and rep.predicted == [] and rep.lower_bound == 0
    assert [(m, s) for _, m, s in rep.conjugate_radii] == [(2, 0)]


def test_example_I_not_applicable():
    spec, ns = presets.example_I()
    rep = bf.detect_bifurcation_radii(ns, spec)
    assert rep.detected == []
    assert rep.predicted == "not applicable" and rep.lower_bound == "not applicable"
    assert rep.probes and rep.all_probes_trivial


def test_linear_problem_is_flagged():
    spec = presets.scalar((1.5 * PI) ** 2)
    rep = bf.detect_bifurcation_radii(presets.linear_nonlinear(spec), spec)
    assert rep.degenerate_linear
    assert np.allclose(rep.detected_radii, [2 / 3], atol=1e-9)
    pts = rep.detected[0][1]
    assert all(p.residual <= 1e-8 * (1 + p.norm_H10) for p in pts)


def test_crowded_crossings_are_rejected():
    spec, ns = presets.pitchfork((25.5 * PI) ** 2)
    with pytest.raises(ConfigurationError):
        bf.detect_bifurcation_radii(ns, spec)


def test_linearisation_mismatch():
    spec, ns = presets.pitchfork()
    with pytest.raises(ConfigurationError):
        bf.detect_bifurcation_radii(ns, presets.scalar(10.0))


def test_count_lower_bound():
    assert bf.count_lower_bound(presets.scalar((3.5 * PI) ** 2)) == 3
    assert bf.count_lower_bound(presets.example_II()[0]) == 0
    c = (2.5 * PI) ** 2
    assert bf.count_lower_bound(presets.constant(np.diag([-c, -c]), nu=1)) == 2


def test_report_serialisation(tmp_path):
    spec, ns = presets.pitchfork()
    rep = bf.detect_bifurcation_radii(ns, spec)
    d = json.loads(json.dumps(rep.to_dict()))
    assert [x["r"] for x in d["detected"]] == pytest.approx([0.4, 0.8])
    rep.branches_csv(tmp_path / "b.csv")
    rows = list(csv.reader(open(tmp_path / "b.csv")))
    assert rows[0] == ["r_star", "r", "norm_H10", "residual"] and len(rows) == 7


def test_two_dimensional_nonlinear_is_rejected():
    spec = presets.square_smale()
    ns = NonlinearSpec(V=lambda x, u: -60 * u, DV=lambda x, u: -60 * np.ones(u.shape + (1,)), k=1, n=2)
    with pytest.raises(ConfigurationError):
        bf.SemilinearGalerkin(ns, spec, 8)
