import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from indexflow import hamiltonian_maslov as hm
from indexflow import presets
from indexflow import spectral_flow as sfm
from indexflow.core import ConfigurationError, IrregularCrossingError, PreconditionError, ProblemSpec, Tolerances
from indexflow.lagrangian import symplectic_matrix

PI = math.pi

# fold of the coupled family S = [[-p, a], [a, q]], nu = 1: the two opposite
# crossings merge at a*, located by bisection on the crossing count
P_FOLD, Q_FOLD = (1.5 * PI) ** 2, (1.3 * PI) ** 2
A_STAR = 2.763489621167423


def fold_spec(a):
    return presets.constant([[-P_FOLD, a], [a, Q_FOLD]], nu=1)


@pytest.mark.parametrize("r", [0.13, 0.5, 0.97])
def test_fundamental_solution_closed_form(r):
    c = (3.5 * PI) ** 2
    fs = hm.integrate_fundamental(presets.scalar(c), r)
    w = r * math.sqrt(c)
    exact = np.array([[math.cos(w), -math.sin(w) / w], [w * math.sin(w), math.cos(w)]])
    assert np.allclose(fs.Psi1, exact, rtol=1e-9, atol=1e-9)
    assert fs.defect_rel <= 1e-10


def test_dense_output_matches_endpoint():
    spec = presets.example_II()[0]
    fs = hm.integrate_fundamental(spec, 0.8)
    assert np.allclose(fs.Psi(1.0), fs.Psi1, atol=1e-10)
    assert np.allclose(fs.Psi(0.0), np.eye(4))


def test_batch_agrees_with_single():
    spec = presets.random_suite(4)[3].spec
    rs = [0.2, 0.55, 0.9]
    for fs in hm.integrate_batch(spec, rs):
        ref = hm.integrate_fundamental(spec, fs.r)
        assert np.allclose(fs.Psi1, ref.Psi1, rtol=1e-9, atol=1e-9)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2), st.lists(st.floats(-80, 80), min_size=3, max_size=3), st.floats(0.05, 1.0))
def test_symplectic_and_isotropic(nu, entries, r):
    S = np.array([[entries[0], entries[1]], [entries[1], entries[2]]])
    spec = ProblemSpec(k=2, nu=nu, S=S)
    fs = hm.integrate_fundamental(spec, r)
    sig = symplectic_matrix(2)
    assert fs.defect_rel <= 1e-10
    Z, _ = hm.boundary_lagrangian(fs).orthonormal()
    assert np.linalg.norm(Z.T @ sig @ Z) <= 1e-10
    assert np.linalg.norm(fs.Psi1.T @ sig @ fs.Psi1 - sig) / max(1, np.linalg.norm(fs.Psi1, 2) ** 2) <= 1e-10


def test_scalar_conjugate_radii(scalar35):
    rs = hm.detect_conjugate_radii(scalar35)
    assert [m for _, m in rs] == [1, 1, 1]
    assert np.allclose([r for r, _ in rs], [1 / 3.5, 2 / 3.5, 3 / 3.5], atol=1e-10)


def test_zero_potential_has_no_crossings():
    spec = presets.zero_potential(k=2, nu=1)
    assert hm.detect_conjugate_radii(spec) == []
    assert hm.maslov_index(spec) == 0 and hm.graph_maslov(spec) == 0


@pytest.mark.parametrize("j", [1, 2, 3])
def test_boundary_crossing_form_oracle(scalar35, j):
    # u = -sin(w x)/w, u'(1) = -cos(w) = +-1 with J = -1: Gamma = -1/r^3, Lagrangian form -1/r
    r = j / 3.5
    rep = hm.crossing_form_boundary(scalar35, r)
    assert rep.m == 1 and rep.signature == -1 and rep.regular
    assert rep.gamma_matrix[0, 0] == pytest.approx(-1 / r ** 3, rel=1e-8)
    assert rep.gamma_normalized[0, 0] == pytest.approx(-1 / r, rel=1e-8)


def test_graph_and_boundary_forms_agree():
    spec = presets.constant([[-40.0, 7.0], [7.0, 55.0]], nu=1)
    for r, m in hm.detect_conjugate_radii(spec):
        g = hm.crossing_form_graph(spec, r, m)
        b = hm.crossing_form_boundary(spec, r, m=m)
        assert g.signature == b.signature
        assert np.allclose(np.linalg.eigvalsh(g.gamma_normalized), np.linalg.eigvalsh(b.gamma_normalized),
                           rtol=1e-5, atol=1e-7)


def test_boundary_form_rejects_non_conjugate(scalar35):
    with pytest.raises(PreconditionError):
        hm.crossing_form_boundary(scalar35, 0.4, m=1)


def test_maslov_scalar(scalar35):
    assert hm.maslov_index(scalar35) == -3
    assert hm.graph_maslov(scalar35) == -3


@pytest.mark.parametrize("signs,expected", [((-1, 1), 0), ((-1, -1), -2), ((1, 1), 2), ((1, -1), 0)])
def test_decoupled_oracle(signs, expected):
    # J = diag(-1, +1): block i crosses iff J_ii * S_ii > 0, twice here, with signature J_ii
    c = (2.5 * PI) ** 2
    spec = presets.constant(np.diag([signs[0] * c, signs[1] * c]), nu=1)
    assert hm.maslov_index(spec) == expected
    assert hm.graph_maslov(spec) == expected
    assert sfm.spectral_flow(spec) == expected


def test_endpoint_crossing_is_rejected():
    spec = presets.scalar((3 * PI) ** 2)  # conjugate exactly at r = 1
    with pytest.raises(PreconditionError):
        hm.maslov_index(spec)


def test_additivity_over_subintervals(scalar35):
    grid = hm.default_grid(scalar35)
    whole = hm.maslov_index(scalar35, (0.01, 1.0), grid)
    parts = hm.maslov_index(scalar35, (0.01, 0.5), grid) + hm.maslov_index(scalar35, (0.5, 1.0), grid)
    assert whole == parts == -3


def test_two_dimensional_is_rejected():
    with pytest.raises(ConfigurationError):
        hm.maslov_index(presets.square_smale())


@pytest.mark.parametrize("a", [2.0, A_STAR - 1e-6, A_STAR + 1e-6, 3.0])
def test_fold_family_is_homotopy_invariant(a):
    spec = fold_spec(a)
    assert hm.maslov_index(spec) == hm.graph_maslov(spec) == sfm.spectral_flow(spec) == 0


def test_close_pair_in_one_cell_is_resolved():
    rs = hm.detect_conjugate_radii(fold_spec(A_STAR - 1e-6))
    assert len(rs) == 2 and rs[1][0] - rs[0][0] < 1e-3
    ms = hm.maslov_details(fold_spec(A_STAR - 1e-6))
    assert sorted(c.signature for c in ms.crossings) == [-1, 1]


def test_tangential_crossing_is_regularised():
    res = hm.maslov_details(fold_spec(A_STAR))
    assert res.value == 0
    assert res.delta != 0 and res.attempts >= 1
    assert all(c.regular for c in res.crossings)


def test_irregular_crossing_without_regularisation_raises():
    tol = Tolerances(max_regularization_attempts=0)
    with pytest.raises(IrregularCrossingError):
        hm.maslov_details(fold_spec(A_STAR), tol=tol)
