import csv
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy import integrate

from indexflow import hamiltonian_maslov as hm
from indexflow import presets
from indexflow import spectral_flow as sfm
from indexflow.core import CallableField, ConvergenceError, PreconditionError, ProblemSpec, RadiusGrid, Tolerances

PI = math.pi


def test_assembly_constant_scalar_is_diagonal():
    c = 30.0
    A, B = sfm.assemble(presets.scalar(c), 0.7, 12)
    p = np.arange(1, 13)
    assert np.allclose(np.diag(B), (PI * p) ** 2)
    assert np.allclose(A, np.diag((PI * p) ** 2 - 0.49 * c), atol=1e-10)


def test_mass_matrix_against_quadrature():
    S = CallableField(lambda x: np.cos(2.0 * x[..., 0])[..., None, None] * np.ones((1, 1)), k=1, n=1)
    spec = ProblemSpec(k=1, nu=0, S=S)
    r, N = 0.8, 10
    A, B = sfm.assemble(spec, r, N)
    M = A - np.diag((PI * np.arange(1, N + 1)) ** 2)  # J = -1 so A = K + M
    for p, q in [(1, 1), (2, 5), (7, 3), (10, 10)]:
        ref, _ = integrate.quad(lambda x: r * r * math.cos(2 * r * x) * 2 * math.sin(p * PI * x) * math.sin(q * PI * x),
                                0, 1, epsabs=1e-13, epsrel=1e-13, limit=200)
        assert M[p - 1, q - 1] == pytest.approx(ref, abs=1e-10)


def test_assembly_is_symmetric_for_systems():
    spec = presets.random_suite(5)[4].spec
    A, _ = sfm.assemble(spec, 0.6, 16)
    assert np.allclose(A, A.T, atol=1e-10)


def test_indefinite_block_sign():
    A, _ = sfm.assemble(presets.zero_potential(k=2, nu=1), 0.5, 4)
    kap = (PI * np.arange(1, 5)) ** 2
    assert np.allclose(np.diag(A), np.concatenate([kap, -kap]))


def test_spectral_flow_scalar(scalar35):
    assert sfm.spectral_flow(scalar35) == -3
    assert sfm.morse_index(scalar35) == 3


def test_zero_potential():
    assert sfm.spectral_flow(presets.zero_potential()) == 0
    assert sfm.morse_index(presets.zero_potential()) == 0


def test_positive_potential_has_no_flow():
    spec = presets.constant([[50.0]])
    assert sfm.spectral_flow(spec) == 0
    assert sfm.locate_degeneracies(spec) == []


def test_indefinite_morse_index_is_infinite():
    assert sfm.morse_index(presets.example_II()[0]) == "infinite"


@pytest.mark.parametrize("p", [1, 2, 3])
def test_galerkin_crossing_form_oracle(scalar35, p):
    # lambda_p(r) = 1 - r^2 c / (p pi)^2, so lambda_p'(p/3.5) = -7/p
    fc = sfm.form_crossing_details(scalar35, p / 3.5, 32)
    assert fc.m == 1 and fc.signature == -1 and fc.regular
    assert fc.gamma[0, 0] == pytest.approx(-7.0 / p, rel=1e-6)


def test_locate_matches_hamiltonian(scalar35):
    gal = sfm.locate_degeneracies(scalar35)
    ham = hm.detect_conjugate_radii(scalar35)
    assert [m for _, m in gal] == [m for _, m in ham]
    assert np.allclose([r for r, _ in gal], [r for r, _ in ham], atol=1e-10)


def test_double_degeneracy_multiplicity():
    c = (1.5 * PI) ** 2
    out = sfm.locate_degeneracies(presets.constant(np.diag([-c, c]), nu=1))
    assert len(out) == 1 and out[0][1] == 2
    assert out[0][0] == pytest.approx(2 / 3, abs=1e-10)
    m, sig = sfm.form_crossing_signature(presets.constant(np.diag([-c, c]), nu=1), out[0][0])
    assert (m, sig) == (2, 0)


def test_endpoint_degeneracy_is_rejected():
    with pytest.raises(PreconditionError):
        sfm.spectral_flow(presets.scalar((3 * PI) ** 2))


def test_square_dirichlet_oracle():
    spec = presets.square_smale(60.0)
    loc = sfm.locate_details(spec, None, 64)
    lams = sorted({PI ** 2 * (p * p + q * q) for p in range(1, 6) for q in range(1, 6)})
    expected = [math.sqrt(l / 60.0) for l in lams if l < 60.0]
    assert [c.m for c in loc.crossings] == [1, 2]
    assert np.allclose([c.r for c in loc.crossings], expected, atol=1e-6)
    assert sfm.spectral_flow(spec, None, 64) == -3
    assert sfm.morse_index(spec, 64) == 3


def test_matrix_free_operator_matches_dense():
    spec = presets.square_smale(60.0)
    d = sfm.Discretization(spec, 8)
    dense = d.A_hat(0.7)
    op = d.operator(d.field_values(0.7))
    x = np.random.default_rng(0).normal(size=d.size)
    assert np.allclose(op.matvec(x), dense @ x, atol=1e-10)


def test_ladder_waits_for_three_equal_keys():
    seq = iter([5, 4, 3, 3, 3, 3])
    payload, N, keys = sfm.ladder(lambda Ni: (next(seq), Ni), 10, Tolerances(refine_step=2))
    assert N == 18 and [k for _, k in keys] == [5, 4, 3, 3, 3]


def test_ladder_gives_up_at_n_max():
    with pytest.raises(ConvergenceError):
        sfm.ladder(lambda Ni: (Ni, Ni), 8, Tolerances(n_max=40))


def test_eigen_path_csv(tmp_path, scalar35):
    grid = RadiusGrid.uniform(21, 1.0)
    path = sfm.eigen_path(scalar35, grid, 8)
    path.to_csv(tmp_path / "e.csv", 4)
    rows = list(csv.reader(open(tmp_path / "e.csv")))
    assert rows[0] == ["r", "lambda1", "lambda2", "lambda3", "lambda4", "neg_count"]
    assert len(rows) == 22 and rows[-1][-1] == "3"


def test_homotopy_invariance(scalar35):
    c = (3.5 * PI) ** 2
    base = lambda x: -c * np.ones(np.shape(x)[:-1])  # noqa: E731
    for s in np.linspace(0, 1, 5):
        field = CallableField(lambda x, s=s: (base(x) * (1 + 0.1 * s * np.cos(PI * x[..., 0])))[..., None, None],
                              k=1, n=1)
        spec = ProblemSpec(k=1, nu=0, S=field)
        assert sfm.spectral_flow(spec) == -3
        assert hm.maslov_index(spec) == -3


@settings(max_examples=12, deadline=None)
@given(st.integers(0, 2), st.lists(st.floats(-150, 150), min_size=3, max_size=3))
def test_sfl_equals_maslov_for_constant_systems(nu, e):
    spec = ProblemSpec(k=2, nu=nu, S=np.array([[e[0], e[1]], [e[1], e[2]]]))
    try:
        mas = hm.maslov_index(spec)
        sfl = sfm.spectral_flow(spec)
    except PreconditionError:
        assume(False)
    assert sfl == mas
