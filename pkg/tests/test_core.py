import math

import numpy as np
import pytest

from indexflow.core import (
    DEFAULT_TOL,
    CallableField,
    ConfigurationError,
    ConstantField,
    Domain,
    DomainError,
    GridField,
    IndexReport,
    ProblemSpec,
    RadiusGrid,
    Tolerances,
    build_J,
    sample_S,
    validate,
)


@pytest.mark.parametrize("k,nu", [(1, 0), (1, 1), (3, 0), (3, 2), (4, 4)])
def test_build_J_signature(k, nu):
    J = build_J(ProblemSpec(k=k, nu=nu, S=np.zeros((k, k))))
    assert J.shape == (k, k)
    assert np.array_equal(np.diag(J), [-1] * (k - nu) + [1] * nu)
    assert np.array_equal(J @ J, np.eye(k))


@pytest.mark.parametrize("nu", [-1, 3])
def test_build_J_rejects_bad_index(nu):
    with pytest.raises(ConfigurationError):
        build_J(ProblemSpec(k=2, nu=nu, S=np.zeros((2, 2))))


def test_sample_S_rescales_and_checks_domain():
    spec = ProblemSpec(k=1, nu=0, S=CallableField(lambda x: np.array([[1.0 + x[0]]]), k=1, n=1))
    # S_r(x) = r^2 S(r x)
    assert sample_S(spec, 0.5, np.array([0.5]))[0, 0] == pytest.approx(0.25 * 1.25)
    assert np.all(sample_S(spec, 0.0, np.array([0.3])) == 0)
    with pytest.raises(DomainError):
        sample_S(spec, 0.5, np.array([1.5]))


def test_validate_reports_every_violation():
    bad = ProblemSpec(k=2, nu=5, S=np.array([[0.0, 1.0], [2.0, 0.0]]), r_max=1.5)
    rep = validate(bad)
    assert not rep.ok
    text = " ".join(rep.violations)
    assert "signature" in text and "symmetry" in text and "radius" in text


def test_validate_accepts_good_problem():
    assert validate(ProblemSpec(k=2, nu=1, S=np.diag([-1.0, 2.0]))).ok


def test_validate_flags_non_finite_values():
    spec = ProblemSpec(k=1, nu=0, S=CallableField(lambda x: np.array([[np.nan]]), k=1, n=1))
    assert any("finite" in v for v in validate(spec).violations)


def test_spec_is_hashable_and_frozen():
    spec = ProblemSpec(k=1, nu=0, S=[[-1.0]])
    assert isinstance(spec.S, ConstantField)
    assert spec.domain is Domain.UNIT_INTERVAL
    hash(spec)
    with pytest.raises(Exception):
        spec.k = 2


def test_shifted_adds_multiple_of_identity():
    spec = ProblemSpec(k=2, nu=1, S=np.diag([-3.0, 4.0]))
    sh = spec.shifted(0.5)
    assert np.allclose(sh.S(np.array([0.2])), np.diag([-2.5, 4.5]))


def test_grid_field_interpolates_linearly():
    ax = np.linspace(0, 1, 5)
    vals = (2 * ax)[:, None, None] * np.ones((1, 1, 1))
    f = GridField([ax], vals)
    assert f(np.array([0.3]))[0, 0] == pytest.approx(0.6)
    ax2 = np.linspace(0, 1, 4)
    X, Y = np.meshgrid(ax2, ax2, indexing="ij")
    g = GridField([ax2, ax2], (X + Y)[..., None, None])
    assert g(np.array([0.25, 0.5]))[0, 0] == pytest.approx(0.75)
    with pytest.raises(ConfigurationError):
        GridField([np.linspace(0.1, 1, 3)], np.zeros((3, 1, 1)))


def test_radius_grid():
    g = RadiusGrid.uniform(11, 1.0)
    assert g.r_min == pytest.approx(1e-3)
    assert g.r_max == 1.0
    sub = g.restricted(0.2, 0.5)
    assert sub.r_min == pytest.approx(0.2) and sub.r_max == pytest.approx(0.5)
    with pytest.raises(ConfigurationError):
        RadiusGrid((0.5, 0.2))


def test_tolerances_defaults():
    assert DEFAULT_TOL.symplectic_tol == 1e-10
    assert DEFAULT_TOL.newton_tol == 1e-10
    assert DEFAULT_TOL.newton_max_iter == 50
    assert DEFAULT_TOL.kernel_window == pytest.approx(1e-7)
    assert isinstance(Tolerances(n_max=64), Tolerances)


def test_index_report_json_roundtrip():
    rep = IndexReport(sfl=np.int64(-3), maslov=-3, conjugate_radii=[(np.float64(0.5), 1, -1)],
                      agreement={"x": np.bool_(True)}, extra={"v": np.arange(3), "nan": math.nan})
    d = rep.to_dict()
    import json

    json.dumps(d)
    assert d["sfl"] == -3 and d["extra"]["v"] == [0, 1, 2] and d["extra"]["nan"] == "nan"
    assert rep.all_agree
