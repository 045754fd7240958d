import math

import numpy as np
import pytest

from indexflow import geodesics as geo
from indexflow import hamiltonian_maslov as hm
from indexflow.core import ConfigurationError

PI = math.pi


def test_flat_preset():
    spec = geo.to_problem(geo.FlatRiemannian(3))
    assert np.array_equal(spec.J, -np.eye(3))
    assert np.allclose(spec.S(np.array([0.4])), 0)
    assert geo.conjugate_point_count(geo.FlatRiemannian(3)) == (0, 0)


def test_sphere_sign_calibration():
    pr = geo.SphereConstCurv(1.0, 2, 1.5 * PI)
    spec = geo.to_problem(pr)
    assert np.allclose(spec.S(np.array([0.1])), -(1.5 * PI) ** 2 * np.eye(2))
    radii = hm.detect_conjugate_radii(spec)
    assert len(radii) == 1 and radii[0][1] == 2
    assert pr.parameter(radii[0][0]) == pytest.approx(PI, abs=1e-9)


@pytest.mark.parametrize("L,expected", [(1.5 * PI, (2, 2)), (2.5 * PI, (4, 4)), (3.5 * PI, (6, 6))])
def test_sphere_counts(L, expected):
    assert geo.conjugate_point_count(geo.SphereConstCurv(1.0, 2, L)) == expected


def test_sphere_calibration_three_normals():
    pr = geo.SphereConstCurv(1.0, 3, 2.5 * PI)
    radii = hm.detect_conjugate_radii(geo.to_problem(pr))
    assert [m for _, m in radii] == [3, 3]
    assert np.allclose([pr.parameter(r) for r, _ in radii], [PI, 2 * PI], atol=1e-9)


def test_hyperbolic_has_no_conjugate_points():
    assert geo.conjugate_point_count(geo.HyperbolicConstCurv(-1.0, 2, 3 * PI)) == (0, 0)


@pytest.mark.parametrize("kappa", [0.25, 1.0, 4.0])
def test_scaling_covariance(kappa):
    L = 1.3 * PI  # sqrt(kappa) L stays off multiples of pi for every kappa
    a = geo.conjugate_point_count(geo.SphereConstCurv(kappa, 2, L))
    b = geo.conjugate_point_count(geo.SphereConstCurv(1.0, 2, math.sqrt(kappa) * L))
    assert a == b


def test_lorentz_sfl_equals_maslov():
    sfl, mas = geo.conjugate_point_count(geo.LorentzConstCurv())
    assert sfl == mas


def test_lorentz_time_like_normals_count_positively():
    # each crossing has signature -(k - nu) + nu
    pr = geo.LorentzConstCurv(1.0, 3, 2.5 * PI, nu=1)
    assert geo.conjugate_point_count(pr) == (-2, -2)


def test_expected_parameters():
    assert geo.expected_conjugate_parameters(geo.SphereConstCurv(4.0, 2, 2.0 * PI)) == pytest.approx(
        [PI / 2, PI, 1.5 * PI])
    assert geo.expected_conjugate_parameters(geo.HyperbolicConstCurv()) == []


def test_parse_preset():
    pr = geo.parse_preset("sphere:k=2,kappa=1,length=1.5pi")
    assert pr == geo.SphereConstCurv(1.0, 2, 1.5 * PI)
    assert geo.parse_preset("lorentz").nu == 1
    assert geo.parse_preset("hyperbolic:kappa=-0.5").kappa == -0.5


@pytest.mark.parametrize("text", [
    "torus", "sphere:kappa=-1", "flat:kappa=2", "sphere:k=1.5", "sphere:radius=2", "sphere:nu=1",
    "lorentz:nu=4", "sphere:length=0",
])
def test_parse_preset_rejects(text):
    with pytest.raises(ConfigurationError):
        geo.parse_preset(text)
