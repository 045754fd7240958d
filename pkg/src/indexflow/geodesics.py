"""Constant-curvature geodesics reduced to Morse-Sturm systems.

Along a unit-speed geodesic ``gamma : [0, L]`` choose a parallel
orthonormal frame ``e_1, ..., e_k`` of the normal bundle with
``g(e_i, e_i) = eps_i``.  In constant curvature ``kappa`` the Jacobi
equation splits into ``xi_i'' + kappa * eps_gamma * xi_i = 0`` with
``eps_gamma = g(gamma', gamma')``.  Multiplying the ``i``-th row by
``-eps_i`` gives ``J xi'' + S xi = 0`` with

    J = -diag(eps_i),    S = kappa * eps_gamma * J.

On the reference interval ``t = L s`` the matrix picks up ``L^2``, so the
geodesic parameter of a conjugate radius ``r`` is ``t = r L``.  Space-like
normals are the ``-1`` entries of ``J``, time-like normals the ``+1``
entries.  The unit sphere therefore gets ``S = -L^2 I`` and conjugate
radii ``j pi / L``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ConfigurationError, ConstantField, ProblemSpec
from .expr import evaluate_number

PRESET_NAMES = ("flat", "sphere", "hyperbolic", "lorentz")


@dataclass(frozen=True)
class GeodesicPreset:
    """Geodesic of length ``length`` with ``k`` normal directions.

    ``nu`` counts time-like normal directions, ``causal`` is
    ``g(gamma', gamma')`` (``+1`` space-like, ``-1`` time-like).
    """

    name: str
    k: int
    kappa: float = 0.0
    length: float = 1.5 * math.pi
    nu: int = 0
    causal: int = 1
    speed: float = 1.0

    def __post_init__(self):
        if self.name not in PRESET_NAMES:
            raise ConfigurationError(f"unknown preset {self.name!r}; choose from {PRESET_NAMES}")
        if self.k < 1:
            raise ConfigurationError("k must be at least 1")
        if not (0 <= self.nu <= self.k):
            raise ConfigurationError(f"nu={self.nu} outside [0, k={self.k}]")
        if not math.isfinite(self.kappa):
            raise ConfigurationError("kappa must be finite")
        if not (self.length > 0 and math.isfinite(self.length)):
            raise ConfigurationError("length must be positive and finite")
        if self.causal not in (1, -1):
            raise ConfigurationError("causal must be +1 or -1")
        if self.name in ("flat", "sphere", "hyperbolic") and self.nu != 0:
            raise ConfigurationError(f"{self.name} preset is Riemannian; nu must be 0")
        if self.name == "flat" and self.kappa != 0:
            raise ConfigurationError("flat preset needs kappa = 0")
        if self.name == "sphere" and not self.kappa > 0:
            raise ConfigurationError("sphere preset needs kappa > 0")
        if self.name == "hyperbolic" and not self.kappa < 0:
            raise ConfigurationError("hyperbolic preset needs kappa < 0")

    @property
    def riemannian(self) -> bool:
        return self.nu == 0 and self.causal == 1

    def parameter(self, r: float) -> float:
        """Geodesic parameter of the reference radius ``r``."""
        return float(r) * self.length

    def radius(self, t: float) -> float:
        return float(t) / self.length

    def label(self) -> str:
        return f"{self.name}:k={self.k},kappa={self.kappa:g},length={self.length:.6g},nu={self.nu}"


def FlatRiemannian(k: int = 2, length: float = 1.5 * math.pi) -> GeodesicPreset:
    return GeodesicPreset("flat", k, 0.0, length)


def SphereConstCurv(kappa: float = 1.0, k: int = 2, length: float = 1.5 * math.pi) -> GeodesicPreset:
    return GeodesicPreset("sphere", k, kappa, length)


def HyperbolicConstCurv(kappa: float = -1.0, k: int = 2, length: float = 1.5 * math.pi) -> GeodesicPreset:
    return GeodesicPreset("hyperbolic", k, kappa, length)


def LorentzConstCurv(kappa: float = 1.0, k: int = 2, length: float = 1.5 * math.pi, nu: int = 1,
                     causal: int = 1) -> GeodesicPreset:
    return GeodesicPreset("lorentz", k, kappa, length, nu=nu, causal=causal)


def to_problem(preset: GeodesicPreset) -> ProblemSpec:
    """Reduced problem on ``[0, 1]`` whose conjugate radii are ``t / L``."""
    J = np.diag([-1.0] * (preset.k - preset.nu) + [1.0] * preset.nu)
    S = preset.kappa * preset.causal * preset.length ** 2 * J
    return ProblemSpec(k=preset.k, nu=preset.nu, S=ConstantField(S, n=1), n=1, name=preset.label())


def expected_conjugate_parameters(preset: GeodesicPreset) -> list[float]:
    """Closed-form conjugate parameters ``j pi / sqrt(kappa eps_gamma)`` in ``(0, L)``."""
    q = preset.kappa * preset.causal
    if q <= 0:
        return []
    step = math.pi / math.sqrt(q)
    count = int(math.floor(preset.length / step))
    out = [j * step for j in range(1, count + 1)]
    return [t for t in out if t < preset.length * (1 - 1e-12)]


_DEFAULTS = {
    "flat": dict(k=2, kappa=0.0),
    "sphere": dict(k=2, kappa=1.0),
    "hyperbolic": dict(k=2, kappa=-1.0),
    "lorentz": dict(k=2, kappa=1.0, nu=1),
}


def parse_preset(text: str) -> GeodesicPreset:
    """Parse ``"sphere:k=2,kappa=1,length=1.5pi"``.

    Keys are ``k``, ``kappa``, ``length``, ``nu`` and ``causal``; values
    accept arithmetic with ``pi``.
    """
    name, _, rest = text.strip().partition(":")
    name = name.strip().lower()
    if name not in _DEFAULTS:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
    kw = dict(_DEFAULTS[name])
    kw.setdefault("length", 1.5 * math.pi)
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, val = item.partition("=")
        key = key.strip().lower()
        if not eq or key not in ("k", "kappa", "length", "nu", "causal"):
            raise ConfigurationError(f"bad preset parameter {item!r}")
        num = evaluate_number(val)
        if key in ("k", "nu", "causal"):
            if num != int(num):
                raise ConfigurationError(f"{key} must be an integer")
            num = int(num)
        kw[key] = num
    return GeodesicPreset(name, **kw)


def conjugate_point_count(preset: GeodesicPreset, grid=None, N: int = 32):
    """Both sides of the applicable index identity.

    Riemannian presets return ``(sum of multiplicities, Morse index)``;
    others return ``(spectral flow, Maslov index)``.
    """
    from .verify import verify_geodesic_corollaries

    rep = verify_geodesic_corollaries(preset, grid, N)
    if preset.riemannian:
        return rep.extra["conjugate_count"], rep.morse_index
    return rep.sfl, rep.maslov
