"""Built-in problems: closed-form test cases, the two worked examples and
the seeded random trigonometric instances."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ConstantField, MatrixField, NonlinearSpec, ProblemSpec

#: seed of the randomised verification suite
SUITE_SEED = 0x1D0F00D

#: length of the interval in both worked examples (paper normalisation)
EXAMPLE_LENGTH = 1.5 * math.pi


def constant(matrix, nu: int = 0, n: int = 1, name: str = "") -> ProblemSpec:
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    return ProblemSpec(k=m.shape[0], nu=nu, S=ConstantField(m, n=n), n=n, name=name)


def scalar(c: float, nu: int = 0, name: str = "") -> ProblemSpec:
    """``k = 1`` with ``S = -c``; conjugate radii at ``j pi / sqrt(c)`` when ``nu = 0``."""
    return constant([[-c]], nu=nu, name=name or f"scalar c={c:.6g}")


def zero_potential(k: int = 1, nu: int = 0, n: int = 1) -> ProblemSpec:
    return constant(np.zeros((k, k)), nu=nu, n=n, name="zero potential")


def square_smale(lam: float = 60.0) -> ProblemSpec:
    return constant([[-lam]], nu=0, n=2, name=f"unit square S=-{lam:g}")


# --------------------------------------------------------------------------
# worked examples on the fixed domain [0, 1]
# --------------------------------------------------------------------------
# A problem on [0, L] pulls back to [0, 1] with V -> L^2 V; the crossing at
# rho = pi on [0, 3 pi / 2] sits at r = pi / L = 2/3.


def example_I(L: float = EXAMPLE_LENGTH):
    """Non-gradient system, ``J = -I``, unknowns ``(u, v)``.

    ``V = L^2 (-u - u^2 v^3, -v + u^3 v^2)``.  Testing the first equation
    with ``v`` and the second with ``u`` and subtracting gives
    ``int u^2 v^2 (u^2 + v^2) = 0``, so there are no nontrivial solutions.
    """
    L2 = L * L

    def V(x, w):
        u, v = w[..., 0], w[..., 1]
        return L2 * np.stack([-u - u * u * v ** 3, -v + u ** 3 * v * v], -1)

    def DV(x, w):
        u, v = w[..., 0], w[..., 1]
        out = np.empty(w.shape[:-1] + (2, 2))
        out[..., 0, 0] = -1 - 2 * u * v ** 3
        out[..., 0, 1] = -3 * u * u * v * v
        out[..., 1, 0] = 3 * u * u * v * v
        out[..., 1, 1] = -1 + 2 * u ** 3 * v
        return L2 * out

    spec = constant(-L2 * np.eye(2), nu=0, name="Example I")
    return spec, NonlinearSpec(V=V, DV=DV, k=2, is_gradient=False, name="Example I")


def example_II(L: float = EXAMPLE_LENGTH):
    """Gradient system with ``J = diag(-1, +1)``, unknowns ordered ``(v, u)``.

    ``V = grad G`` with ``G = L^2 (-v^2/2 + u^2/2 + u^3 v^3 / 3)``, so
    ``S = diag(-L^2, L^2)``.  Both components are singular at ``r = 2/3``
    and contribute opposite crossing signs.
    """
    L2 = L * L

    def V(x, w):
        v, u = w[..., 0], w[..., 1]
        return L2 * np.stack([-v + u ** 3 * v * v, u + u * u * v ** 3], -1)

    def DV(x, w):
        v, u = w[..., 0], w[..., 1]
        out = np.empty(w.shape[:-1] + (2, 2))
        out[..., 0, 0] = -1 + 2 * u ** 3 * v
        out[..., 0, 1] = 3 * u * u * v * v
        out[..., 1, 0] = 3 * u * u * v * v
        out[..., 1, 1] = 1 + 2 * u * v ** 3
        return L2 * out

    spec = constant(np.diag([-L2, L2]), nu=1, name="Example II")
    return spec, NonlinearSpec(V=V, DV=DV, k=2, is_gradient=True, name="Example II")


def pitchfork(c: float = (2.5 * math.pi) ** 2):
    """``k = 1``, ``V = -c u + u^3``: supercritical pitchforks at ``j pi / sqrt(c)``."""

    def V(x, w):
        return -c * w + w ** 3

    def DV(x, w):
        return (-c + 3 * w * w)[..., None]

    return scalar(c, name=f"pitchfork c={c:.6g}"), NonlinearSpec(V=V, DV=DV, k=1, is_gradient=True,
                                                                 name="pitchfork")


def linear_nonlinear(spec: ProblemSpec) -> NonlinearSpec:
    """``V(x, u) = S(x) u`` viewed as a (degenerate) semilinear problem."""
    S = spec.S

    def V(x, w):
        return np.einsum("...ij,...j->...i", S(x), w)

    def DV(x, w):
        return np.broadcast_to(S(x), w.shape[:-1] + (spec.k, spec.k))

    return NonlinearSpec(V=V, DV=DV, k=spec.k, is_gradient=True, name="linear")


# --------------------------------------------------------------------------
# random trigonometric instances
# --------------------------------------------------------------------------


class TrigField(MatrixField):
    """``S_ij(x) = sum_m a_ijm cos(m pi x) + b_ijm sin(m pi x)``, symmetric."""

    def __init__(self, a, b):
        self.a = np.asarray(a, dtype=float)  # (k, k, deg + 1)
        self.b = np.asarray(b, dtype=float)
        self.k = self.a.shape[0]
        self.n = 1
        self.degree = self.a.shape[-1] - 1

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 or x.shape[-1] != 1:
            x = x[..., None]
        m = np.arange(self.degree + 1)
        arg = np.pi * x * m  # (..., deg + 1)
        return np.einsum("ijm,...m->...ij", self.a, np.cos(arg)) + np.einsum("ijm,...m->...ij", self.b, np.sin(arg))

    def expressions(self) -> list:
        rows = []
        for i in range(self.k):
            row = []
            for j in range(self.k):
                terms = []
                for m in range(self.degree + 1):
                    if m == 0:
                        terms.append(repr(float(self.a[i, j, 0])))
                        continue
                    terms.append(f"({float(self.a[i, j, m])!r})*cos({m}*pi*x1)")
                    terms.append(f"({float(self.b[i, j, m])!r})*sin({m}*pi*x1)")
                row.append(" + ".join(terms))
            rows.append(row)
        return rows

    def sup_bound(self) -> float:
        return float(np.max(np.sum(np.abs(self.a) + np.abs(self.b), -1)))


def random_trig_field(rng: np.random.Generator, k: int, degree: int = 3,
                      bound: float = (4 * math.pi) ** 2) -> TrigField:
    a = rng.uniform(-1, 1, size=(k, k, degree + 1))
    b = rng.uniform(-1, 1, size=(k, k, degree + 1))
    b[..., 0] = 0.0
    a[..., 0] *= 4.0  # a dominant mean term makes multi-crossing paths common
    a = 0.5 * (a + np.swapaxes(a, 0, 1))
    b = 0.5 * (b + np.swapaxes(b, 0, 1))
    total = np.max(np.sum(np.abs(a) + np.abs(b), -1))
    amp = rng.uniform(0.25, 1.0) * bound / total
    return TrigField(a * amp, b * amp)


SUITE_SHAPES = [(1, 0), (1, 1), (2, 0), (2, 1), (2, 2), (3, 0), (3, 1), (3, 2), (3, 3)]


@dataclass(frozen=True)
class SuiteInstance:
    index: int
    spec: ProblemSpec
    resamples: int


def _endpoint_margin(spec: ProblemSpec) -> float:
    from .hamiltonian_maslov import flow_for

    return flow_for(spec).boundary_path().smin(spec.r_max)


def random_suite(count: int = 20, seed: int = SUITE_SEED, margin: float = 1e-3) -> list[SuiteInstance]:
    """Deterministic pseudo-random instances cycling through all ``(k, nu)``.

    An instance whose right endpoint is within ``margin`` (principal-angle
    sine) of a conjugate radius is redrawn.
    """
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        k, nu = SUITE_SHAPES[i % len(SUITE_SHAPES)]
        tries = 0
        while True:
            spec = ProblemSpec(k=k, nu=nu, S=random_trig_field(rng, k), name=f"suite-{i:02d} k={k} nu={nu}")
            if _endpoint_margin(spec) > margin:
                break
            tries += 1
        out.append(SuiteInstance(i, spec, tries))
    return out
