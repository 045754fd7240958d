"""Problem model, conventions and shared numerical configuration.

Everything downstream works on the fixed reference domain ``[0, 1]`` or
``[0, 1]^2``.  A problem on the shrunken domain ``Omega_r = r * Omega`` is
pulled back to the rescaled equation

    J u'' + S_r(x) u = 0,     S_r(x) = r^2 S(r x),

with Dirichlet data, and the signature matrix ``J = diag(-1 (k - nu times),
+1 (nu times))``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np


# --------------------------------------------------------------------------
# errors
# --------------------------------------------------------------------------


class IndexFlowError(Exception):
    """Base class for all library errors."""


class ConfigurationError(IndexFlowError):
    """Invalid problem description or solver configuration."""


class DomainError(IndexFlowError):
    """A point was requested outside the closed reference domain."""


class PreconditionError(IndexFlowError):
    """A mathematical precondition (e.g. a non-degenerate endpoint) fails."""


class ConvergenceError(IndexFlowError):
    """An iterative or refinement procedure did not settle."""


class IntegrationError(ConvergenceError):
    """The ODE integrator failed (step-size underflow, non-finite state)."""


class AccuracyError(ConvergenceError):
    """An invariant (symplecticity, isotropy) could not be met."""


class AssemblyError(IndexFlowError):
    """The Galerkin assembly met non-finite field values."""


class IrregularCrossingError(ConvergenceError):
    """No admissible regularising perturbation was found."""


class DegenerateGeometryError(IndexFlowError):
    """A transversal complement could not be constructed."""


class InvariantViolation(IndexFlowError):
    """An internal invariant that should be impossible to break was broken."""


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


class Domain(str, enum.Enum):
    UNIT_INTERVAL = "UnitInterval"
    UNIT_SQUARE = "UnitSquare"

    @property
    def dim(self) -> int:
        return 1 if self is Domain.UNIT_INTERVAL else 2

    @classmethod
    def for_dim(cls, n: int) -> "Domain":
        if n == 1:
            return cls.UNIT_INTERVAL
        if n == 2:
            return cls.UNIT_SQUARE
        raise ConfigurationError(f"spatial dimension n={n} not supported (n in {{1, 2}})")


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds shared by all modules.

    Relative thresholds are scaled inside the routines that use them; see
    the docstrings there for the reference scale.
    """

    symplectic_tol: float = 1e-10
    isotropy_tol: float = 1e-10
    kernel_rel: float = 1e-8
    regularity_rel: float = 1e-6
    endpoint_rel: float = 1e-8
    window_factor: float = 10.0
    fd_step: float = 1e-5
    ode_rtol: float = 1e-12
    ode_rtol_floor: float = 1e-14
    max_regularization_attempts: int = 8
    refine_step: int = 8
    n_max: int = 256
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    branch_norm_cap: float = 25.0
    endpoint_margin: float = 1e-7

    @property
    def kernel_window(self) -> float:
        return self.window_factor * self.endpoint_rel


DEFAULT_TOL = Tolerances()


# --------------------------------------------------------------------------
# matrix fields
# --------------------------------------------------------------------------


def _as_points(x, n: int) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    if n == 1 and (pts.ndim == 0 or pts.shape[-1] != 1):
        pts = pts[..., None]
    if pts.shape[-1] != n:
        raise DomainError(f"expected points with trailing dimension {n}, got shape {pts.shape}")
    return pts


class MatrixField:
    """A k x k matrix valued field on the reference domain.

    Calling the field with an array of points of shape ``(..., n)`` returns
    an array of shape ``(..., k, k)``.
    """

    k: int
    n: int

    def __call__(self, x) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError

    @property
    def is_constant(self) -> bool:
        return False


class ConstantField(MatrixField):
    def __init__(self, matrix, n: int = 1):
        m = np.array(matrix, dtype=float)
        if m.ndim == 0:
            m = m.reshape(1, 1)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ConfigurationError(f"constant field must be a square matrix, got shape {m.shape}")
        m.setflags(write=False)
        self.matrix = m
        self.k = m.shape[0]
        self.n = n

    @property
    def is_constant(self) -> bool:
        return True

    def __call__(self, x) -> np.ndarray:
        pts = _as_points(x, self.n)
        return np.broadcast_to(self.matrix, pts.shape[:-1] + self.matrix.shape)

    def __repr__(self) -> str:
        return f"ConstantField({self.matrix.tolist()})"


class CallableField(MatrixField):
    """Wrap a Python callable.

    With ``vectorized=True`` the callable receives the whole ``(..., n)``
    point array and must return ``(..., k, k)``; otherwise it is evaluated
    point by point on an ``(n,)`` vector.
    """

    def __init__(self, fn: Callable, k: int, n: int = 1, vectorized: bool = False):
        self.fn = fn
        self.k = k
        self.n = n
        self.vectorized = vectorized

    def __call__(self, x) -> np.ndarray:
        pts = _as_points(x, self.n)
        lead = pts.shape[:-1]
        if self.vectorized:
            out = np.asarray(self.fn(pts), dtype=float)
            return np.broadcast_to(out, lead + (self.k, self.k))
        flat = pts.reshape(-1, self.n)
        vals = np.array([np.asarray(self.fn(p), dtype=float).reshape(self.k, self.k) for p in flat])
        return vals.reshape(lead + (self.k, self.k))


class GridField(MatrixField):
    """Samples on a tensor grid with piecewise-linear interpolation.

    ``axes`` is a list of ``n`` increasing coordinate arrays covering
    ``[0, 1]``; ``values`` has shape ``(len(ax_1), ..., k, k)``.
    The interpolation error is the caller's responsibility.
    """

    def __init__(self, axes: Sequence, values):
        self.axes = [np.asarray(a, dtype=float) for a in axes]
        self.values = np.asarray(values, dtype=float)
        self.n = len(self.axes)
        self.k = self.values.shape[-1]
        if self.values.shape[: self.n] != tuple(len(a) for a in self.axes):
            raise ConfigurationError("grid values do not match the axes")
        for a in self.axes:
            if a[0] > 0.0 or a[-1] < 1.0 or np.any(np.diff(a) <= 0):
                raise ConfigurationError("grid axes must be increasing and cover [0, 1]")
        if self.n == 2:
            from scipy.interpolate import RegularGridInterpolator

            self._interp = RegularGridInterpolator(tuple(self.axes), self.values, method="linear")

    def __call__(self, x) -> np.ndarray:
        pts = _as_points(x, self.n)
        lead = pts.shape[:-1]
        flat = pts.reshape(-1, self.n)
        if self.n == 1:
            vals = self.values.reshape(len(self.axes[0]), -1)
            out = np.stack([np.interp(flat[:, 0], self.axes[0], vals[:, j]) for j in range(vals.shape[1])], -1)
        else:
            out = self._interp(flat).reshape(flat.shape[0], -1)
        return out.reshape(lead + (self.k, self.k))


def as_field(S, k: int | None = None, n: int = 1) -> MatrixField:
    """Coerce a matrix, a callable or a field into a :class:`MatrixField`."""
    if isinstance(S, MatrixField):
        return S
    if callable(S):
        if k is None:
            probe = np.asarray(S(np.zeros(n)), dtype=float)
            k = int(math.isqrt(probe.size))
        return CallableField(S, k=k, n=n)
    return ConstantField(S, n=n)


# --------------------------------------------------------------------------
# problem types
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ProblemSpec:
    """The linear problem ``J Delta u + S(x) u = 0`` on ``Omega_r``.

    ``S`` may be a constant matrix, a callable ``x -> (k, k)`` or any
    :class:`MatrixField`.  Construction does not validate; call
    :func:`validate` for a report or :meth:`check` to raise.
    """

    k: int
    nu: int
    S: Any
    n: int = 1
    domain: Domain | None = None
    r_max: float = 1.0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "S", as_field(self.S, k=self.k, n=self.n))
        if self.domain is None:
            object.__setattr__(self, "domain", Domain.for_dim(self.n) if self.n in (1, 2) else None)
        elif not isinstance(self.domain, Domain):
            object.__setattr__(self, "domain", Domain(self.domain))

    @property
    def J(self) -> np.ndarray:
        return build_J(self)

    @property
    def signs(self) -> np.ndarray:
        """Diagonal of ``J`` as floats."""
        return np.diag(build_J(self)).astype(float)

    def check(self) -> "ProblemSpec":
        report = validate(self)
        if report.violations:
            raise ConfigurationError("; ".join(report.violations))
        return self

    def with_S(self, S, name: str | None = None) -> "ProblemSpec":
        return ProblemSpec(
            k=self.k, nu=self.nu, S=S, n=self.n, domain=self.domain, r_max=self.r_max,
            name=self.name if name is None else name,
        )

    def shifted(self, delta: float) -> "ProblemSpec":
        """Return the problem with ``S + delta * I``."""
        base = self.S
        eye = np.eye(self.k)
        if base.is_constant:
            return self.with_S(ConstantField(base.matrix + delta * eye, n=self.n))
        return self.with_S(
            CallableField(lambda x: base(x) + delta * eye, k=self.k, n=self.n, vectorized=True)
        )


@dataclass(frozen=True)
class RadiusGrid:
    """Scan grid for the radius together with the bisection tolerance."""

    values: tuple
    refinement_tol: float = 1e-10
    near_zero_floor: float = 1e-3

    def __post_init__(self):
        vals = tuple(float(v) for v in np.atleast_1d(np.asarray(self.values, dtype=float)))
        object.__setattr__(self, "values", vals)
        if len(vals) < 2:
            raise ConfigurationError("a radius grid needs at least two points")
        arr = np.asarray(vals)
        if np.any(np.diff(arr) <= 0):
            raise ConfigurationError("radius grid must be strictly increasing")
        if arr[0] <= 0:
            raise ConfigurationError("radius grid values must be positive")

    @classmethod
    def uniform(cls, count: int = 201, r_max: float = 1.0, floor: float = 1e-3,
                refinement_tol: float = 1e-10) -> "RadiusGrid":
        return cls(tuple(np.linspace(floor, r_max, int(count))), refinement_tol, floor)

    @property
    def r_min(self) -> float:
        return self.values[0]

    @property
    def r_max(self) -> float:
        return self.values[-1]

    def array(self) -> np.ndarray:
        return np.asarray(self.values)

    def restricted(self, a: float, b: float) -> "RadiusGrid":
        """Grid points inside ``[a, b]`` with the endpoints added."""
        arr = self.array()
        inner = arr[(arr > a) & (arr < b)]
        vals = np.concatenate([[a], inner, [b]])
        return RadiusGrid(tuple(vals), self.refinement_tol, self.near_zero_floor)


@dataclass(frozen=True)
class NonlinearSpec:
    """Semilinear right-hand side ``V(x, u)`` with Jacobian ``DV``.

    Both callables receive a point array ``x`` of shape ``(..., n)`` and a
    state array ``u`` of shape ``(..., k)`` and return ``(..., k)`` and
    ``(..., k, k)`` respectively.
    """

    V: Callable
    DV: Callable
    k: int
    is_gradient: bool = True
    n: int = 1
    name: str = ""

    def linearization(self) -> MatrixField:
        dv = self.DV
        k = self.k

        def S(x):
            x = np.asarray(x, dtype=float)
            return dv(x, np.zeros(x.shape[:-1] + (k,)))

        return CallableField(S, k=k, n=self.n, vectorized=True)


@dataclass
class IndexReport:
    """Outcome of a verification run."""

    sfl: int | None
    maslov: int | None = None
    conjugate_radii: list = field(default_factory=list)
    morse_index: int | str | None = None
    agreement: dict = field(default_factory=dict)
    graph_maslov: int | None = None
    detectors: dict = field(default_factory=dict)
    N_used: int | None = None
    notes: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    name: str = ""

    @property
    def all_agree(self) -> bool:
        return all(bool(v) for v in self.agreement.values())

    def to_dict(self) -> dict:
        return _jsonable({
            "name": self.name,
            "sfl": self.sfl,
            "maslov": self.maslov,
            "graph_maslov": self.graph_maslov,
            "morse_index": self.morse_index,
            "conjugate_radii": [
                {"r": r, "m": m, "signature": s} for (r, m, s) in self.conjugate_radii
            ],
            "agreement": dict(self.agreement),
            "detectors": self.detectors,
            "N_used": self.N_used,
            "notes": list(self.notes),
            "extra": self.extra,
        })


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


# --------------------------------------------------------------------------
# operations
# --------------------------------------------------------------------------


def build_J(spec: ProblemSpec) -> np.ndarray:
    """Signature matrix ``diag(-1 x (k - nu), +1 x nu)`` with integer entries."""
    if not isinstance(spec.k, (int, np.integer)) or spec.k < 1:
        raise ConfigurationError(f"k must be a positive integer, got {spec.k!r}")
    if not isinstance(spec.nu, (int, np.integer)) or not 0 <= spec.nu <= spec.k:
        raise ConfigurationError(f"nu={spec.nu!r} out of range 0..{spec.k}")
    return np.diag(np.r_[-np.ones(spec.k - spec.nu, dtype=int), np.ones(spec.nu, dtype=int)])


def in_domain(spec: ProblemSpec, x, slack: float = 1e-12) -> bool:
    pts = _as_points(x, spec.n)
    return bool(np.all(pts >= -slack) and np.all(pts <= 1.0 + slack))


def sample_S(spec: ProblemSpec, r: float, x) -> np.ndarray:
    """Rescaled potential ``S_r(x) = r^2 S(r x)`` at point(s) ``x``."""
    pts = _as_points(x, spec.n)
    if not in_domain(spec, pts):
        raise DomainError(f"point {np.asarray(x).tolist()} lies outside the closed reference domain")
    if r == 0:
        return np.zeros(pts.shape[:-1] + (spec.k, spec.k))
    return (r * r) * np.asarray(spec.S(r * pts), dtype=float)


def sample_points(n: int, per_dim: int = 7) -> np.ndarray:
    t = np.linspace(0.0, 1.0, per_dim)
    if n == 1:
        return t[:, None]
    X, Y = np.meshgrid(t, t, indexing="ij")
    return np.stack([X.ravel(), Y.ravel()], -1)


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate(spec: ProblemSpec, per_dim: int = 7) -> ValidationReport:
    """Collect invariant violations; never raises."""
    out: list[str] = []
    if not isinstance(spec.k, (int, np.integer)) or spec.k < 1:
        out.append(f"dimension violation: k={spec.k!r} must be a positive integer")
        return ValidationReport(out)
    if not isinstance(spec.nu, (int, np.integer)) or not 0 <= spec.nu <= spec.k:
        out.append(f"signature violation: nu={spec.nu!r} not in 0..{spec.k}")
    if spec.n not in (1, 2):
        out.append(f"spatial dimension violation: n={spec.n!r} not in {{1, 2}}")
        return ValidationReport(out)
    if spec.domain is None or spec.domain.dim != spec.n:
        out.append(f"domain violation: {spec.domain} does not match n={spec.n}")
    if not (0.0 < float(spec.r_max) <= 1.0):
        out.append(f"radius violation: r_max={spec.r_max!r} not in (0, 1]")
    if getattr(spec.S, "k", spec.k) != spec.k:
        out.append(f"shape violation: field has k={spec.S.k}, problem has k={spec.k}")
        return ValidationReport(out)
    pts = sample_points(spec.n, per_dim)
    try:
        vals = np.asarray(spec.S(pts), dtype=float)
    except Exception as exc:  # report, never raise
        out.append(f"evaluation violation: S raised {type(exc).__name__}: {exc}")
        return ValidationReport(out)
    if vals.shape != (len(pts), spec.k, spec.k):
        out.append(f"shape violation: S returned shape {vals.shape}")
        return ValidationReport(out)
    for p, m in zip(pts, vals):
        if not np.all(np.isfinite(m)):
            out.append(f"finiteness violation at x={p.tolist()}")
            continue
        scale = 1.0 + np.linalg.norm(m)
        if np.linalg.norm(m - m.T) > 1e-12 * scale:
            out.append(f"symmetry violation at x={p.tolist()}")
    return ValidationReport(out)


def validate_nonlinear(nspec: NonlinearSpec, per_dim: int = 7, seed: int = 0) -> ValidationReport:
    out: list[str] = []
    pts = sample_points(nspec.n, per_dim)
    zero = np.zeros((len(pts), nspec.k))
    v0 = np.asarray(nspec.V(pts, zero), dtype=float)
    if np.max(np.abs(v0)) > 1e-12:
        out.append("V(x, 0) does not vanish")
    if nspec.is_gradient:
        rng = np.random.default_rng(seed)
        u = rng.uniform(-1, 1, size=(len(pts), nspec.k))
        D = np.asarray(nspec.DV(pts, u), dtype=float)
        if np.max(np.abs(D - np.swapaxes(D, -1, -2))) > 1e-10 * (1 + np.max(np.abs(D))):
            out.append("gradient flag set but DV is not symmetric")
    return ValidationReport(out)
