"""Hamiltonian fundamental solutions and Maslov indices for ``n = 1``.

With ``v = J u'`` the rescaled equation ``J u'' + S_r u = 0`` becomes the
linear Hamiltonian system

    (u, v)' = sigma . diag(-S_r, -J) . (u, v),    sigma = [[0, -I], [I, 0]],

i.e. ``u' = J v`` and ``v' = -S_r u``.  ``Psi_r`` is its fundamental
matrix with ``Psi_r(0) = I``, blocks ``[[a, b], [c, d]]``.  Dirichlet data
at ``x = 0`` is the vertical Lagrangian ``mu = {(0, p)}``, so ``r`` is a
conjugate radius iff ``Psi_r(1) mu = span [b; d]`` meets ``mu``,
i.e. iff ``b_r(1)`` is singular.

Orientation: ``omega(X, Y) = X^T sigma Y``.  With this choice each
conjugate radius of the Riemannian case ``J = -I`` contributes ``-m`` and
the Maslov index equals the spectral flow of the rescaled form family.
"""
from __future__ import annotations

import logging
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .core import (
    DEFAULT_TOL,
    AccuracyError,
    ConfigurationError,
    DegenerateGeometryError,
    IntegrationError,
    InvariantViolation,
    IrregularCrossingError,
    PreconditionError,
    ProblemSpec,
    RadiusGrid,
    Tolerances,
    build_J,
    sample_points,
)
from .lagrangian import LagrangianPath, inertia_signature, isotropy_defect, orthonormal_frame, symplectic_matrix

log = logging.getLogger(__name__)

DEFAULT_SCAN = 241


class IllConditionedKernelError(DegenerateGeometryError):
    pass


@dataclass(frozen=True)
class SymplecticForm:
    k: int

    @property
    def sigma(self) -> np.ndarray:
        return symplectic_matrix(self.k)

    def __call__(self, X, Y) -> float:
        return float(np.asarray(X) @ self.sigma @ np.asarray(Y))


@dataclass
class FundamentalSolution:
    """``Psi_r`` on ``[0, 1]`` with blocks at ``x = 1``.

    ``defect`` is the largest ``||Psi^T sigma Psi - sigma||_F`` over the
    integrator nodes; ``defect_rel`` divides each node value by
    ``max(1, ||Psi||_2^2)``, which is the quantity held below
    ``symplectic_tol`` (the absolute value cannot be met in double
    precision once ``Psi`` grows exponentially).
    """

    r: float
    k: int
    Psi1: np.ndarray
    nodes: np.ndarray
    defect: float
    defect_rel: float
    rtol: float
    _dense: Callable | None = field(default=None, repr=False)
    _spec: ProblemSpec | None = field(default=None, repr=False)

    @property
    def a(self):
        return self.Psi1[: self.k, : self.k]

    @property
    def b(self):
        return self.Psi1[: self.k, self.k:]

    @property
    def c(self):
        return self.Psi1[self.k:, : self.k]

    @property
    def d(self):
        return self.Psi1[self.k:, self.k:]

    def Psi(self, x):
        """``Psi_r(x)``; dense output of the integrator."""
        if self._dense is None:
            if self._spec is None:
                raise InvariantViolation("no dense output stored")
            full = integrate_fundamental(self._spec, self.r, dense=True)
            self._dense = full._dense
        x = np.asarray(x, dtype=float)
        if np.any(x < 0) or np.any(x > 1):
            raise ConfigurationError("Psi is defined on [0, 1]")
        y = self._dense(x)
        n = 2 * self.k
        if x.ndim == 0:
            out = y.reshape(n, n)
            return np.eye(n) if x == 0 else out
        out = np.moveaxis(y.reshape(n, n, -1), -1, 0)
        out[x == 0] = np.eye(n)
        return out


@dataclass(frozen=True)
class LagrangianFrame:
    Z: np.ndarray

    @property
    def k(self) -> int:
        return self.Z.shape[1]

    def orthonormal(self):
        return orthonormal_frame(self.Z)

    def isotropy(self) -> float:
        return isotropy_defect(self.Z, symplectic_matrix(self.k))


@dataclass
class CrossingReport:
    """Crossing data at a conjugate radius.

    ``kernel_basis`` holds unit initial momenta ``w`` (columns) with
    ``b(1) w = 0``; ``gamma_matrix`` is the crossing form evaluated on
    these vectors.  For ``graph_fd`` it is the Lagrangian crossing form
    ``omega(u, d/dr phi_r u)``; for ``boundary_formula`` it is the
    operator form ``<J u'(1), u'(1)> / r^3`` which is the former divided
    by ``r^2``.  ``gamma_normalized`` is the Lagrangian form in an
    orthonormal basis of the kernel inside ``ell(r*)``; regularity is
    judged on it, relative to ``max(||gamma||, 1/r*)``.
    """

    r_star: float
    kernel_basis: np.ndarray
    gamma_matrix: np.ndarray
    signature: int
    regular: bool
    method: str
    gamma_normalized: np.ndarray | None = None
    min_abs_eig: float = float("nan")
    complement: str = ""

    @property
    def m(self) -> int:
        return int(self.kernel_basis.shape[1])

    def to_dict(self) -> dict:
        return {
            "r": self.r_star, "m": self.m, "signature": self.signature, "regular": self.regular,
            "method": self.method, "gamma": np.round(self.gamma_matrix, 12).tolist(),
        }


# --------------------------------------------------------------------------
# integration
# --------------------------------------------------------------------------


def _rhs_factory(spec: ProblemSpec, rs: np.ndarray):
    k = spec.k
    js = np.diag(build_J(spec)).astype(float)
    rs = np.asarray(rs, dtype=float)
    R = len(rs)
    r2 = (rs * rs)[:, None, None]
    field_ = spec.S
    const = field_.matrix if field_.is_constant else None

    def rhs(x, y):
        Y = y.reshape(R, 2 * k, 2 * k)
        if const is not None:
            Sr = r2 * const
        else:
            Sr = r2 * np.asarray(field_((rs * x)[:, None]), dtype=float)
        out = np.empty_like(Y)
        out[:, :k, :] = js[None, :, None] * Y[:, k:, :]
        out[:, k:, :] = -np.matmul(Sr, Y[:, :k, :])
        return out.ravel()

    return rhs


def _defects(spec: ProblemSpec, Ys: np.ndarray):
    """``Ys``: (R, 2k, 2k, nt) -> per-r (abs, rel) max defects."""
    k = spec.k
    sig = symplectic_matrix(k)
    P = np.moveaxis(Ys, -1, 1)  # (R, nt, 2k, 2k)
    D = np.swapaxes(P, -1, -2) @ sig @ P - sig
    dab = np.linalg.norm(D, axis=(-2, -1))
    nrm = np.linalg.norm(P, ord=2, axis=(-2, -1))
    drel = dab / np.maximum(1.0, nrm * nrm)
    return dab.max(axis=1), drel.max(axis=1)


def _integrate(spec: ProblemSpec, rs, tol: Tolerances, dense: bool):
    rs = np.asarray(rs, dtype=float)
    k = spec.k
    R = len(rs)
    y0 = np.tile(np.eye(2 * k).ravel(), R)
    rtol = tol.ode_rtol
    while True:
        sol = solve_ivp(
            _rhs_factory(spec, rs), (0.0, 1.0), y0, method="DOP853",
            rtol=rtol, atol=rtol, dense_output=dense,
        )
        if sol.status != 0:
            raise IntegrationError(f"integration failed for r in [{rs.min():.6g}, {rs.max():.6g}]: {sol.message}")
        Ys = sol.y.reshape(R, 2 * k, 2 * k, -1)
        if not np.all(np.isfinite(Ys)):
            raise IntegrationError("non-finite fundamental solution")
        dab, drel = _defects(spec, Ys)
        if np.all(drel <= tol.symplectic_tol):
            return sol, Ys, dab, drel, rtol
        if rtol / 2 < tol.ode_rtol_floor:
            worst = int(np.argmax(drel))
            raise AccuracyError(
                f"symplecticity defect {drel[worst]:.3e} > {tol.symplectic_tol:.1e} at r={rs[worst]:.6g} "
                f"after tightening rtol to {rtol:.1e}"
            )
        rtol /= 2


def integrate_fundamental(spec: ProblemSpec, r: float, tol: Tolerances = DEFAULT_TOL,
                          dense: bool = True) -> FundamentalSolution:
    """Integrate ``Psi_r`` on ``[0, 1]`` (explicit RK 8(5,3), monitored)."""
    if spec.n != 1:
        raise ConfigurationError("the Hamiltonian route is only available for n = 1")
    r = float(r)
    sol, Ys, dab, drel, rtol = _integrate(spec, [r], tol, dense)
    return FundamentalSolution(
        r=r, k=spec.k, Psi1=Ys[0, :, :, -1].copy(), nodes=sol.t, defect=float(dab[0]),
        defect_rel=float(drel[0]), rtol=rtol, _dense=sol.sol if dense else None, _spec=spec,
    )


def integrate_batch(spec: ProblemSpec, rs: Sequence[float], tol: Tolerances = DEFAULT_TOL,
                    chunk: int = 128) -> list[FundamentalSolution]:
    """Integrate many radii at once (shared adaptive steps)."""
    if spec.n != 1:
        raise ConfigurationError("the Hamiltonian route is only available for n = 1")
    rs = [float(r) for r in rs]
    out: list[FundamentalSolution] = []
    for i in range(0, len(rs), chunk):
        part = rs[i: i + chunk]
        sol, Ys, dab, drel, rtol = _integrate(spec, part, tol, dense=False)
        for j, r in enumerate(part):
            out.append(FundamentalSolution(
                r=r, k=spec.k, Psi1=Ys[j, :, :, -1].copy(), nodes=sol.t, defect=float(dab[j]),
                defect_rel=float(drel[j]), rtol=rtol, _spec=spec,
            ))
    return out


def boundary_lagrangian(fs: FundamentalSolution, tol: Tolerances = DEFAULT_TOL) -> LagrangianFrame:
    """``Psi_r(1) mu`` as the frame ``[b(1); d(1)]``."""
    Z = np.vstack([fs.b, fs.d])
    sv = np.linalg.svd(Z, compute_uv=False)
    if sv[-1] <= 1e-14 * sv[0]:
        raise InvariantViolation(f"boundary frame rank deficient at r={fs.r}")
    frame = LagrangianFrame(Z)
    if frame.isotropy() > tol.isotropy_tol:
        raise AccuracyError(f"boundary frame isotropy defect {frame.isotropy():.3e} at r={fs.r}")
    return frame


# --------------------------------------------------------------------------
# flows: cached access to Psi_r(1) and the two Lagrangian paths
# --------------------------------------------------------------------------


class HamiltonianFlow:
    """Memoised ``r -> Psi_r(1)`` for one problem, plus the derived paths."""

    def __init__(self, spec: ProblemSpec, tol: Tolerances = DEFAULT_TOL):
        if spec.n != 1:
            raise ConfigurationError("the Hamiltonian route is only available for n = 1")
        spec.check()
        self.spec = spec
        self.tol = tol
        self.k = spec.k
        self._psi: dict[float, FundamentalSolution] = {}
        self.max_defect = 0.0
        self.max_defect_abs = 0.0
        self.max_isotropy = 0.0
        self._paths: dict[str, LagrangianPath] = {}

    def _store(self, fs: FundamentalSolution):
        self._psi[fs.r] = fs
        self.max_defect = max(self.max_defect, fs.defect_rel)
        self.max_defect_abs = max(self.max_defect_abs, fs.defect)

    def solution(self, r: float) -> FundamentalSolution:
        r = float(r)
        if r not in self._psi:
            self._store(integrate_fundamental(self.spec, r, self.tol, dense=False))
        return self._psi[r]

    def solutions(self, rs: Sequence[float]) -> list[FundamentalSolution]:
        missing = sorted({float(r) for r in rs} - set(self._psi))
        if missing:
            for fs in integrate_batch(self.spec, missing, self.tol):
                self._store(fs)
        return [self._psi[float(r)] for r in rs]

    def _frame(self, fs: FundamentalSolution) -> np.ndarray:
        Z = boundary_lagrangian(fs, self.tol).Z
        self.max_isotropy = max(self.max_isotropy, isotropy_defect(Z, symplectic_matrix(self.k)))
        return Z

    def _graph(self, fs: FundamentalSolution) -> np.ndarray:
        Z = np.vstack([np.eye(2 * self.k), fs.Psi1])
        iso = isotropy_defect(Z, _graph_form(self.k))
        self.max_isotropy = max(self.max_isotropy, iso)
        if iso > self.tol.isotropy_tol:
            raise AccuracyError(f"graph frame isotropy defect {iso:.3e} at r={fs.r}")
        return Z

    def boundary_path(self) -> LagrangianPath:
        if "boundary" not in self._paths:
            k = self.k
            perp = np.vstack([np.eye(k), np.zeros((k, k))])
            self._paths["boundary"] = LagrangianPath(
                frames=lambda r: self._frame(self.solution(r)),
                omega=symplectic_matrix(k), ref_perp=perp,
                batch=lambda rs: [self._frame(fs) for fs in self.solutions(rs)],
                kernel_rel=self.tol.kernel_rel, regularity_rel=self.tol.regularity_rel,
                scale_floor=lambda r: 1.0 / r,
            )
        return self._paths["boundary"]

    def graph_path(self) -> LagrangianPath:
        if "graph" not in self._paths:
            k = self.k
            perp = np.zeros((4 * k, 2 * k))
            perp[:k, :k] = np.eye(k)
            perp[2 * k: 3 * k, k:] = np.eye(k)
            self._paths["graph"] = LagrangianPath(
                frames=lambda r: self._graph(self.solution(r)),
                omega=_graph_form(k), ref_perp=perp,
                batch=lambda rs: [self._graph(fs) for fs in self.solutions(rs)],
                kernel_rel=self.tol.kernel_rel, regularity_rel=self.tol.regularity_rel,
                scale_floor=lambda r: 1.0 / r,
            )
        return self._paths["graph"]


def _graph_form(k: int) -> np.ndarray:
    """Product form ``(-omega) x omega`` on ``R^{2k} x R^{2k}``."""
    s = symplectic_matrix(k)
    Z = np.zeros_like(s)
    return np.block([[-s, Z], [Z, s]])


_FLOWS: "OrderedDict[tuple, HamiltonianFlow]" = OrderedDict()
_FLOWS_LOCK = threading.Lock()


def flow_for(spec: ProblemSpec, tol: Tolerances = DEFAULT_TOL) -> HamiltonianFlow:
    """Shared flow per (problem, tolerances); small LRU."""
    key = (spec, tol)
    with _FLOWS_LOCK:
        fl = _FLOWS.get(key)
        if fl is None:
            fl = HamiltonianFlow(spec, tol)
            _FLOWS[key] = fl
            while len(_FLOWS) > 24:
                _FLOWS.popitem(last=False)
        else:
            _FLOWS.move_to_end(key)
    return fl


def default_grid(spec: ProblemSpec, count: int = DEFAULT_SCAN) -> RadiusGrid:
    return RadiusGrid.uniform(count, spec.r_max)


def _scan_points(grid: RadiusGrid, interval=None) -> np.ndarray:
    if interval is None:
        return grid.array()
    a, b = map(float, interval)
    if not 0 < a < b:
        raise ConfigurationError(f"invalid radius interval [{a}, {b}]")
    return grid.restricted(a, b).array()


# --------------------------------------------------------------------------
# conjugate radii and crossing forms
# --------------------------------------------------------------------------


def detect_conjugate_radii(spec: ProblemSpec, grid: RadiusGrid | None = None,
                           tol: Tolerances = DEFAULT_TOL, interval=None) -> list[tuple[float, int]]:
    """Radii in ``(r_min, r_max)`` where ``b_r(1)`` is singular, with ``m(r)``."""
    grid = grid or default_grid(spec)
    path = flow_for(spec, tol).boundary_path()
    cs = path.crossings(_scan_points(grid, interval), root_tol=grid.refinement_tol,
                        endpoint_margin=tol.endpoint_margin, cluster_tol=grid.refinement_tol)
    return [(c.r, c.m) for c in cs]


def _fd_step(grid: RadiusGrid | None, tol: Tolerances) -> float:
    return max(tol.fd_step, grid.refinement_tol if grid is not None else 0.0)


def crossing_form_graph(spec: ProblemSpec, r_star: float, m: int | None = None,
                        tol: Tolerances = DEFAULT_TOL, grid: RadiusGrid | None = None) -> CrossingReport:
    """Crossing form from the graph of ``ell(r)`` over ``ell(r*)`` (central FD)."""
    path = flow_for(spec, tol).boundary_path()
    lf = path.crossing_form(r_star, m, _fd_step(grid, tol))
    W = np.linalg.solve(lf.R, lf.kernel)  # a = R w
    W = W / np.linalg.norm(W, axis=0, keepdims=True)
    A = lf.R @ W
    G = A.T @ lf.gamma_full @ A
    return CrossingReport(
        r_star=float(r_star), kernel_basis=W, gamma_matrix=0.5 * (G + G.T), signature=lf.signature,
        regular=lf.regular, method="graph_fd", gamma_normalized=lf.gamma, min_abs_eig=lf.min_abs_eig,
        complement=lf.complement,
    )


def crossing_form_boundary(spec: ProblemSpec, r_star: float, kernel: np.ndarray | None = None,
                           m: int | None = None, tol: Tolerances = DEFAULT_TOL) -> CrossingReport:
    """Crossing form from boundary data: ``<J u'(1), u'(1)> / r^3`` on ``ker b``.

    ``kernel`` (columns ``w``) defaults to the numerical kernel of ``b(1)``.
    """
    fl = flow_for(spec, tol)
    fs = fl.solution(r_star)
    path = fl.boundary_path()
    J = build_J(spec).astype(float)
    r = float(r_star)
    V, Q, R = path.kernel_coords(r, m)
    if kernel is None:
        Wraw = np.linalg.solve(R, V)
    else:
        Wk = np.atleast_2d(np.asarray(kernel, dtype=float))
        Wk = Wk if Wk.shape[0] == spec.k else Wk.T
        # orthonormalise the given kernel inside ell(r*) to judge regularity
        Aq, _ = np.linalg.qr(R @ Wk)
        Wraw = np.linalg.solve(R, Aq)
    du = J @ fs.d @ Wraw  # u'(1) for each kernel column
    if np.min(np.linalg.norm(du, axis=0)) <= tol.kernel_rel * max(1.0, np.linalg.norm(fs.d)):
        raise IllConditionedKernelError(f"kernel solution with vanishing boundary derivative at r={r}")
    res = np.linalg.norm(fs.b @ Wraw, axis=0) / np.linalg.norm(Wraw, axis=0)
    if np.max(res) > 1e-6:
        raise PreconditionError(f"r={r} is not a conjugate radius (|b w| = {np.max(res):.2e})")
    Gn = (du.T @ J @ du) / r  # Lagrangian form, orthonormal kernel basis
    Gn = 0.5 * (Gn + Gn.T)
    scale = max(float(np.linalg.norm(Gn, 2)), 1.0 / r)
    thr = tol.regularity_rel * scale
    sig, mn, _ = inertia_signature(Gn, thr)
    W = Wraw / np.linalg.norm(Wraw, axis=0, keepdims=True)
    dW = J @ fs.d @ W
    G = (dW.T @ J @ dW) / r ** 3
    return CrossingReport(
        r_star=r, kernel_basis=W, gamma_matrix=0.5 * (G + G.T), signature=sig, regular=bool(mn > thr),
        method="boundary_formula", gamma_normalized=Gn, min_abs_eig=mn,
    )


# --------------------------------------------------------------------------
# Maslov indices
# --------------------------------------------------------------------------


@dataclass
class MaslovResult:
    value: int
    route: str
    crossings: list = field(default_factory=list)
    delta: float = 0.0
    attempts: int = 0
    max_defect: float = 0.0
    max_isotropy: float = 0.0

    def radii(self):
        return [(c.r_star, c.m, c.signature) for c in self.crossings]


def _route_once(spec: ProblemSpec, rs: np.ndarray, route: str, tol: Tolerances,
                grid: RadiusGrid) -> tuple[list, bool, HamiltonianFlow]:
    fl = flow_for(spec, tol)
    path = fl.boundary_path() if route == "boundary" else fl.graph_path()
    cs = path.crossings(rs, root_tol=grid.refinement_tol, endpoint_margin=tol.endpoint_margin,
                        cluster_tol=grid.refinement_tol)
    reports = []
    ok = True
    for c in cs:
        if route == "boundary":
            rep = crossing_form_graph(spec, c.r, c.m, tol, grid)
        else:
            lf = path.crossing_form(c.r, c.m, _fd_step(grid, tol))
            rep = CrossingReport(
                r_star=c.r, kernel_basis=lf.kernel, gamma_matrix=lf.gamma, signature=lf.signature,
                regular=lf.regular, method="graph_fd", gamma_normalized=lf.gamma,
                min_abs_eig=lf.min_abs_eig, complement=lf.complement,
            )
        ok &= rep.regular
        reports.append(rep)
    return reports, ok, fl


def regularization_scale(spec: ProblemSpec) -> float:
    vals = np.asarray(spec.S(sample_points(1, 9)), dtype=float)
    return 1e-3 * (1.0 + float(np.max(np.abs(vals))))


def _maslov(spec: ProblemSpec, interval, grid, tol: Tolerances, route: str) -> MaslovResult:
    if spec.n != 1:
        raise ConfigurationError("the Maslov index is only implemented for n = 1")
    grid = grid or default_grid(spec)
    if interval is None:
        interval = (grid.r_min, grid.r_max)
    rs = _scan_points(grid, interval)
    reports, ok, fl = _route_once(spec, rs, route, tol, grid)
    if ok:
        return MaslovResult(sum(c.signature for c in reports), route, reports, 0.0, 0,
                            fl.max_defect, fl.max_isotropy)
    bad = [c.r_star for c in reports if not c.regular]
    log.info("irregular crossing(s) at %s; regularising S -> S + delta I", bad)
    dstar = regularization_scale(spec)
    diag = []
    for i in range(1, tol.max_regularization_attempts + 1):
        delta = dstar * (-1) ** i * i / 9.0
        pert = spec.shifted(delta)
        try:
            reps, ok_i, fl_i = _route_once(pert, rs, route, tol, grid)
        except PreconditionError as exc:
            diag.append(f"delta={delta:.3e}: {exc}")
            continue
        if ok_i:
            return MaslovResult(sum(c.signature for c in reps), route, reps, delta, i,
                                fl_i.max_defect, fl_i.max_isotropy)
        diag.append(f"delta={delta:.3e}: irregular at {[c.r_star for c in reps if not c.regular]}")
    raise IrregularCrossingError(
        f"irregular crossing(s) at {bad} survived {tol.max_regularization_attempts} perturbations: "
        + "; ".join(diag)
    )


def maslov_details(spec: ProblemSpec, interval=None, grid: RadiusGrid | None = None,
                   tol: Tolerances = DEFAULT_TOL) -> MaslovResult:
    return _maslov(spec, interval, grid, tol, "boundary")


def maslov_index(spec: ProblemSpec, interval=None, grid: RadiusGrid | None = None,
                 tol: Tolerances = DEFAULT_TOL) -> int:
    """``mu_Mas(ell, mu, [r_a, r_b])`` as a sum of crossing-form signatures."""
    return maslov_details(spec, interval, grid, tol).value


def graph_maslov_details(spec: ProblemSpec, interval=None, grid: RadiusGrid | None = None,
                         tol: Tolerances = DEFAULT_TOL) -> MaslovResult:
    return _maslov(spec, interval, grid, tol, "graph")


def graph_maslov(spec: ProblemSpec, interval=None, grid: RadiusGrid | None = None,
                 tol: Tolerances = DEFAULT_TOL) -> int:
    """Maslov index of ``r -> graph Psi_r(1)`` against ``mu x mu`` in ``R^{4k}``."""
    return graph_maslov_details(spec, interval, grid, tol).value
