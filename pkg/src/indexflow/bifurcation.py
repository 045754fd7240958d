"""Galerkin-Newton solver for the semilinear problems and bifurcation radii.

On the reference interval the problem reads ``J u'' + r^2 V(r x, u) = 0``
with Dirichlet data.  In the sine basis the weak residual is

    R_jp(c) = -J_jj (p pi)^2 c_jp + r^2 int V_j(r x, u(x)) phi_p(x) dx,

whose Jacobian at ``c = 0`` is the linear form matrix ``A(r)`` when
``DV(x, 0) = S(x)``.

Near a supercritical pitchfork the nontrivial branch has amplitude of
order ``sqrt(r - r*)`` with a large constant, so Newton started from
``eps * kernel`` is attracted by the trivial root.  Probes therefore run
plain Newton first and, when it returns the trivial solution, Newton on
the deflated residual ``(||c||_B^-2 + 1) R(c)`` which removes that root.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from . import spectral_flow as sfm
from .core import (
    DEFAULT_TOL,
    ConfigurationError,
    NonlinearSpec,
    ProblemSpec,
    RadiusGrid,
    Tolerances,
    build_J,
    sample_points,
)

log = logging.getLogger(__name__)

EPS_LADDER = (0.2, 0.1, 0.05)
OFFSETS = (0.02, 0.01, 0.005)
TRIVIAL_NORM = 1e-8
DIVERGED_NORM = 1e6
MIN_ALIGNMENT = 0.5
MAX_RATIO = 0.75


@dataclass
class BranchPoint:
    r: float
    coeffs: np.ndarray
    norm_H10: float
    residual: float

    def to_dict(self) -> dict:
        return {"r": self.r, "norm_H10": self.norm_H10, "residual": self.residual}


@dataclass
class NewtonResult:
    converged: bool
    point: BranchPoint | None
    iterations: int
    near_singular: bool
    history: list
    deflated: bool = False

    @property
    def trivial(self) -> bool:
        return self.converged and self.point is not None and self.point.norm_H10 <= TRIVIAL_NORM

    @property
    def nontrivial(self) -> bool:
        return self.converged and self.point is not None and self.point.norm_H10 > TRIVIAL_NORM


class SemilinearGalerkin:
    """Residual and Jacobian of the Galerkin system at fixed ``N`` (n = 1)."""

    def __init__(self, nspec: NonlinearSpec, spec: ProblemSpec, N: int):
        if spec.n != 1:
            raise ConfigurationError("the semilinear solver is implemented for n = 1")
        if nspec.k != spec.k:
            raise ConfigurationError("nonlinear and linear problems have different k")
        self.nspec, self.spec, self.N, self.k = nspec, spec, int(N), spec.k
        nq = 3 * self.N + 32  # polynomial nonlinearities raise the bandwidth
        self.x, self.w, self.Phi = sfm._basis(self.N, nq)
        self.kappa = sfm.stiffness(self.N, 1)
        self.Bdiag = np.tile(self.kappa, self.k)
        self.js = np.diag(build_J(spec)).astype(float)
        self.K = -np.repeat(self.js, self.N) * self.Bdiag

    def values(self, c: np.ndarray) -> np.ndarray:
        return self.Phi @ c.reshape(self.k, self.N).T  # (nq, k)

    def norm(self, c) -> float:
        return float(np.sqrt(np.sum(self.Bdiag * c * c)))

    def dual_norm(self, R) -> float:
        return float(np.sqrt(np.sum(R * R / self.Bdiag)))

    def residual(self, r: float, c: np.ndarray) -> np.ndarray:
        u = self.values(c)
        V = np.asarray(self.nspec.V((r * self.x)[:, None], u), dtype=float).reshape(-1, self.k)
        proj = (self.Phi * self.w[:, None]).T @ V  # (N, k)
        return self.K * c + (r * r) * proj.T.ravel()

    def jacobian(self, r: float, c: np.ndarray) -> np.ndarray:
        u = self.values(c)
        D = np.asarray(self.nspec.DV((r * self.x)[:, None], u), dtype=float).reshape(-1, self.k, self.k)
        Mt = np.einsum("a,aij,ap,aq->ipjq", self.w, D, self.Phi, self.Phi, optimize=True)
        return np.diag(self.K) + (r * r) * Mt.reshape(self.k * self.N, self.k * self.N)


def newton_solve(nspec: NonlinearSpec, spec: ProblemSpec, r: float, init, N: int = 32,
                 tol: Tolerances = DEFAULT_TOL, deflate: bool = False,
                 system: SemilinearGalerkin | None = None) -> NewtonResult:
    """Newton's method for the Galerkin system from ``init`` coefficients.

    Convergence means ``||R||_{B^-1} <= newton_tol (1 + ||c||_B)``.  With
    ``deflate`` the trivial root is removed by the factor
    ``||c||_B^-2 + 1``; the step is the undeflated one rescaled.
    A nearly singular Jacobian is recorded, not raised.
    """
    G = system or SemilinearGalerkin(nspec, spec, N)
    c = np.array(init, dtype=float).ravel()
    if c.size != G.k * G.N:
        raise ConfigurationError(f"initial guess has {c.size} coefficients, expected {G.k * G.N}")
    hist = []
    near_singular = False
    for it in range(tol.newton_max_iter + 1):
        R = G.residual(r, c)
        nc = G.norm(c)
        res = G.dual_norm(R)
        hist.append((nc, res))
        if not np.isfinite(res) or nc > DIVERGED_NORM:
            break
        if res <= tol.newton_tol * (1.0 + nc):
            return NewtonResult(True, BranchPoint(float(r), c.copy(), nc, res), it, near_singular, hist, deflate)
        if deflate and nc <= TRIVIAL_NORM:
            break
        Jm = G.jacobian(r, c)
        try:
            if np.linalg.cond(Jm) > 1e12:
                near_singular = True
            delta = -np.linalg.solve(Jm, R)
        except np.linalg.LinAlgError:
            near_singular = True
            break
        if deflate:
            M = nc ** -2 + 1.0
            grad = -2.0 * nc ** -4 * (G.Bdiag * c)
            denom = 1.0 - float(grad @ delta) / M
            if denom == 0:
                break
            delta = delta / denom
        c = c + delta
    return NewtonResult(False, None, len(hist) - 1, near_singular, hist, deflate)


# --------------------------------------------------------------------------
# detection
# --------------------------------------------------------------------------


@dataclass
class Probe:
    r_star: float
    r: float
    eps: float
    direction: int
    plain_trivial: bool
    plain_converged: bool
    deflated_converged: bool
    norm: float | None
    alignment: float | None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class BifurcationReport:
    detected: list
    predicted: list | str
    lower_bound: int | str
    conjugate_radii: list
    probes: list = field(default_factory=list)
    degenerate_linear: bool = False
    gradient: bool = True
    sfl: int | None = None
    N_used: int | None = None
    notes: list = field(default_factory=list)

    @property
    def detected_radii(self) -> list:
        return [r for r, _ in self.detected]

    @property
    def all_probes_trivial(self) -> bool:
        return all(p.plain_trivial for p in self.probes)

    def to_dict(self) -> dict:
        from .core import _jsonable

        return _jsonable({
            "detected": [{"r": r, "branch": [b.to_dict() for b in pts]} for r, pts in self.detected],
            "predicted": self.predicted,
            "lower_bound": self.lower_bound,
            "conjugate_radii": [{"r": r, "m": m, "signature": s} for r, m, s in self.conjugate_radii],
            "degenerate_linear": self.degenerate_linear,
            "gradient": self.gradient,
            "sfl": self.sfl,
            "N_used": self.N_used,
            "all_probes_trivial": self.all_probes_trivial,
            "probes": [p.to_dict() for p in self.probes],
            "notes": self.notes,
        })

    def branches_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r_star", "r", "norm_H10", "residual"])
            for rs, pts in self.detected:
                for b in pts:
                    w.writerow([f"{rs:.12g}", f"{b.r:.12g}", f"{b.norm_H10:.12g}", f"{b.residual:.3e}"])


def _check_linearization(nspec: NonlinearSpec, spec: ProblemSpec) -> None:
    pts = sample_points(spec.n, 9)
    S = np.asarray(spec.S(pts), dtype=float)
    D = np.asarray(nspec.DV(pts, np.zeros((len(pts), spec.k))), dtype=float)
    if np.max(np.abs(S - D)) > 1e-9 * (1 + np.max(np.abs(S))):
        raise ConfigurationError("spec.S does not match DV(x, 0) of the nonlinear problem")
    V0 = np.asarray(nspec.V(pts, np.zeros((len(pts), spec.k))), dtype=float)
    if np.max(np.abs(V0)) > 1e-12:
        raise ConfigurationError("V(x, 0) does not vanish")


def is_linear(nspec: NonlinearSpec, spec: ProblemSpec, seed: int = 7) -> bool:
    """``V(x, u) = DV(x, 0) u`` at random samples."""
    rng = np.random.default_rng(seed)
    pts = sample_points(spec.n, 9)
    for scale in (0.1, 1.0, 10.0):
        u = scale * rng.uniform(-1, 1, size=(len(pts), spec.k))
        V = np.asarray(nspec.V(pts, u), dtype=float)
        S = np.asarray(spec.S(pts), dtype=float)
        lin = np.einsum("aij,aj->ai", S, u)
        if np.max(np.abs(V - lin)) > 1e-10 * (1 + np.max(np.abs(lin))):
            return False
    return True


def _kernel(spec: ProblemSpec, r_star: float, N: int, m: int, tol: Tolerances) -> np.ndarray:
    """B-orthonormal kernel coefficient vectors (columns) at ``r*``."""
    d = sfm.discretization(spec, N)
    vals, vecs = np.linalg.eigh(d.A_hat(r_star))
    idx = np.argsort(np.abs(vals))[:m]
    return vecs[:, idx] * d.scale[:, None]


def detect_bifurcation_radii(nspec: NonlinearSpec, spec: ProblemSpec, grid: RadiusGrid | None = None,
                             N: int = 32, tol: Tolerances = DEFAULT_TOL) -> BifurcationReport:
    """Probe every conjugate radius of the linearisation for shrinking branches.

    A radius ``r*`` is detected when, on one side of ``r*``, nontrivial
    solutions exist at all three offsets with strictly decreasing
    ``H^1_0`` norms (the last at most ``0.75`` of the first), below
    ``branch_norm_cap`` and aligned with the kernel (projection ratio at
    least ``0.5``).
    """
    _check_linearization(nspec, spec)
    grid = grid or sfm.default_grid(spec)
    loc = sfm.locate_details(spec, grid, N, tol)
    Nu = loc.N_used
    crossings = []
    for c in loc.crossings:
        fc = sfm.form_crossing_details(spec, c.r, Nu, tol, m=c.m)
        crossings.append((c.r, c.m, fc.signature))
    radii = [c[0] for c in crossings]
    gaps = np.diff(radii)
    if np.any(gaps <= 2 * max(OFFSETS)):
        raise ConfigurationError(
            f"probe offsets up to {max(OFFSETS)} exceed half the gap between conjugate radii {radii}"
        )
    sfl = sfm.spectral_flow(spec, (grid.r_min, grid.r_max), N, tol)
    gradient = bool(nspec.is_gradient)
    if gradient:
        predicted = [r for r, m, s in crossings if s != 0]
        mmax = max([m for _, m, _ in crossings], default=0)
        lower = abs(sfl) // mmax if mmax else 0
    else:
        predicted, lower = "not applicable", "not applicable"
    report = BifurcationReport([], predicted, lower, crossings, gradient=gradient, sfl=sfl, N_used=Nu)
    if not gradient:
        report.notes.append("non-gradient field: index-based predictions are not applicable")

    G = SemilinearGalerkin(nspec, spec, Nu)
    if is_linear(nspec, spec):
        report.degenerate_linear = True
        report.notes.append("linear V: every conjugate radius carries a line of solutions")
        for r, m, _ in crossings:
            v = _kernel(spec, r, Nu, m, tol)[:, 0]
            v = v / G.norm(v)
            pts = []
            for t in EPS_LADDER:
                c = t * v
                pts.append(BranchPoint(r, c, G.norm(c), G.dual_norm(G.residual(r, c))))
            report.detected.append((r, pts))
        return report

    for r_star, m, _ in crossings:
        K = _kernel(spec, r_star, Nu, m, tol)
        Kb = K * np.sqrt(G.Bdiag)[:, None]  # Euclidean-orthonormal after B scaling
        evidence = None
        for side in (+1, -1):
            best = []
            for off in OFFSETS:
                r = r_star + side * off
                if r <= grid.near_zero_floor or r > spec.r_max:
                    best = None
                    break
                cands = []
                for j in range(m):
                    for eps in EPS_LADDER:
                        init = eps * K[:, j]
                        plain = newton_solve(nspec, spec, r, init, Nu, tol, system=G)
                        sol = plain if plain.nontrivial else None
                        defl = None
                        if sol is None:
                            defl = newton_solve(nspec, spec, r, init, Nu, tol, deflate=True, system=G)
                            sol = defl if defl.nontrivial else None
                        align = None
                        if sol is not None:
                            cb = sol.point.coeffs * np.sqrt(G.Bdiag)
                            align = float(np.linalg.norm(Kb.T @ cb) / np.linalg.norm(cb))
                            if align >= MIN_ALIGNMENT and sol.point.norm_H10 <= tol.branch_norm_cap:
                                cands.append(sol.point)
                        report.probes.append(Probe(
                            r_star, r, eps, j, plain.trivial, plain.converged,
                            bool(defl is not None and defl.converged),
                            None if sol is None else sol.point.norm_H10, align,
                        ))
                if not cands:
                    best = None
                    break
                best.append(min(cands, key=lambda b: b.norm_H10))
            if best:
                norms = [b.norm_H10 for b in best]
                if all(a > b for a, b in zip(norms, norms[1:])) and norms[-1] <= MAX_RATIO * norms[0]:
                    evidence = best
                    break
        if evidence is not None:
            report.detected.append((r_star, evidence))
    return report


def count_lower_bound(spec: ProblemSpec, interval=None, N: int = 32, tol: Tolerances = DEFAULT_TOL,
                      grid: RadiusGrid | None = None) -> int:
    """``floor(|sfl| / max m)`` over the conjugate radii in the interval."""
    if interval is None:
        interval = (1e-3, spec.r_max)
    a, b = map(float, interval)
    grid = grid or RadiusGrid.uniform(sfm.SCAN_COUNT, b, floor=a)
    sfl = sfm.spectral_flow(spec, (a, b), N, tol)
    ms = [m for _, m in sfm.locate_degeneracies(spec, grid, N, tol)]
    if not ms:
        return 0
    return abs(sfl) // max(ms)
