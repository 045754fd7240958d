"""Galerkin discretisation of the rescaled forms and their spectral flow.

The form family on ``H^1_0`` of the reference domain is

    h_r(u) = -int <J grad u, grad u> + int <S_r(x) u, u>,

discretised in the sine basis ``phi_p(x) = sqrt(2) sin(p pi x)`` (tensor
products on the square), one copy per component.  The stiffness block is
``K = diag(pi^2 |p|^2)`` and equals the ``H^1_0`` Gram matrix ``B``, so
``A(r) = -J (x) K + M(r)`` and the generalised eigenvalues of
``(A(r), B)`` are the eigenvalues of ``A_hat = B^{-1/2} A B^{-1/2}``.

Small problems are handled densely.  Large Riemannian problems on the
square use a matrix-free ``A_hat`` (sum-factorised quadrature) with
Lanczos for the bottom of the spectrum; its negative eigenvalues are the
only ones that can cross zero since ``A_hat - I`` is compact and bounded.
"""
from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import optimize
from scipy.sparse.linalg import LinearOperator, eigsh

from .core import (
    DEFAULT_TOL,
    AssemblyError,
    ConfigurationError,
    ConvergenceError,
    PreconditionError,
    ProblemSpec,
    RadiusGrid,
    Tolerances,
    build_J,
)
from .lagrangian import golden_min, inertia_signature

log = logging.getLogger(__name__)

DENSE_LIMIT = 2500
#: 2D Riemannian problems above this size use Lanczos on the matrix-free operator
MATRIX_FREE_MIN = 400
SCAN_COUNT = 241
COARSE_N = 16


def quadrature_points(N: int) -> int:
    """Gauss-Legendre points per dimension for the potential block.

    Products of two sine modes carry frequencies up to ``2 N pi``; the rule
    needs ``2N + O(1)`` points to integrate them to rounding level.
    """
    return 2 * N + 24


@lru_cache(maxsize=64)
def _rule(nq: int):
    x, w = np.polynomial.legendre.leggauss(nq)
    return (x + 1.0) / 2.0, w / 2.0


@lru_cache(maxsize=64)
def _basis(N: int, nq: int):
    x, w = _rule(nq)
    p = np.arange(1, N + 1)
    Phi = np.sqrt(2.0) * np.sin(np.pi * np.outer(x, p))
    return x, w, Phi


def stiffness(N: int, n: int) -> np.ndarray:
    p = np.arange(1, N + 1, dtype=float)
    if n == 1:
        return (np.pi * p) ** 2
    return (np.pi ** 2 * (p[:, None] ** 2 + p[None, :] ** 2)).ravel()


class Discretization:
    """Sine-Galerkin discretisation of one problem at a fixed mode count."""

    def __init__(self, spec: ProblemSpec, N: int, nq: int | None = None):
        if N < 1:
            raise ConfigurationError("N must be at least 1")
        spec.check()
        self.spec = spec
        self.N = int(N)
        self.k = spec.k
        self.n = spec.n
        self.nq = nq or quadrature_points(self.N)
        self.x, self.w, self.Phi = _basis(self.N, self.nq)
        self.kappa = stiffness(self.N, self.n)
        self.nb = self.kappa.size
        self.size = self.k * self.nb
        self.js = np.diag(build_J(spec)).astype(float)
        self.Bdiag = np.tile(self.kappa, self.k)
        self.scale = 1.0 / np.sqrt(self.Bdiag)
        if self.n == 2:
            X, Y = np.meshgrid(self.x, self.x, indexing="ij")
            self.points = np.stack([X, Y], -1)
            self.weights = np.outer(self.w, self.w)
        else:
            self.points = self.x[:, None]
            self.weights = self.w
        self._const = spec.S.matrix if spec.S.is_constant else None

    @property
    def matrix_free(self) -> bool:
        return self.n == 2 and self.size > MATRIX_FREE_MIN and self.spec.nu == 0

    # -- potential ----------------------------------------------------------

    def field_values(self, r: float) -> np.ndarray:
        """``S_r`` at the quadrature points, shape ``(nq[, nq], k, k)``."""
        if self._const is not None:
            vals = np.broadcast_to(self._const, self.points.shape[:-1] + (self.k, self.k))
        else:
            vals = np.asarray(self.spec.S(r * self.points), dtype=float)
        if not np.all(np.isfinite(vals)):
            bad = np.argwhere(~np.isfinite(vals.reshape(vals.shape[: self.n] + (-1,))).any(-1))[0]
            loc = self.points[tuple(bad)]
            raise AssemblyError(f"non-finite S at x={(r * loc).tolist()} (reference point {loc.tolist()})")
        return (r * r) * vals

    def field_rate(self, r: float, h: float) -> np.ndarray:
        """``d/dr S_r`` at the quadrature points by central differences."""
        return (self.field_values(r + h) - self.field_values(r - h)) / (2 * h)

    def potential(self, Sq: np.ndarray) -> np.ndarray:
        """Dense potential block from field values."""
        k, N = self.k, self.N
        if self.n == 1:
            Mt = np.einsum("a,aij,ap,aq->ipjq", self.w, Sq, self.Phi, self.Phi, optimize=True)
            return Mt.reshape(k * N, k * N)
        T = np.einsum("a,ap,aq->apq", self.w, self.Phi, self.Phi)
        if self._const is not None:
            G = T.sum(0)
            return np.kron(Sq[0, 0], np.kron(G, G))
        X = np.einsum("abij,apq->bijpq", Sq, T, optimize=True)
        Mt = np.einsum("bijpq,bst->ipsjqt", X, T, optimize=True)
        return Mt.reshape(self.size, self.size)

    def potential_batch(self, Sq: np.ndarray) -> np.ndarray:
        """1D only: ``Sq`` of shape ``(R, nq, k, k)`` -> ``(R, kN, kN)``."""
        k, N = self.k, self.N
        Mt = np.einsum("a,raij,ap,aq->ripjq", self.w, Sq, self.Phi, self.Phi, optimize=True)
        return Mt.reshape(Sq.shape[0], k * N, k * N)

    # -- forms --------------------------------------------------------------

    def A(self, r: float) -> np.ndarray:
        M = self.potential(self.field_values(r))
        A = M + np.diag(-np.repeat(self.js, self.nb) * self.Bdiag)
        return 0.5 * (A + A.T)

    def A_hat(self, r: float) -> np.ndarray:
        s = self.scale
        return self.A(r) * s[:, None] * s[None, :]

    def A_hat_batch(self, rs: Sequence[float]) -> np.ndarray:
        rs = np.asarray(rs, dtype=float)
        if self.n != 1:
            return np.stack([self.A_hat(r) for r in rs])
        if self._const is not None:
            Sq = (rs * rs)[:, None, None, None] * np.broadcast_to(self._const, (len(rs), self.nq, self.k, self.k))
        else:
            pts = rs[:, None, None] * self.points[None]
            Sq = (rs * rs)[:, None, None, None] * np.asarray(self.spec.S(pts), dtype=float)
            if not np.all(np.isfinite(Sq)):
                raise AssemblyError("non-finite S values in batch assembly")
        M = self.potential_batch(Sq)
        s = self.scale
        out = M * (s[:, None] * s[None, :])
        out += np.diag(-np.repeat(self.js, self.nb))
        return 0.5 * (out + np.swapaxes(out, -1, -2))

    def A_hat_rate(self, r: float, h: float) -> np.ndarray:
        s = self.scale
        M = self.potential(self.field_rate(r, h))
        M = 0.5 * (M + M.T)
        return M * s[:, None] * s[None, :]

    def operator(self, Sq: np.ndarray, with_stiffness: bool = True) -> LinearOperator:
        """Matrix-free ``B^{-1/2} (A or M) B^{-1/2}`` on the square."""
        k, N = self.k, self.N
        Phi = self.Phi
        W = self.weights[:, :, None, None] * Sq  # (nq, nq, k, k)
        s = self.scale.reshape(k, N, N)
        shift = -self.js

        def mv(v):
            X = np.asarray(v, dtype=float).reshape(k, N, N) * s
            U = np.einsum("ap,ipq,bq->iab", Phi, X, Phi, optimize=True)
            V = np.einsum("abji,iab->jab", W, U, optimize=True)
            Y = np.einsum("ap,jab,bq->jpq", Phi, V, Phi, optimize=True) * s
            out = Y.ravel()
            if with_stiffness:
                out = out + np.repeat(shift, self.nb) * np.asarray(v, dtype=float).ravel()
            return out

        return LinearOperator((self.size, self.size), matvec=mv, dtype=float)

    def norm_bound(self, Sq: np.ndarray) -> float:
        """Upper bound for ``||B^{-1/2} M B^{-1/2}||`` via Poincare."""
        ev = np.linalg.eigvalsh(0.5 * (Sq + np.swapaxes(Sq, -1, -2)))
        return float(np.max(np.abs(ev))) / (np.pi ** 2 * self.n)

    def lower_bound(self, Sq: np.ndarray) -> float:
        """``lambda_min(A_hat) >= 1 - sup lambda_max(-S_r)^+ / (n pi^2)`` when ``nu = 0``."""
        ev = np.linalg.eigvalsh(0.5 * (Sq + np.swapaxes(Sq, -1, -2)))
        neg = max(0.0, float(np.max(-ev)))
        return 1.0 - neg / (np.pi ** 2 * self.n)


@lru_cache(maxsize=32)
def _disc_cached(spec: ProblemSpec, N: int) -> Discretization:
    return Discretization(spec, N)


def discretization(spec: ProblemSpec, N: int) -> Discretization:
    return _disc_cached(spec, int(N))


def assemble(spec: ProblemSpec, r: float, N: int):
    """Dense ``(A(r), B)`` of the Galerkin form with ``N`` modes per dimension."""
    d = discretization(spec, N)
    return d.A(r), np.diag(d.Bdiag)


@dataclass
class GalerkinForm:
    """``(A(r), B)`` at one radius, with the basis description."""

    N: int
    r: float
    A: np.ndarray
    B: np.ndarray
    k: int
    n: int

    @classmethod
    def build(cls, spec: ProblemSpec, r: float, N: int) -> "GalerkinForm":
        A, B = assemble(spec, r, N)
        return cls(N=int(N), r=float(r), A=A, B=B, k=spec.k, n=spec.n)

    def eigenvalues(self) -> np.ndarray:
        s = 1.0 / np.sqrt(np.diag(self.B))
        return np.linalg.eigvalsh(self.A * s[:, None] * s[None, :])


# --------------------------------------------------------------------------
# spectra at a single radius
# --------------------------------------------------------------------------


@dataclass
class Spectrum:
    """Eigen-data of the pencil at one radius.

    ``values`` are sorted ascending; for the matrix-free path they are the
    lowest few only, but every eigenvalue not listed exceeds ``values[-1]``
    which is positive.
    """

    r: float
    N: int
    values: np.ndarray
    neg: int
    gap: float
    scale: float
    vectors: np.ndarray | None = None
    certified: bool = False


def _eigsh_bottom(op: LinearOperator, count: int, vectors: bool):
    n = op.shape[0]
    v0 = np.ones(n) / math.sqrt(n)
    count = min(count, n - 2)
    res = eigsh(op, k=count, which="SA", v0=v0, tol=1e-13, maxiter=20 * n,
                return_eigenvectors=vectors)
    if vectors:
        vals, vecs = res
        order = np.argsort(vals)
        return vals[order], vecs[:, order]
    return np.sort(res), None


def spectrum(spec: ProblemSpec, r: float, N: int, vectors: bool = False, extra: int = 4) -> Spectrum:
    d = discretization(spec, N)
    if not d.matrix_free:
        Ah = d.A_hat(r)
        if vectors:
            vals, vecs = np.linalg.eigh(Ah)
        else:
            vals, vecs = np.linalg.eigvalsh(Ah), None
        scale = max(1.0, float(np.max(np.abs(vals))))
        return Spectrum(float(r), d.N, vals, int(np.sum(vals < 0)), float(np.min(np.abs(vals))), scale, vecs)
    Sq = d.field_values(r)
    scale = 1.0 + r * 0 + d.norm_bound(Sq)
    lb = d.lower_bound(Sq)
    if lb > 0.05 and not vectors:
        return Spectrum(float(r), d.N, np.array([lb]), 0, lb, scale, None, certified=True)
    op = d.operator(Sq)
    count = 8 + extra
    while True:
        vals, vecs = _eigsh_bottom(op, count, vectors)
        if vals[-1] > 0 or count >= d.size - 2:
            break
        count *= 2
    return Spectrum(float(r), d.N, vals, int(np.sum(vals < 0)), float(np.min(np.abs(vals))), scale, vecs)


def neg_count(spec: ProblemSpec, r: float, N: int) -> int:
    return spectrum(spec, r, N).neg


def _check_endpoint(sp: Spectrum, tol: Tolerances, label: str) -> None:
    if not sp.gap > tol.endpoint_rel * sp.scale:
        raise PreconditionError(
            f"{label} endpoint r={sp.r:.12g} is degenerate at N={sp.N}: min |lambda| = {sp.gap:.3e}"
        )


# --------------------------------------------------------------------------
# eigen paths
# --------------------------------------------------------------------------


@dataclass
class EigenPath:
    grid: RadiusGrid
    eigs: list
    neg_counts: np.ndarray
    N: int

    def to_csv(self, path, q: int | None = None, offset: int = 0) -> None:
        """Columns ``r``, ``lambda_{offset+1} .. lambda_{offset+q}``, ``neg_count``."""
        avail = min(len(e) for e in self.eigs)
        offset = max(0, min(offset, avail - 1))
        q = min(q or avail, avail - offset)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r"] + [f"lambda{offset + i + 1}" for i in range(q)] + ["neg_count"])
            for r, e, c in zip(self.grid.values, self.eigs, self.neg_counts):
                w.writerow([f"{r:.12g}"] + [f"{v:.12g}" for v in e[offset: offset + q]] + [int(c)])


def eigen_path(spec: ProblemSpec, grid: RadiusGrid, N: int) -> EigenPath:
    """Sorted generalised eigenvalues over the grid (dense discretisations only)."""
    d = discretization(spec, N)
    rs = grid.array()
    if d.n == 1:
        eigs = []
        for i in range(0, len(rs), 64):
            eigs.extend(np.linalg.eigvalsh(d.A_hat_batch(rs[i: i + 64])))
    else:
        eigs = [spectrum(spec, r, N).values for r in rs]
    negs = np.array([int(np.sum(e < 0)) for e in eigs])
    return EigenPath(grid, [np.asarray(e) for e in eigs], negs, d.N)


# --------------------------------------------------------------------------
# refinement ladder
# --------------------------------------------------------------------------


def ladder(fn, N: int, tol: Tolerances = DEFAULT_TOL, agree: int = 3):
    """Evaluate ``fn(N)`` on ``N, N+8, N+16, ...`` until ``agree`` equal keys.

    ``fn`` returns ``(key, payload)``; returns ``(payload, N_accepted, keys)``
    where ``N_accepted`` is the finest level of the agreeing run.
    """
    keys, Ns = [], []
    Ni = int(N)
    payload = None
    while True:
        if Ni > tol.n_max:
            raise ConvergenceError(f"refinement did not stabilise up to N={tol.n_max}: {list(zip(Ns, keys))}")
        key, payload = fn(Ni)
        keys.append(key)
        Ns.append(Ni)
        if len(keys) >= agree and all(k == keys[-1] for k in keys[-agree:]):
            return payload, Ni, list(zip(Ns, keys))
        Ni += tol.refine_step


@dataclass
class SpectralFlowResult:
    value: int
    interval: tuple
    N_used: int
    levels: list
    neg_a: int
    neg_b: int


def spectral_flow_details(spec: ProblemSpec, interval=None, N: int = 32,
                          tol: Tolerances = DEFAULT_TOL) -> SpectralFlowResult:
    if interval is None:
        interval = (1e-3, spec.r_max)
    a, b = map(float, interval)
    if not 0 < a < b:
        raise ConfigurationError(f"invalid radius interval [{a}, {b}]")

    def level(Ni):
        sa, sb = spectrum(spec, a, Ni), spectrum(spec, b, Ni)
        _check_endpoint(sa, tol, "left")
        _check_endpoint(sb, tol, "right")
        return sa.neg - sb.neg, (sa.neg, sb.neg)

    (na, nb), Nacc, keys = ladder(level, N, tol)
    return SpectralFlowResult(na - nb, (a, b), Nacc, keys, na, nb)


def spectral_flow(spec: ProblemSpec, interval=None, N: int = 32, tol: Tolerances = DEFAULT_TOL) -> int:
    """``neg(r_a) - neg(r_b)`` of the pencil, stable over three refinements."""
    return spectral_flow_details(spec, interval, N, tol).value


def morse_index(spec: ProblemSpec, N: int = 32, tol: Tolerances = DEFAULT_TOL):
    """Negative index of ``h_{r_max}``; ``"infinite"`` unless ``J = -I``."""
    if spec.nu > 0:
        return "infinite"

    def level(Ni):
        sp = spectrum(spec, spec.r_max, Ni)
        _check_endpoint(sp, tol, "right")
        return sp.neg, sp.neg

    val, _, _ = ladder(level, N, tol)
    return int(val)


# --------------------------------------------------------------------------
# degeneracies
# --------------------------------------------------------------------------


@dataclass
class Degeneracy:
    r: float
    m: int
    signature: int | None = None
    regular: bool | None = None


@dataclass
class LocateResult:
    crossings: list
    N_used: int
    levels: list
    path: EigenPath | None = None

    def pairs(self):
        return [(c.r, c.m) for c in self.crossings]


def _window(sp: Spectrum, tol: Tolerances) -> float:
    return tol.kernel_window * sp.scale


def _merge(roots: list, cluster_tol: float) -> list:
    roots = sorted(roots)
    out: list[list[float]] = []
    for r in roots:
        if out and r - out[-1][-1] <= cluster_tol:
            out[-1].append(r)
        else:
            out.append([r])
    return out


def _dense_level(spec: ProblemSpec, grid: RadiusGrid, N: int, tol: Tolerances):
    d = discretization(spec, N)
    path = eigen_path(spec, grid, N)
    rs = grid.array()
    sa = Spectrum(rs[0], N, path.eigs[0], int(path.neg_counts[0]), float(np.min(np.abs(path.eigs[0]))),
                  max(1.0, float(np.max(np.abs(path.eigs[0])))))
    sb = Spectrum(rs[-1], N, path.eigs[-1], int(path.neg_counts[-1]), float(np.min(np.abs(path.eigs[-1]))),
                  max(1.0, float(np.max(np.abs(path.eigs[-1])))))
    _check_endpoint(sa, tol, "left")
    _check_endpoint(sb, tol, "right")
    xtol = min(grid.refinement_tol, 1e-12)

    def lam(j):
        return lambda r: float(np.linalg.eigvalsh(d.A_hat(r))[j])

    def minabs(r):
        return float(np.min(np.abs(np.linalg.eigvalsh(d.A_hat(r)))))

    roots: list[float] = []
    negs = path.neg_counts
    for i in range(len(rs) - 1):
        lo, hi = sorted((negs[i], negs[i + 1]))
        for j in range(lo, hi):
            f = lam(j)
            fa, fb = path.eigs[i][j], path.eigs[i + 1][j]
            if fa * fb < 0:
                roots.append(optimize.brentq(f, rs[i], rs[i + 1], xtol=xtol, rtol=4 * np.finfo(float).eps))
            else:  # pragma: no cover - sorted eigenvalues always straddle zero here
                roots.append(golden_min(lambda r: abs(f(r)), rs[i], rs[i + 1], xtol)[0])
    mins = np.array([np.min(np.abs(e)) for e in path.eigs])
    for i in range(1, len(rs) - 1):
        if not (mins[i] <= mins[i - 1] and mins[i] <= mins[i + 1]):
            continue
        if mins[i] > max(mins[i - 1] - mins[i], mins[i + 1] - mins[i]):
            continue
        if any(rs[i - 1] <= x <= rs[i + 1] for x in roots):
            continue
        lo, hi = rs[i - 1], rs[i + 1]
        n0 = int(negs[i - 1])
        # opposite crossings inside one cell leave neg unchanged at the grid points
        pair = False
        for j, sgn in ((n0, 1.0), (n0 - 1, -1.0)):
            if not 0 <= j < len(path.eigs[i]):
                continue
            f = lam(j)
            x, gx = golden_min(lambda r: sgn * f(r), lo, hi, xtol)
            if gx < 0:
                for a, b in ((lo, x), (x, hi)):
                    roots.append(optimize.brentq(f, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps))
                pair = True
                break
        if pair:
            continue
        x, fx = golden_min(minabs, lo, hi, xtol)
        if fx <= tol.kernel_window * max(1.0, float(np.max(np.abs(path.eigs[i])))):
            roots.append(x)
    out = []
    for cl in _merge(roots, max(grid.refinement_tol, 1e-9)):
        r = cl[int(np.argmin([minabs(x) for x in cl]))]
        vals = np.linalg.eigvalsh(d.A_hat(r))
        win = tol.kernel_window * max(1.0, float(np.max(np.abs(vals))))
        m = int(np.sum(np.abs(vals) <= win))
        if len(cl) > 1 and m < len(cl):
            warnings.warn(f"unresolved degeneracy cluster near r={r:.12g}", RuntimeWarning, stacklevel=3)
        out.append(Degeneracy(float(r), max(m, len(cl), 1)))
    return out, path


def _newton_root(spec: ProblemSpec, N: int, j: int, r0: float, lo: float, hi: float,
                 tol: Tolerances, xtol: float) -> float:
    """Root of the ``j``-th lowest eigenvalue near ``r0`` (Hellmann-Feynman Newton)."""
    d = discretization(spec, N)
    r = r0
    h = tol.fd_step
    for _ in range(40):
        sp = spectrum(spec, r, N, vectors=True, extra=j + 2)
        lam = sp.values[j]
        v = sp.vectors[:, j]
        rate = d.operator(d.field_rate(r, h), with_stiffness=False)
        dl = float(v @ rate.matvec(v))
        if dl == 0:
            break
        step = lam / dl
        rn = min(max(r - step, lo), hi)
        if abs(rn - r) <= xtol:
            return rn
        r = rn
    return r


def _matrix_free_level(spec: ProblemSpec, grid: RadiusGrid, N: int, tol: Tolerances):
    """Coarse dense scan, then Newton refinement at full resolution."""
    rs = grid.array()
    sa, sb = spectrum(spec, rs[0], N), spectrum(spec, rs[-1], N)
    _check_endpoint(sa, tol, "left")
    _check_endpoint(sb, tol, "right")
    want = sb.neg - sa.neg  # Riemannian: every crossing has signature -m
    Nc = COARSE_N
    xtol = min(grid.refinement_tol, 1e-12)
    h = grid.array()[1] - grid.array()[0]
    while True:
        coarse, _ = _dense_level(spec, grid, Nc, tol)
        if sum(c.m for c in coarse) == want or Nc >= N:
            break
        Nc = min(2 * Nc, N)
    roots: list[float] = []
    base = sa.neg
    for c in coarse:
        for j in range(base, base + c.m):
            roots.append(_newton_root(spec, N, j, c.r, max(rs[0], c.r - 2 * h), min(rs[-1], c.r + 2 * h), tol, xtol))
        base += c.m
    out = []
    for cl in _merge(roots, max(grid.refinement_tol, 1e-9)):
        r = float(np.mean(cl))
        sp = spectrum(spec, r, N, extra=len(cl) + 2)
        m = int(np.sum(np.abs(sp.values) <= _window(sp, tol)))
        out.append(Degeneracy(r, max(m, 1)))
    return out, None


def _level(spec, grid, N, tol):
    d = discretization(spec, N)
    if d.matrix_free:
        return _matrix_free_level(spec, grid, N, tol)
    if d.n == 2 and d.size > DENSE_LIMIT:
        warnings.warn("dense 2D discretisation with nu > 0 is slow", RuntimeWarning, stacklevel=3)
    return _dense_level(spec, grid, N, tol)


def default_grid(spec: ProblemSpec, count: int = SCAN_COUNT) -> RadiusGrid:
    return RadiusGrid.uniform(count, spec.r_max)


def locate_details(spec: ProblemSpec, grid: RadiusGrid | None = None, N: int = 32,
                   tol: Tolerances = DEFAULT_TOL) -> LocateResult:
    grid = grid or default_grid(spec)
    store = {}

    def level(Ni):
        cs, path = _level(spec, grid, Ni, tol)
        store[Ni] = path
        return tuple(c.m for c in cs), cs

    cs, Nacc, keys = ladder(level, N, tol)
    return LocateResult(cs, Nacc, keys, store.get(Nacc))


def locate_degeneracies(spec: ProblemSpec, grid: RadiusGrid | None = None, N: int = 32,
                        tol: Tolerances = DEFAULT_TOL) -> list[tuple[float, int]]:
    """Radii where the pencil is singular, with kernel dimensions."""
    return locate_details(spec, grid, N, tol).pairs()


@dataclass
class FormCrossing:
    r: float
    m: int
    signature: int
    regular: bool
    gamma: np.ndarray
    eigenvalues: np.ndarray


def form_crossing_details(spec: ProblemSpec, r_star: float, N: int = 32,
                          tol: Tolerances = DEFAULT_TOL, m: int | None = None) -> FormCrossing:
    d = discretization(spec, N)
    h = tol.fd_step
    if d.matrix_free:
        sp = spectrum(spec, r_star, N, vectors=True, extra=(m or 1) + 4)
        rate_op = d.operator(d.field_rate(r_star, h), with_stiffness=False)
        rate_norm = float(abs(eigsh(rate_op, k=1, which="LM", v0=np.ones(d.size) / math.sqrt(d.size),
                                    return_eigenvectors=False)[0]))
    else:
        sp = spectrum(spec, r_star, N, vectors=True)
        R = d.A_hat_rate(r_star, h)
        rate_norm = float(np.linalg.norm(R, 2))
        rate_op = None
    vals, vecs = sp.values, sp.vectors
    if m is None:
        idx = np.flatnonzero(np.abs(vals) <= _window(sp, tol))
    else:
        idx = np.argsort(np.abs(vals))[:m]
    if idx.size == 0:
        raise PreconditionError(
            f"r={r_star:.12g} is not a degeneracy at N={N}: min |lambda| = {np.min(np.abs(vals)):.3e}"
        )
    if idx.size > spec.k * tol.window_factor:
        warnings.warn(f"kernel window captures {idx.size} vectors at r={r_star:.6g}", RuntimeWarning, stacklevel=2)
    V = vecs[:, idx]
    if rate_op is None:
        G = V.T @ R @ V
    else:
        G = V.T @ np.column_stack([rate_op.matvec(V[:, i]) for i in range(V.shape[1])])
    G = 0.5 * (G + G.T)
    scale = max(float(np.linalg.norm(G, 2)), rate_norm)
    thr = tol.regularity_rel * scale
    sig, mn, ev = inertia_signature(G, thr)
    return FormCrossing(float(r_star), int(idx.size), sig, bool(mn > thr), G, ev)


def form_crossing_signature(spec: ProblemSpec, r_star: float, N: int = 32,
                            tol: Tolerances = DEFAULT_TOL) -> tuple[int, int]:
    """``(m, signature)`` of ``d/dr h_r`` restricted to the discrete kernel."""
    fc = form_crossing_details(spec, r_star, N, tol)
    return fc.m, fc.signature
