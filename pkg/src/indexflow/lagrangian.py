"""Paths of Lagrangian subspaces and their intersections with a fixed one.

A path is given by a frame function ``r -> Z(r)`` (a ``2n x n`` matrix of
full rank whose columns span a Lagrangian subspace for the form
``omega(X, Y) = X^T Omega Y``) and a reference Lagrangian ``mu``
described through an orthonormal frame ``P`` of its orthogonal complement.

Intersections ``ell(r) cap mu`` are measured through the principal angles:
with ``Q`` an orthonormal frame of ``ell(r)``, the singular values of
``T = P^T Q`` are the sines of the principal angles, so ``dim ell cap mu``
is the number of (numerically) vanishing singular values and ``det T``
changes sign across a crossing of odd multiplicity.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import linalg, optimize

from .core import DegenerateGeometryError, InvariantViolation, PreconditionError

log = logging.getLogger(__name__)


def symplectic_matrix(k: int) -> np.ndarray:
    """``sigma = [[0, -I], [I, 0]]``."""
    I = np.eye(k)
    Z = np.zeros((k, k))
    return np.block([[Z, -I], [I, Z]])


def orthonormal_frame(Z: np.ndarray):
    """Reduced QR with positive diagonal in ``R`` (continuous in ``Z``)."""
    Q, R = np.linalg.qr(Z)
    s = np.sign(np.diag(R))
    s[s == 0] = 1.0
    return Q * s, R * s[:, None]


def isotropy_defect(Z: np.ndarray, omega: np.ndarray) -> float:
    """``||Z^T Omega Z||_F / ||Z||_2^2``."""
    nrm = np.linalg.norm(Z, 2)
    return float(np.linalg.norm(Z.T @ omega @ Z) / max(nrm * nrm, np.finfo(float).tiny))


def inertia_signature(G: np.ndarray, tol: float):
    """Return ``(signature, min |eig|, eigenvalues)`` of a symmetric matrix."""
    if G.size == 0:
        return 0, np.inf, np.zeros(0)
    ev = np.linalg.eigvalsh(0.5 * (G + G.T))
    sig = int(np.sum(ev > tol) - np.sum(ev < -tol))
    return sig, float(np.min(np.abs(ev))), ev


def golden_min(f, a: float, b: float, xtol: float = 1e-13, maxiter: int = 200):
    """Golden-section search for a local minimum of ``f`` on ``[a, b]``.

    Unlike ``scipy.optimize.fminbound`` there is no hidden relative
    tolerance, so V-shaped minima are located to ``xtol``.
    """
    g = (np.sqrt(5.0) - 1.0) / 2.0
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(maxiter):
        if b - a <= xtol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return (float(c), float(fc)) if fc <= fd else (float(d), float(fd))


@dataclass
class Crossing:
    """A crossing candidate of a Lagrangian path with ``mu``."""

    r: float
    m: int
    smin: float
    via: str
    merged: int = 1


@dataclass
class LagrangianForm:
    """Crossing form of a path at a crossing instant.

    ``gamma`` is expressed in the orthonormal kernel basis ``kernel`` of
    coordinates relative to the orthonormal frame ``Q`` of ``ell(r*)``;
    ``gamma_full`` is the graph derivative on the whole of ``ell(r*)``.
    """

    r: float
    Q: np.ndarray
    R: np.ndarray
    kernel: np.ndarray
    gamma: np.ndarray
    gamma_full: np.ndarray
    signature: int
    regular: bool
    min_abs_eig: float
    scale: float
    complement: str


@dataclass
class LagrangianPath:
    """A path ``r -> ell(r)`` given by frames, tested against ``mu``.

    Parameters
    ----------
    frames
        ``r -> Z(r)``; ``Z`` is ``2n x n``.
    omega
        The ``2n x 2n`` matrix of the symplectic form.
    ref_perp
        Orthonormal ``2n x n`` frame of the orthogonal complement of ``mu``.
    batch
        Optional ``rs -> list of Z`` used for grid scans.
    scale_floor
        ``r -> float``; natural size of crossing forms at ``r``, used as a
        floor for the regularity threshold.
    """

    frames: Callable[[float], np.ndarray]
    omega: np.ndarray
    ref_perp: np.ndarray
    batch: Callable[[Sequence[float]], Sequence[np.ndarray]] | None = None
    kernel_rel: float = 1e-8
    regularity_rel: float = 1e-6
    scale_floor: Callable[[float], float] | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    # -- frames -----------------------------------------------------------

    def frame(self, r: float) -> np.ndarray:
        r = float(r)
        Z = self._cache.get(r)
        if Z is None:
            Z = np.asarray(self.frames(r), dtype=float)
            self._cache[r] = Z
        return Z

    def prefetch(self, rs: Sequence[float]) -> None:
        missing = [float(r) for r in rs if float(r) not in self._cache]
        if not missing:
            return
        if self.batch is None:
            for r in missing:
                self.frame(r)
            return
        for r, Z in zip(missing, self.batch(missing)):
            self._cache[r] = np.asarray(Z, dtype=float)

    def measure(self, r: float):
        """Return ``(svals ascending, det T, Q, R, T)`` at ``r``."""
        Z = self.frame(r)
        if not np.all(np.isfinite(Z)):
            raise InvariantViolation(f"non-finite frame at r={r}")
        Q, R = orthonormal_frame(Z)
        if np.min(np.abs(np.diag(R))) <= 1e-14 * np.max(np.abs(np.diag(R))):
            raise InvariantViolation(f"rank-deficient Lagrangian frame at r={r}")
        T = self.ref_perp.T @ Q
        sv = np.linalg.svd(T, compute_uv=False)[::-1]
        return sv, float(np.linalg.det(T)), Q, R, T

    def smin(self, r: float) -> float:
        return float(self.measure(r)[0][0])

    def det(self, r: float) -> float:
        return self.measure(r)[1]

    def scan(self, rs: Sequence[float]):
        self.prefetch(rs)
        out = [self.measure(r) for r in rs]
        return np.array([o[0][0] for o in out]), np.array([o[1] for o in out])

    # -- crossings --------------------------------------------------------

    def multiplicity(self, r: float) -> int:
        return int(np.sum(self.measure(r)[0] <= self.kernel_rel))

    def check_endpoint(self, r: float, margin: float, label: str) -> None:
        s = self.smin(r)
        if not s > margin:
            raise PreconditionError(
                f"{label} endpoint r={r:.12g} is (numerically) a crossing: "
                f"smallest principal-angle sine {s:.3e} <= {margin:.1e}"
            )

    def crossings(self, rs: Sequence[float], root_tol: float = 1e-12,
                  endpoint_margin: float = 1e-7, cluster_tol: float = 1e-10) -> list[Crossing]:
        """Locate all crossings strictly inside ``[rs[0], rs[-1]]``.

        Odd crossings are bracketed by sign changes of ``det T`` and
        resolved with Brent's method; even crossings (e.g. a double kernel
        whose determinant touches zero) are found as interior dips of the
        smallest sine and resolved by golden-section search.
        """
        rs = np.asarray(rs, dtype=float)
        smin, det = self.scan(rs)
        self.check_endpoint(rs[0], endpoint_margin, "left")
        self.check_endpoint(rs[-1], endpoint_margin, "right")
        found: list[Crossing] = []
        xtol = min(root_tol, 1e-12)
        for i in range(len(rs) - 1):
            if det[i] * det[i + 1] < 0:
                r = optimize.brentq(self.det, rs[i], rs[i + 1], xtol=xtol, rtol=4 * np.finfo(float).eps)
                found.append(Crossing(float(r), 0, self.smin(r), "sign"))
        for i in range(1, len(rs) - 1):
            if not (smin[i] <= smin[i - 1] and smin[i] <= smin[i + 1]):
                continue
            # a V or parabola through zero cannot sit above its largest neighbour step
            if smin[i] > max(smin[i - 1] - smin[i], smin[i + 1] - smin[i]):
                continue
            lo, hi = rs[i - 1], rs[i + 1]
            if any(lo <= c.r <= hi for c in found if c.via == "sign"):
                continue
            # two odd crossings inside one cell: det T changes sign twice
            s0 = 1.0 if det[i] > 0 else -1.0
            x, gx = golden_min(lambda r: s0 * self.det(r), lo, hi, xtol)
            if gx < 0:
                for a, b in ((lo, x), (x, hi)):
                    r = optimize.brentq(self.det, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps)
                    found.append(Crossing(float(r), 0, self.smin(r), "sign"))
                continue
            x, fx = golden_min(self.smin, lo, hi, xtol)
            if fx <= self.kernel_rel:
                found.append(Crossing(x, 0, fx, "dip"))
        found.sort(key=lambda c: c.r)
        merged: list[Crossing] = []
        for c in found:
            if merged and abs(c.r - merged[-1].r) <= max(cluster_tol, 1e-9):
                prev = merged[-1]
                if prev.via == "sign" and c.via == "sign":
                    warnings.warn(
                        f"unresolved crossing cluster near r={prev.r:.12g}; reported as one crossing",
                        RuntimeWarning, stacklevel=2,
                    )
                    prev.merged += 1
                if c.smin < prev.smin:
                    prev.r, prev.smin = c.r, c.smin
                if c.via == "sign":
                    prev.via = "sign"
                continue
            merged.append(c)
        for c in merged:
            m = self.multiplicity(c.r)
            if m == 0:
                # odd crossing bracketed to working precision but the sine sits above the threshold
                log.debug("crossing at r=%.15g has smin=%.3e above kernel threshold", c.r, c.smin)
                m = 1
            c.m = max(m, c.merged)
        return merged

    # -- crossing forms ---------------------------------------------------

    def kernel_coords(self, r: float, m: int | None = None):
        """Orthonormal basis (in ``Q``-coordinates) of ``ell(r) cap mu``."""
        sv, _, Q, R, T = self.measure(r)
        _, s, Vt = np.linalg.svd(T)
        if m is None:
            m = int(np.sum(s <= self.kernel_rel))
        V = Vt[::-1][:m].T  # right singular vectors of the smallest sines
        return V, Q, R

    def complement(self, Q: np.ndarray):
        """Lagrangian complement ``Omega Q`` or, failing that, ``Q^perp``."""
        Mp = self.omega @ Q
        if np.linalg.norm(Q.T @ Mp) <= 1e-8:
            return Mp, "omega"
        Mp = linalg.null_space(Q.T)
        if Mp.shape[1] != Q.shape[1]:
            raise DegenerateGeometryError("no transversal complement available")
        return Mp, "orthogonal"

    def graph_derivative(self, r: float, delta: float, Q: np.ndarray):
        """Central difference of the graph form ``omega(u, phi_r u)`` on ``ell(r)``."""
        last_err = None
        for kind in ("omega", "orthogonal"):
            if kind == "omega":
                Mp, used = self.complement(Q)
            else:
                Mp, used = linalg.null_space(Q.T), "orthogonal"
            P = Q.T @ self.omega @ Mp
            Gs = []
            try:
                for t in (r + delta, r - delta):
                    Z = self.frame(t)
                    A = Q.T @ Z
                    B = Mp.T @ Z
                    if np.linalg.cond(A) > 1e10:
                        raise DegenerateGeometryError(f"complement not transversal at r={t}")
                    Gs.append(P @ B @ np.linalg.inv(A))
            except DegenerateGeometryError as exc:
                last_err = exc
                continue
            G = (Gs[0] - Gs[1]) / (2 * delta)
            return 0.5 * (G + G.T), used
        raise DegenerateGeometryError(f"both complements failed at r={r}: {last_err}")

    def crossing_form(self, r: float, m: int | None = None, delta: float = 1e-5) -> LagrangianForm:
        V, Q, R = self.kernel_coords(r, m)
        Gfull, used = self.graph_derivative(r, delta, Q)
        G = V.T @ Gfull @ V
        G = 0.5 * (G + G.T)
        floor = self.scale_floor(r) if self.scale_floor is not None else 0.0
        scale = max(float(np.linalg.norm(G, 2)) if G.size else 0.0, floor)
        tol = self.regularity_rel * scale
        sig, mn, _ = inertia_signature(G, tol)
        return LagrangianForm(
            r=float(r), Q=Q, R=R, kernel=V, gamma=G, gamma_full=Gfull, signature=sig,
            regular=bool(mn > tol), min_abs_eig=mn, scale=scale, complement=used,
        )
