"""Primal-dual interior-point method for block Hermitian LMIs.

Solves ``min c^T v  s.t.  F0 + L(v) >= 0`` together with its dual
``max -<F0, X>  s.t.  L^*(X) = c, X >= 0`` using Nesterov-Todd scaling and a
Mehrotra predictor-corrector.  The Schur complement ``L^*(W L(.) W)`` is
formed as ``V V^T`` from :meth:`StructureMap.schur_factor`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .structure import StructureMap

log = logging.getLogger(__name__)


@dataclass
class IPMResult:
    v: np.ndarray
    X: list[np.ndarray]
    iterations: int
    primal_residual: float
    dual_residual: float
    gap: float
    status: str


def _inner(A: list[np.ndarray], B: list[np.ndarray]) -> float:
    return float(sum(np.vdot(a, b).real for a, b in zip(A, B)))


def _fro(A: list[np.ndarray]) -> float:
    return float(np.sqrt(sum(np.vdot(a, a).real for a in A)))


def _herm(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.conj().T)


class _Scaling:
    """NT scaling ``R`` with ``R^{-1} X R^{-H} = R^H S R = diag(lam)``."""

    def __init__(self, X: np.ndarray, S: np.ndarray):
        Lx = np.linalg.cholesky(X)
        Ls = np.linalg.cholesky(S)
        U, lam, Vh = np.linalg.svd(Ls.conj().T @ Lx)
        self.lam = lam
        rs = 1.0 / np.sqrt(lam)
        self.R = (Lx @ Vh.conj().T) * rs[None, :]
        # R^{-1} = diag(sqrt(lam)) V^H Lx^{-1}
        self.Rinv = np.sqrt(lam)[:, None] * sla.solve_triangular(Lx, Vh.conj().T, lower=True, trans="C").conj().T
        self.W = self.R @ self.R.conj().T

    def scale_x(self, D: np.ndarray) -> np.ndarray:
        return self.Rinv @ D @ self.Rinv.conj().T

    def scale_s(self, D: np.ndarray) -> np.ndarray:
        return self.R.conj().T @ D @ self.R

    def unscale_x(self, D: np.ndarray) -> np.ndarray:
        return self.R @ D @ self.R.conj().T


def _max_step(lam: np.ndarray, dtilde: np.ndarray) -> float:
    """Largest ``a`` with ``diag(lam) + a * dtilde >= 0``."""
    s = 1.0 / np.sqrt(lam)
    w = np.linalg.eigvalsh(_herm(dtilde * s[:, None] * s[None, :]))
    if w[0] >= 0:
        return np.inf
    return -1.0 / w[0]


class _SchurSolver:
    """Jacobi-scaled Cholesky of ``M = V V^T`` with a small shift fallback.

    Near the optimum ``M`` becomes numerically singular (the dual
    certificate is not unique at low rank); a diagonal shift keeps the
    factorization alive and one refinement step restores the residual.
    """

    def __init__(self, V: np.ndarray):
        self.V = V
        M = V @ V.T
        self.dg = np.sqrt(np.maximum(np.diag(M), 1e-300))
        Ms = M / self.dg[:, None] / self.dg[None, :]
        shift = 0.0
        while True:
            try:
                self.cf = sla.cho_factor(Ms + shift * np.eye(len(Ms)), check_finite=False)
                break
            except np.linalg.LinAlgError:
                shift = 1e-14 if shift == 0.0 else shift * 100
                if shift > 1e-4:
                    raise

    def _apply(self, r: np.ndarray) -> np.ndarray:
        return sla.cho_solve(self.cf, r / self.dg, check_finite=False) / self.dg

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        x = self._apply(rhs)
        return x + self._apply(rhs - self.V @ (self.V.T @ x))


class _QRSchurSolver:
    """``M = R^T R`` from a QR factorization of the Jacobi-scaled ``V^T``.

    No shift is applied, so the solve stays exact when ``M`` is nearly
    singular rather than regularized; three refinement steps follow.
    """

    def __init__(self, V: np.ndarray):
        self.V = V
        self.dg = np.sqrt(np.maximum(np.einsum("ij,ij->i", V, V), 1e-300))
        Rf = sla.qr((V / self.dg[:, None]).T, mode="r", check_finite=False)[0]
        self.Rf = Rf[: V.shape[0]]

    def _apply(self, r: np.ndarray) -> np.ndarray:
        y = sla.solve_triangular(self.Rf, r / self.dg, trans="T", check_finite=False)
        return sla.solve_triangular(self.Rf, y, check_finite=False) / self.dg

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        x = self._apply(rhs)
        for _ in range(3):
            x = x + self._apply(rhs - self.V @ (self.V.T @ x))
        if not np.all(np.isfinite(x)):
            raise np.linalg.LinAlgError("QR Schur solve produced non-finite values")
        return x


SCHUR_SOLVERS = {"cholesky": _SchurSolver, "qr": _QRSchurSolver}


def _breakdown_status(pres: float, relgap: float) -> str:
    """Status when the iteration stops early without meeting every tolerance."""
    if pres <= 1e-6 and relgap <= 1e-6:
        return "inaccurate"
    return "infeasible-like"


def solve_ipm(smap: StructureMap, eps: float = 1e-9, max_iter: int = 100, schur: str = "cholesky") -> IPMResult:
    """``schur`` picks the Schur-complement solver: ``"cholesky"`` (shifted,
    regularizing; the default) or ``"qr"`` (unshifted, used as a retry)."""
    make_schur = SCHUR_SOLVERS[schur]
    c = smap.objective
    F0 = smap.offset()
    sizes = smap.block_sizes
    n_cone = sum(sizes)
    normF0 = _fro(F0)
    normc = float(np.linalg.norm(c))

    # scale of the initial point from the data
    xi = max(10.0, np.sqrt(max(sizes)), normF0)
    eta = max(10.0, np.sqrt(max(sizes)), normF0)
    X = [xi * np.eye(n, dtype=complex) for n in sizes]
    S = [eta * np.eye(n, dtype=complex) for n in sizes]
    v = np.zeros(smap.n_params)

    status = "max_iter"
    history: list[float] = []
    it = 0
    pres = dres = gap = relgap = np.inf
    for it in range(1, max_iter + 1):
        Lv = smap.forward(v)
        rS = [f + l - s for f, l, s in zip(F0, Lv, S)]  # LMI residual
        rX = c - smap.adjoint(X)  # dual equality residual
        gap = _inner(X, S)
        pobj = float(c @ v)
        dobj = -_inner(F0, X)
        pres = _fro(rS) / (1.0 + normF0)
        dres = float(np.linalg.norm(rX)) / (1.0 + normc)
        relgap = gap / (1.0 + abs(pobj) + abs(dobj))
        log.debug("ipm it=%d pobj=%.12g dobj=%.12g pres=%.2e dres=%.2e relgap=%.2e", it, pobj, dobj, pres, dres, relgap)
        if pres <= eps and dres <= eps and relgap <= eps:
            status = "solved"
            break
        history.append(pobj)
        if len(history) > 4 and abs(history[-4] - pobj) <= eps * (1.0 + abs(pobj)) and pres <= eps:
            # primal settled; the dual residual is stuck at its attainable floor
            status = _breakdown_status(pres, relgap)
            break

        try:
            scal = [_Scaling(x, s) for x, s in zip(X, S)]
            solver = make_schur(smap.schur_factor([sc.R for sc in scal]))
        except np.linalg.LinAlgError:
            status = _breakdown_status(pres, relgap)
            log.debug("ipm: lost positive definiteness at iteration %d", it)
            break
        mu = gap / n_cone

        WrW = [sc.W @ r @ sc.W for sc, r in zip(scal, rS)]

        def direction(Rc):
            rhs = smap.adjoint([rc - wr for rc, wr in zip(Rc, WrW)]) - rX
            dv = solver.solve(rhs)
            Ldv = smap.forward(dv)
            dS = [l + r for l, r in zip(Ldv, rS)]
            dX = [_herm(rc - sc.W @ ds @ sc.W) for rc, sc, ds in zip(Rc, scal, dS)]
            return dv, [_herm(d) for d in dS], dX

        def steps(dX, dS):
            ax = min(_max_step(sc.lam, sc.scale_x(d)) for sc, d in zip(scal, dX))
            as_ = min(_max_step(sc.lam, sc.scale_s(d)) for sc, d in zip(scal, dS))
            return ax, as_

        # predictor
        try:
            dv_a, dS_a, dX_a = direction([-x for x in X])
        except np.linalg.LinAlgError:
            status = _breakdown_status(pres, relgap)
            log.debug("ipm: Schur solve failed at iteration %d", it)
            break
        ax, as_ = steps(dX_a, dS_a)
        ax, as_ = min(1.0, ax), min(1.0, as_)
        gap_a = _inner([x + ax * d for x, d in zip(X, dX_a)], [s + as_ * d for s, d in zip(S, dS_a)])
        sigma = min(1.0, max(0.0, gap_a / gap)) ** 3 if gap > 0 else 0.0

        # corrector
        Rc = []
        for sc, dx, ds in zip(scal, dX_a, dS_a):
            lam = sc.lam
            xt = sc.scale_x(dx)
            st = sc.scale_s(ds)
            rhs = sigma * mu * np.eye(lam.size) - np.diag(lam**2) - _herm(xt @ st)
            D = 2.0 * rhs / (lam[:, None] + lam[None, :])
            Rc.append(sc.unscale_x(D))
        try:
            dv, dS, dX = direction(Rc)
        except np.linalg.LinAlgError:
            status = _breakdown_status(pres, relgap)
            log.debug("ipm: Schur solve failed at iteration %d", it)
            break
        ax, as_ = steps(dX, dS)
        gamma = 0.9 + 0.09 * min(min(ax, as_), 1.0)
        ax = min(1.0, gamma * ax)
        as_ = min(1.0, gamma * as_)
        X = [_herm(x + ax * d) for x, d in zip(X, dX)]
        S = [_herm(s + as_ * d) for s, d in zip(S, dS)]
        v = v + as_ * dv
        if max(ax, as_) < 1e-10:
            log.debug("ipm: step length collapsed at iteration %d", it)
            status = _breakdown_status(pres, relgap)
            break

    return IPMResult(v=v, X=X, iterations=it, primal_residual=pres, dual_residual=dres, gap=gap, status=status)
