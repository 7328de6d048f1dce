"""Operator-splitting (ADMM) solver over copies of the PSD blocks.

The program ``min c^T v  s.t.  F0 + L(v) = Z, Z >= 0`` is split into

1. a least-squares step in ``v``: ``(L^* L) v = L^*(Z - U - F0) - c / rho``;
   ``L^* L`` is fixed, so it is factored once,
2. a projection of every block copy onto the PSD cone (eigenvalue clipping),
3. a scaled dual update,

with over-relaxation and residual-balancing penalty adaptation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .cones import psd_projection
from .structure import StructureMap

log = logging.getLogger(__name__)


@dataclass
class ADMMResult:
    v: np.ndarray
    iterations: int
    primal_residual: float
    dual_residual: float
    status: str
    rho: float


def _norm(blocks: list[np.ndarray]) -> float:
    return float(np.sqrt(sum(np.vdot(b, b).real for b in blocks)))


def solve_admm(smap: StructureMap, opts) -> ADMMResult:
    c = smap.objective
    F0 = smap.offset()
    sizes = smap.block_sizes
    gram = sla.cho_factor(smap.schur([np.eye(n) for n in sizes]), check_finite=False)
    n_entries = float(sum(n * n for n in sizes))
    rho = float(opts.rho)
    alpha = float(opts.relaxation)

    Z = [np.zeros((n, n), complex) for n in sizes]
    U = [np.zeros((n, n), complex) for n in sizes]
    v = np.zeros(smap.n_params)
    pres = dres = np.inf
    status = "max_iter"
    it = 0
    for it in range(1, opts.max_iter + 1):
        rhs = smap.adjoint([z - u - f for z, u, f in zip(Z, U, F0)]) - c / rho
        v = sla.cho_solve(gram, rhs, check_finite=False)
        A = [f + l for f, l in zip(F0, smap.forward(v))]
        Ah = [alpha * a + (1.0 - alpha) * z for a, z in zip(A, Z)]
        Z_old = Z
        Z = [psd_projection(a + u) for a, u in zip(Ah, U)]
        U = [u + a - z for u, a, z in zip(U, Ah, Z)]

        r = _norm([a - z for a, z in zip(A, Z)])
        s = rho * float(np.linalg.norm(smap.adjoint([z - zo for z, zo in zip(Z, Z_old)])))
        eps_p = opts.eps_abs * np.sqrt(n_entries) + opts.eps_rel * max(_norm(A), _norm(Z))
        eps_d = opts.eps_abs * np.sqrt(smap.n_params) + opts.eps_rel * rho * float(np.linalg.norm(smap.adjoint(U)))
        pres, dres = r, s
        if it % 200 == 0:
            log.debug("admm it=%d obj=%.10g r=%.2e s=%.2e rho=%.3g", it, c @ v, r, s, rho)
        if r <= eps_p and s <= eps_d:
            status = "solved"
            break
        if opts.adaptive_rho and it % 10 == 0:
            if r > 10.0 * s:
                rho *= 2.0
                U = [u / 2.0 for u in U]
            elif s > 10.0 * r:
                rho /= 2.0
                U = [u * 2.0 for u in U]
    return ADMMResult(v=v, iterations=it, primal_residual=pres, dual_residual=dres, status=status, rho=rho)
