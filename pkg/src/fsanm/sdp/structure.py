"""Real-linear lifting of the SDP variables onto its PSD blocks.

The decision vector ``v`` stacks

* ``theta``: the nonredundant half of the conjugate-symmetric tensor ``B``
  (``B(0)`` real, then real/imaginary parts of ``B(k)`` for the flat indices
  above the center; ``B(-k)`` is their conjugate),
* real and imaginary parts of the unobserved entries of ``x``,
* the scalar ``t``.

Block 0 is the bordered matrix ``[[T(B), x], [x^H, t]]``; the remaining
blocks are ``T_{g_i}(B)`` for every constrained axis.  Observed entries of
``x`` enter as a constant offset.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.signal import fftconvolve

from ..model import DimsSpec
from ..toeplitz import GCoefficients, HalfSpectrumTensor, _selection_matrix, difference_index

__all__ = ["StructureMap", "pair_correlation"]


def pair_correlation(W: np.ndarray, sizes: tuple[int, ...]) -> np.ndarray:
    """``C[k, l] = tr(E_k W E_l W)`` for all signed multi-indices ``k, l``.

    ``E_k`` is the 0/1 matrix with ones where the multi-level row/column
    difference equals ``k``.  Expanding the trace gives
    ``sum_{q,r} W[q, r] W[r - l, q + k]``, a cross-correlation over the
    doubled index grid, evaluated with one FFT convolution.  The result has
    shape ``(prod(2N_i-1), prod(2N_i-1))`` in tensor storage order.
    """
    d = len(sizes)
    A = W.reshape(sizes + sizes)
    Bt = W.T.reshape(sizes + sizes)
    C = fftconvolve(A[(slice(None, None, -1),) * (2 * d)], Bt, mode="full")
    C = C[(slice(None),) * d + (slice(None, None, -1),) * d]
    m = int(np.prod([2 * n - 1 for n in sizes]))
    return C.reshape(m, m)


class StructureMap:
    """Linear map ``v -> blocks`` and its adjoint for one SDP instance."""

    def __init__(self, dims: DimsSpec, gs: list[GCoefficients], free: np.ndarray, fixed: np.ndarray):
        self.dims = dims
        self.gs = list(gs)
        self.free = np.asarray(free, dtype=np.int64)
        self.fixed = np.asarray(fixed, dtype=complex)  # length N_D, zero on free entries
        self.n_tensor = int(np.prod(dims.tensor_shape))
        self.center = self.n_tensor // 2
        self.n_half = self.center  # number of complex pairs
        self.n_free = int(self.free.size)
        self.n_theta = self.n_tensor
        self.n_params = self.n_theta + 2 * self.n_free + 1
        nd = dims.n_total
        self.block_sizes = [nd + 1] + [dims.n_reduced] * len(self.gs)

    # parameter layout --------------------------------------------------------

    @property
    def sl_theta(self) -> slice:
        return slice(0, self.n_theta)

    @property
    def sl_xre(self) -> slice:
        return slice(self.n_theta, self.n_theta + self.n_free)

    @property
    def sl_xim(self) -> slice:
        return slice(self.n_theta + self.n_free, self.n_theta + 2 * self.n_free)

    @property
    def i_t(self) -> int:
        return self.n_params - 1

    @cached_property
    def objective(self) -> np.ndarray:
        """``c`` with ``c^T v = B(0)/2 + t/2`` (equal to ``Tr T(B)/(2 N_D) + t/2``)."""
        c = np.zeros(self.n_params)
        c[0] = 0.5
        c[self.i_t] = 0.5
        return c

    @cached_property
    def theta_matrix(self) -> sp.csr_matrix:
        """Sparse complex ``P`` with ``vec(B) = P theta``."""
        c, h = self.center, self.n_half
        up = c + 1 + np.arange(h)
        dn = c - 1 - np.arange(h)
        re_cols = 1 + 2 * np.arange(h)
        im_cols = 2 + 2 * np.arange(h)
        rows = np.concatenate([[c], up, dn, up, dn])
        cols = np.concatenate([[0], re_cols, re_cols, im_cols, im_cols])
        vals = np.concatenate([[1.0], np.ones(h), np.ones(h), 1j * np.ones(h), -1j * np.ones(h)])
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n_tensor, self.n_theta))

    def theta_to_tensor(self, theta: np.ndarray) -> np.ndarray:
        c, h = self.center, self.n_half
        out = np.empty(self.n_tensor, complex)
        out[c] = theta[0]
        z = theta[1::2][:h] + 1j * theta[2::2][:h]
        out[c + 1:] = z
        out[:c] = np.conj(z[::-1])
        return out

    def tensor_to_theta(self, g: np.ndarray) -> np.ndarray:
        """``Re(P^H g)``: adjoint of :meth:`theta_to_tensor` for real ``theta``."""
        c, h = self.center, self.n_half
        up = g[c + 1:]
        dn = g[:c][::-1]
        out = np.empty(self.n_theta)
        out[0] = g[c].real
        out[1::2] = (up + dn).real
        out[2::2] = (up - dn).imag
        return out

    def split(self, v: np.ndarray) -> tuple[HalfSpectrumTensor, np.ndarray, float]:
        """Decode ``v`` into ``(B, x, t)`` (x includes the observed entries)."""
        B = HalfSpectrumTensor(self.dims, self.theta_to_tensor(v[self.sl_theta]).reshape(self.dims.tensor_shape))
        x = self.fixed.copy()
        x[self.free] = v[self.sl_xre] + 1j * v[self.sl_xim]
        return B, x, float(v[self.i_t])

    def pack(self, B: HalfSpectrumTensor, x: np.ndarray, t: float) -> np.ndarray:
        v = np.zeros(self.n_params)
        flat = B.values.reshape(-1)
        v[0] = flat[self.center].real
        v[1:self.n_theta:2] = flat[self.center + 1:].real
        v[2:self.n_theta:2] = flat[self.center + 1:].imag
        v[self.sl_xre] = np.real(x[self.free])
        v[self.sl_xim] = np.imag(x[self.free])
        v[self.i_t] = t
        return v

    # forward / adjoint -------------------------------------------------------

    def offset(self) -> list[np.ndarray]:
        nd = self.dims.n_total
        b0 = np.zeros((nd + 1, nd + 1), complex)
        b0[:nd, nd] = self.fixed
        b0[nd, :nd] = np.conj(self.fixed)
        return [b0] + [np.zeros((self.dims.n_reduced,) * 2, complex) for _ in self.gs]

    def forward(self, v: np.ndarray, with_offset: bool = False) -> list[np.ndarray]:
        nd = self.dims.n_total
        sizes = self.dims.sizes
        flat = self.theta_to_tensor(v[self.sl_theta])
        b0 = np.zeros((nd + 1, nd + 1), complex)
        b0[:nd, :nd] = flat[difference_index(sizes)]
        xcol = self.fixed.copy() if with_offset else np.zeros(nd, complex)
        xcol[self.free] = v[self.sl_xre] + 1j * v[self.sl_xim]
        b0[:nd, nd] = xcol
        b0[nd, :nd] = np.conj(xcol)
        b0[nd, nd] = v[self.i_t]
        blocks = [b0]
        for g in self.gs:
            acc = None
            for k, rk in g.taps():
                term = rk * flat[difference_index(sizes, 1, g.axis, k)]
                acc = term if acc is None else acc + term
            blocks.append(acc)
        return blocks

    def adjoint(self, blocks: list[np.ndarray]) -> np.ndarray:
        """``L^*``: components ``Re tr(F_j^H G)`` summed over blocks."""
        nd = self.dims.n_total
        sizes = self.dims.sizes
        G0 = blocks[0]
        acc = _selection_matrix(sizes).T @ G0[:nd, :nd].reshape(-1)
        for g, Gi in zip(self.gs, blocks[1:]):
            for k, rk in g.taps():
                acc = acc + np.conj(rk) * (_selection_matrix(sizes, 1, g.axis, k).T @ Gi.reshape(-1))
        out = np.empty(self.n_params)
        out[self.sl_theta] = self.tensor_to_theta(acc)
        col = G0[self.free, nd]
        row = G0[nd, self.free]
        out[self.sl_xre] = (col + row).real
        out[self.sl_xim] = col.imag - row.imag
        out[self.i_t] = G0[nd, nd].real
        return out

    # normal-equation / Schur matrices ---------------------------------------

    def _theta_block(self, Wt: np.ndarray, sizes: tuple[int, ...], g: GCoefficients | None) -> np.ndarray:
        """``tr(E_k W E_l W)`` lifted to full-tensor indices for one block."""
        C = pair_correlation(Wt, sizes)
        if g is None:
            return C
        d = self.dims.d
        full = tuple(2 * n - 1 for n in self.dims.sizes)
        red = tuple(2 * n - 1 for n in sizes)
        C = C.reshape(red + red)
        out = np.zeros(full + full, complex)
        taps = g.taps()
        for s, rs in taps:
            for s2, rs2 in taps:
                idx = []
                for axis, m in enumerate(red):
                    start = 1 - s if axis == g.axis else 1
                    idx.append(slice(start, start + m))
                for axis, m in enumerate(red):
                    start = 1 - s2 if axis == g.axis else 1
                    idx.append(slice(start, start + m))
                out[tuple(idx)] += rs * rs2 * C
        n = int(np.prod(full))
        return out.reshape(n, n)

    def _groups(self, shrink: int, axis: int, shift: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Row/column positions grouped by tensor index: ``(rows, cols, starts)``."""
        key = (shrink, axis, shift)
        cache = self.__dict__.setdefault("_group_cache", {})
        if key not in cache:
            idx = difference_index(self.dims.sizes, shrink, axis, shift)
            n = idx.shape[0]
            flat = idx.reshape(-1)
            order = np.argsort(flat, kind="stable")
            starts = np.searchsorted(flat[order], np.arange(self.n_tensor + 1))
            cache[key] = (order // n, order % n, starts)
        return cache[key]

    def _scaled_coefficients(self, R: np.ndarray, taps, shrink: int, axis: int) -> np.ndarray:
        """``Y_k = R^H F_k R`` for every tensor index ``k`` (shape ``(n_tensor, n, n)``)."""
        n = R.shape[1]
        Y = np.zeros((self.n_tensor, n, n), complex)
        Rc = R.conj()
        for shift, rk in taps:
            rows, cols, starts = self._groups(shrink, axis, shift)
            for k in range(self.n_tensor):
                a, b = starts[k], starts[k + 1]
                if a == b:
                    continue
                Y[k] += rk * (Rc[rows[a:b]].T @ R[cols[a:b]])
        return Y

    @staticmethod
    def _hvec(Z: np.ndarray) -> np.ndarray:
        """Real isometric vectorization of a stack of Hermitian matrices."""
        n = Z.shape[-1]
        iu = np.triu_indices(n, 1)
        up = Z[:, iu[0], iu[1]] * np.sqrt(2.0)
        diag = np.einsum("kii->ki", Z).real
        return np.concatenate([diag, up.real, up.imag], axis=1)

    def _theta_rows(self, Y: np.ndarray) -> np.ndarray:
        c, h = self.center, self.n_half
        up = Y[c + 1:]
        dn = Y[:c][::-1]
        Z = np.empty((self.n_theta,) + Y.shape[1:], complex)
        Z[0] = Y[c]
        Z[1::2] = up + dn
        Z[2::2] = 1j * (up - dn)
        return self._hvec(Z)

    def schur_factor(self, Rs: list[np.ndarray]) -> np.ndarray:
        """``V`` with ``V V^T`` the matrix of ``v -> L^*(W L(v) W)``, ``W = R R^H``.

        Row ``j`` of ``V`` is the isometric real vectorization of
        ``R^H F_j R`` over all blocks, so ``V V^T`` keeps full relative
        accuracy when ``W`` is badly conditioned.
        """
        nd = self.dims.n_total
        R0 = Rs[0]
        parts = []
        Y = self._scaled_coefficients(R0[:nd], ((0, 1.0),), 0, -1)
        Vt = self._theta_rows(Y)
        del Y
        Rc = R0.conj()
        rn, rnc = R0[nd], Rc[nd]
        q = self.free
        a = Rc[q][:, :, None] * rn[None, None, :]
        b = rnc[None, :, None] * R0[q][:, None, :]
        Zx = np.concatenate([a + b, 1j * (a - b), (rnc[:, None] * rn[None, :])[None]], axis=0)
        parts.append(np.concatenate([Vt, self._hvec(Zx)], axis=0))
        for g, Rg in zip(self.gs, Rs[1:]):
            Vg = self._theta_rows(self._scaled_coefficients(Rg, g.taps(), 1, g.axis))
            pad = np.zeros((self.n_params - self.n_theta, Vg.shape[1]))
            parts.append(np.concatenate([Vg, pad], axis=0))
        return np.concatenate(parts, axis=1)

    def schur_factored(self, Rs: list[np.ndarray]) -> np.ndarray:
        V = self.schur_factor(Rs)
        return V @ V.T

    def schur(self, Ws: list[np.ndarray]) -> np.ndarray:
        """Matrix of ``v -> L^*(W L(v) W)`` for blockwise Hermitian ``W``.

        With every ``W`` the identity this is the normal matrix ``L^* L``.
        """
        nd = self.dims.n_total
        W0 = Ws[0]
        Cc = self._theta_block(np.ascontiguousarray(W0[:nd, :nd]), self.dims.sizes, None)
        for g, Wi in zip(self.gs, Ws[1:]):
            Cc = Cc + self._theta_block(Wi, self.dims.reduced_sizes, g)
        P = self.theta_matrix
        M = np.empty((self.n_params, self.n_params))
        M[:self.n_theta, :self.n_theta] = (P.T @ (P.T @ Cc.T).T).real

        # columns for x and t: W F_j W is a sum of two outer products
        free = self.free
        colN = W0[:, nd]
        rowN = W0[nd, :]
        Wc = W0[:, free]  # columns q
        Wr = W0[free, :]  # rows q
        G_re = Wc.T[:, :, None] * rowN[None, None, :] + colN[None, :, None] * Wr[:, None, :]
        G_im = 1j * (Wc.T[:, :, None] * rowN[None, None, :] - colN[None, :, None] * Wr[:, None, :])
        G_t = (colN[:, None] * rowN[None, :])[None]
        G = np.concatenate([G_re, G_im, G_t], axis=0)
        nxt = G.shape[0]
        S = _selection_matrix(self.dims.sizes)
        tt = S.T @ G[:, :nd, :nd].reshape(nxt, -1).T  # (n_tensor, nxt)
        cross = np.empty((self.n_theta, nxt))
        for j in range(nxt):
            cross[:, j] = self.tensor_to_theta(tt[:, j])
        M[:self.n_theta, self.n_theta:] = cross
        M[self.n_theta:, :self.n_theta] = cross.T
        col = G[:, free, nd]
        row = G[:, nd, free]
        xt = np.empty((nxt, nxt))
        xt[:, :self.n_free] = (col + row).real
        xt[:, self.n_free:2 * self.n_free] = col.imag - row.imag
        xt[:, -1] = G[:, nd, nd].real
        M[self.n_theta:, self.n_theta:] = xt.T
        return 0.5 * (M + M.T)
