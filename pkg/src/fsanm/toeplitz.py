"""Multi-level block Toeplitz matrices parametrized by a coefficient tensor.

The tensor ``B`` has shape ``(2N_1-1, ..., 2N_d-1)`` and is addressed by a
signed multi-index ``k`` with ``k_i`` in ``[-(N_i-1), N_i-1]``; storage index
is ``k_i + N_i - 1`` (row-major, dimension 1 outermost).  Entry ``(m, n)`` of
``T(B)`` is ``B(m - n)`` at every level.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .model import DimsSpec, SpectralModel

__all__ = [
    "HalfSpectrumTensor",
    "GCoefficients",
    "atom_tensor",
    "model_tensor",
    "build_level_toeplitz",
    "adjoint_level_toeplitz",
    "build_tg",
    "adjoint_tg",
    "numerical_rank",
    "hermitian_part",
]

MAGIC = b"FSB1"


@dataclass(frozen=True)
class GCoefficients:
    """Coefficients of ``g(f) = r0 + 2 Re(r1 exp(-i 2 pi f))`` for one axis.

    ``axis`` is the 0-based dimension the polynomial acts on.  The third
    coefficient is ``conj(r1)`` because ``g`` is real.
    """

    r0: float
    r1: complex
    axis: int

    @property
    def r_minus1(self) -> complex:
        return complex(np.conj(self.r1))

    def taps(self) -> tuple[tuple[int, complex], ...]:
        """``(k, r_k)`` for ``k = -1, 0, 1``."""
        return ((-1, self.r_minus1), (0, complex(self.r0)), (1, complex(self.r1)))


@dataclass(frozen=True, eq=False)
class HalfSpectrumTensor:
    """Coefficient tensor ``B`` of a level-Toeplitz matrix."""

    dims: DimsSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != self.dims.tensor_shape:
            if v.size == int(np.prod(self.dims.tensor_shape)) and v.ndim == 1:
                v = v.reshape(self.dims.tensor_shape)
            else:
                raise ValueError(f"tensor shape {v.shape} does not match {self.dims.tensor_shape}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, dims: DimsSpec) -> "HalfSpectrumTensor":
        return cls(dims, np.zeros(dims.tensor_shape, complex))

    def __getitem__(self, k) -> complex:
        k = (k,) if np.isscalar(k) else tuple(k)
        if len(k) != self.dims.d:
            raise IndexError("signed multi-index has wrong length")
        idx = tuple(int(ki) + n - 1 for ki, n in zip(k, self.dims.sizes))
        for i, n in zip(idx, self.dims.sizes):
            if not 0 <= i <= 2 * n - 2:
                raise IndexError(f"signed index {k} out of range")
        return complex(self.values[idx])

    @property
    def center(self) -> complex:
        return complex(self.values.reshape(-1)[self.values.size // 2])

    def conjugate_mirror(self) -> np.ndarray:
        """``conj(B(-k))`` laid out like ``values``."""
        return np.conj(self.values.reshape(-1)[::-1]).reshape(self.values.shape)

    def symmetry_error(self) -> float:
        return float(np.max(np.abs(self.values - self.conjugate_mirror()), initial=0.0))

    def is_conjugate_symmetric(self, tol: float = 1e-12) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.values), initial=0.0)))
        return self.symmetry_error() <= tol * scale

    def symmetrized(self) -> "HalfSpectrumTensor":
        return HalfSpectrumTensor(self.dims, 0.5 * (self.values + self.conjugate_mirror()))

    def __add__(self, other: "HalfSpectrumTensor") -> "HalfSpectrumTensor":
        if other.dims != self.dims:
            raise ValueError("dims mismatch")
        return HalfSpectrumTensor(self.dims, self.values + other.values)

    def __sub__(self, other: "HalfSpectrumTensor") -> "HalfSpectrumTensor":
        if other.dims != self.dims:
            raise ValueError("dims mismatch")
        return HalfSpectrumTensor(self.dims, self.values - other.values)

    def scaled(self, alpha: complex) -> "HalfSpectrumTensor":
        return HalfSpectrumTensor(self.dims, alpha * self.values)

    # serialization ---------------------------------------------------------

    def to_json(self) -> dict:
        flat = self.values.reshape(-1)
        return {
            "sizes": list(self.dims.sizes),
            "shape": list(self.values.shape),
            "values": [[float(z.real), float(z.imag)] for z in flat],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "HalfSpectrumTensor":
        dims = DimsSpec(tuple(obj["sizes"]))
        pairs = np.asarray(obj["values"], dtype=float).reshape(-1, 2)
        values = (pairs[:, 0] + 1j * pairs[:, 1]).reshape(dims.tensor_shape)
        return cls(dims, values)

    def to_bytes(self) -> bytes:
        header = MAGIC + struct.pack("<I", self.dims.d) + struct.pack(f"<{self.dims.d}I", *self.dims.sizes)
        body = self.values.reshape(-1).astype("<c16").view("<f8").tobytes()
        return header + body

    @classmethod
    def from_bytes(cls, data: bytes) -> "HalfSpectrumTensor":
        if data[:4] != MAGIC:
            raise ValueError("not an FSB1 tensor dump")
        (d,) = struct.unpack_from("<I", data, 4)
        sizes = struct.unpack_from(f"<{d}I", data, 8)
        dims = DimsSpec(tuple(sizes))
        offset = 8 + 4 * d
        count = int(np.prod(dims.tensor_shape))
        raw = np.frombuffer(data, dtype="<f8", count=2 * count, offset=offset)
        if raw.size != 2 * count:
            raise ValueError("truncated FSB1 payload")
        values = (raw[0::2] + 1j * raw[1::2]).reshape(dims.tensor_shape)
        return cls(dims, values)


# index tables -------------------------------------------------------------


@lru_cache(maxsize=64)
def difference_index(sizes: tuple[int, ...], shrink: int = 0, axis: int = -1, shift: int = 0) -> np.ndarray:
    """Flat tensor index of ``m - n - shift * e_axis`` for every matrix entry.

    Rows and columns run over the grid with ``N_i - shrink`` points per
    dimension; the tensor is the full ``(2N_i - 1)`` one.  ``axis=-1``
    disables the shift.
    """
    grids = np.meshgrid(*[np.arange(n - shrink) for n in sizes], indexing="ij")
    flat = 0
    for j, (g, n) in enumerate(zip(grids, sizes)):
        g = g.reshape(-1)
        diff = g[:, None] - g[None, :] + (n - 1) - (shift if j == axis else 0)
        flat = flat * (2 * n - 1) + diff
    flat = np.ascontiguousarray(flat, dtype=np.int64)
    flat.setflags(write=False)
    return flat


@lru_cache(maxsize=64)
def _selection_matrix(sizes: tuple[int, ...], shrink: int = 0, axis: int = -1, shift: int = 0) -> sp.csr_matrix:
    """Sparse 0/1 matrix mapping ``vec(B)`` to ``vec`` of the structured matrix."""
    idx = difference_index(sizes, shrink, axis, shift).reshape(-1)
    n_tensor = int(np.prod([2 * n - 1 for n in sizes]))
    return sp.csr_matrix((np.ones(idx.size), (np.arange(idx.size), idx)), shape=(idx.size, n_tensor))


def _scatter(values: np.ndarray, idx: np.ndarray, size: int) -> np.ndarray:
    v = values.reshape(-1)
    i = idx.reshape(-1)
    return np.bincount(i, weights=v.real, minlength=size) + 1j * np.bincount(i, weights=v.imag, minlength=size)


# structure maps -----------------------------------------------------------


def atom_tensor(f, dims: DimsSpec) -> HalfSpectrumTensor:
    """``B_f(k) = prod_i exp(i 2 pi k_i f_i)``, so that ``T(B_f) = a(f) a(f)^H``."""
    f = np.asarray(f, float).reshape(-1)
    if f.size != dims.d:
        raise ValueError("frequency dimension mismatch")
    vals = np.ones((), complex)
    for fi, n in zip(f, dims.sizes):
        k = np.arange(-(n - 1), n)
        vals = np.multiply.outer(vals, np.exp(2j * np.pi * k * fi))
    return HalfSpectrumTensor(dims, vals)


def model_tensor(model: SpectralModel, dims: DimsSpec, use_magnitudes: bool = False) -> HalfSpectrumTensor:
    """``sum_l sigma_l B_{f_l}`` (or ``|sigma_l|`` weights)."""
    vals = np.zeros(dims.tensor_shape, complex)
    weights = np.abs(model.gains) if use_magnitudes else model.gains
    for f, s in zip(model.frequencies, weights):
        vals += s * atom_tensor(f, dims).values
    return HalfSpectrumTensor(dims, vals)


def build_level_toeplitz(B: HalfSpectrumTensor) -> np.ndarray:
    """Materialize ``T(B)`` (N_D x N_D)."""
    idx = difference_index(B.dims.sizes)
    return B.values.reshape(-1)[idx]


def adjoint_level_toeplitz(M, dims: DimsSpec) -> HalfSpectrumTensor:
    """Adjoint of :func:`build_level_toeplitz` under ``<X, Y> = sum conj(X) Y``.

    Entry ``k`` is the sum of ``M`` over all positions with difference ``k``.
    """
    M = np.asarray(M, dtype=complex)
    n = dims.n_total
    if M.shape != (n, n):
        raise ValueError(f"expected a {n}x{n} matrix, got {M.shape}")
    idx = difference_index(dims.sizes)
    size = int(np.prod(dims.tensor_shape))
    return HalfSpectrumTensor(dims, _scatter(M, idx, size).reshape(dims.tensor_shape))


def _check_g(g: GCoefficients, dims: DimsSpec) -> None:
    if not 0 <= g.axis < dims.d:
        raise ValueError(f"axis {g.axis} invalid for d={dims.d}")


def build_tg(B: HalfSpectrumTensor, g: GCoefficients) -> np.ndarray:
    """Band-constraint matrix ``T_g`` of side N_{D-1}.

    Entry ``(m, n)`` is ``sum_{k=-1..1} r_k B(m - n - k e_axis)`` with rows and
    columns on the grid of ``N_j - 1`` points per dimension.
    """
    _check_g(g, B.dims)
    flat = B.values.reshape(-1)
    out = None
    for k, rk in g.taps():
        term = rk * flat[difference_index(B.dims.sizes, 1, g.axis, k)]
        out = term if out is None else out + term
    return out


def adjoint_tg(M, g: GCoefficients, dims: DimsSpec) -> HalfSpectrumTensor:
    """Adjoint of :func:`build_tg` (same inner product as the level map)."""
    _check_g(g, dims)
    M = np.asarray(M, dtype=complex)
    n = dims.n_reduced
    if M.shape != (n, n):
        raise ValueError(f"expected a {n}x{n} matrix, got {M.shape}")
    size = int(np.prod(dims.tensor_shape))
    out = np.zeros(size, complex)
    for k, rk in g.taps():
        out += np.conj(rk) * _scatter(M, difference_index(dims.sizes, 1, g.axis, k), size)
    return HalfSpectrumTensor(dims, out.reshape(dims.tensor_shape))


def hermitian_part(M) -> np.ndarray:
    M = np.asarray(M)
    return 0.5 * (M + M.conj().T)


def numerical_rank(M, rel_tol: float = 1e-6) -> int:
    """Number of eigenvalues above ``rel_tol * max(lambda_max, 0)``."""
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("numerical_rank needs a square matrix")
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    if M.size == 0:
        return 0
    w = np.linalg.eigvalsh(hermitian_part(M))
    top = max(float(w[-1]), 0.0)
    if top == 0.0:
        return 0
    return int(np.count_nonzero(w > rel_tol * top))
