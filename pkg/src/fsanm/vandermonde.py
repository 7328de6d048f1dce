"""Vandermonde decomposition of level-Toeplitz matrices and band certificates.

A PSD level-Toeplitz ``T`` of rank ``r < min N_i`` factors uniquely as
``A diag(sigma) A^H`` with positive ``sigma``.  Its frequencies lie inside the
bands exactly when every band-constraint matrix ``T_{g_i}`` is PSD as well;
the checkers below report both conditions numerically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bands import BandSystem, g_eval
from .model import DimsSpec, SpectralModel, steering_matrix
from .music import MusicOptions, music_frequencies
from .toeplitz import (
    GCoefficients,
    HalfSpectrumTensor,
    build_level_toeplitz,
    build_tg,
    hermitian_part,
    numerical_rank,
)

__all__ = [
    "Decomposition",
    "DecompositionError",
    "RankConditionError",
    "CertificateReport",
    "MultibandReport",
    "vandermonde_decompose",
    "verify_fs_certificate",
    "verify_multiband_certificate",
    "tg_factorization",
    "diagonal_sandwich",
]


class DecompositionError(ValueError):
    """The decomposition could not be computed or certified."""


class RankConditionError(DecompositionError):
    """``rank(T) >= min N_i``: uniqueness is not guaranteed, nothing is guessed."""


@dataclass(frozen=True, eq=False)
class Decomposition:
    """``T = sum sigma_l a(f_l) a(f_l)^H`` with ``sigma_l > 0``."""

    model: SpectralModel
    residual: float  # ||T - A diag(sigma) A^H||_F

    @property
    def frequencies(self) -> np.ndarray:
        return self.model.frequencies

    @property
    def sigma(self) -> np.ndarray:
        return self.model.gains.real

    @property
    def order(self) -> int:
        return self.model.order


def _eigs(M) -> np.ndarray:
    return np.linalg.eigvalsh(hermitian_part(M))


def vandermonde_decompose(T, dims: DimsSpec, rank_tol: float = 1e-6, recon_tol: float = 1e-6,
                          psd_tol: float = 1e-8, options: MusicOptions | None = None) -> Decomposition:
    """Subspace-based decomposition of a PSD level-Toeplitz matrix.

    The rank is the numerical rank at ``rank_tol``; frequencies come from
    MUSIC over the full torus; ``sigma`` solves the least-squares fit of
    ``T`` on the atom outer products.  The result is certified by
    ``||T - A diag(sigma) A^H||_F <= recon_tol * ||T||_F``.
    """
    T = np.asarray(T, dtype=complex)
    n = dims.n_total
    if T.shape != (n, n):
        raise ValueError(f"expected a {n}x{n} matrix, got {T.shape}")
    normT = float(np.linalg.norm(T))
    if normT == 0.0:
        return Decomposition(SpectralModel.create(np.zeros((0, dims.d)), []), 0.0)
    w = _eigs(T)
    if w[0] < -psd_tol * max(w[-1], 0.0):
        raise DecompositionError(f"matrix is not PSD (lambda_min = {w[0]:.3g})")
    r = numerical_rank(T, rank_tol)
    if r >= dims.min_size:
        raise RankConditionError(f"rank {r} is not below min N_i = {dims.min_size}")
    est = music_frequencies(T, dims, None, r=r, options=options)
    if est.degraded:
        raise DecompositionError("MUSIC returned fewer peaks than the rank")
    A = steering_matrix(est.frequencies, dims)
    G = np.abs(A.conj().T @ A) ** 2
    rhs = np.real(np.einsum("il,ij,jl->l", A.conj(), T, A))
    sigma = np.linalg.solve(G, rhs)
    if np.any(sigma <= 0):
        raise DecompositionError(f"nonpositive weight in decomposition: {sigma}")
    resid = float(np.linalg.norm(T - (A * sigma) @ A.conj().T))
    if resid > recon_tol * normT:
        raise DecompositionError(f"reconstruction residual {resid:.3g} exceeds {recon_tol:.1g} * ||T||_F")
    return Decomposition(SpectralModel.create(est.frequencies, sigma.astype(complex)), resid)


@dataclass
class CertificateReport:
    """Eigenvalue diagnostics of ``T(B)`` and every ``T_{g_i}(B)``."""

    lambda_min_T: float
    lambda_max_T: float
    g_axes: list[int] = field(default_factory=list)
    lambda_min_g: list[float] = field(default_factory=list)
    lambda_max_g: list[float] = field(default_factory=list)
    pass_T: bool = True
    pass_g: list[bool] = field(default_factory=list)
    rank: int = 0
    rank_condition: bool = True

    @property
    def passed(self) -> bool:
        return self.pass_T and all(self.pass_g)

    def failing_axes(self) -> list[int]:
        return [a for a, ok in zip(self.g_axes, self.pass_g) if not ok]

    def to_json(self) -> dict:
        out = dict(self.__dict__)
        out["passed"] = self.passed
        return out


def _psd_ok(lo: float, hi: float, tol: float) -> bool:
    return lo >= -tol * max(hi, 1.0)


def verify_fs_certificate(B: HalfSpectrumTensor, bands: BandSystem, psd_tol: float = 1e-8,
                          rank_tol: float = 1e-6) -> CertificateReport:
    """Check ``T(B) >= 0`` and ``T_{g_i}(B) >= 0`` for every constrained axis.

    A check passes when ``lambda_min >= -psd_tol * max(lambda_max, 1)``.
    Failures are reported, never raised.
    """
    if bands.d != B.dims.d:
        raise ValueError("band system dimension does not match B")
    if not bands.is_single:
        raise ValueError("use verify_multiband_certificate for several bands per dimension")
    T = build_level_toeplitz(B)
    w = _eigs(T)
    rep = CertificateReport(lambda_min_T=float(w[0]), lambda_max_T=float(w[-1]))
    rep.pass_T = _psd_ok(rep.lambda_min_T, rep.lambda_max_T, psd_tol)
    rep.rank = numerical_rank(T, rank_tol)
    rep.rank_condition = rep.rank < B.dims.min_size
    for g in bands.g_coefficients(0):
        wg = _eigs(build_tg(B, g))
        rep.g_axes.append(g.axis)
        rep.lambda_min_g.append(float(wg[0]))
        rep.lambda_max_g.append(float(wg[-1]))
        rep.pass_g.append(_psd_ok(float(wg[0]), float(wg[-1]), psd_tol))
    return rep


@dataclass
class MultibandReport:
    sum_error: float
    sum_ok: bool
    parts: list[CertificateReport]
    rank_sum: int
    rank_total: int

    @property
    def rank_sum_matches(self) -> bool:
        """Rank additivity across bands; reported only, never enforced."""
        return self.rank_sum == self.rank_total

    @property
    def passed(self) -> bool:
        return self.sum_ok and all(p.passed for p in self.parts)

    def to_json(self) -> dict:
        return {
            "sum_error": self.sum_error,
            "sum_ok": self.sum_ok,
            "parts": [p.to_json() for p in self.parts],
            "rank_sum": self.rank_sum,
            "rank_total": self.rank_total,
            "rank_sum_matches": self.rank_sum_matches,
            "passed": self.passed,
        }


def verify_multiband_certificate(parts: list[HalfSpectrumTensor], B: HalfSpectrumTensor, bands: BandSystem,
                                 psd_tol: float = 1e-8, rank_tol: float = 1e-6,
                                 sum_tol: float = 1e-10) -> MultibandReport:
    """Certificate for ``J`` band sets: ``sum_j B_j = B`` plus one FS check per part.

    Part ``j`` is checked against band ``j`` of every dimension (a dimension
    with a single band uses it for all parts).
    """
    if len(parts) != bands.n_bands:
        raise ValueError(f"{len(parts)} parts for {bands.n_bands} band sets")
    for P in parts:
        if P.dims != B.dims or P.values.shape != B.values.shape:
            raise ValueError("part shape does not match B")
    total = sum((P.values for P in parts), np.zeros_like(B.values))
    err = float(np.max(np.abs(total - B.values), initial=0.0))
    scale = max(1.0, float(np.max(np.abs(B.values), initial=0.0)))
    reports = [verify_fs_certificate(P, bands.select(j), psd_tol, rank_tol) for j, P in enumerate(parts)]
    rank_total = numerical_rank(build_level_toeplitz(B), rank_tol)
    return MultibandReport(err, err <= sum_tol * scale, reports, sum(r.rank for r in reports), rank_total)


def tg_factorization(model: SpectralModel, dims: DimsSpec, g: GCoefficients) -> np.ndarray:
    """``A_bar diag(sigma_l g(f_{axis,l})) A_bar^H`` on the reduced grid.

    Equals ``T_g`` of the model tensor; used as an identity check.
    """
    Ab = steering_matrix(model.frequencies, dims, reduced=True)
    weights = model.gains * g_eval(model.frequencies[:, g.axis], g)
    return (Ab * weights) @ Ab.conj().T


def diagonal_sandwich(Tg, model: SpectralModel, dims: DimsSpec) -> np.ndarray:
    """``pinv(A_bar) T_g pinv(A_bar)^H``; diagonal with ``sigma_l g(f_l)`` entries."""
    Ab = steering_matrix(model.frequencies, dims, reduced=True)
    Ap = np.linalg.pinv(Ab)
    return Ap @ np.asarray(Tg) @ Ap.conj().T
