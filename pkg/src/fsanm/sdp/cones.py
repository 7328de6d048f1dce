"""Hermitian PSD cone helpers."""

from __future__ import annotations

import numpy as np

__all__ = ["real_embedding", "real_unembedding", "psd_projection", "psd_projection_real", "min_max_eig"]


def real_embedding(H, tol: float = 1e-10) -> np.ndarray:
    """``[[Re H, -Im H], [Im H, Re H]]``, PSD exactly when ``H`` is.

    Raises ``ValueError`` when ``H`` is not Hermitian to ``tol`` (relative
    to its largest entry).
    """
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("square matrix required")
    scale = max(1.0, float(np.max(np.abs(H), initial=0.0)))
    if np.max(np.abs(H - H.conj().T), initial=0.0) > tol * scale:
        raise ValueError("matrix is not Hermitian")
    re, im = H.real, H.imag
    return np.block([[re, -im], [im, re]])


def real_unembedding(E) -> np.ndarray:
    """Inverse of :func:`real_embedding` (averages the redundant copies)."""
    E = np.asarray(E, dtype=float)
    n = E.shape[0] // 2
    re = 0.5 * (E[:n, :n] + E[n:, n:])
    im = 0.5 * (E[n:, :n] - E[:n, n:])
    return re + 1j * im


def psd_projection(H) -> np.ndarray:
    """Frobenius-nearest PSD matrix: clip negative eigenvalues to zero."""
    H = np.asarray(H)
    H = 0.5 * (H + H.conj().T)
    w, V = np.linalg.eigh(H)
    keep = w > 0
    Vk = V[:, keep]
    return (Vk * w[keep]) @ Vk.conj().T


def psd_projection_real(H) -> np.ndarray:
    """Same projection computed in real arithmetic on the embedding."""
    return real_unembedding(psd_projection(real_embedding(H, tol=np.inf)))


def min_max_eig(H) -> tuple[float, float]:
    H = np.asarray(H)
    if H.size == 0:
        return 0.0, 0.0
    w = np.linalg.eigvalsh(0.5 * (H + H.conj().T))
    return float(w[0]), float(w[-1])
