"""MD-MUSIC frequency retrieval and least-squares gain recovery."""

from __future__ import annotations

import csv
import itertools
import json
import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.ndimage import maximum_filter
from scipy.optimize import minimize

from .bands import BandSystem, FrequencyBand, band_contains
from .model import DimsSpec, SpectralModel, steering_matrix
from .toeplitz import hermitian_part

log = logging.getLogger(__name__)

__all__ = [
    "MusicOptions",
    "Pseudospectrum",
    "RetrievalResult",
    "IllConditionedWarning",
    "MusicError",
    "model_order",
    "noise_subspace",
    "noise_residual",
    "pseudospectrum",
    "music_frequencies",
    "estimate_gains",
    "retrieve",
]


class MusicError(ValueError):
    """Raised when MUSIC cannot run (no noise subspace)."""


class IllConditionedWarning(UserWarning):
    pass


@dataclass(frozen=True)
class MusicOptions:
    """Grid and refinement settings.

    The coarse grid step on axis ``i`` is ``1 / (step_factor * N_i)``; each
    refinement round shrinks the local grid by ``zoom``.  ``polish`` runs a
    final derivative-free minimization of the noise residual, which takes the
    estimate from the ~1e-6 grid resolution down to round-off.  Besides the
    ``r`` strongest coarse peaks, ``max(r, extra_candidates)`` more are
    refined; the ``r`` with the smallest refined residual are returned.  When
    the worst kept residual exceeds ``retry_tol * prod(N_i)`` the search is
    repeated once on a grid ``retry_factor`` times finer and the better of the
    two answers is kept.
    """

    r: int | None = None
    rank_tol: float = 1e-6
    step_factor: int = 16
    refine_rounds: int = 4
    zoom: int = 10
    polish: bool = True
    extra_candidates: int = 4
    retry_factor: int = 4
    retry_tol: float = 1e-6

    def to_json(self) -> dict:
        return dict(self.__dict__)


def model_order(eigenvalues, rel_tol: float = 1e-6) -> int:
    """Number of eigenvalues above ``rel_tol`` times the largest one."""
    w = np.asarray(eigenvalues, float).reshape(-1)
    if w.size == 0 or w[0] <= 0:
        return 0
    return int(np.count_nonzero(w > rel_tol * w[0]))


def _eig_desc(T) -> tuple[np.ndarray, np.ndarray]:
    w, V = np.linalg.eigh(hermitian_part(np.asarray(T, dtype=complex)))
    return w[::-1], V[:, ::-1]


def noise_subspace(T, r: int) -> np.ndarray:
    _, V = _eig_desc(T)
    return V[:, r:]


def _axis_vectors(f: np.ndarray, n: int) -> np.ndarray:
    """``(n, len(f))`` matrix of ``exp(i 2 pi k f)``."""
    return np.exp(2j * np.pi * np.outer(np.arange(n), np.asarray(f, float)))


def noise_residual_grid(En: np.ndarray, grids: Sequence[np.ndarray], dims: DimsSpec) -> np.ndarray:
    """``||E_n^H a(f)||^2`` on the tensor grid ``grids[0] x ... x grids[d-1]``."""
    K = En.shape[1]
    Z = En.conj().reshape(tuple(dims.sizes) + (K,))
    # contract one axis at a time; the contracted axis moves to the end
    for g, n in zip(grids, dims.sizes):
        Z = np.tensordot(Z, _axis_vectors(g, n), axes=([0], [0]))
    # Z now has shape (K, G_1, ..., G_d)
    return np.sum(np.abs(Z) ** 2, axis=0)


def noise_residual(En: np.ndarray, f, dims: DimsSpec) -> float:
    a = steering_matrix(np.atleast_2d(f), dims)[:, 0]
    return float(np.sum(np.abs(En.conj().T @ a) ** 2))


@dataclass(frozen=True, eq=False)
class Pseudospectrum:
    """``P(f) = 1 / ||E_n^H a(f)||^2`` on one band-restricted grid."""

    grids: tuple[np.ndarray, ...]
    periodic: tuple[bool, ...]
    steps: tuple[float, ...]
    values: np.ndarray
    r_hat: int

    def local_maxima(self) -> list[tuple[float, tuple[float, ...]]]:
        """Grid points not exceeded by any neighbour (8-neighbourhood in 2D).

        Wrap-around neighbours are used only on periodic (full-circle) axes.
        """
        P = self.values
        if P.size == 0:
            return []
        modes = ["wrap" if p else "constant" for p in self.periodic]
        mx = maximum_filter(P, size=3, mode=modes, cval=-np.inf)
        idx = np.argwhere(P >= mx)
        out = []
        for ix in idx:
            f = tuple(float(self.grids[a][i]) for a, i in enumerate(ix))
            out.append((float(P[tuple(ix)]), f))
        return out

    def rows(self):
        mesh = np.meshgrid(*self.grids, indexing="ij")
        for pos in np.ndindex(self.values.shape):
            yield tuple(float(m[pos]) for m in mesh) + (float(self.values[pos]),)

    def to_csv(self, path) -> None:
        d = len(self.grids)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"f_{i + 1}" for i in range(d)] + ["P"])
            for row in self.rows():
                w.writerow([repr(v) for v in row])


def _band_grid(band: FrequencyBand, step: float) -> tuple[np.ndarray, bool]:
    return band.grid(step)


def pseudospectrum(T, dims: DimsSpec, bands: BandSystem | None = None, r: int | None = None,
                   options: MusicOptions | None = None, combo: Sequence[int] | None = None) -> Pseudospectrum:
    """Pseudospectrum over one band per dimension (``combo`` picks the band index per axis)."""
    opts = options or MusicOptions()
    bands = bands or BandSystem.unconstrained(dims.d)
    combo = combo or (0,) * dims.d
    w, V = _eig_desc(T)
    r_hat = model_order(w, opts.rank_tol) if r is None else int(r)
    if r_hat >= dims.n_total:
        raise MusicError("signal subspace fills the space; no noise subspace")
    En = V[:, r_hat:]
    steps = tuple(1.0 / (opts.step_factor * n) for n in dims.sizes)
    grids, periodic = [], []
    for axis, j in enumerate(combo):
        g, p = _band_grid(bands.bands[axis][j], steps[axis])
        grids.append(g)
        periodic.append(p)
    res = noise_residual_grid(En, grids, dims)
    P = 1.0 / np.maximum(res, np.finfo(float).tiny)
    return Pseudospectrum(tuple(grids), tuple(periodic), steps, P, r_hat)


def _in_bands(f: np.ndarray, bands: Sequence[FrequencyBand]) -> bool:
    return all(bool(band_contains(b, fi)) for b, fi in zip(bands, f))


def _refine(En: np.ndarray, f0: np.ndarray, dims: DimsSpec, bands: Sequence[FrequencyBand],
            steps: Sequence[float], opts: MusicOptions) -> tuple[np.ndarray, float]:
    f = np.array(f0, float)
    half = opts.zoom
    step = np.array(steps, float)
    for _ in range(opts.refine_rounds):
        step = step / opts.zoom
        axes = []
        for i in range(dims.d):
            pts = np.mod(f[i] + step[i] * np.arange(-half, half + 1), 1.0)
            pts = pts[band_contains(bands[i], pts)] if not bands[i].is_full else pts
            if pts.size == 0:
                pts = np.array([f[i]])
            axes.append(pts)
        res = noise_residual_grid(En, axes, dims)
        ix = np.unravel_index(int(np.argmin(res)), res.shape)
        f = np.array([axes[i][ix[i]] for i in range(dims.d)])
    best = noise_residual(En, f, dims)
    if opts.polish:
        def obj(z):
            z = np.mod(z, 1.0)
            if not _in_bands(z, bands):
                return best + 1.0
            return noise_residual(En, z, dims)

        sol = minimize(obj, f, method="Nelder-Mead",
                       options={"xatol": 1e-13, "fatol": 1e-18, "maxiter": 400 * dims.d,
                                "initial_simplex": np.vstack([f] + [f + step[i] * np.eye(dims.d)[i] for i in range(dims.d)])})
        z = np.mod(sol.x, 1.0)
        val = noise_residual(En, z, dims)
        if _in_bands(z, bands) and val <= best:
            f, best = z, val
    return np.mod(f, 1.0), best


@dataclass(frozen=True, eq=False)
class FrequencyEstimate:
    frequencies: np.ndarray  # (r_hat, d)
    residuals: np.ndarray  # noise residual at each estimate
    r_hat: int
    degraded: bool


def music_frequencies(T, dims: DimsSpec, bands: BandSystem | None = None, r: int | None = None,
                      options: MusicOptions | None = None) -> FrequencyEstimate:
    """Estimate ``r`` (or the numerical rank of ``T``) frequency tuples.

    The coarse search covers every combination of per-dimension bands.  Local
    maxima are refined in order of decreasing ``P`` (ties go to the
    lexicographically smaller tuple) and the ``r`` refined points with the
    smallest noise residual are returned in that order.  A poor fit triggers
    one retry on a finer grid (see ``MusicOptions``).
    """
    opts = options or MusicOptions()
    r = opts.r if r is None else r
    T = np.asarray(T, dtype=complex)
    if T.shape != (dims.n_total, dims.n_total):
        raise ValueError("T does not match dims")
    bands = bands or BandSystem.unconstrained(dims.d)
    if bands.d != dims.d:
        raise ValueError("band system dimension does not match dims")
    w, V = _eig_desc(T)
    r_hat = model_order(w, opts.rank_tol) if r is None else int(r)
    if r_hat == 0:
        return FrequencyEstimate(np.zeros((0, dims.d)), np.zeros(0), 0, False)
    if r_hat >= dims.n_total:
        raise MusicError("signal subspace fills the space; no noise subspace")
    En = V[:, r_hat:]
    picked, resid = _search(T, En, dims, bands, r_hat, opts)
    if opts.retry_factor > 1 and resid and max(resid) > opts.retry_tol * dims.n_total:
        fine = replace(opts, step_factor=opts.step_factor * opts.retry_factor)
        p2, r2 = _search(T, En, dims, bands, r_hat, fine)
        if len(p2) >= len(picked) and max(r2, default=0.0) < max(resid):
            picked, resid = p2, r2
    degraded = len(picked) < r_hat
    if degraded:
        log.warning("MUSIC found %d of %d local maxima", len(picked), r_hat)
    freqs = np.array(picked).reshape(-1, dims.d)
    return FrequencyEstimate(freqs, np.array(resid), r_hat, degraded)


def _search(T, En, dims: DimsSpec, bands: BandSystem, r_hat: int, opts: MusicOptions):
    candidates = []
    for combo in itertools.product(*[range(len(b)) for b in bands.bands]):
        ps = pseudospectrum(T, dims, bands, r_hat, opts, combo)
        sel = tuple(bands.bands[a][j] for a, j in enumerate(combo))
        for p, f in ps.local_maxima():
            candidates.append((p, f, sel, ps.steps))
    candidates.sort(key=lambda c: (-c[0],) + c[1])

    # A sharp true peak can sit between coarse grid points and rank below a
    # broad spurious one, so a few extra candidates are refined and the
    # r_hat with the smallest refined noise residual are kept.
    n_try = r_hat + max(r_hat, opts.extra_candidates)
    picked, resid = [], []
    for p, f, sel, steps in candidates:
        if len(picked) == n_try:
            break
        fr, val = _refine(En, np.array(f), dims, sel, steps, opts)
        # two coarse maxima refining onto the same point count once
        if any(np.all(np.minimum(np.abs(fr - q), 1 - np.abs(fr - q)) < 1e-9) for q in picked):
            continue
        picked.append(fr)
        resid.append(val)
    keep = sorted(np.argsort(np.asarray(resid), kind="stable")[:r_hat])
    picked = [picked[i] for i in keep]
    resid = [resid[i] for i in keep]
    return picked, resid


def estimate_gains(x_hat, freqs, dims: DimsSpec, cond_limit: float = 1e10) -> tuple[np.ndarray, float]:
    """Least-squares gains ``argmin ||x_hat - A s||``; returns ``(gains, cond(A))``.

    A condition number above ``cond_limit`` triggers an
    :class:`IllConditionedWarning`; the gains are still returned.
    """
    freqs = np.asarray(freqs, float).reshape(-1, dims.d)
    x_hat = np.asarray(x_hat, dtype=complex).reshape(-1)
    if freqs.shape[0] == 0:
        return np.zeros(0, complex), 1.0
    A = steering_matrix(freqs, dims)
    sv = np.linalg.svd(A, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    if cond > cond_limit:
        warnings.warn(f"steering matrix condition number {cond:.3g} exceeds {cond_limit:.3g}", IllConditionedWarning, stacklevel=2)
    gains, *_ = np.linalg.lstsq(A, x_hat, rcond=None)
    return gains, cond


@dataclass(frozen=True, eq=False)
class RetrievalResult:
    model: SpectralModel
    residuals: np.ndarray
    r_hat: int
    source: str = "from-T"
    degraded: bool = False
    condition: float = 1.0
    fit_residual: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def ill_conditioned(self) -> bool:
        return self.condition > 1e10

    def to_json(self) -> dict:
        return {
            "model": self.model.to_json(),
            "residuals": [float(v) for v in self.residuals],
            "r_hat": self.r_hat,
            "source": self.source,
            "degraded": self.degraded,
            "condition": self.condition,
            "fit_residual": self.fit_residual,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def retrieve(solution, dims: DimsSpec, bands: BandSystem | None = None,
             options: MusicOptions | None = None) -> RetrievalResult:
    """MUSIC on ``T(B_hat)`` followed by least-squares gains on ``x_hat``."""
    T = solution.toeplitz()
    est = music_frequencies(T, dims, bands, options=options)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IllConditionedWarning)
        gains, cond = estimate_gains(solution.x_hat, est.frequencies, dims)
    if cond > 1e10:
        log.warning("gain fit is ill-conditioned (cond %.3g)", cond)
    x = np.asarray(solution.x_hat)
    fit = x - steering_matrix(est.frequencies, dims) @ gains if gains.size else x
    fit_res = float(np.linalg.norm(fit) / max(np.linalg.norm(x), 1e-300))
    model = SpectralModel.create(est.frequencies, gains, validate=False)
    return RetrievalResult(model=model, residuals=est.residuals, r_hat=est.r_hat, source="from-T",
                           degraded=est.degraded, condition=cond, fit_residual=fit_res)
