"""Multidimensional sinusoid mixtures, sampling masks and error metrics.

Flat sample index convention: dimension 1 is outermost, i.e. the sample
``(n_1, ..., n_d)`` sits at ``((n_1 * N_2 + n_2) * N_3 + n_3) ...``, which is
the ordering produced by ``s_1 (x) s_2 (x) ... (x) s_d``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "DimsSpec",
    "SpectralModel",
    "ObservationMask",
    "steering_vector",
    "steering_matrix",
    "reduced_steering_vector",
    "synthesize",
    "apply_mask",
    "random_mask",
    "make_rng",
    "nmse",
    "torus_distance",
    "match_frequencies",
]


@dataclass(frozen=True)
class DimsSpec:
    """Grid sizes ``N_1, ..., N_d`` of the sampled data cube."""

    sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.sizes)
        if len(sizes) < 1:
            raise ValueError("need at least one dimension")
        if any(n < 2 for n in sizes):
            raise ValueError(f"every N_i must be >= 2, got {sizes}")
        object.__setattr__(self, "sizes", sizes)

    @property
    def d(self) -> int:
        return len(self.sizes)

    @property
    def n_total(self) -> int:
        """N_D, the number of samples."""
        return math.prod(self.sizes)

    @property
    def n_reduced(self) -> int:
        """N_{D-1} = prod(N_i - 1), the side of the band-constraint blocks."""
        return math.prod(n - 1 for n in self.sizes)

    @property
    def reduced_sizes(self) -> tuple[int, ...]:
        return tuple(n - 1 for n in self.sizes)

    @property
    def tensor_shape(self) -> tuple[int, ...]:
        return tuple(2 * n - 1 for n in self.sizes)

    @property
    def min_size(self) -> int:
        return min(self.sizes)

    def to_json(self) -> list[int]:
        return list(self.sizes)

    @classmethod
    def of(cls, *sizes: int) -> "DimsSpec":
        if len(sizes) == 1 and not isinstance(sizes[0], (int, np.integer)):
            sizes = tuple(sizes[0])
        return cls(tuple(sizes))


def _as_freqs(freqs, d: int) -> np.ndarray:
    f = np.asarray(freqs, dtype=float)
    if f.ndim == 1:
        f = f.reshape(-1, d) if f.size else np.zeros((0, d))
    if f.ndim != 2 or f.shape[1] != d:
        raise ValueError(f"frequency tuples must have {d} components, got shape {f.shape}")
    return np.mod(f, 1.0)


@dataclass(frozen=True)
class SpectralModel:
    """r frequency tuples (rows of ``frequencies``) with complex gains.

    Frequencies are reduced modulo 1 on construction.  Pairwise-distinct
    tuples and nonzero gains are checked unless ``validate=False`` is passed
    to :meth:`create` (useful for purely arithmetic checks).
    """

    frequencies: np.ndarray
    gains: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        if f.ndim != 2:
            raise ValueError("frequencies must be an (r, d) array")
        g = np.asarray(self.gains, dtype=complex).reshape(-1)
        if g.shape[0] != f.shape[0]:
            raise ValueError("one gain per frequency tuple required")
        f = np.mod(f, 1.0)
        f.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "gains", g)

    @classmethod
    def create(cls, frequencies, gains, validate: bool = True) -> "SpectralModel":
        f = np.atleast_2d(np.asarray(frequencies, dtype=float))
        if np.asarray(frequencies).size == 0:
            f = np.zeros((0, f.shape[-1] if f.ndim == 2 else 1))
        model = cls(f, np.asarray(gains, dtype=complex).reshape(-1))
        if validate:
            model.validate()
        return model

    def validate(self) -> None:
        if np.any(self.gains == 0):
            raise ValueError("all gains must be nonzero")
        r = self.order
        for a in range(r):
            for b in range(a + 1, r):
                if np.all(torus_distance(self.frequencies[a], self.frequencies[b]) == 0):
                    raise ValueError(f"frequency tuples {a} and {b} coincide")

    @property
    def order(self) -> int:
        return self.frequencies.shape[0]

    @property
    def d(self) -> int:
        return self.frequencies.shape[1]

    def __len__(self) -> int:
        return self.order

    def concat(self, other: "SpectralModel") -> "SpectralModel":
        return SpectralModel(
            np.vstack([self.frequencies, other.frequencies]),
            np.concatenate([self.gains, other.gains]),
        )

    def to_json(self) -> dict:
        return {
            "frequencies": self.frequencies.tolist(),
            "gains": [[float(z.real), float(z.imag)] for z in self.gains],
        }

    @classmethod
    def from_json(cls, obj: dict, validate: bool = True) -> "SpectralModel":
        gains = [complex(re, im) for re, im in obj["gains"]]
        freqs = obj["frequencies"]
        if not freqs:
            return cls(np.zeros((0, int(obj.get("d", 1)))), np.zeros(0, complex))
        return cls.create(freqs, gains, validate=validate)


@dataclass(frozen=True)
class ObservationMask:
    """Nonzero diagonal of the observation operator.

    ``indices`` are sorted flat sample indices, ``weights`` the matching
    complex diagonal entries (all ones for plain subsampling).
    """

    n_total: int
    indices: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        w = np.asarray(self.weights, dtype=complex).reshape(-1)
        if w.shape != idx.shape:
            raise ValueError("one weight per observed index required")
        if np.unique(idx).size != idx.size:
            raise ValueError("observed indices must be unique")
        if idx.size and (idx.min() < 0 or idx.max() >= self.n_total):
            raise IndexError(f"observed index out of range [0, {self.n_total})")
        if np.any(w == 0):
            raise ValueError("observation weights must be nonzero")
        order = np.argsort(idx, kind="stable")
        idx, w = idx[order], w[order]
        idx.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_indices(cls, n_total: int, indices: Iterable[int], weights=None) -> "ObservationMask":
        idx = np.fromiter(indices, dtype=np.int64) if not isinstance(indices, np.ndarray) else indices
        if weights is None:
            weights = np.ones(len(idx), dtype=complex)
        return cls(int(n_total), idx, weights)

    @classmethod
    def full(cls, n_total: int) -> "ObservationMask":
        return cls(n_total, np.arange(n_total), np.ones(n_total, complex))

    @property
    def n_observed(self) -> int:
        """Ns, the number of observed samples."""
        return int(self.indices.size)

    def to_json(self) -> dict:
        return {
            "n_total": int(self.n_total),
            "indices": self.indices.tolist(),
            "weights": [[float(z.real), float(z.imag)] for z in self.weights],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ObservationMask":
        weights = [complex(re, im) for re, im in obj["weights"]]
        return cls(int(obj["n_total"]), np.asarray(obj["indices"], dtype=np.int64), np.asarray(weights, complex))


def _per_dim_sinusoids(f: np.ndarray, sizes: Sequence[int]) -> list[np.ndarray]:
    return [np.exp(2j * np.pi * np.arange(n) * fi) for fi, n in zip(f, sizes)]


def _kron_all(vectors: list[np.ndarray]) -> np.ndarray:
    out = vectors[0]
    for v in vectors[1:]:
        out = np.kron(out, v)
    return out


def steering_vector(f, dims: DimsSpec) -> np.ndarray:
    """Return ``a(f) = s_1(f_1) (x) ... (x) s_d(f_d)``, a length-N_D vector."""
    f = np.asarray(f, dtype=float).reshape(-1)
    if f.size != dims.d:
        raise ValueError(f"frequency has {f.size} components, dims has d={dims.d}")
    return _kron_all(_per_dim_sinusoids(np.mod(f, 1.0), dims.sizes))


def reduced_steering_vector(f, dims: DimsSpec) -> np.ndarray:
    """Steering vector truncated to ``N_i - 1`` samples per dimension."""
    f = np.asarray(f, dtype=float).reshape(-1)
    if f.size != dims.d:
        raise ValueError(f"frequency has {f.size} components, dims has d={dims.d}")
    return _kron_all(_per_dim_sinusoids(np.mod(f, 1.0), dims.reduced_sizes))


def steering_matrix(freqs, dims: DimsSpec, reduced: bool = False) -> np.ndarray:
    """Stack steering vectors of the rows of ``freqs`` as columns."""
    f = _as_freqs(freqs, dims.d)
    fn = reduced_steering_vector if reduced else steering_vector
    n = dims.n_reduced if reduced else dims.n_total
    if f.shape[0] == 0:
        return np.zeros((n, 0), dtype=complex)
    return np.column_stack([fn(row, dims) for row in f])


def synthesize(model: SpectralModel, dims: DimsSpec) -> np.ndarray:
    """Noiseless sample vector ``x = sum_l sigma_l a(f_l)``."""
    if model.order and model.d != dims.d:
        raise ValueError("model dimension does not match dims")
    return steering_matrix(model.frequencies, dims) @ model.gains if model.order else np.zeros(dims.n_total, complex)


def apply_mask(x, mask: ObservationMask) -> np.ndarray:
    """Observed values ``weight_j * x_j`` aligned with ``mask.indices``."""
    x = np.asarray(x, dtype=complex).reshape(-1)
    if x.size != mask.n_total:
        raise IndexError(f"vector length {x.size} does not match mask size {mask.n_total}")
    return mask.weights * x[mask.indices]


def make_rng(*key: int) -> np.random.Generator:
    """Counter-based Philox generator keyed by one or more integers."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in key])))


def random_mask(dims: DimsSpec, n_observed: int, seed, rng: np.random.Generator | None = None) -> ObservationMask:
    """Uniform random Ns-subset of the samples, all weights one.

    The subset is the first Ns entries of a partial Fisher-Yates shuffle of
    ``0..N_D-1`` driven by :func:`make_rng`, so it is reproducible from the
    seed alone.  Passing ``rng`` draws from that generator instead.
    """
    n = dims.n_total
    if not 0 <= n_observed <= n:
        raise ValueError(f"Ns must lie in [0, {n}], got {n_observed}")
    if rng is None:
        rng = make_rng(seed)
    perm = np.arange(n)
    for i in range(n_observed):
        j = i + int(rng.integers(0, n - i))
        perm[i], perm[j] = perm[j], perm[i]
    return ObservationMask(n, np.sort(perm[:n_observed]), np.ones(n_observed, complex))


def nmse(x_hat, x_star) -> float:
    """``||x_hat - x_star||_2 / ||x_star||_2``."""
    x_hat = np.asarray(x_hat, dtype=complex).reshape(-1)
    x_star = np.asarray(x_star, dtype=complex).reshape(-1)
    if x_hat.shape != x_star.shape:
        raise ValueError("vectors must have equal length")
    ref = np.linalg.norm(x_star)
    if ref == 0:
        raise ValueError("reference vector is zero")
    return float(np.linalg.norm(x_hat - x_star) / ref)


def torus_distance(a, b) -> np.ndarray:
    """Per-component distance ``min(|a-b|, 1-|a-b|)`` on the unit torus."""
    delta = np.abs(np.mod(np.asarray(a, float) - np.asarray(b, float), 1.0))
    return np.minimum(delta, 1.0 - delta)


def match_frequencies(estimates, truth) -> tuple[np.ndarray, np.ndarray]:
    """Pair estimates with reference tuples by minimal total torus distance.

    Returns ``(perm, errors)`` where ``estimates[perm[l]]`` is matched to
    ``truth[l]`` and ``errors[l]`` is the per-component torus distance of
    that pair.  Unmatched references (fewer estimates than truths) get
    ``perm = -1`` and an error of 0.5 per component.
    """
    from scipy.optimize import linear_sum_assignment

    est = np.atleast_2d(np.asarray(estimates, float))
    ref = np.atleast_2d(np.asarray(truth, float))
    if ref.size == 0:
        return np.zeros(0, int), np.zeros((0, est.shape[1] if est.ndim == 2 else 0))
    d = ref.shape[1]
    perm = np.full(ref.shape[0], -1, dtype=int)
    errors = np.full(ref.shape, 0.5)
    if est.size == 0:
        return perm, errors
    cost = torus_distance(ref[:, None, :], est[None, :, :]).sum(axis=-1)
    rows, cols = linear_sum_assignment(cost)
    perm[rows] = cols
    errors[rows] = torus_distance(ref[rows], est[cols]).reshape(-1, d)
    return perm, errors
