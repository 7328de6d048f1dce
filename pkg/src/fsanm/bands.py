"""Frequency intervals on the unit torus and their certificate polynomials."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .toeplitz import GCoefficients

__all__ = [
    "FrequencyBand",
    "BandSystem",
    "g_coefficients",
    "g_eval",
    "band_contains",
    "ACCURATE_BANDS",
    "ROUGH_BANDS",
]


@dataclass(frozen=True)
class FrequencyBand:
    """Closed arc ``[low, high]`` of the unit torus.

    ``low < high`` is the ordinary interval, ``low > high`` wraps through 0
    (it is ``[0, 1)`` minus the open arc ``(high, low)``).  ``low = high =
    None`` is the unconstrained full circle.
    """

    low: float | None
    high: float | None

    def __post_init__(self):
        if (self.low is None) != (self.high is None):
            raise ValueError("both band edges or neither must be given")
        if self.low is None:
            return
        lo, hi = float(self.low), float(self.high)
        for v in (lo, hi):
            if not 0.0 <= v < 1.0:
                raise ValueError(f"band edges must lie in [0, 1), got {v}")
        if lo == hi:
            raise ValueError("degenerate band: low == high (widen it explicitly)")
        object.__setattr__(self, "low", lo)
        object.__setattr__(self, "high", hi)

    @classmethod
    def full(cls) -> "FrequencyBand":
        return cls(None, None)

    @property
    def is_full(self) -> bool:
        return self.low is None

    @property
    def wraps(self) -> bool:
        return not self.is_full and self.low > self.high

    @property
    def width(self) -> float:
        if self.is_full:
            return 1.0
        return (self.high - self.low) % 1.0

    def contains(self, f) -> np.ndarray | bool:
        return band_contains(self, f)

    def grid(self, step: float) -> tuple[np.ndarray, bool]:
        """Points covering the band at spacing <= ``step``.

        Returns ``(points, periodic)``; ``periodic`` is True only for the
        full circle, where the last point neighbours the first.
        """
        if self.is_full:
            count = max(int(math.ceil(1.0 / step)), 3)
            return np.arange(count) / count, True
        count = max(int(math.ceil(self.width / step)) + 1, 2)
        return np.mod(self.low + np.linspace(0.0, self.width, count), 1.0), False

    def to_json(self):
        if self.is_full:
            return None
        return {"f_L": self.low, "f_H": self.high}

    @classmethod
    def from_json(cls, obj) -> "FrequencyBand":
        if obj is None:
            return cls.full()
        if isinstance(obj, (list, tuple)):
            return cls(float(obj[0]), float(obj[1]))
        return cls(float(obj["f_L"]), float(obj["f_H"]))


def _arcs_overlap(a: FrequencyBand, b: FrequencyBand) -> bool:
    if a.is_full or b.is_full:
        return True
    return bool(band_contains(a, b.low) or band_contains(a, b.high) or band_contains(b, a.low))


@dataclass(frozen=True)
class BandSystem:
    """Per-dimension list of bands.

    One band per dimension is the single-band mode used by the SDP; several
    pairwise-disjoint bands per dimension is the multi-band mode.
    """

    bands: tuple[tuple[FrequencyBand, ...], ...]

    def __post_init__(self):
        norm = []
        for per_dim in self.bands:
            if isinstance(per_dim, FrequencyBand):
                per_dim = (per_dim,)
            per_dim = tuple(per_dim)
            if not per_dim:
                raise ValueError("each dimension needs at least one band")
            for a in range(len(per_dim)):
                for b in range(a + 1, len(per_dim)):
                    if _arcs_overlap(per_dim[a], per_dim[b]):
                        raise ValueError("bands within a dimension must be disjoint")
            norm.append(per_dim)
        object.__setattr__(self, "bands", tuple(norm))

    @classmethod
    def single(cls, *edges) -> "BandSystem":
        """``BandSystem.single((0.3, 0.4), (0.5, 0.6))``; ``None`` = full circle."""
        out = []
        for e in edges:
            if e is None:
                out.append((FrequencyBand.full(),))
            elif isinstance(e, FrequencyBand):
                out.append((e,))
            else:
                out.append((FrequencyBand(*e),))
        return cls(tuple(out))

    @classmethod
    def unconstrained(cls, d: int) -> "BandSystem":
        return cls(tuple((FrequencyBand.full(),) for _ in range(d)))

    @property
    def d(self) -> int:
        return len(self.bands)

    @property
    def is_single(self) -> bool:
        return all(len(b) == 1 for b in self.bands)

    @property
    def n_bands(self) -> int:
        return max(len(b) for b in self.bands)

    def band(self, axis: int, j: int = 0) -> FrequencyBand:
        per_dim = self.bands[axis]
        return per_dim[0] if len(per_dim) == 1 else per_dim[j]

    def select(self, j: int) -> "BandSystem":
        """Single-band system made of the ``j``-th band of every dimension."""
        return BandSystem(tuple((self.band(i, j),) for i in range(self.d)))

    def g_coefficients(self, j: int = 0) -> list[GCoefficients]:
        """Certificate polynomials of the constrained axes of band set ``j``."""
        out = []
        for i in range(self.d):
            band = self.band(i, j)
            if not band.is_full:
                out.append(g_coefficients(band, axis=i))
        return out

    def contains(self, f) -> bool:
        f = np.asarray(f, float).reshape(-1)
        if f.size != self.d:
            raise ValueError("frequency dimension mismatch")
        return all(any(bool(band_contains(b, fi)) for b in per_dim) for fi, per_dim in zip(f, self.bands))

    def to_json(self) -> list:
        return [[b.to_json() for b in per_dim] for per_dim in self.bands]

    @classmethod
    def from_json(cls, obj) -> "BandSystem":
        return cls(tuple(tuple(FrequencyBand.from_json(b) for b in per_dim) for per_dim in obj))


def g_coefficients(band: FrequencyBand, axis: int = 0) -> GCoefficients:
    """Coefficients of the degree-one polynomial that is positive inside ``band``."""
    if band.is_full:
        raise ValueError("the full circle has no certificate polynomial")
    delta = band.high - band.low
    s = float(np.sign(delta))
    r0 = -2.0 * math.cos(math.pi * delta) * s
    r1 = complex(np.exp(1j * math.pi * (band.low + band.high)) * s)
    return GCoefficients(r0=r0, r1=r1, axis=axis)


def g_eval(f, g: GCoefficients):
    """``r0 + 2 Re(r1 exp(-i 2 pi f))``; vectorized over ``f``."""
    val = g.r0 + 2.0 * np.real(g.r1 * np.exp(-2j * np.pi * np.asarray(f, float)))
    return float(val) if np.ndim(val) == 0 else val


def band_contains(band: FrequencyBand, f):
    """Closed-arc membership, vectorized over ``f`` (taken modulo 1)."""
    f = np.mod(np.asarray(f, float), 1.0)
    if band.is_full:
        out = np.ones(f.shape, bool)
    elif band.low < band.high:
        out = (f >= band.low) & (f <= band.high)
    else:
        out = (f >= band.low) | (f <= band.high)
    return bool(out) if out.ndim == 0 else out


ACCURATE_BANDS = BandSystem.single((0.3, 0.4), (0.5, 0.6))
ROUGH_BANDS = BandSystem.single((0.2, 0.4), (0.5, 0.7))
