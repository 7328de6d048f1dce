"""Multidimensional harmonic retrieval with frequency-interval priors.

Band-constrained atomic-norm recovery through a semidefinite program,
MD-MUSIC frequency extraction and Vandermonde certificate checks.
"""

from .bands import ACCURATE_BANDS, ROUGH_BANDS, BandSystem, FrequencyBand, band_contains, g_coefficients, g_eval
from .model import (
    DimsSpec,
    ObservationMask,
    SpectralModel,
    apply_mask,
    make_rng,
    match_frequencies,
    nmse,
    random_mask,
    steering_vector,
    synthesize,
    torus_distance,
)
from .music import MusicOptions, RetrievalResult, estimate_gains, model_order, music_frequencies, retrieve
from .sdp import SDPInstance, SDPSolution, SolverOptions, assemble, feasible_value_from_model, solve
from .toeplitz import GCoefficients, HalfSpectrumTensor, build_level_toeplitz, build_tg, numerical_rank
from .vandermonde import vandermonde_decompose, verify_fs_certificate, verify_multiband_certificate

__version__ = "0.1.0"

__all__ = [
    "ACCURATE_BANDS",
    "ROUGH_BANDS",
    "BandSystem",
    "DimsSpec",
    "FrequencyBand",
    "GCoefficients",
    "HalfSpectrumTensor",
    "MusicOptions",
    "ObservationMask",
    "RetrievalResult",
    "SDPInstance",
    "SDPSolution",
    "SolverOptions",
    "SpectralModel",
    "apply_mask",
    "assemble",
    "band_contains",
    "build_level_toeplitz",
    "build_tg",
    "estimate_gains",
    "feasible_value_from_model",
    "g_coefficients",
    "g_eval",
    "make_rng",
    "match_frequencies",
    "model_order",
    "music_frequencies",
    "nmse",
    "numerical_rank",
    "random_mask",
    "retrieve",
    "solve",
    "steering_vector",
    "synthesize",
    "torus_distance",
    "vandermonde_decompose",
    "verify_fs_certificate",
    "verify_multiband_certificate",
]
