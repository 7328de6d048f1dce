"""Semidefinite program for band-constrained atomic-norm recovery."""

from .cones import min_max_eig, psd_projection, psd_projection_real, real_embedding, real_unembedding
from .problem import (
    FeasiblePoint,
    SDPInstance,
    SDPSolution,
    SolverDiagnostics,
    SolverOptions,
    assemble,
    feasible_value_from_model,
    solve,
)
from .structure import StructureMap

__all__ = [
    "FeasiblePoint",
    "SDPInstance",
    "SDPSolution",
    "SolverDiagnostics",
    "SolverOptions",
    "StructureMap",
    "assemble",
    "feasible_value_from_model",
    "min_max_eig",
    "psd_projection",
    "psd_projection_real",
    "real_embedding",
    "real_unembedding",
    "solve",
]
