"""Assembly and solution of the band-constrained atomic-norm SDP.

Decision variables are ``(x, B, t)``.  The program is

    minimize    B(0)/2 + t/2
    subject to  [[T(B), x], [x^H, t]] >= 0,
                T_{g_i}(B) >= 0          for every band-constrained axis i,
                x_j = y_j / w_j          for every observed index j.

With ``bands=None`` the ``T_{g_i}`` blocks are dropped and the program is the
ordinary multidimensional atomic-norm baseline.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, asdict
from typing import Literal

import numpy as np

from ..bands import BandSystem
from ..model import DimsSpec, ObservationMask, SpectralModel, steering_vector
from ..toeplitz import HalfSpectrumTensor, build_level_toeplitz, build_tg, model_tensor, numerical_rank
from .cones import min_max_eig
from .structure import StructureMap

log = logging.getLogger(__name__)

__all__ = [
    "SDPInstance",
    "SDPSolution",
    "SolverOptions",
    "SolverDiagnostics",
    "assemble",
    "solve",
    "feasible_value_from_model",
    "FeasiblePoint",
]


@dataclass(frozen=True, eq=False)
class SDPInstance:
    dims: DimsSpec
    bands: BandSystem | None
    mask: ObservationMask
    y: np.ndarray

    def __post_init__(self):
        y = np.array(self.y, dtype=complex).reshape(-1)
        y.setflags(write=False)
        object.__setattr__(self, "y", y)

    @property
    def mode(self) -> str:
        return "an" if self.bands is None else "fs"

    @property
    def objective_scaling(self) -> tuple[float, float]:
        """Weights of ``Tr T(B)`` and ``t`` in the objective."""
        return 1.0 / (2 * self.dims.n_total), 0.5

    @property
    def fixed_x(self) -> np.ndarray:
        x = np.zeros(self.dims.n_total, complex)
        x[self.mask.indices] = self.y / self.mask.weights
        return x

    @property
    def free_indices(self) -> np.ndarray:
        free = np.ones(self.dims.n_total, bool)
        free[self.mask.indices] = False
        return np.flatnonzero(free)

    @property
    def block_sizes(self) -> list[int]:
        return self.structure().block_sizes

    def structure(self) -> StructureMap:
        gs = [] if self.bands is None else self.bands.g_coefficients(0)
        return StructureMap(self.dims, gs, self.free_indices, self.fixed_x)

    def to_json(self) -> dict:
        return {
            "dims": self.dims.to_json(),
            "bands": None if self.bands is None else self.bands.to_json(),
            "mask": self.mask.to_json(),
            "y": [[float(v.real), float(v.imag)] for v in self.y],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SDPInstance":
        y = np.array([complex(a, b) for a, b in obj["y"]], dtype=complex)
        bands = None if obj.get("bands") is None else BandSystem.from_json(obj["bands"])
        return assemble(y, ObservationMask.from_json(obj["mask"]), DimsSpec(tuple(obj["dims"])), bands)


def assemble(y, mask: ObservationMask, dims: DimsSpec, bands: BandSystem | None = None) -> SDPInstance:
    """Validate inputs and build an :class:`SDPInstance`.

    Duplicate indices are rejected by :class:`ObservationMask` itself;
    ``y`` must have one value per observed index.
    """
    y = np.asarray(y, dtype=complex).reshape(-1)
    if mask.n_total != dims.n_total:
        raise ValueError(f"mask covers {mask.n_total} entries, dims have {dims.n_total}")
    if y.size != mask.n_observed:
        raise ValueError(f"got {y.size} observations for {mask.n_observed} observed indices")
    if bands is not None:
        if bands.d != dims.d:
            raise ValueError("band system dimension does not match dims")
        if not bands.is_single:
            raise ValueError("the SDP takes one band per dimension; solve each band set separately")
    return SDPInstance(dims=dims, bands=bands, mask=mask, y=y)


@dataclass(frozen=True)
class SolverOptions:
    """Termination and algorithm settings.

    ``method="ipm"`` is the default primal-dual interior-point solver;
    ``method="admm"`` is the operator-splitting solver (slow to reach high
    accuracy on the larger instances, useful as an independent cross-check).
    """

    eps_abs: float = 1e-9
    eps_rel: float = 1e-9
    max_iter: int = 100000
    method: Literal["ipm", "admm"] = "ipm"
    rho: float = 1.0
    adaptive_rho: bool = True
    relaxation: float = 1.6
    ipm_max_iter: int = 100

    def __post_init__(self):
        if not (self.eps_abs > 0 and self.eps_rel > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1 or self.ipm_max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.method not in ("ipm", "admm"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if not 0 < self.relaxation < 2:
            raise ValueError("relaxation must lie in (0, 2)")

    @classmethod
    def from_json(cls, obj: dict) -> "SolverOptions":
        known = set(cls.__dataclass_fields__)
        return cls(**{k: v for k, v in obj.items() if k in known})

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class SolverDiagnostics:
    iterations: int
    primal_residual: float
    dual_residual: float
    status: str
    method: str
    gap: float = float("nan")
    seconds: float = 0.0
    rank: int = -1
    rank_condition: bool = False
    min_eigs: list[float] = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class SDPSolution:
    x_hat: np.ndarray
    B_hat: HalfSpectrumTensor
    t_hat: float
    objective: float
    diagnostics: SolverDiagnostics

    @property
    def status(self) -> str:
        return self.diagnostics.status

    def toeplitz(self) -> np.ndarray:
        return build_level_toeplitz(self.B_hat)

    def to_json(self) -> dict:
        return {
            "x_hat": [[float(v.real), float(v.imag)] for v in self.x_hat],
            "B_hat": self.B_hat.to_json(),
            "t_hat": self.t_hat,
            "objective": self.objective,
            "diagnostics": asdict(self.diagnostics),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SDPSolution":
        return cls(
            x_hat=np.array([complex(a, b) for a, b in obj["x_hat"]]),
            B_hat=HalfSpectrumTensor.from_json(obj["B_hat"]),
            t_hat=float(obj["t_hat"]),
            objective=float(obj["objective"]),
            diagnostics=SolverDiagnostics(**obj["diagnostics"]),
        )


_STATUS_ORDER = {"solved": 0, "inaccurate": 1, "max_iter": 2, "infeasible-like": 3}


def _rank(res) -> tuple:
    """Sort key for competing solver results: status first, then residuals."""
    return (_STATUS_ORDER.get(res.status, 4), max(res.primal_residual, res.gap))


def solve(instance: SDPInstance, opts: SolverOptions | None = None) -> SDPSolution:
    """Solve the SDP; observed entries of ``x_hat`` equal ``y / w`` exactly."""
    opts = opts or SolverOptions()
    smap = instance.structure()
    t0 = time.perf_counter()
    if opts.method == "ipm":
        from .ipm import solve_ipm

        eps = max(min(opts.eps_abs, opts.eps_rel), 1e-12)
        res = solve_ipm(smap, eps=eps, max_iter=opts.ipm_max_iter)
        method = "ipm"
        if res.status == "infeasible-like":
            # numerical breakdown: retry once with the unshifted QR Schur solve
            retry = solve_ipm(smap, eps=eps, max_iter=opts.ipm_max_iter, schur="qr")
            log.info("ipm breakdown (%s); QR retry gave %s", res.status, retry.status)
            if _rank(retry) < _rank(res):
                res, method = retry, "ipm-qr"
        v, iters, pres, dres, gap, status = res.v, res.iterations, res.primal_residual, res.dual_residual, res.gap, res.status
    else:
        from .admm import solve_admm

        res = solve_admm(smap, opts)
        method = "admm"
        v, iters, pres, dres, gap, status = res.v, res.iterations, res.primal_residual, res.dual_residual, float("nan"), res.status
    seconds = time.perf_counter() - t0

    B, x, t = smap.split(v)
    B = B.symmetrized()
    x[instance.mask.indices] = instance.fixed_x[instance.mask.indices]
    objective = 0.5 * float(B.center.real) + 0.5 * t
    T = build_level_toeplitz(B)
    rank = numerical_rank(T)
    blocks = smap.forward(smap.pack(B, x, t), with_offset=True)
    min_eigs = []
    for blk in blocks:
        lo, hi = min_max_eig(blk)
        min_eigs.append(lo / max(hi, 1e-300))
    diag = SolverDiagnostics(
        iterations=iters,
        primal_residual=pres,
        dual_residual=dres,
        status=status,
        method=method,
        gap=gap,
        seconds=seconds,
        rank=rank,
        rank_condition=rank < instance.dims.min_size,
        min_eigs=min_eigs,
    )
    log.info("solve[%s/%s] status=%s it=%d obj=%.10g rank=%d %.2fs", instance.mode, opts.method, status, iters, objective, rank, seconds)
    return SDPSolution(x_hat=x, B_hat=B, t_hat=t, objective=objective, diagnostics=diag)


@dataclass(frozen=True, eq=False)
class FeasiblePoint:
    value: float
    x: np.ndarray
    B: HalfSpectrumTensor
    t: float

    def bordered(self) -> np.ndarray:
        T = build_level_toeplitz(self.B)
        n = T.shape[0]
        out = np.zeros((n + 1, n + 1), complex)
        out[:n, :n] = T
        out[:n, n] = self.x
        out[n, :n] = np.conj(self.x)
        out[n, n] = self.t
        return out

    def blocks(self, bands: BandSystem | None) -> list[np.ndarray]:
        out = [self.bordered()]
        if bands is not None:
            out += [build_tg(self.B, g) for g in bands.g_coefficients(0)]
        return out


def feasible_value_from_model(model: SpectralModel, dims: DimsSpec, bands: BandSystem | None = None) -> FeasiblePoint:
    """Upper-bound point ``(x, sum |s| B_f, sum |s|)`` built from the atoms.

    Its objective equals ``sum |s_l|``, so the SDP optimum never exceeds it.
    """
    if bands is not None:
        for f in model.frequencies:
            if not bands.contains(f):
                raise ValueError(f"frequency {tuple(f)} lies outside the bands")
    mags = np.abs(model.gains)
    x = np.zeros(dims.n_total, complex)
    for f, s in zip(model.frequencies, model.gains):
        x += s * steering_vector(f, dims)
    B = model_tensor(model, dims, use_magnitudes=True)
    total = float(mags.sum())
    return FeasiblePoint(value=total, x=x, B=B, t=total)
