"""Seeded Monte-Carlo trials, phase-transition sweeps and plot data.

Every random quantity of a trial (frequencies, phases, sampling mask) is
drawn from one counter-based generator keyed by the trial's seed tuple, so
any trial can be recomputed in isolation and both solver modes see the same
instance.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .bands import ACCURATE_BANDS, ROUGH_BANDS, BandSystem
from .model import (
    DimsSpec,
    SpectralModel,
    apply_mask,
    make_rng,
    match_frequencies,
    nmse,
    random_mask,
    synthesize,
    torus_distance,
)
from .music import MusicError, MusicOptions, retrieve
from .sdp import SolverOptions, assemble, solve

log = logging.getLogger(__name__)

SCHEMA = 1
MIN_SEPARATION = 1e-3

FIG1_FREQUENCIES = ((0.35, 0.51), (0.31, 0.59), (0.37, 0.57))

PRESETS = {"accurate": ACCURATE_BANDS, "rough": ROUGH_BANDS, "none": None}

__all__ = [
    "TrialConfig",
    "TrialResult",
    "PhaseGrid",
    "PhaseResult",
    "resolve_mode",
    "draw_instance",
    "run_trial",
    "phase_transition",
    "emit_plotdata",
    "read_rate_csv",
    "fig1_config",
]


def _bands_from_json(obj):
    if obj is None:
        return None
    if isinstance(obj, str):
        if obj not in PRESETS:
            raise ValueError(f"unknown band preset {obj!r}")
        return PRESETS[obj]
    return BandSystem.from_json(obj)


@dataclass(frozen=True)
class TrialConfig:
    """One recovery experiment.

    ``frequencies`` fixes the tuples; otherwise ``r`` tuples
    are drawn uniformly from ``region`` (one ``[low, high)`` per dimension)
    with a minimum per-component separation.  ``bands`` is the prior used
    in FS mode.
    """

    dims: DimsSpec = DimsSpec((8, 8))
    r: int = 3
    ns: int = 12
    bands: BandSystem | None = ACCURATE_BANDS
    region: tuple[tuple[float, float], ...] = ((0.3, 0.4), (0.5, 0.6))
    frequencies: tuple[tuple[float, ...], ...] | None = None
    seed: tuple[int, ...] = (0,)
    threshold: float = 1e-5
    freq_tol: float = 1e-3
    solver: SolverOptions = field(default_factory=SolverOptions)
    music: MusicOptions = field(default_factory=MusicOptions)

    def __post_init__(self):
        if not 0 <= self.ns <= self.dims.n_total:
            raise ValueError(f"Ns must lie in [0, {self.dims.n_total}]")
        if self.r < 0:
            raise ValueError("r must be nonnegative")
        if len(self.region) != self.dims.d:
            raise ValueError("one sampling interval per dimension required")
        if self.frequencies is not None:
            f = np.asarray(self.frequencies, float)
            if f.shape != (self.r, self.dims.d):
                raise ValueError("fixed frequencies must have shape (r, d)")
        if self.bands is not None and self.bands.d != self.dims.d:
            raise ValueError("band system dimension does not match dims")
        if isinstance(self.seed, int):
            object.__setattr__(self, "seed", (self.seed,))

    def with_seed(self, *seed: int) -> "TrialConfig":
        return replace(self, seed=tuple(int(s) for s in seed))

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "dims": self.dims.to_json(),
            "r": self.r,
            "ns": self.ns,
            "bands": None if self.bands is None else self.bands.to_json(),
            "region": [list(x) for x in self.region],
            "frequencies": None if self.frequencies is None else [list(f) for f in self.frequencies],
            "seed": list(self.seed),
            "threshold": self.threshold,
            "freq_tol": self.freq_tol,
            "solver": self.solver.to_json(),
            "music": self.music.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TrialConfig":
        schema = obj.get("schema", SCHEMA)
        if schema != SCHEMA:
            raise ValueError(f"unsupported config schema {schema}")
        kw = {}
        if "dims" in obj:
            kw["dims"] = DimsSpec(tuple(obj["dims"]))
        for key in ("r", "ns"):
            if key in obj:
                kw[key] = int(obj[key])
        if "bands" in obj:
            kw["bands"] = _bands_from_json(obj["bands"])
        if "region" in obj:
            kw["region"] = tuple(tuple(float(v) for v in x) for x in obj["region"])
        if obj.get("frequencies") is not None:
            kw["frequencies"] = tuple(tuple(float(v) for v in f) for f in obj["frequencies"])
        if "seed" in obj:
            s = obj["seed"]
            kw["seed"] = tuple(int(v) for v in (s if isinstance(s, list) else [s]))
        for key in ("threshold", "freq_tol"):
            if key in obj:
                kw[key] = float(obj[key])
        if "solver" in obj:
            kw["solver"] = SolverOptions.from_json(obj["solver"])
        if "music" in obj:
            kw["music"] = MusicOptions(**obj["music"])
        return cls(**kw)


def fig1_config(seed: int = 0) -> TrialConfig:
    """Fixed-frequency operating point: dims (8, 8), r = 3, Ns = 12, accurate bands."""
    return TrialConfig(frequencies=FIG1_FREQUENCIES, r=3, ns=12, seed=(seed,))


def resolve_mode(mode: str, config: TrialConfig) -> BandSystem | None:
    """``fs`` uses the config's prior, ``an``/``none`` drops it, presets name one."""
    mode = mode.lower()
    if mode == "fs":
        if config.bands is None:
            raise ValueError("FS mode needs bands in the config")
        return config.bands
    if mode == "an":
        return None
    if mode in PRESETS:
        return PRESETS[mode]
    raise ValueError(f"unknown mode {mode!r}")


def _draw_frequencies(rng: np.random.Generator, r: int, region, min_sep: float) -> np.ndarray:
    lo = np.array([a for a, _ in region])
    width = np.array([(b - a) % 1.0 or 1.0 for a, b in region])
    out: list[np.ndarray] = []
    while len(out) < r:
        f = np.mod(lo + width * rng.random(len(region)), 1.0)
        if all(np.all(torus_distance(f, g) >= min_sep) for g in out):
            out.append(f)
    return np.array(out).reshape(r, len(region))


def draw_instance(config: TrialConfig):
    """``(model, mask, x_star)`` for the config's seed (independent of mode)."""
    rng = make_rng(*config.seed)
    if config.frequencies is not None:
        F = np.asarray(config.frequencies, float)
    else:
        F = _draw_frequencies(rng, config.r, config.region, MIN_SEPARATION)
    phases = rng.random(config.r)
    model = SpectralModel.create(F, np.exp(2j * np.pi * phases))
    mask = random_mask(config.dims, config.ns, None, rng=rng)
    return model, mask, synthesize(model, config.dims)


@dataclass
class TrialResult:
    mode: str
    seed: tuple[int, ...]
    ns: int
    r: int
    nmse: float
    success: bool
    freq_errors: list[float]
    freq_success: bool
    seconds: float
    diagnostics: dict
    objective: float = float("nan")
    error: str | None = None

    def to_json(self) -> dict:
        out = asdict(self)
        out["seed"] = list(self.seed)
        return out

    @property
    def solver_failed(self) -> bool:
        return self.error is not None or self.diagnostics.get("status") not in ("solved", "inaccurate")


def run_trial(config: TrialConfig, mode: str = "fs") -> TrialResult:
    """Draw, observe, solve and score one instance.

    Solver or retrieval failures are recorded in the result, not raised.
    MUSIC is given the true order ``r``.
    """
    bands = resolve_mode(mode, config)
    model, mask, x_star = draw_instance(config)
    y = apply_mask(x_star, mask)
    t0 = time.perf_counter()
    diag: dict = {}
    err = None
    freq_errors = [0.5] * config.r
    try:
        sol = solve(assemble(y, mask, config.dims, bands), config.solver)
        diag = asdict(sol.diagnostics)
        e = nmse(sol.x_hat, x_star)
        objective = sol.objective
        try:
            music = replace(config.music, r=config.r)
            res = retrieve(sol, config.dims, bands, music)
            _, errs = match_frequencies(res.model.frequencies, model.frequencies)
            freq_errors = [float(v) for v in errs.max(axis=1)] if errs.size else []
        except MusicError as exc:
            err = f"retrieval: {exc}"
    except Exception as exc:  # recorded, not thrown
        log.exception("trial %s failed", config.seed)
        e, objective, err = 1.0, float("nan"), f"{type(exc).__name__}: {exc}"
    seconds = time.perf_counter() - t0
    return TrialResult(
        mode=mode,
        seed=tuple(config.seed),
        ns=config.ns,
        r=config.r,
        nmse=float(e),
        success=bool(e < config.threshold),
        freq_errors=freq_errors,
        freq_success=bool(freq_errors == [] or max(freq_errors) <= config.freq_tol),
        seconds=seconds,
        diagnostics=diag,
        objective=float(objective),
        error=err,
    )


@dataclass(frozen=True)
class PhaseGrid:
    ns_values: tuple[int, ...] = tuple(range(4, 41, 4))
    r_values: tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    trials: int = 10
    base_seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")

    @property
    def n_cells(self) -> int:
        return len(self.ns_values) * len(self.r_values)

    def cells(self):
        """``(cell_index, r, ns)`` in row-major (r outer) order."""
        c = 0
        for r in self.r_values:
            for ns in self.ns_values:
                yield c, r, ns
                c += 1

    def to_json(self) -> dict:
        return {"ns_values": list(self.ns_values), "r_values": list(self.r_values),
                "trials": self.trials, "base_seed": self.base_seed}

    @classmethod
    def from_json(cls, obj: dict) -> "PhaseGrid":
        return cls(tuple(int(v) for v in obj.get("ns_values", range(4, 41, 4))),
                   tuple(int(v) for v in obj.get("r_values", range(1, 7))),
                   int(obj.get("trials", 10)), int(obj.get("base_seed", 0)))


@dataclass
class PhaseResult:
    grid: PhaseGrid
    modes: tuple[str, ...]
    rates: dict[str, np.ndarray]  # mode -> (len(r_values), len(ns_values))
    trials: list[TrialResult]

    def mean_rate(self, mode: str) -> float:
        return float(np.mean(self.rates[mode]))


def _run_one(args):
    config, mode = args
    return run_trial(config, mode)


def phase_transition(grid: PhaseGrid, modes: Sequence[str] = ("accurate", "rough", "none"),
                     base: TrialConfig | None = None, jobs: int = 1) -> PhaseResult:
    """Success rates per ``(r, Ns)`` cell and mode.

    Trial ``t`` of cell ``c`` uses seed ``(base_seed, c, t)``; every mode
    sees the same instances.
    """
    base = base or TrialConfig()
    tasks = []
    for c, r, ns in grid.cells():
        ns = min(ns, base.dims.n_total)
        for t in range(grid.trials):
            cfg = replace(base, r=r, ns=ns, frequencies=None, seed=(grid.base_seed, c, t))
            for mode in modes:
                tasks.append((cfg, mode))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, tasks, chunksize=1))
    else:
        results = [_run_one(t) for t in tasks]
    shape = (len(grid.r_values), len(grid.ns_values))
    counts = {m: np.zeros(shape) for m in modes}
    for (cfg, mode), res in zip(tasks, results):
        c = cfg.seed[1]
        counts[mode][c // shape[1], c % shape[1]] += res.success
    rates = {m: counts[m] / grid.trials for m in modes}
    return PhaseResult(grid, tuple(modes), rates, results)


def write_rate_csv(path, ns_values, r_values, rates) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r\\Ns"] + [str(v) for v in ns_values])
        for i, r in enumerate(r_values):
            w.writerow([str(r)] + [repr(float(v)) for v in rates[i]])


def read_rate_csv(path) -> tuple[list[int], list[int], np.ndarray]:
    """Inverse of the rate CSV writer: ``(ns_values, r_values, rates)``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    ns = [int(v) for v in rows[0][1:]]
    rs = [int(row[0]) for row in rows[1:]]
    rates = np.array([[float(v) for v in row[1:]] for row in rows[1:]]).reshape(len(rs), len(ns))
    return ns, rs, rates


_GNUPLOT = """# grayscale success-rate heatmap; run: gnuplot {name}.gp
set terminal pngcairo size 480,400
set output '{name}.png'
set datafile separator ','
set palette gray
set cbrange [0:1]
set xlabel 'Ns'
set ylabel 'r'
set title '{name}'
plot '{name}.csv' matrix rowheaders columnheaders with image
"""


def emit_plotdata(result: PhaseResult | None, outdir, pseudospectra: dict | None = None) -> list[Path]:
    """Write rate CSVs (rows r, columns Ns), gnuplot stubs and pseudospectrum CSVs."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if result is not None:
        for mode in result.modes:
            name = f"phase_{mode}"
            p = out / f"{name}.csv"
            write_rate_csv(p, result.grid.ns_values, result.grid.r_values, result.rates[mode])
            (out / f"{name}.gp").write_text(_GNUPLOT.format(name=name))
            written += [p, out / f"{name}.gp"]
        trials = out / "trials.jsonl"
        with open(trials, "w") as fh:
            for t in result.trials:
                fh.write(json.dumps(t.to_json()) + "\n")
        written.append(trials)
    else:
        p = out / "phase_empty.csv"
        write_rate_csv(p, [], [], np.zeros((0, 0)))
        written.append(p)
    for name, ps in (pseudospectra or {}).items():
        p = out / f"pseudospectrum_{name}.csv"
        ps.to_csv(p)
        written.append(p)
    return written


def default_jobs() -> int:
    return max(1, (os.cpu_count() or 1))
