"""Command-line interface: ``fsanm <subcommand> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .bands import BandSystem
from .experiments import (
    SCHEMA,
    PhaseGrid,
    TrialConfig,
    draw_instance,
    emit_plotdata,
    fig1_config,
    phase_transition,
    run_trial,
)
from .model import DimsSpec, ObservationMask, SpectralModel, apply_mask
from .music import MusicError, pseudospectrum, retrieve
from .sdp import SDPSolution, SolverOptions, assemble, solve
from .toeplitz import build_level_toeplitz, model_tensor
from .vandermonde import DecompositionError, vandermonde_decompose, verify_fs_certificate

log = logging.getLogger("fsanm")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_STRICT = 2


def _load_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _emit(obj, args, name: str) -> None:
    text = json.dumps(obj, indent=2)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text + "\n")
        print(out / name)
    else:
        print(text)


def _config(args) -> TrialConfig:
    cfg = TrialConfig.from_json(_load_json(args.config)) if args.config else fig1_config()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.tol is not None:
        cfg = replace(cfg, solver=replace(cfg.solver, eps_abs=args.tol, eps_rel=args.tol))
    return cfg


def _solver_opts(args) -> SolverOptions:
    opts = SolverOptions()
    if args.config:
        obj = _load_json(args.config)
        if "solver" in obj:
            opts = SolverOptions.from_json(obj["solver"])
    if args.tol is not None:
        opts = replace(opts, eps_abs=args.tol, eps_rel=args.tol)
    return opts


def _instance_from(obj: dict, mode: str):
    dims = DimsSpec(tuple(obj["dims"]))
    mask = ObservationMask.from_json(obj["mask"])
    y = np.array([complex(a, b) for a, b in obj["y"]])
    bands = BandSystem.from_json(obj["bands"]) if obj.get("bands") is not None else None
    if mode == "an":
        bands = None
    elif bands is None:
        print("FS mode needs bands in the instance file", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)
    return assemble(y, mask, dims, bands)


def cmd_synth(args) -> int:
    cfg = _config(args)
    model, mask, x = draw_instance(cfg)
    obj = {
        "schema": SCHEMA,
        "config": cfg.to_json(),
        "dims": cfg.dims.to_json(),
        "bands": None if cfg.bands is None else cfg.bands.to_json(),
        "model": model.to_json(),
        "mask": mask.to_json(),
        "y": [[float(v.real), float(v.imag)] for v in apply_mask(x, mask)],
        "x_star": [[float(v.real), float(v.imag)] for v in x],
    }
    _emit(obj, args, "instance.json")
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = _instance_from(_load_json(args.instance), args.mode)
    sol = solve(inst, _solver_opts(args))
    _emit({"instance": inst.to_json(), "solution": sol.to_json()}, args, "solution.json")
    if args.strict and sol.status not in ("solved", "inaccurate"):
        return EXIT_STRICT
    return EXIT_OK


def cmd_retrieve(args) -> int:
    obj = _load_json(args.solution)
    inst_obj = obj["instance"]
    sol = SDPSolution.from_json(obj["solution"])
    dims = DimsSpec(tuple(inst_obj["dims"]))
    bands = BandSystem.from_json(inst_obj["bands"]) if inst_obj.get("bands") is not None else None
    try:
        res = retrieve(sol, dims, bands)
    except MusicError as exc:
        print(f"retrieval failed: {exc}", file=sys.stderr)
        return EXIT_STRICT if args.strict else EXIT_OK
    _emit(res.to_json(), args, "retrieval.json")
    if args.out:
        ps = pseudospectrum(sol.toeplitz(), dims, bands, res.r_hat)
        ps.to_csv(Path(args.out) / "pseudospectrum.csv")
    return EXIT_OK


def cmd_trial(args) -> int:
    cfg = _config(args)
    modes = [args.mode] if args.mode else ["fs", "an"]
    results = [run_trial(cfg, m) for m in modes]
    _emit({"config": cfg.to_json(), "results": [r.to_json() for r in results]}, args, "trial.json")
    if args.strict and any(r.solver_failed for r in results):
        return EXIT_STRICT
    return EXIT_OK


def cmd_phase(args) -> int:
    obj = _load_json(args.config) if args.config else {}
    base = TrialConfig.from_json(obj.get("trial", {}))
    if args.tol is not None:
        base = replace(base, solver=replace(base.solver, eps_abs=args.tol, eps_rel=args.tol))
    grid = PhaseGrid.from_json(obj.get("grid", {}))
    if args.seed is not None:
        grid = replace(grid, base_seed=args.seed)
    modes = tuple(obj.get("modes", ("accurate", "rough", "none")))
    res = phase_transition(grid, modes, base, jobs=args.jobs)
    files = emit_plotdata(res, args.out or ".")
    summary = {m: res.mean_rate(m) for m in modes}
    print(json.dumps({"mean_rates": summary, "files": [str(f) for f in files]}, indent=2))
    if args.strict and any(t.solver_failed for t in res.trials):
        return EXIT_STRICT
    return EXIT_OK


def cmd_certify(args) -> int:
    obj = _load_json(args.model)
    dims = DimsSpec(tuple(obj["dims"]))
    model = SpectralModel.from_json(obj["model"])
    bands = BandSystem.from_json(obj["bands"]) if obj.get("bands") is not None else BandSystem.unconstrained(dims.d)
    B = model_tensor(model, dims, use_magnitudes=True)
    report = verify_fs_certificate(B, bands, psd_tol=args.tol or 1e-8)
    out = {"certificate": report.to_json()}
    try:
        dec = vandermonde_decompose(build_level_toeplitz(B), dims)
        out["decomposition"] = {"model": dec.model.to_json(), "residual": dec.residual}
    except DecompositionError as exc:
        out["decomposition"] = {"error": str(exc)}
    _emit(out, args, "certificate.json")
    if args.strict and not report.passed:
        return EXIT_STRICT
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with 1 so that 2 stays reserved for ``--strict``."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="trial seed (phase: base seed)")
    common.add_argument("--config", default=None, help="JSON config (schema 1)")
    common.add_argument("--out", default=None, help="output directory (default: stdout)")
    common.add_argument("--mode", choices=("fs", "an"), default=None, help="solver mode")
    common.add_argument("--tol", type=float, default=None, help="solver tolerance (certify: PSD tolerance)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    common.add_argument("--strict", action="store_true", help="exit 2 on any solver failure")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = _Parser(prog="fsanm", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    s = sub.add_parser("synth", parents=[common], help="draw a model, mask and observations")
    s.set_defaults(func=cmd_synth)
    s = sub.add_parser("solve", parents=[common], help="solve the SDP for an instance file")
    s.add_argument("instance")
    s.set_defaults(func=cmd_solve)
    s = sub.add_parser("retrieve", parents=[common], help="MUSIC + gains from a solution file")
    s.add_argument("solution")
    s.set_defaults(func=cmd_retrieve)
    s = sub.add_parser("trial", parents=[common], help="run one seeded trial")
    s.set_defaults(func=cmd_trial)
    s = sub.add_parser("phase", parents=[common], help="phase-transition sweep")
    s.set_defaults(func=cmd_phase)
    s = sub.add_parser("certify", parents=[common], help="certificate and decomposition checks")
    s.add_argument("model", help="JSON with dims, model and optional bands")
    s.set_defaults(func=cmd_certify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "solve" and args.mode is None:
        args.mode = "fs"
    return int(args.func(args))


if __name__ == "__main__":
    sys.exit(main())
