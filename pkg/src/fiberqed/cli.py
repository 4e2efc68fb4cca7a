"""Command-line entry point: ``fiberqed <subcommand> [options]``.

Subcommands write CSV/JSON files into ``--out`` (default: current directory).
Without ``--config`` the built-in caption parameter set is used.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import io as fio
from .config import ConfigError, RunConfig
from .ensemble import SweepSpec, run_sweep, spearman_trend, write_summary
from .forces import force_map
from .langevin import simulate_trajectory
from .modes import grid_rows
from .spectral import spectrum_scan

FORCE_COLUMNS = (
    ["x", "y", "Fx", "Fy", "Fz"]
    + [f"fric{a}{b}" for a in "xyz" for b in "xyz"]
    + [f"D{a}{b}" for a in "xyz" for b in "xyz"]
)
DEFAULT_SWEEP_FACTORS = (0.25, 0.5, 1.0, 2.0, 4.0)


def _overrides(cfg: RunConfig, args) -> RunConfig:
    sections = {}
    if args.seed is not None:
        sections["integrator"] = {"seed": args.seed}
        sections["sweep"] = {"base_seed": args.seed}
    if args.noise_mode is not None:
        sections.setdefault("integrator", {})["noise_mode"] = args.noise_mode
    return cfg.with_overrides(**sections) if sections else cfg


def cmd_modes(cfg: RunConfig, out: Path, args) -> dict:
    half = cfg.get("grid", "half_width")
    points = cfg.get("grid", "points")
    modes = {"drive": cfg.drive().profile}
    waist = cfg.drive_waist()
    for label, m in cfg.mode_table().items():
        modes[label] = m.with_waist(waist)
    files = []
    for label, mode in modes.items():
        path = out / f"modes_{label}.csv"
        fio.write_csv(path, ("x", "y", "f", "dfx", "dfy"), grid_rows(mode, half, points))
        files.append(path.name)
    return {"files": files}


def cmd_spectrum(cfg: RunConfig, out: Path, args) -> dict:
    atom = cfg.atom()
    fiber = cfg.fiber()
    axis = cfg.get("scan", "omega_th")
    if axis is None:
        axis = list(np.linspace(0.9, 1.1, 41) * atom.omega_A)
    cK = cfg.get("scan", "cK")
    if cK is None:
        cK = fiber.c * fiber.K
    if not cK > 0:
        raise ConfigError("spectrum needs a positive cK ([scan] cK or [fiber] K)")
    f = cfg.get("scan", "f")
    if f is None:
        f = cfg.drive().profile.peak_amplitude
    scan = spectrum_scan(axis, atom, cK, f * f, cfg.get("scan", "A_n"), cfg.drive_waist(),
                         fiber.quad_epsabs, fiber.quad_epsrel)
    rows = zip(scan.axis, scan.Gamma_branch, scan.Delta_branch)
    fio.write_csv(out / "spectrum.csv", ("omega_th", "Gamma_branch", "Delta_branch"), rows)
    return {"files": ["spectrum.csv"], "A_A": scan.A_A, "f2": scan.f2, "A_n": scan.A_n}


def cmd_forces(cfg: RunConfig, out: Path, args) -> dict:
    model = cfg.model()
    rows = force_map(model, cfg.get("grid", "half_width"), cfg.get("grid", "points"), cfg.get("grid", "z"))
    fio.write_csv(out / "forces.csv", FORCE_COLUMNS, rows)
    return {"files": ["forces.csv"]}


def cmd_simulate(cfg: RunConfig, out: Path, args) -> dict:
    model = cfg.model()
    ic = cfg.integrator()
    r0, v0 = cfg.initial_state()
    traj = simulate_trajectory(model, ic, r0, v0, raise_on_failure=False)
    traj.to_csv(out / "trajectory.csv")
    meta = {
        "config": cfg.settings, "seed": ic.seed, "noise_mode": ic.noise_mode, "status": traj.status,
        "exit_time": traj.exit_time, "censored": traj.exit_time is None, "t_max": traj.t_max,
        "samples": len(traj.t),
    }
    fio.write_json(out / "trajectory.json", meta)
    if traj.status != "ok":
        raise RuntimeError(f"integration stopped early: {traj.status} (partial trajectory written)")
    return {"files": ["trajectory.csv", "trajectory.json"], "exit_time": traj.exit_time}


def cmd_sweep(cfg: RunConfig, out: Path, args) -> dict:
    model = cfg.model()
    values = cfg.get("sweep", "values")
    parameter = cfg.get("sweep", "parameter")
    if values is None:
        if parameter != "detuning":
            raise ConfigError("sweep.values is required for parameters other than detuning")
        values = [f * model.drive.detuning for f in DEFAULT_SWEEP_FACTORS]
    spec = SweepSpec(parameter, values, cfg.get("sweep", "repetitions"), cfg.get("sweep", "base_seed"))
    r0, v0 = cfg.initial_state()
    res = run_sweep(model, spec, cfg.integrator(), r0, v0, threads=args.threads)
    csv_path, json_path = write_summary(res, out)
    info = {"files": [csv_path.name, json_path.name]}
    if len(values) >= 3 and all(s.n for s in res.stats):
        t = spearman_trend(res)
        info["spearman"] = {"rho": t.rho, "lower": t.lower, "upper": t.upper}
    return info


COMMANDS = {
    "modes": (cmd_modes, "export mode profiles and gradients on a grid"),
    "spectrum": (cmd_spectrum, "scan branch broadening and shift over threshold frequency"),
    "forces": (cmd_forces, "export force, friction and diffusion field maps"),
    "simulate": (cmd_simulate, "integrate one trajectory"),
    "sweep": (cmd_sweep, "trapping-time statistics over a parameter sweep"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="config file (default: built-in caption parameters)")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--seed", type=int, help="override the random seed")
    common.add_argument("--noise-mode", choices=("physical", "paper-compat", "none"), help="noise scheme")
    common.add_argument("--threads", type=int, help="worker threads (default: $FIBERQED_THREADS or 1)")
    parser = argparse.ArgumentParser(prog="fiberqed", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="{" + ",".join(COMMANDS) + "}")
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def _error_json(exc: BaseException) -> str:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ConfigError):
        payload["problems"] = exc.problems
    return json.dumps(payload, sort_keys=True)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is None and os.environ.get("FIBERQED_THREADS"):
        args.threads = int(os.environ["FIBERQED_THREADS"])
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig.caption()
        cfg = _overrides(cfg, args)
        args.out.mkdir(parents=True, exist_ok=True)
        info = COMMANDS[args.command][0](cfg, args.out, args)
    except Exception as exc:  # reported as JSON for scripted callers
        print(_error_json(exc), file=sys.stderr)
        return 1
    print(json.dumps({"command": args.command, **fio._plain(info)}, sort_keys=True))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
