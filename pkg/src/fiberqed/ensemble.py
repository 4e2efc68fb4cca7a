"""Monte-Carlo parameter sweeps of trapping time."""
from __future__ import annotations

import hashlib
import os
import struct
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import ConstantInputWarning, spearmanr

from . import io as fio
from .forces import FiberForceModel
from .langevin import IntegrationError, IntegratorConfig, simulate_trajectory

SUMMARY_COLUMNS = ("param_value", "n", "mean_trap_time", "std_trap_time", "censored_n")


def _set_detuning(model, v):
    return model.with_detuning(v)


def _set_bulk(model, v):
    return replace(model, fiber=replace(model.fiber, bulk_Gamma_F=float(v)))


def _set_g(model, v):
    return replace(model, drive=replace(model.drive, g=float(v)))


def _set_mass(model, v):
    return replace(model, atom=replace(model.atom, mass=float(v)))


PARAMETERS = {
    "detuning": _set_detuning,
    "bulk_Gamma_F": _set_bulk,
    "g": _set_g,
    "mass": _set_mass,
}


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple
    repetitions: int = 1
    base_seed: int = 0

    def __post_init__(self):
        if self.parameter not in PARAMETERS:
            raise ValueError(f"unknown sweep parameter {self.parameter!r}; expected one of {sorted(PARAMETERS)}")
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ValueError("sweep values must not be empty")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        object.__setattr__(self, "values", vals)


def value_key(value: float) -> int:
    """Stable 32-bit key of a parameter value (equal values share a key)."""
    v = float(value) + 0.0  # folds -0.0 into 0.0
    return int.from_bytes(hashlib.sha256(struct.pack("<d", v)).digest()[:4], "little")


def stream_for(value: float, repetition: int) -> tuple[int, int]:
    return value_key(value), int(repetition)


@dataclass
class ValueStats:
    value: float
    times: list = field(default_factory=list)
    censored: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.times)

    @property
    def mean(self) -> float:
        return float(np.mean(self.times)) if self.times else float("nan")

    @property
    def std(self) -> float:
        return float(np.std(self.times)) if self.times else float("nan")

    @property
    def sem(self) -> float:
        return self.std / np.sqrt(self.n) if self.n else float("nan")

    @property
    def censored_n(self) -> int:
        return int(sum(self.censored))


@dataclass
class SweepResult:
    sweep: SweepSpec
    config: IntegratorConfig
    stats: list

    @property
    def total_trajectories(self) -> int:
        return sum(s.n for s in self.stats)


def default_threads() -> int:
    env = os.environ.get("FIBERQED_THREADS")
    if env:
        return max(1, int(env))
    return 1


def run_sweep(model: FiberForceModel, sweep: SweepSpec, config: IntegratorConfig, r0, v0,
              threads: int | None = None) -> SweepResult:
    """Trapping times for every (value, repetition) pair.

    Each trajectory draws from substream ``(base_seed; value_key(value), rep)``
    so results do not depend on thread count or ordering, and repeated values
    give identical statistics. Failed trajectories are recorded, not fatal.
    """
    setter = PARAMETERS[sweep.parameter]
    cfg = replace(config, seed=sweep.base_seed)
    models = [setter(model, v) for v in sweep.values]
    packed = [m.pack() if isinstance(m, FiberForceModel) else None for m in models]
    jobs = [(i, rep) for i in range(len(sweep.values)) for rep in range(sweep.repetitions)]

    def run(job):
        i, rep = job
        try:
            tr = simulate_trajectory(models[i], cfg, r0, v0, stream_for(sweep.values[i], rep), packed[i])
        except (IntegrationError, ValueError, ArithmeticError) as exc:
            return job, None, str(exc)
        if tr.exit_time is None:
            return job, (tr.t_max, True), None
        return job, (tr.exit_time, False), None

    threads = threads or default_threads()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    stats = [ValueStats(v) for v in sweep.values]
    for (i, rep), res, err in results:  # jobs are returned in submission order
        if res is None:
            stats[i].failures.append({"repetition": rep, "error": err})
        else:
            stats[i].times.append(res[0])
            stats[i].censored.append(res[1])
    return SweepResult(sweep, cfg, stats)


def summarize(result: SweepResult):
    """(csv rows, json dict) with per-value mean, std, sem and censoring."""
    if not result.stats:
        raise ValueError("empty sweep result")
    rows = [(s.value, s.n, s.mean, s.std, s.censored_n) for s in result.stats]
    values = []
    for s in result.stats:
        values.append({
            "param_value": s.value, "n": s.n, "mean_trap_time": s.mean, "std_trap_time": s.std,
            "sem_trap_time": s.sem, "censored_n": s.censored_n,
            "censored_fraction": s.censored_n / s.n if s.n else float("nan"),
            "all_censored": bool(s.n and s.censored_n == s.n),
            "failures": s.failures,
        })
    summary = {
        "parameter": result.sweep.parameter,
        "repetitions": result.sweep.repetitions,
        "base_seed": result.sweep.base_seed,
        "t_max": result.config.nsteps * result.config.dt,
        "noise_mode": result.config.noise_mode,
        "values": values,
        "all_censored": all(v["all_censored"] for v in values),
        "total_trajectories": result.total_trajectories,
    }
    return rows, summary


def write_summary(result: SweepResult, out_dir) -> tuple[Path, Path]:
    rows, summary = summarize(result)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fio.write_csv(out / "sweep_summary.csv", SUMMARY_COLUMNS, rows)
    fio.write_json(out / "sweep_summary.json", summary)
    return out / "sweep_summary.csv", out / "sweep_summary.json"


@dataclass(frozen=True)
class TrendTest:
    rho: float
    lower: float
    upper: float
    n_boot: int

    @property
    def positive(self) -> bool:
        return self.lower > 0


def spearman_trend(result: SweepResult, n_boot: int = 2000, seed: int = 0, level: float = 0.95) -> TrendTest:
    """Spearman rho between parameter value and mean trapping time, with a bootstrap interval.

    Repetitions are resampled with replacement within each value; the
    interval is the central ``level`` percentile range of rho.
    """
    vals = np.array([s.value for s in result.stats])
    times = [np.asarray(s.times, dtype=float) for s in result.stats]
    if len(vals) < 3 or any(t.size == 0 for t in times):
        raise ValueError("trend test needs at least three values with data")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    boot = np.empty(n_boot)
    with warnings.catch_warnings():
        # constant means (e.g. every trajectory censored) give an undefined rho
        warnings.simplefilter("ignore", ConstantInputWarning)
        rho = float(spearmanr(vals, [t.mean() for t in times]).statistic)
        for b in range(n_boot):
            means = [t[rng.integers(0, t.size, t.size)].mean() for t in times]
            r = spearmanr(vals, means).statistic
            boot[b] = 0.0 if np.isnan(r) else r
    a = (1.0 - level) / 2.0
    lo, hi = np.quantile(boot, [a, 1.0 - a])
    return TrendTest(rho, float(lo), float(hi), n_boot)


def pooled_trend(result: SweepResult):
    """Spearman rho over all (value, trapping time) pairs."""
    x = np.concatenate([[s.value] * s.n for s in result.stats])
    y = np.concatenate([s.times for s in result.stats])
    return spearmanr(x, y)
