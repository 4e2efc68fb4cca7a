"""Stochastic RK4 integration of the center-of-mass Langevin equation.

Two noise schemes are available:

``physical``
    After each deterministic RK4 step the momentum receives an impulse with
    zero mean and covariance 2 D dt, built from independent uniform draws of
    unit variance (support [-sqrt(3), sqrt(3)]) through a semidefinite
    Cholesky factor of 2 D dt.
``paper_compat``
    A noise force held constant over the step and added to every RK4 stage.
    Axis i gets a uniform draw of variance |(D dt) . unit(F)|_i, where F is
    the deterministic force at the start of the step. The force amplitude
    makes the heating depend on the step size; the mode exists to reproduce
    published trajectories.

Random numbers come from a Philox counter-based generator; every trajectory
owns a substream derived from ``(seed, stream key)`` so results do not depend
on scheduling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from . import kernels as K
from .forces import FiberForceModel

SQRT3 = math.sqrt(3.0)
NOISE_MODES = {"none": K.NOISE_NONE, "physical": K.NOISE_PHYSICAL, "paper_compat": K.NOISE_PAPER}


class IntegrationError(RuntimeError):
    """A step produced a non-finite state or an invalid diffusion tensor."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass(frozen=True)
class PhaseState:
    r: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float).reshape(3)
        v = np.asarray(self.v, dtype=float).reshape(3)
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(v)) and math.isfinite(self.t)):
            raise ValueError("phase-space state must be finite")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "v", v)


def normalize_noise_mode(mode: str) -> str:
    m = mode.replace("-", "_").lower()
    if m not in NOISE_MODES:
        raise ValueError(f"noise mode must be one of {sorted(NOISE_MODES)}, got {mode!r}")
    return m


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float
    t_max: float
    noise_mode: str = "physical"
    seed: int = 0
    core_exit_radius: float = math.inf
    stop_on_exit: bool = True
    decimate: int = 1

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError("dt must be positive")
        if not self.t_max >= self.dt:
            raise ValueError("t_max must be >= dt")
        if self.decimate < 1:
            raise ValueError("decimate must be >= 1")
        if not self.core_exit_radius > 0:
            raise ValueError("core_exit_radius must be positive")
        object.__setattr__(self, "noise_mode", normalize_noise_mode(self.noise_mode))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def nsteps(self) -> int:
        return int(round(self.t_max / self.dt))


@dataclass
class Trajectory:
    """Recorded samples; ``exit_time`` is set iff the core radius was crossed."""

    t: np.ndarray
    r: np.ndarray
    v: np.ndarray
    t_max: float
    exit_time: float | None = None
    status: str = "ok"
    meta: dict = field(default_factory=dict)

    @property
    def samples(self) -> list[PhaseState]:
        return [PhaseState(r, v, t) for t, r, v in zip(self.t, self.r, self.v)]

    @property
    def final(self) -> PhaseState:
        return PhaseState(self.r[-1], self.v[-1], self.t[-1])

    def to_csv(self, path) -> None:
        from .io import write_csv
        rows = [(t, *r, *v) for t, r, v in zip(self.t, self.r, self.v)]
        write_csv(path, ("t", "x", "y", "z", "vx", "vy", "vz"), rows)


# -- random streams ----------------------------------------------------------

def make_rng(seed: int, stream: Sequence[int] = ()) -> np.random.Generator:
    """Philox generator for substream ``stream`` of ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))


def step_uniforms(rng: np.random.Generator, nsteps: int) -> np.ndarray:
    """Unit-variance uniforms on [-sqrt(3), sqrt(3)], one triple per step."""
    return rng.uniform(-SQRT3, SQRT3, size=(nsteps, 3))


# -- noise -------------------------------------------------------------------

def psd_factor(a: np.ndarray, n: int = 3) -> np.ndarray:
    """Lower-triangular L with L L^T = a on the leading n x n block."""
    out = np.zeros((3, 3))
    a3 = np.zeros((3, 3))
    a3[:n, :n] = np.asarray(a, dtype=float)[:n, :n]
    if not K.psd_factor(a3, n, out):
        raise ValueError("diffusion tensor is not positive semidefinite")
    return out


def noise_kick(D, dt: float, rng: np.random.Generator, mode: str = "physical", force=None,
               size: int | None = None, n: int = 3) -> np.ndarray:
    """Draw noise for one step (or ``size`` independent steps).

    Physical mode returns the momentum impulse (covariance 2 D dt); paper
    mode returns the constant noise force of the step, which needs the
    deterministic ``force``.
    """
    mode = normalize_noise_mode(mode)
    if not dt > 0:
        raise ValueError("dt must be positive")
    D = np.asarray(D, dtype=float)
    if not np.allclose(D, D.T, rtol=1e-12, atol=0.0):
        raise ValueError("diffusion tensor must be symmetric")
    shape = (3,) if size is None else (size, 3)
    u = rng.uniform(-SQRT3, SQRT3, size=shape)
    if mode == "none":
        return np.zeros(shape)
    if mode == "physical":
        L = psd_factor(2.0 * D * dt, n)
        return u @ L.T
    psd_factor(D, n)
    if force is None:
        raise ValueError("paper-compatible noise needs the deterministic force")
    f = np.zeros(3)
    f[:n] = np.asarray(force, dtype=float)[:n]
    norm = float(np.linalg.norm(f))
    if norm < 1e-20:
        return np.zeros(shape)
    w = np.zeros(3)
    w[:n] = np.abs((D[:n, :n] * dt) @ (f[:n] / norm))
    return u * np.sqrt(w)


# -- generic models ------------------------------------------------------------

class ForceModel(Protocol):
    mass: float
    planar: bool

    def force(self, r: np.ndarray, v: np.ndarray) -> np.ndarray: ...

    def diffusion(self, r: np.ndarray, v: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class ConstantFieldModel:
    """Spatially uniform force and diffusion (flat profile)."""

    force_vector: np.ndarray
    diffusion_tensor: np.ndarray
    mass: float
    planar: bool = False

    def force(self, r, v):
        return np.asarray(self.force_vector, dtype=float)

    def diffusion(self, r, v):
        return np.asarray(self.diffusion_tensor, dtype=float)


@dataclass(frozen=True)
class CallableModel:
    """Wrap plain callables ``force(r, v)`` and optional ``diffusion(r, v)``."""

    force_fn: Callable
    mass: float
    diffusion_fn: Callable | None = None
    planar: bool = False

    def force(self, r, v):
        return np.asarray(self.force_fn(r, v), dtype=float)

    def diffusion(self, r, v):
        if self.diffusion_fn is None:
            return np.zeros((3, 3))
        return np.asarray(self.diffusion_fn(r, v), dtype=float)


def rk4_step(state: PhaseState, force_fn: Callable, dt: float, mass: float, noise_force=None) -> PhaseState:
    """Classic RK4 on (r, v) with ``noise_force`` held constant over the step."""
    if not (dt > 0 and mass > 0):
        raise ValueError("dt and mass must be positive")
    nf = np.zeros(3) if noise_force is None else np.asarray(noise_force, dtype=float)
    r, v = state.r, state.v

    def acc(rr, vv):
        f = np.asarray(force_fn(rr, vv), dtype=float)
        if not np.all(np.isfinite(f)):
            raise IntegrationError(f"non-finite force at r={rr}, v={vv}")
        return (f + nf) / mass

    k1r, k1v = v, acc(r, v)
    k2r, k2v = v + 0.5 * dt * k1v, acc(r + 0.5 * dt * k1r, v + 0.5 * dt * k1v)
    k3r, k3v = v + 0.5 * dt * k2v, acc(r + 0.5 * dt * k2r, v + 0.5 * dt * k2v)
    k4r, k4v = v + dt * k3v, acc(r + dt * k3r, v + dt * k3v)
    return PhaseState(
        r + dt * (k1r + 2.0 * k2r + 2.0 * k3r + k4r) / 6.0,
        v + dt * (k1v + 2.0 * k2v + 2.0 * k3v + k4v) / 6.0,
        state.t + dt,
    )


def _record_capacity(nsteps, decimate):
    return nsteps // decimate + 3


def _simulate_python(model: ForceModel, config: IntegratorConfig, r0, v0, uniforms) -> Trajectory:
    """Reference loop with the same step semantics as :func:`kernels.integrate`."""
    n = 2 if model.planar else 3
    mode = config.noise_mode
    dt = config.dt
    nsteps = config.nsteps
    r = np.array(r0, dtype=float)
    v = np.array(v0, dtype=float)
    ts, rs, vs = [0.0], [r.copy()], [v.copy()]
    exit_step = -1
    status = "ok"
    R2 = config.core_exit_radius ** 2

    def deterministic(rr, vv):
        f = np.array(model.force(rr, vv), dtype=float)
        if model.planar:
            f[2] = 0.0
        return f

    if r[0] ** 2 + r[1] ** 2 > R2:
        exit_step = 0
    if not (exit_step == 0 and config.stop_on_exit):
        for step in range(nsteps):
            f0 = deterministic(r, v)
            noise = np.zeros(3)
            if mode != "none":
                D = np.array(model.diffusion(r, v), dtype=float)
                if model.planar:
                    D[2, :] = 0.0
                    D[:, 2] = 0.0
            if mode == "paper_compat":
                out = np.zeros(3)
                K.compat_noise(D, dt, f0, uniforms[step], n, out)
                noise = out
            try:
                new = rk4_step(PhaseState(r, v), deterministic, dt, model.mass, noise)
            except (IntegrationError, ValueError):
                status = "nonfinite"
                break
            r, v = new.r.copy(), new.v.copy()
            if mode == "physical":
                try:
                    L = psd_factor(2.0 * D * dt, n)
                except ValueError:
                    status = "not_psd"
                    break
                v += (L[:, :n] @ uniforms[step][:n]) / model.mass
            if not (np.all(np.isfinite(r)) and np.all(np.isfinite(v))):
                status = "nonfinite"
                break
            exited = False
            if exit_step < 0 and r[0] ** 2 + r[1] ** 2 > R2:
                exit_step = step + 1
                exited = True
            if (step + 1) % config.decimate == 0 or step == nsteps - 1 or (exited and config.stop_on_exit):
                ts.append((step + 1) * dt)
                rs.append(r.copy())
                vs.append(v.copy())
            if exited and config.stop_on_exit:
                break
    return Trajectory(np.array(ts), np.array(rs), np.array(vs), config.nsteps * dt,
                      None if exit_step < 0 else exit_step * dt, status)


_STATUS = {K.STATUS_OK: "ok", K.STATUS_NONFINITE: "nonfinite", K.STATUS_NOT_PSD: "not_psd"}


def _simulate_kernel(model: FiberForceModel, config: IntegratorConfig, r0, v0, uniforms, packed=None):
    pk = packed or model.pack()
    nsteps = config.nsteps
    cap = _record_capacity(nsteps, config.decimate)
    ts = np.empty(cap)
    rs = np.empty((cap, 3))
    vs = np.empty((cap, 3))
    n_rec, exit_step, status = K.integrate(
        np.asarray(r0, dtype=float).copy(), np.asarray(v0, dtype=float).copy(), config.dt, nsteps,
        config.decimate, NOISE_MODES[config.noise_mode], float(config.core_exit_radius),
        bool(config.stop_on_exit), uniforms, *pk.args(), ts, rs, vs,
    )
    return Trajectory(ts[:n_rec].copy(), rs[:n_rec].copy(), vs[:n_rec].copy(), nsteps * config.dt,
                      None if exit_step < 0 else exit_step * config.dt, _STATUS[int(status)])


def simulate_trajectory(model, config: IntegratorConfig, r0, v0, stream: Sequence[int] = (),
                        packed=None, raise_on_failure: bool = True) -> Trajectory:
    """Integrate one trajectory until ``t_max`` or core exit.

    ``model`` is a :class:`FiberForceModel` (compiled path) or any object with
    ``force``, ``diffusion``, ``mass`` and ``planar`` (reference loop). The
    random substream is ``(config.seed, *stream)``. A failed step stops the run;
    the partial trajectory is attached to the raised :class:`IntegrationError`
    unless ``raise_on_failure`` is False.
    """
    r0 = PhaseState(r0, v0).r
    v0 = PhaseState(r0, v0).v
    nsteps = config.nsteps
    if config.noise_mode == "none":
        uniforms = np.zeros((max(nsteps, 1), 3))
    else:
        uniforms = step_uniforms(make_rng(config.seed, stream), max(nsteps, 1))
    if isinstance(model, FiberForceModel):
        traj = _simulate_kernel(model, config, r0, v0, uniforms, packed)
    else:
        traj = _simulate_python(model, config, r0, v0, uniforms)
    traj.meta.update(seed=config.seed, stream=list(stream), noise_mode=config.noise_mode,
                     dt=config.dt, t_max=config.t_max, core_exit_radius=config.core_exit_radius)
    if traj.status != "ok" and raise_on_failure:
        raise IntegrationError(f"integration stopped at t={traj.t[-1]:.6g}: {traj.status}", traj)
    return traj


def trapping_time(traj: Trajectory, core_exit_radius: float | None = None) -> tuple[float, bool]:
    """(first exit time, censored). Never exiting gives (t_max, True)."""
    if core_exit_radius is None:
        return (traj.t_max, True) if traj.exit_time is None else (traj.exit_time, False)
    rr = np.hypot(traj.r[:, 0], traj.r[:, 1])
    out = np.nonzero(rr > core_exit_radius)[0]
    if out.size == 0:
        return traj.t_max, True
    return float(traj.t[out[0]]), False
