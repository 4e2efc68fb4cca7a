"""Mean, friction and diffusion channels acting on the atomic center of mass.

The functions here are the readable per-channel implementations. Friction is
computed from the first-order adiabatic correction of the polarization,

    sigma_1 = -(v . grad sigma_0) / zeta,   sigma_0 = -Omega exp(i Phi) / zeta,

inserted into the drive force -2 hbar Re[(Omega grad Phi + i grad Omega) exp(-i Phi) sigma]
and into the reaction force hbar |sigma|^2 grad Delta_F. The compiled
integrator uses the expanded real forms in :mod:`fiberqed.kernels`; both are
cross-checked in the test suite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels as K
from .fiber import AtomSpec, FiberSpec
from .modes import ModeSuperposition
from .response import DriveSpec, RabiSample, rabi
from .spectral import LineField, LineState, branch_coefficients, line_field

FREE_DIFFUSION_SHAPE = K.FREE_DIFFUSION_SHAPE.copy()
FREE_DIFFUSION_SHAPE.flags.writeable = False


def _as_field(line) -> LineField:
    if isinstance(line, LineField):
        return line
    return LineField(line, np.zeros(3), np.zeros(3))


def _zeta(line) -> complex:
    return _as_field(line).state.zeta


def _grad_zeta(line) -> np.ndarray:
    lf = _as_field(line)
    return lf.grad_Gamma_F + 1j * lf.grad_Delta_F


@dataclass(frozen=True)
class ForceSample:
    """Forces at one phase-space point.

    ``friction`` is the 3x3 tensor T with F_v = T v; ``friction_at_v`` is T
    applied to the sampled velocity.
    """

    mean: np.ndarray
    friction: np.ndarray
    diffusion: np.ndarray
    friction_at_v: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @property
    def total(self) -> np.ndarray:
        return self.mean + self.friction_at_v


# -- mean forces -------------------------------------------------------------

def mean_drive_force(rs: RabiSample, line, hbar: float = 1.0) -> np.ndarray:
    """hbar / |zeta|^2 [2 grad(Phi) Omega^2 Re zeta + grad(Omega^2) Im zeta]."""
    z = _zeta(line)
    z2 = abs(z) ** 2
    return hbar / z2 * (2.0 * rs.grad_Phi * rs.Omega ** 2 * z.real + 2.0 * rs.Omega * rs.grad_Omega * z.imag)


def drive_mean_force(drive: DriveSpec, line, r, hbar: float = 1.0) -> np.ndarray:
    """Radiation pressure plus gradient force of the drive."""
    return mean_drive_force(rabi(drive, r), line, hbar)


def vacuum_reaction_force(drive: DriveSpec, line, spectral_gradient, r, hbar: float = 1.0) -> np.ndarray:
    """hbar * excitation * grad(Delta_F)."""
    z = _zeta(line)
    exc = rabi(drive, r).Omega ** 2 / abs(z) ** 2
    return hbar * exc * np.asarray(spectral_gradient, dtype=float)


# -- friction ------------------------------------------------------------------

def _sigma_parts(rs: RabiSample, line, v):
    """(e^{-i Phi} sigma_0, e^{-i Phi} sigma_1) at velocity ``v``."""
    z = _zeta(line)
    gz = _grad_zeta(line)
    v = np.asarray(v, dtype=float)
    s0 = -rs.Omega / z
    # e^{-i Phi} v.grad(sigma_0) = -(v.grad Omega)/z + Omega (v.grad z)/z^2 - i Omega (v.grad Phi)/z
    dv = -(v @ rs.grad_Omega) / z + rs.Omega * (v @ gz) / z ** 2 - 1j * rs.Omega * (v @ rs.grad_Phi) / z
    return s0, -dv / z


def friction_from_rabi(rs: RabiSample, line, v, hbar: float = 1.0, threshold_terms: bool = True) -> np.ndarray:
    if not threshold_terms:
        line = _as_field(line).state
    _, s1 = _sigma_parts(rs, line, v)
    return -2.0 * hbar * np.real((rs.Omega * rs.grad_Phi + 1j * rs.grad_Omega) * s1)


def drive_friction_force(drive: DriveSpec, line, r, v, hbar: float = 1.0,
                         threshold_terms: bool = True) -> np.ndarray:
    """Velocity-linear part of the drive force.

    Away from thresholds (grad zeta = 0) and for a standing wave this is
    -4 hbar grad(Omega) (v . grad Omega) Re zeta Im zeta / |zeta|^4.
    ``threshold_terms=False`` drops the terms carrying grad zeta.
    """
    return friction_from_rabi(rabi(drive, r), line, v, hbar, threshold_terms)


def vacuum_friction_from_rabi(rs: RabiSample, line, v, hbar: float = 1.0) -> np.ndarray:
    lf = _as_field(line)
    s0, s1 = _sigma_parts(rs, lf, v)
    return hbar * 2.0 * np.real(np.conj(s0) * s1) * lf.grad_Delta_F


def vacuum_friction_force(drive: DriveSpec, line, r, v, hbar: float = 1.0) -> np.ndarray:
    """Velocity correction of the reaction force, hbar grad(Delta_F) 2 Re(sigma_0* sigma_1)."""
    return vacuum_friction_from_rabi(rabi(drive, r), line, v, hbar)


def friction_tensor(fn, *args, **kwargs) -> np.ndarray:
    """Tensor T with fn(..., v) = T v, built column by column."""
    return np.column_stack([fn(*args, v=e, **kwargs) for e in np.eye(3)])


# -- diffusion -------------------------------------------------------------

def diffusion_free(line, atom: AtomSpec, c: float, exc: float, hbar: float = 1.0) -> np.ndarray:
    """Spontaneous-recoil diffusion 2 hbar^2 k_A^2 Gamma_F exc M with k_A = omega_A / c."""
    g = _as_field(line).state.Gamma_F
    return 2.0 * hbar ** 2 * atom.k_A(c) ** 2 * g * exc * FREE_DIFFUSION_SHAPE


def diffusion_drive_from_rabi(rs: RabiSample, line, hbar: float = 1.0, axial_only: bool = False,
                              k_A: float | None = None) -> np.ndarray:
    """2 hbar^2 Gamma_F (grad Omega o grad Omega + Omega^2 grad Phi o grad Phi) / |zeta|^2.

    This is hbar^2 (grad Omega o grad Omega / Omega^2 + grad Phi o grad Phi) 2 Gamma_F exc
    written without the division by Omega^2. ``axial_only`` keeps only the
    recoil-like z z term 2 hbar^2 k_A^2 Gamma_F exc.
    """
    z = _zeta(line)
    z2 = abs(z) ** 2
    if axial_only:
        if k_A is None:
            raise ValueError("axial-only drive diffusion needs k_A")
        out = np.zeros((3, 3))
        out[2, 2] = 2.0 * hbar ** 2 * k_A ** 2 * z.real * rs.Omega ** 2 / z2
        return out
    return 2.0 * hbar ** 2 * z.real / z2 * (
        np.outer(rs.grad_Omega, rs.grad_Omega) + rs.Omega ** 2 * np.outer(rs.grad_Phi, rs.grad_Phi)
    )


def diffusion_drive(drive: DriveSpec, line, r, hbar: float = 1.0, axial_only: bool = False,
                    k_A: float | None = None) -> np.ndarray:
    return diffusion_drive_from_rabi(rabi(drive, r), line, hbar, axial_only, k_A)


def diffusion_react(drive: DriveSpec, line, spectral_gradient, r, hbar: float = 1.0) -> np.ndarray:
    """hbar^2 (2 Gamma_F / |zeta|^2) exc grad(Delta_F) o grad(Delta_F)."""
    z = _zeta(line)
    z2 = abs(z) ** 2
    exc = rabi(drive, r).Omega ** 2 / z2
    g = np.asarray(spectral_gradient, dtype=float)
    return hbar ** 2 * (2.0 * z.real / z2) * exc * np.outer(g, g)


# -- assembled model ---------------------------------------------------------

@dataclass(frozen=True)
class ModelFlags:
    planar: bool = True
    threshold_friction: bool | None = None  # None: on when a branch is in the threshold window
    vacuum_friction: bool = True
    include_react: bool = True
    drive_axial_only: bool = False


@dataclass(frozen=True)
class PackedModel:
    fp: np.ndarray
    ip: np.ndarray
    tl: np.ndarray
    tm: np.ndarray
    ta: np.ndarray
    offsets: np.ndarray
    waists: np.ndarray
    jmaxs: np.ndarray
    cg: np.ndarray
    cd: np.ndarray

    def args(self):
        return (self.fp, self.ip, self.tl, self.tm, self.ta, self.offsets, self.waists, self.jmaxs,
                self.cg, self.cd)


@dataclass(frozen=True)
class FiberForceModel:
    """Atom + fiber + drive with everything needed to evaluate forces anywhere."""

    atom: AtomSpec
    fiber: FiberSpec
    drive: DriveSpec
    hbar: float = 1.0
    flags: ModelFlags = ModelFlags()

    def __post_init__(self):
        if self.fiber.bulk_Gamma_F is None and not any(
            b.omega_th < self.atom.omega_A for b in self.fiber.branches
        ):
            raise ValueError("no bulk broadening: set bulk_Gamma_F or add a branch below omega_A")
        if not self.hbar > 0:
            raise ValueError("hbar must be positive")

    @property
    def c(self) -> float:
        return self.fiber.c

    @property
    def mass(self) -> float:
        return self.atom.mass

    @property
    def threshold_friction(self) -> bool:
        if self.flags.threshold_friction is not None:
            return self.flags.threshold_friction
        return bool(self.fiber.active_branches(self.atom))

    def with_detuning(self, detuning: float) -> "FiberForceModel":
        from dataclasses import replace
        return replace(self, drive=replace(self.drive, detuning=float(detuning)))

    def line_field(self, r) -> LineField:
        return line_field(self.fiber, self.atom, self.drive.detuning, np.asarray(r, dtype=float)[:2])

    def sample(self, r, v=(0.0, 0.0, 0.0)) -> ForceSample:
        """All channels by the per-channel functions of this module."""
        r = np.asarray(r, dtype=float)
        v = np.asarray(v, dtype=float)
        lf = self.line_field(r)
        rs = rabi(self.drive, r)
        z = lf.state.zeta
        exc = rs.Omega ** 2 / abs(z) ** 2
        h = self.hbar
        mean = mean_drive_force(rs, lf, h) + h * exc * lf.grad_Delta_F

        def fric(v):
            out = friction_from_rabi(rs, lf, v, h, self.threshold_friction)
            if self.flags.vacuum_friction:
                out = out + vacuum_friction_from_rabi(rs, lf, v, h)
            return out

        tensor = np.column_stack([fric(e) for e in np.eye(3)])
        diff = diffusion_free(lf, self.atom, self.c, exc, h)
        diff = diff + diffusion_drive_from_rabi(rs, lf, h, self.flags.drive_axial_only, self.atom.k_A(self.c))
        if self.flags.include_react:
            diff = diff + h ** 2 * (2.0 * z.real / abs(z) ** 2) * exc * np.outer(lf.grad_Delta_F, lf.grad_Delta_F)
        if self.flags.planar:
            mean[2] = 0.0
            tensor[2, :] = 0.0
            diff[2, :] = 0.0
            diff[:, 2] = 0.0
        return ForceSample(mean, tensor, diff, tensor @ v)

    def pack(self) -> PackedModel:
        """Flat arrays for the compiled kernels."""
        fp = np.zeros(K.N_FP)
        fp[K.HBAR] = self.hbar
        fp[K.MASS] = self.atom.mass
        fp[K.DRIVE_SCALE] = self.drive.scale
        fp[K.K_DRIVE] = self.drive.k
        fp[K.GAMMA0] = self.fiber.bulk_Gamma_F if self.fiber.bulk_Gamma_F is not None else 0.0
        fp[K.DELTA0] = self.fiber.delta_F
        fp[K.DETUNING] = self.drive.detuning
        fp[K.K_ATOM] = self.atom.k_A(self.c)
        coeffs = [(b, cg, cd) for b, cg, cd in branch_coefficients(self.fiber, self.atom) if cg or cd]
        profiles: list[ModeSuperposition] = [self.drive.profile] + [b.profile for b, _, _ in coeffs]
        ip = np.zeros(K.N_IP, dtype=np.int64)
        ip[K.WAVE] = K.STANDING if self.drive.wave_kind == "standing" else K.TRAVELLING
        ip[K.N_BRANCH] = len(coeffs)
        ip[K.DRIVE_AXIAL_ONLY] = int(self.flags.drive_axial_only)
        ip[K.THRESHOLD_FRICTION] = int(self.threshold_friction)
        ip[K.VACUUM_FRICTION] = int(self.flags.vacuum_friction)
        ip[K.PLANAR] = int(self.flags.planar)
        ip[K.INCLUDE_REACT] = int(self.flags.include_react)
        tl, tm, ta, offsets = [], [], [], [0]
        for p in profiles:
            ptl, ptm, pta = p._packed
            tl.extend(ptl)
            tm.extend(ptm)
            ta.extend(pta)
            offsets.append(len(tl))
        return PackedModel(
            fp, ip,
            np.array(tl, dtype=np.int64), np.array(tm, dtype=np.int64), np.array(ta, dtype=np.float64),
            np.array(offsets, dtype=np.int64),
            np.array([p.waist for p in profiles], dtype=np.float64),
            np.array([p.max_index for p in profiles], dtype=np.int64),
            np.array([cg for _, cg, _ in coeffs] + [0.0]),
            np.array([cd for _, _, cd in coeffs] + [0.0]),
        )

    def kernel_sample(self, r, v=(0.0, 0.0, 0.0), packed: PackedModel | None = None) -> ForceSample:
        """Same as :meth:`sample`, evaluated by the compiled kernels."""
        pk = packed or self.pack()
        r = np.asarray(r, dtype=float)
        v = np.asarray(v, dtype=float)
        jm = int(pk.jmaxs.max())
        ux = np.empty(jm + 1)
        uy = np.empty(jm + 1)
        lf = np.empty(K.N_LF)
        K.local_field(r[0], r[1], r[2], pk.fp, pk.ip, pk.tl, pk.tm, pk.ta, pk.offsets, pk.waists,
                      pk.jmaxs, pk.cg, pk.cd, ux, uy, lf)
        mean = np.empty(3)
        K.mean_force(lf, pk.fp, pk.ip, mean)
        tensor = np.empty((3, 3))
        col = np.empty(3)
        for i, e in enumerate(np.eye(3)):
            K.friction_force(lf, e, pk.fp, pk.ip, col)
            tensor[:, i] = col
        diff = np.empty((3, 3))
        K.diffusion_tensor(lf, pk.fp, pk.ip, diff)
        return ForceSample(mean, tensor, diff, tensor @ v)


def total_force_field(model: FiberForceModel, r, v=(0.0, 0.0, 0.0)) -> ForceSample:
    """Mean (drive + reaction), friction and diffusion (free + drive + reaction) at (r, v)."""
    return model.sample(r, v)


def force_map(model: FiberForceModel, half_width: float, points: int, z: float = 0.0, v=(0.0, 0.0, 0.0)):
    """Rows (x, y, F[3], friction[9], D[9]) on a square grid, x varying slowest."""
    pk = model.pack()
    g = np.linspace(-half_width, half_width, points)
    rows = []
    for x in g:
        for y in g:
            s = model.kernel_sample((x, y, z), v, pk)
            rows.append((x, y, *s.mean, *s.friction.ravel(), *s.diffusion.ravel()))
    return rows


def gradient_map(model: FiberForceModel, half_width: float, points: int, z: float = 0.0):
    """Rows (x, y, gx, gy, gz) of grad(Omega^2) normalised by 2 |grad Phi| Omega_max^2."""
    g = np.linspace(-half_width, half_width, points)
    samples = [[rabi(model.drive, (x, y, z)) for y in g] for x in g]
    om_max2 = max(s.Omega ** 2 for row in samples for s in row) or 1.0
    kz = abs(model.drive.k) or 1.0
    rows = []
    for i, x in enumerate(g):
        for j, y in enumerate(g):
            s = samples[i][j]
            grad = 2.0 * s.Omega * s.grad_Omega / (2.0 * kz * om_max2)
            rows.append((x, y, *grad))
    return rows
