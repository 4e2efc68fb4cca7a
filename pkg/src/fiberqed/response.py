"""Drive field and the low-saturation steady state of the atomic polarization."""
from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .modes import ModeSuperposition, profile_value_grad
from .spectral import LineState

SATURATION_WARNING = 0.1


class SaturationWarning(UserWarning):
    """Excitation is outside the low-saturation regime the model assumes."""


@dataclass(frozen=True)
class DriveSpec:
    """Coherent drive in one fiber mode.

    Parameters
    ----------
    profile : ModeSuperposition
        Transverse profile of the driven mode.
    amplitude : float
        Coherent amplitude alpha.
    g : float
        Atom-mode coupling g_dr.
    detuning : float
        Drive detuning Delta_{A,dr} [rad/us].
    wave_kind : {"travelling", "standing"}
        Travelling waves carry the phase k z; standing waves have a cos(k z)
        amplitude and zero phase.
    k : float
        Axial wavenumber [1/um].
    normalization : {"area", "peak"}
        ``area`` uses the L2-normalised profile f; ``peak`` rescales it so
        that max |f| = 1, making alpha g the peak Rabi frequency.
    global_phase : float
        Constant drive phase theta (enters sigma only as exp(i theta)).
    """

    profile: ModeSuperposition
    amplitude: float
    g: float
    detuning: float
    wave_kind: str = "travelling"
    k: float = 0.0
    normalization: str = "area"
    global_phase: float = 0.0

    def __post_init__(self):
        if self.wave_kind not in ("travelling", "standing"):
            raise ValueError(f"wave_kind must be 'travelling' or 'standing', got {self.wave_kind!r}")
        if self.normalization not in ("area", "peak"):
            raise ValueError(f"normalization must be 'area' or 'peak', got {self.normalization!r}")
        for name in ("amplitude", "g", "detuning", "k", "global_phase"):
            v = getattr(self, name)
            if isinstance(v, complex) or not math.isfinite(v):
                raise ValueError(f"{name} must be a finite real number, got {v!r}")

    @property
    def scale(self) -> float:
        """Factor s with Omega = s f(r_T) (times cos(k z) for standing waves)."""
        s = self.amplitude * self.g
        if self.normalization == "peak":
            s /= self.profile.peak_amplitude
        return s


class RabiSample(NamedTuple):
    Omega: float
    Phi: float
    grad_Phi: np.ndarray
    grad_Omega: np.ndarray


def rabi(drive: DriveSpec, r) -> RabiSample:
    """Rabi frequency, phase and their gradients at ``r = (x, y, z)``."""
    x, y, z = (float(v) for v in r)
    f, fx, fy = (float(v) for v in profile_value_grad(drive.profile, x, y))
    s = drive.scale
    k = drive.k
    if drive.wave_kind == "standing":
        c, sn = math.cos(k * z), math.sin(k * z)
        om = s * f * c
        g_om = np.array([s * fx * c, s * fy * c, -s * f * k * sn])
        return RabiSample(om, 0.0, np.zeros(3), g_om)
    return RabiSample(s * f, k * z, np.array([0.0, 0.0, k]), np.array([s * fx, s * fy, 0.0]))


def _zeta(line) -> complex:
    z = line.zeta if isinstance(line, LineState) else complex(line)
    if z.real <= 0:
        raise ValueError(f"Re zeta must be positive, got {z}")
    return z


def steady_polarization(Omega, Phi, line) -> complex:
    """sigma = -Omega exp(i Phi) / zeta for a Rabi frequency and phase."""
    return -Omega * cmath.exp(1j * Phi) / _zeta(line)


def sigma_steady(drive: DriveSpec, line, r) -> complex:
    rs = rabi(drive, r)
    return steady_polarization(rs.Omega, rs.Phi + drive.global_phase, line)


def excitation(Omega, line, warn: bool = True) -> float:
    """|Omega|^2 / |zeta|^2."""
    z = _zeta(line)
    exc = abs(Omega) ** 2 / (z.real ** 2 + z.imag ** 2)
    if warn and exc > SATURATION_WARNING:
        warnings.warn(f"excitation {exc:.3g} exceeds the low-saturation bound {SATURATION_WARNING}",
                      SaturationWarning, stacklevel=2)
    return exc


def excitation_steady(drive: DriveSpec, line, r, warn: bool = True) -> float:
    return excitation(rabi(drive, r).Omega, line, warn=warn)


def polarization_noise_strength(line) -> float:
    """2 Gamma_F / |zeta|^2, the weight of the white polarization noise."""
    z = _zeta(line)
    return 2.0 * z.real / (z.real ** 2 + z.imag ** 2)
