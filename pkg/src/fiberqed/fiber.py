"""Hollow-core fiber branches: dispersion, loss and atom-mode coupling.

Units are um and us with hbar = 1 by default, so angular frequencies are in
rad/us and the vacuum speed of light is 2.99792458e8 um/us. A ``natural``
preset with c = 1 supports the dimensionless omega_A = 1 conventions used for
threshold scans.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .modes import ModeSuperposition

C_UM_PER_US = 2.99792458e8


class DivergentLoss(ArithmeticError):
    """Loss rate requested at k = 0, where it diverges."""


@dataclass(frozen=True)
class UnitSystem:
    name: str
    c: float
    hbar: float = 1.0

    def __post_init__(self):
        if not (self.c > 0 and self.hbar > 0):
            raise ValueError("c and hbar must be positive")


UNIT_PRESETS = {
    "si-micro": UnitSystem("si-micro", C_UM_PER_US, 1.0),
    "natural": UnitSystem("natural", 1.0, 1.0),
}


def unit_system(name: str, c: float | None = None, hbar: float | None = None) -> UnitSystem:
    try:
        base = UNIT_PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown unit preset {name!r}; expected one of {sorted(UNIT_PRESETS)}") from None
    return UnitSystem(name, base.c if c is None else float(c), base.hbar if hbar is None else float(hbar))


@dataclass(frozen=True)
class AtomSpec:
    """Two-level atom.

    Parameters
    ----------
    omega_A : float
        Transition angular frequency [rad/us].
    gamma : float
        Natural linewidth [rad/us].
    lambda_A : float
        Transition wavelength [um].
    mass : float
        Mass in units of hbar us / um^2.
    """

    omega_A: float
    gamma: float
    lambda_A: float
    mass: float

    def __post_init__(self):
        for name in ("omega_A", "gamma", "lambda_A", "mass"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v}")

    @property
    def A_A(self) -> float:
        """Resonant cross-section 3 lambda_A^2 / (2 pi) [um^2]."""
        return 3.0 * self.lambda_A ** 2 / (2.0 * math.pi)

    def k_A(self, c: float) -> float:
        return self.omega_A / c


@dataclass(frozen=True)
class BranchSpec:
    index: int
    omega_th: float
    profile: ModeSuperposition
    K: float | None = None  # per-branch extinction override, off by default

    def __post_init__(self):
        if not (math.isfinite(self.omega_th) and self.omega_th >= 0):
            raise ValueError(f"branch {self.index}: omega_th must be >= 0")
        if self.K is not None and not self.K >= 0:
            raise ValueError(f"branch {self.index}: K must be >= 0")


@dataclass(frozen=True)
class FiberSpec:
    """Whole fiber.

    ``bulk_Gamma_F`` is the phenomenological bulk broadening; when it is None
    the bulk part is built from the branch profiles. ``delta_F`` is a constant
    shift added to the branch threshold shifts. ``threshold_window`` limits
    which branches contribute threshold terms (None means 1e3 gamma).
    """

    core_diameter: float
    K: float
    branches: tuple[BranchSpec, ...] = ()
    bulk_Gamma_F: float | None = None
    delta_F: float = 0.0
    c: float = C_UM_PER_US
    threshold_window: float | None = None
    quad_epsabs: float = 1e-10
    quad_epsrel: float = 1e-8

    def __post_init__(self):
        if not self.core_diameter > 0:
            raise ValueError("core diameter must be positive")
        if not (math.isfinite(self.K) and self.K >= 0):
            raise ValueError("extinction K must be >= 0")
        if not self.c > 0:
            raise ValueError("c must be positive")
        object.__setattr__(self, "branches", tuple(self.branches))
        idx = [b.index for b in self.branches]
        if len(set(idx)) != len(idx):
            raise ValueError(f"branch indices must be unique, got {idx}")
        if self.bulk_Gamma_F is not None and not self.bulk_Gamma_F > 0:
            raise ValueError("bulk_Gamma_F must be positive")

    def extinction(self, branch: BranchSpec) -> float:
        return self.K if branch.K is None else branch.K

    def cK(self, branch: BranchSpec) -> float:
        return self.c * self.extinction(branch)

    def window(self, atom: AtomSpec) -> float:
        return 1e3 * atom.gamma if self.threshold_window is None else self.threshold_window

    def active_branches(self, atom: AtomSpec) -> tuple[BranchSpec, ...]:
        """Branches close enough to resonance to carry threshold terms."""
        w = self.window(atom)
        return tuple(b for b in self.branches if abs(b.omega_th - atom.omega_A) <= w)


def omega_of_k(branch, k, c):
    """Branch dispersion omega = sqrt(omega_th^2 + c^2 k^2)."""
    th = branch.omega_th if isinstance(branch, BranchSpec) else float(branch)
    return math.hypot(th, c * k)


def k_of_omega(branch, omega, c):
    """Non-negative k on the branch for omega >= omega_th."""
    th = branch.omega_th if isinstance(branch, BranchSpec) else float(branch)
    if omega < th:
        raise ValueError(f"omega {omega} is below threshold {th}")
    return math.sqrt((omega - th) * (omega + th)) / c


def kappa_of(branch, k, K, c):
    """Mode amplitude decay rate K omega(k) / |k|; diverges at k = 0."""
    if k == 0:
        raise DivergentLoss("loss rate diverges at the branch threshold (k = 0)")
    return K * omega_of_k(branch, k, c) / abs(k)


def group_velocity(branch, k, c):
    return c * c * k / omega_of_k(branch, k, c)


def coupling_g_squared(branch, omega, atom: AtomSpec, A_n, c):
    """g^2 = (gamma c / 4 pi)(A_A / A_n)(omega / omega_A)."""
    if not (omega > 0 and A_n > 0):
        raise ValueError("omega and A_n must be positive")
    return atom.gamma * c / (4.0 * math.pi) * (atom.A_A / A_n) * (omega / atom.omega_A)


def mode_count_estimate(D, lam):
    """(axial, transverse) mode counts floor(2D/lambda) and its square."""
    if not (D > 0 and lam > 0):
        raise ValueError("D and lambda must be positive")
    axial = math.floor(2.0 * D / lam)
    return axial, axial * axial
