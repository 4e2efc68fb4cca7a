"""Fiber-induced line broadening and shift.

Each branch n adds to the atomic line a threshold excess

    Gamma_Fn(r) = (gamma / 2 pi)(A_A / omega_A)(f_n(r)^2 / A_n) * I_B
    Delta_Fn(r) = (gamma / 2 pi)(A_A / omega_A)(f_n(r)^2 / A_n) * I_D

where I_X = integral over omega > omega_th of X(omega; omega_th) - X(omega; 0).
Subtracting the unconfined (omega_th = 0) integrand removes the UV divergence
and leaves only the threshold effect. Both integrands are homogeneous of
degree zero in (omega, omega_th, omega_A, cK), so the integrals are computed
on the scaled axis x = omega / omega_A and multiplied by omega_A.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .fiber import AtomSpec, BranchSpec, FiberSpec
from .modes import QuadratureError, profile_eval, profile_value_grad

__all__ = [
    "LineState", "LineField", "SpectralScan", "QuadratureError",
    "integrand_B", "integrand_D", "threshold_integrals", "branch_broadening",
    "branch_lineshift", "bulk_broadening", "bulk_lorentzian_integral",
    "branch_coefficients", "line_state", "line_field", "spectrum_scan",
]


@dataclass(frozen=True)
class LineState:
    """Complex line descriptor zeta = Gamma_F + i (Delta_drive + Delta_F)."""

    Gamma_F: float
    Delta_F: float
    Delta_drive: float

    def __post_init__(self):
        if not (math.isfinite(self.Gamma_F) and self.Gamma_F > 0):
            raise ValueError(f"Gamma_F must be positive, got {self.Gamma_F}")
        if not (math.isfinite(self.Delta_F) and math.isfinite(self.Delta_drive)):
            raise ValueError("non-finite line shift or detuning")

    @property
    def detuning_total(self) -> float:
        return self.Delta_drive + self.Delta_F

    @property
    def zeta(self) -> complex:
        return complex(self.Gamma_F, self.detuning_total)


@dataclass(frozen=True)
class LineField:
    """Line descriptor plus the transverse gradients of Gamma_F and Delta_F."""

    state: LineState
    grad_Gamma_F: np.ndarray
    grad_Delta_F: np.ndarray


@dataclass(frozen=True)
class SpectralScan:
    axis: np.ndarray
    Gamma_branch: np.ndarray
    Delta_branch: np.ndarray
    A_A: float
    f2: float
    A_n: float
    w0: float


def _check_args(omega, omega_th):
    omega = np.asarray(omega, dtype=float)
    if omega_th < 0:
        raise ValueError("omega_th must be >= 0")
    if omega_th > 0 and np.any(omega == 0):
        raise ValueError("omega = 0 with a positive threshold")
    return omega


def integrand_B(omega, omega_th, omega_A, cK):
    """omega cK / [(cK)^2 + (1 - omega_th^2/omega^2)(omega_A - omega)^2]."""
    w = _check_args(omega, omega_th)
    if omega_th == 0:
        conf = 1.0
    else:
        conf = 1.0 - (omega_th / w) ** 2
    out = w * cK / (cK * cK + conf * (omega_A - w) ** 2)
    return float(out) if out.ndim == 0 else out


def integrand_D(omega, omega_th, omega_A, cK):
    """omega^2 sqrt(omega^2 - omega_th^2)(omega_A - omega) / [cK^2 omega^2 + (omega^2 - omega_th^2)(omega_A - omega)^2]."""
    w = _check_args(omega, omega_th)
    q = np.maximum((w - omega_th) * (w + omega_th), 0.0)
    det = omega_A - w
    out = w * w * np.sqrt(q) * det / (cK * cK * w * w + q * det * det)
    return float(out) if out.ndim == 0 else out


# -- scaled quadrature ------------------------------------------------------

# Two integration variables keep the narrow features free of cancellation:
# away from resonance the offset above threshold e = x - th, and inside the
# resonance window the signed detuning u = x - 1, so that 1 - x = -u is exact
# even when cK / omega_A is far below the spacing of doubles near x = 1.

def _B_excess(e, d, th, c):
    # B(th) - B(0) = c th^2 d^2 / (x (c^2 + a^2 d^2)(c^2 + d^2)), a^2 = 1 - th^2/x^2
    x = th + e
    a2 = e * (x + th) / (x * x)
    return c * th * th / x * (d * d / (c * c + d * d)) / (c * c + a2 * d * d)


def _D_excess(e, d, th, c):
    # D(th) - D(0) = th^2 [d / (c^2 + a^2 d^2)][(a d^2 - c^2) / (c^2 + d^2)] / (x (1 + a)),
    # with a = sqrt(x^2 - th^2) / x; the difference is formed without subtraction
    x = th + e
    a = math.sqrt(e * (x + th)) / x
    return th * th * (d / (c * c + a * a * d * d)) * ((a * d * d - c * c) / (c * c + d * d)) / (x * (1.0 + a))


def _in_e(e, fn, th, d0, c):
    return fn(e, d0 - e, th, c)


def _in_u(u, fn, th, d0, c):
    return fn(d0 + u, -u, th, c)


def _breakpoints(th, d0, c, cut, g):
    """Breakpoints on the offset axis e in (0, cut)."""
    pts = {0.0, cut}
    if d0 > 0:
        pts.add(d0)
    # geometric ladders around resonance out to O(1) detuning: the Lorentzian
    # tails fall as 1/detuning^2 over many decades when cK is small
    for w in (c, g):
        if w <= 0:
            continue
        for s in np.logspace(math.log10(0.3 * w), 0.0, 2 * max(1, int(math.log10(1.0 / (0.3 * w)))) + 1):
            for p in (d0 - s, d0 + s):
                if 0.0 < p < cut:
                    pts.add(float(p))
    # region where the confinement factor is comparable to cK^2 / detuning^2
    d = abs(d0) + c
    w_th = c * c * th / (2.0 * d * d)
    if w_th > 0:
        top = math.log10(max(th, 1e-3 * w_th) / w_th)
        for s in np.logspace(-3, top, 2 * int(top + 3) + 1):
            p = s * w_th
            if 0.0 < p < cut:
                pts.add(float(p))
    return sorted(pts)


@lru_cache(maxsize=4096)
def _scaled_integral(kind, th, c, g, epsabs, epsrel):
    if th == 0.0:
        return 0.0, 0.0
    fn = _B_excess if kind == "B" else _D_excess
    d0 = 1.0 - th
    cut = 1.0 + max(1e4 * c, 1e3 * g, 10.0 * th) - th
    pts = _breakpoints(th, d0, c, cut, g)
    # resonance window, integrated in u = e - d0
    win = 1e4 * c
    total = 0.0
    err = 0.0
    n_piece = len(pts)
    opts = dict(limit=400, epsabs=epsabs / n_piece, epsrel=0.1 * epsrel)
    with warnings.catch_warnings():
        # the attained error estimate is checked below instead
        warnings.simplefilter("ignore", IntegrationWarning)
        for a, b in zip(pts[:-1], pts[1:]):
            mid = 0.5 * (a + b)
            if abs(mid - d0) < win:
                val, e = quad(_in_u, a - d0, b - d0, args=(fn, th, d0, c), **opts)
            else:
                val, e = quad(_in_e, a, b, args=(fn, th, d0, c), **opts)
            total += val
            err += e
        val, e = quad(_in_e, cut, np.inf, args=(fn, th, d0, c), **opts)
    total += val
    err += e
    if not (math.isfinite(total) and err <= max(epsabs, epsrel * abs(total))):
        raise QuadratureError(
            f"threshold integral {kind} not converged (omega_th/omega_A={th:.17g}, "
            f"cK/omega_A={c:.3g}, error estimate {err:.3g})",
            estimate=total, error=err,
        )
    return total, err


def threshold_integrals(omega_th, omega_A, cK, gamma=0.0, epsabs=1e-10, epsrel=1e-8):
    """Regularized excess integrals (I_B, I_D) in units of frequency.

    Returns the integral over omega in [omega_th, inf) of
    X(omega; omega_th) - X(omega; 0) for X = B and X = D.
    """
    if not (omega_A > 0 and cK > 0):
        raise ValueError("omega_A and cK must be positive")
    th = float(omega_th) / omega_A
    c = float(cK) / omega_A
    g = float(gamma) / omega_A
    ib, _ = _scaled_integral("B", th, c, g, float(epsabs), float(epsrel))
    idd, _ = _scaled_integral("D", th, c, g, float(epsabs), float(epsrel))
    return ib * omega_A, idd * omega_A


def _prefactor(atom: AtomSpec, A_n: float) -> float:
    # (gamma / 2 pi)(A_A / omega_A) / A_n; multiplies f^2 * I
    return atom.gamma / (2.0 * math.pi) * atom.A_A / atom.omega_A / A_n


def _f2(branch: BranchSpec, r_T):
    return profile_eval(branch.profile, np.asarray(r_T, dtype=float)) ** 2


def branch_broadening(branch: BranchSpec, atom: AtomSpec, fiber: FiberSpec, r_T):
    """Threshold excess of the broadening from one branch [rad/us]."""
    if branch.omega_th == 0:
        return 0.0 * _f2(branch, r_T)
    ib, _ = threshold_integrals(branch.omega_th, atom.omega_A, fiber.cK(branch), atom.gamma,
                                fiber.quad_epsabs, fiber.quad_epsrel)
    return _prefactor(atom, branch.profile.cross_section) * _f2(branch, r_T) * ib


def branch_lineshift(branch: BranchSpec, atom: AtomSpec, fiber: FiberSpec, r_T):
    """Threshold line shift from one branch [rad/us]."""
    if branch.omega_th == 0:
        return 0.0 * _f2(branch, r_T)
    _, idd = threshold_integrals(branch.omega_th, atom.omega_A, fiber.cK(branch), atom.gamma,
                                 fiber.quad_epsabs, fiber.quad_epsrel)
    return _prefactor(atom, branch.profile.cross_section) * _f2(branch, r_T) * idd


def _bulk_coefficient(branch: BranchSpec, atom: AtomSpec) -> float:
    # unit-pulse resonance: only branches propagating at omega_A contribute
    if branch.omega_th >= atom.omega_A:
        return 0.0
    return atom.gamma * atom.A_A / (2.0 * branch.profile.cross_section)


def bulk_broadening(fiber: FiberSpec, atom: AtomSpec, r_T):
    """Bulk broadening: phenomenological constant, or gamma A_A sum f_n^2 / (2 A_n)."""
    if fiber.bulk_Gamma_F is not None:
        return fiber.bulk_Gamma_F
    total = 0.0
    for b in fiber.branches:
        coef = _bulk_coefficient(b, atom)
        if coef:
            total = total + coef * _f2(b, r_T)
    return total


def bulk_lorentzian_integral(omega_A, cK, omega_cut=None, epsabs=1e-12, epsrel=1e-10):
    """Integral of B(omega; 0) over [0, omega_cut].

    The untruncated integral diverges logarithmically because B(omega; 0)
    tends to cK / omega; the default cut is omega_A + 1e4 cK. Divided by pi it
    approaches omega_A as cK / omega_A -> 0.
    """
    if omega_cut is None:
        omega_cut = omega_A + 1e4 * cK
    c = cK / omega_A
    xc = omega_cut / omega_A
    fn = lambda x: x * c / (c * c + (1.0 - x) ** 2)  # noqa: E731
    pts = sorted({p for s in (1.0, 10.0, 100.0, 1e3) for p in (1 - s * c, 1 + s * c) if 0 < p < xc} | {1.0})
    edges = [0.0] + [p for p in pts if p < xc] + [xc]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        total += quad(fn, a, b, limit=400, epsabs=epsabs, epsrel=epsrel)[0]
    return total * omega_A


def branch_coefficients(fiber: FiberSpec, atom: AtomSpec):
    """Per-branch (branch, c_gamma, c_delta) with Gamma_F = G0 + sum c_gamma f^2.

    ``c_gamma`` carries the bulk unit-pulse term (when no phenomenological bulk
    rate is configured) plus the threshold excess for branches inside the
    threshold window; ``c_delta`` carries the threshold shift.
    """
    active = {b.index for b in fiber.active_branches(atom)}
    out = []
    for b in fiber.branches:
        cg = 0.0 if fiber.bulk_Gamma_F is not None else _bulk_coefficient(b, atom)
        cd = 0.0
        if b.index in active and b.omega_th > 0:
            ib, idd = threshold_integrals(b.omega_th, atom.omega_A, fiber.cK(b), atom.gamma,
                                          fiber.quad_epsabs, fiber.quad_epsrel)
            p = _prefactor(atom, b.profile.cross_section)
            cg += p * ib
            cd += p * idd
        out.append((b, cg, cd))
    return out


def _base_gamma(fiber: FiberSpec) -> float:
    return fiber.bulk_Gamma_F if fiber.bulk_Gamma_F is not None else 0.0


def line_state(fiber: FiberSpec, atom: AtomSpec, drive_detuning: float, r_T) -> LineState:
    """Gamma_F = bulk + sum of branch excesses, Delta_F = constant + sum of branch shifts."""
    gamma = _base_gamma(fiber)
    delta = fiber.delta_F
    for b, cg, cd in branch_coefficients(fiber, atom):
        if cg or cd:
            f2 = float(_f2(b, r_T))
            gamma += cg * f2
            delta += cd * f2
    return LineState(float(gamma), float(delta), float(drive_detuning))


def line_field(fiber: FiberSpec, atom: AtomSpec, drive_detuning: float, r_T) -> LineField:
    """Line state with analytic transverse gradients of Gamma_F and Delta_F.

    Every branch term is c f_n(r)^2, so the gradient is 2 c f_n grad f_n.
    """
    x, y = (float(v) for v in np.asarray(r_T, dtype=float)[:2])
    gamma = _base_gamma(fiber)
    delta = fiber.delta_F
    gg = np.zeros(3)
    gd = np.zeros(3)
    for b, cg, cd in branch_coefficients(fiber, atom):
        if not (cg or cd):
            continue
        f, fx, fy = (float(v) for v in profile_value_grad(b.profile, x, y))
        gamma += cg * f * f
        delta += cd * f * f
        gg[:2] += 2.0 * cg * f * np.array([fx, fy])
        gd[:2] += 2.0 * cd * f * np.array([fx, fy])
    return LineField(LineState(gamma, delta, float(drive_detuning)), gg, gd)


def spectrum_scan(omega_th_values, atom: AtomSpec, cK: float, f2: float, A_n: float = 1.0,
                  w0: float = float("nan"), epsabs=1e-10, epsrel=1e-8) -> SpectralScan:
    """Branch broadening and shift as functions of the threshold frequency."""
    axis = np.asarray(omega_th_values, dtype=float)
    pref = _prefactor(atom, A_n) * f2
    gam = np.empty(axis.size)
    dlt = np.empty(axis.size)
    for i, th in enumerate(axis):
        ib, idd = threshold_integrals(th, atom.omega_A, cK, atom.gamma, epsabs, epsrel)
        gam[i] = pref * ib
        dlt[i] = pref * idd
    return SpectralScan(axis, gam, dlt, atom.A_A, f2, A_n, w0)
