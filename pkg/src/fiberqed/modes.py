"""Hermite-Gauss basis functions and finite HG superpositions.

Fiber modes are modelled at the beam waist (z = 0) as real-coefficient sums
of HG_{l,m} = u_l(x) u_m(y). Ince-Gaussian modes enter as coefficient tables,
e.g. ``IG_o_5_5 = 0.755 HG_{4,1} - 0.643 HG_{2,3} + 0.130 HG_{0,5}``.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from numpy.polynomial.hermite import hermgauss
from numpy.polynomial.legendre import leggauss

from . import kernels
from ._accel import USE_NUMBA

NORM_TOLERANCE = 5e-3
MAX_INDEX = 40
GAUSS_HERMITE_NODES = 64


class ModeTableError(ValueError):
    """Malformed mode table row or inconsistent superposition."""


class QuadratureError(RuntimeError):
    """Quadrature did not reach the requested accuracy."""

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


@dataclass(frozen=True)
class HGIndex:
    l: int
    m: int

    def __post_init__(self):
        if self.l < 0 or self.m < 0:
            raise ValueError(f"HG indices must be non-negative, got ({self.l}, {self.m})")

    @property
    def order(self) -> int:
        return self.l + self.m


@dataclass(frozen=True)
class ModeSuperposition:
    """A transverse profile ``sum_k a_k HG_{l_k, m_k}`` with a common waist [um].

    Labels starting with ``IG`` mark Ince-Gaussian expansions, whose terms
    must all share one mode order N = l + m.
    """

    terms: tuple[tuple[HGIndex, float], ...]
    waist: float
    label: str = ""
    _packed: tuple = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        terms = tuple(
            (t if isinstance(t, HGIndex) else HGIndex(int(t[0]), int(t[1])), c) for t, c in self.terms
        )
        if not terms:
            raise ValueError("a mode superposition needs at least one term")
        for idx, c in terms:
            if isinstance(c, complex) or np.iscomplexobj(c):
                raise ValueError("complex HG coefficients are not supported")
            if not math.isfinite(c):
                raise ValueError(f"non-finite coefficient for HG_{idx.l},{idx.m}")
            if max(idx.l, idx.m) > MAX_INDEX:
                raise ValueError(f"HG index above {MAX_INDEX} is outside the stable recurrence range")
        if not (self.waist > 0 and math.isfinite(self.waist)):
            raise ValueError(f"waist must be positive and finite, got {self.waist}")
        terms = tuple((idx, float(c)) for idx, c in terms)
        object.__setattr__(self, "terms", terms)
        if self.is_ince:
            orders = {idx.order for idx, _ in terms}
            if len(orders) > 1:
                raise ModeTableError(f"{self.label}: IG expansion mixes mode orders {sorted(orders)}")
        tl = np.array([idx.l for idx, _ in terms], dtype=np.int64)
        tm = np.array([idx.m for idx, _ in terms], dtype=np.int64)
        ta = np.array([c for _, c in terms], dtype=np.float64)
        object.__setattr__(self, "_packed", (tl, tm, ta))

    @classmethod
    def from_mapping(cls, coeffs, waist, label=""):
        return cls(tuple(((l, m), a) for (l, m), a in coeffs.items()), waist, label)

    @classmethod
    def hg(cls, l, m, waist, coeff=1.0):
        return cls((((l, m), coeff),), waist, f"HG_{l}_{m}")

    @property
    def is_ince(self) -> bool:
        return self.label.upper().startswith("IG")

    @property
    def max_index(self) -> int:
        return max(max(idx.l, idx.m) for idx, _ in self.terms)

    @property
    def order(self) -> int | None:
        orders = {idx.order for idx, _ in self.terms}
        return orders.pop() if len(orders) == 1 else None

    @property
    def coefficient_norm(self) -> float:
        return float(sum(c * c for _, c in self.terms))

    def with_waist(self, waist) -> "ModeSuperposition":
        return ModeSuperposition(self.terms, waist, self.label)

    def scaled(self, factor) -> "ModeSuperposition":
        return ModeSuperposition(tuple((i, c * factor) for i, c in self.terms), self.waist, self.label)

    @cached_property
    def cross_section(self) -> float:
        return cross_section(self)

    @cached_property
    def peak_amplitude(self) -> float:
        return peak_amplitude(self)


def hermite_table(jmax: int, s, w0: float) -> np.ndarray:
    """All u_0..u_jmax at ``s`` (any shape); result has a leading axis of size jmax+1."""
    s = np.asarray(s, dtype=float)
    t = s / w0
    out = np.empty((jmax + 1,) + s.shape)
    out[0] = (2.0 / np.pi) ** 0.25 / np.sqrt(w0) * np.exp(-t * t)
    if jmax >= 1:
        out[1] = 2.0 * t * out[0]
    for j in range(1, jmax):
        out[j + 1] = (2.0 * t * out[j] - np.sqrt(j) * out[j - 1]) / np.sqrt(j + 1.0)
    return out


def hg_eval_1d(j: int, s, w0: float):
    """Normalised 1-D Hermite-Gauss function u_j(s, z=0) [1/sqrt(um)].

    u_j(s) = (sqrt(2/pi) / (2^j j! w0))^(1/2) H_j(sqrt(2) s / w0) exp(-s^2 / w0^2),
    evaluated with the upward recurrence on the normalised functions so no
    factorials or large Hermite values are formed.
    """
    if j < 0:
        raise ValueError("j must be non-negative")
    if not (w0 > 0 and math.isfinite(w0)):
        raise ValueError("w0 must be positive and finite")
    s_arr = np.asarray(s, dtype=float)
    if not np.all(np.isfinite(s_arr)):
        raise ValueError("non-finite coordinate")
    val = hermite_table(j, s_arr, w0)[j]
    return float(val) if val.ndim == 0 else val


def _split_points(r_t):
    pts = np.asarray(r_t, dtype=float)
    if pts.shape[-1] != 2:
        raise ValueError("transverse positions need a trailing axis of length 2")
    if not np.all(np.isfinite(pts)):
        raise ValueError("non-finite transverse position")
    return pts[..., 0], pts[..., 1]


def _evaluate(mode: ModeSuperposition, x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    shape = np.broadcast(x, y).shape
    xf = np.broadcast_to(x, shape).ravel()
    yf = np.broadcast_to(y, shape).ravel()
    tl, tm, ta = mode._packed
    jmax = mode.max_index
    if USE_NUMBA and xf.size > 8:
        f = np.empty(xf.size)
        fx = np.empty(xf.size)
        fy = np.empty(xf.size)
        kernels.mode_grid(np.ascontiguousarray(xf), np.ascontiguousarray(yf), tl, tm, ta,
                          mode.waist, jmax, f, fx, fy)
    else:
        w = mode.waist
        ux = hermite_table(jmax, xf, w)
        uy = hermite_table(jmax, yf, w)
        # du_j = (2/w)(sqrt(j) u_{j-1} - (s/w) u_j)
        dux = -(xf / w) * ux
        duy = -(yf / w) * uy
        sq = np.sqrt(np.arange(1, jmax + 1))[:, None]
        dux[1:] += sq * ux[:-1]
        duy[1:] += sq * uy[:-1]
        dux *= 2.0 / w
        duy *= 2.0 / w
        f = np.einsum("k,kn,kn->n", ta, ux[tl], uy[tm])
        fx = np.einsum("k,kn,kn->n", ta, dux[tl], uy[tm])
        fy = np.einsum("k,kn,kn->n", ta, ux[tl], duy[tm])
    return f.reshape(shape), fx.reshape(shape), fy.reshape(shape)


def profile_eval(mode: ModeSuperposition, r_t):
    """f(r_T) = sum a_{l,m} u_l(x) u_m(y) [1/um]; ``r_t`` has a trailing axis of 2."""
    x, y = _split_points(r_t)
    f, _, _ = _evaluate(mode, x, y)
    return float(f) if f.ndim == 0 else f


def profile_grad(mode: ModeSuperposition, r_t):
    """Transverse gradient of the profile [1/um^2], trailing axis (d/dx, d/dy)."""
    x, y = _split_points(r_t)
    _, fx, fy = _evaluate(mode, x, y)
    return np.stack([fx, fy], axis=-1)


def profile_value_grad(mode: ModeSuperposition, x, y):
    """Value and both gradient components on broadcast ``x``, ``y`` arrays."""
    return _evaluate(mode, x, y)


def _gh_cross_section(mode, nodes):
    t, w = hermgauss(nodes)
    # x = w0 t / sqrt(2) maps exp(-2 x^2 / w0^2) onto the Hermite weight exp(-t^2)
    s = mode.waist * t / math.sqrt(2.0)
    u = hermite_table(mode.max_index, s, mode.waist) * np.exp(t * t / 2.0)
    tl, tm, ta = mode._packed
    field = np.einsum("k,ki,kj->ij", ta, u[tl], u[tm])
    jac = mode.waist / math.sqrt(2.0)
    return float(np.einsum("i,j,ij->", w, w, field * field) * jac * jac)


def cross_section(mode: ModeSuperposition, nodes: int = GAUSS_HERMITE_NODES, rtol: float = 1e-10) -> float:
    """Mode cross-section A = integral of f^2 over the plane, by Gauss-Hermite quadrature.

    Orthonormal HG terms make this equal to sum(a^2); the value is computed,
    not assumed. Convergence is checked against a rule with 16 more nodes.
    """
    a = _gh_cross_section(mode, nodes)
    b = _gh_cross_section(mode, nodes + 16)
    if abs(a - b) > rtol * max(abs(b), 1e-300):
        raise QuadratureError(f"cross-section quadrature not converged for {mode.label!r}", b, abs(a - b))
    return b


def overlap(mode_a: ModeSuperposition, mode_b: ModeSuperposition, nodes: int = GAUSS_HERMITE_NODES) -> float:
    """Integral of f_a f_b over the plane; both modes must share a waist."""
    if not math.isclose(mode_a.waist, mode_b.waist, rel_tol=1e-14):
        raise ValueError("overlap needs equal waists")
    t, w = hermgauss(nodes)
    w0 = mode_a.waist
    s = w0 * t / math.sqrt(2.0)
    jmax = max(mode_a.max_index, mode_b.max_index)
    u = hermite_table(jmax, s, w0) * np.exp(t * t / 2.0)
    fields = []
    for mode in (mode_a, mode_b):
        tl, tm, ta = mode._packed
        fields.append(np.einsum("k,ki,kj->ij", ta, u[tl], u[tm]))
    jac = w0 / math.sqrt(2.0)
    return float(np.einsum("i,j,ij->", w, w, fields[0] * fields[1]) * jac * jac)


def peak_amplitude(mode: ModeSuperposition, points: int = 201) -> float:
    """max |f| over the plane (grid search then local refinement)."""
    from scipy.optimize import minimize

    extent = mode.waist * (1.0 + 0.5 * math.sqrt(mode.max_index + 1.0)) * 1.5
    g = np.linspace(-extent, extent, points)
    xx, yy = np.meshgrid(g, g, indexing="ij")
    f, _, _ = _evaluate(mode, xx, yy)
    i, j = np.unravel_index(np.argmax(np.abs(f)), f.shape)

    def neg(p):
        v, gx, gy = _evaluate(mode, p[0], p[1])
        sgn = -np.sign(v) if v != 0 else -1.0
        return float(sgn * v), np.array([float(sgn * gx), float(sgn * gy)])

    res = minimize(neg, x0=[xx[i, j], yy[i, j]], jac=True, method="BFGS", options={"gtol": 1e-12})
    return max(abs(float(f[i, j])), -float(res.fun))


# -- waist policy ---------------------------------------------------------

def _fraction_1d(j, x):
    """Energy fraction of u_j (unit waist) inside [-x, x]."""
    # u_j is negligible beyond ~sqrt(j) + 8 waists; clipping keeps the rule resolved
    x = min(x, math.sqrt(j + 1.0) + 8.0)
    t, w = leggauss(160)
    s = x * t
    u = hermite_table(j, s, 1.0)[j]
    return float(np.sum(w * u * u) * x)


def energy_fraction(order: int, half_width: float, waist: float) -> float:
    """Smallest in-square energy fraction over all HG_{l, N-l} of mode order N."""
    x = half_width / waist
    fr = [_fraction_1d(j, x) for j in range(order + 1)]
    return min(fr[l] * fr[order - l] for l in range(order + 1))


def waist_for_order(order: int, core_half_width: float, base_waist: float,
                    containment: float = 0.999, xtol: float = 1e-10) -> float:
    """Largest waist <= ``base_waist`` keeping ``containment`` of every order-N HG mode in the core.

    The in-square energy fraction decreases monotonically with the waist, so
    the boundary is found by bisection.
    """
    if order < 0:
        raise ValueError("mode order must be non-negative")
    if core_half_width <= 0 or base_waist <= 0:
        raise ValueError("core half-width and base waist must be positive")
    if energy_fraction(order, core_half_width, base_waist) >= containment:
        return float(base_waist)
    lo, hi = 0.0, float(base_waist)
    # a waist this small is always contained; fail loudly otherwise
    probe = core_half_width / (10.0 * math.sqrt(order + 1.0) + 10.0)
    if energy_fraction(order, core_half_width, min(probe, hi)) < containment:
        raise ValueError(f"no waist in (0, {base_waist}] contains order {order} at {containment}")
    lo = min(probe, hi)
    while hi - lo > xtol * base_waist:
        mid = 0.5 * (lo + hi)
        if energy_fraction(order, core_half_width, mid) >= containment:
            lo = mid
        else:
            hi = mid
    return lo


# -- tables and grids -----------------------------------------------------

def _parse_coefficient(text, lineno):
    text = text.strip()
    if "j" in text.lower() or "i" in text.lower():
        try:
            complex(text.replace("i", "j"))
        except ValueError:
            pass
        else:
            raise ModeTableError(f"line {lineno}: complex coefficient {text!r} is not supported")
    try:
        return float(text)
    except ValueError as exc:
        raise ModeTableError(f"line {lineno}: bad coefficient {text!r}") from exc


def parse_mode_row(row: Sequence[str], waist: float, lineno: int = 0) -> ModeSuperposition:
    cells = [c.strip() for c in row]
    while cells and cells[-1] == "":
        cells.pop()
    if not cells or not cells[0]:
        raise ModeTableError(f"line {lineno}: missing label")
    label, rest = cells[0], cells[1:]
    if not rest or len(rest) % 3:
        raise ModeTableError(f"line {lineno}: expected (l, m, a) triplets after the label")
    terms = []
    for i in range(0, len(rest), 3):
        try:
            l, m = int(rest[i]), int(rest[i + 1])
        except ValueError as exc:
            raise ModeTableError(f"line {lineno}: bad HG index in {rest[i:i + 2]}") from exc
        if l < 0 or m < 0:
            raise ModeTableError(f"line {lineno}: negative HG index")
        terms.append(((l, m), _parse_coefficient(rest[i + 2], lineno)))
    try:
        mode = ModeSuperposition(tuple(terms), waist, label)
    except ModeTableError as exc:
        raise ModeTableError(f"line {lineno}: {exc}") from exc
    defect = mode.coefficient_norm - 1.0
    if abs(defect) > NORM_TOLERANCE:
        warnings.warn(
            f"{label}: squared coefficients sum to {mode.coefficient_norm:.6g} (off by {defect:+.3g})",
            stacklevel=3,
        )
    return mode


def load_mode_table(path, waist: float = 1.0) -> list[ModeSuperposition]:
    """Read ``label, l1,m1,a1, l2,m2,a2, ...`` rows; ``#`` starts a comment."""
    modes = []
    with open(Path(path), encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            row = next(csv.reader([line], skipinitialspace=True))
            modes.append(parse_mode_row(row, waist, lineno))
    return modes


def grid_rows(mode: ModeSuperposition, half_width: float, points: int) -> Iterable[tuple]:
    """(x, y, f, dfx, dfy) rows, row-major with x varying slowest."""
    g = np.linspace(-half_width, half_width, points)
    xx, yy = np.meshgrid(g, g, indexing="ij")
    f, fx, fy = _evaluate(mode, xx, yy)
    for i in range(points):
        for j in range(points):
            yield xx[i, j], yy[i, j], f[i, j], fx[i, j], fy[i, j]
