"""Hot numeric kernels.

Everything here is scalar-loop code over flat float/int arrays so that numba
can compile it in nopython mode. The same functions run as ordinary Python
when the JIT is disabled (see :mod:`fiberqed._accel`).

Packed model layout
-------------------
Mode profiles are stored as flat term arrays ``tl, tm, ta`` (HG indices and
coefficients) sliced per mode by ``offsets``; ``waists`` and ``jmaxs`` hold
per-mode data. Mode 0 is the driven mode, modes ``1..n_branch`` are the
threshold branches whose profiles shape the line broadening and shift.
Scalar physics parameters live in ``fp`` (float) and ``ip`` (int) using the
slot constants below.
"""
import math

import numpy as np

from ._accel import njit

# float parameter slots
HBAR = 0
MASS = 1
DRIVE_SCALE = 2
K_DRIVE = 3
GAMMA0 = 4
DELTA0 = 5
DETUNING = 6
K_ATOM = 7
N_FP = 8

# int parameter slots
WAVE = 0
N_BRANCH = 1
DRIVE_AXIAL_ONLY = 2
THRESHOLD_FRICTION = 3
VACUUM_FRICTION = 4
PLANAR = 5
INCLUDE_REACT = 6
N_IP = 7

TRAVELLING = 0
STANDING = 1

NOISE_NONE = 0
NOISE_PHYSICAL = 1
NOISE_PAPER = 2

# local field record
LF_OMEGA = 0
LF_GRAD_OMEGA = 1
LF_PHASE = 4
LF_GRAD_PHASE = 5
LF_RE = 8
LF_IM = 9
LF_GRAD_RE = 10
LF_GRAD_IM = 13
N_LF = 16

STATUS_OK = 0
STATUS_NONFINITE = 1
STATUS_NOT_PSD = 2

FREE_DIFFUSION_SHAPE = np.array(
    [[1.0 / 3.0, 1.0 / 4.0, 1.0 / 2.0],
     [1.0 / 4.0, 1.0 / 3.0, 1.0 / 2.0],
     [1.0 / 2.0, 1.0 / 2.0, 1.0]]
)


@njit
def hermite_functions(jmax, s, w0, out):
    """Fill ``out[0..jmax]`` with normalised 1-D Hermite-Gauss functions at ``s``."""
    t = s / w0
    out[0] = (2.0 / math.pi) ** 0.25 / math.sqrt(w0) * math.exp(-t * t)
    if jmax >= 1:
        out[1] = 2.0 * t * out[0]
    for j in range(1, jmax):
        out[j + 1] = (2.0 * t * out[j] - math.sqrt(j) * out[j - 1]) / math.sqrt(j + 1.0)


@njit
def mode_value_grad(k, x, y, tl, tm, ta, offsets, waists, jmaxs, ux, uy):
    w = waists[k]
    jm = jmaxs[k]
    hermite_functions(jm, x, w, ux)
    hermite_functions(jm, y, w, uy)
    f = 0.0
    fx = 0.0
    fy = 0.0
    for i in range(offsets[k], offsets[k + 1]):
        l = tl[i]
        m = tm[i]
        a = ta[i]
        f += a * ux[l] * uy[m]
        dl = -(x / w) * ux[l]
        if l > 0:
            dl += math.sqrt(l) * ux[l - 1]
        dm = -(y / w) * uy[m]
        if m > 0:
            dm += math.sqrt(m) * uy[m - 1]
        fx += a * (2.0 / w) * dl * uy[m]
        fy += a * (2.0 / w) * ux[l] * dm
    return f, fx, fy


@njit
def mode_grid(xs, ys, tl, tm, ta, waist, jmax, out_f, out_fx, out_fy):
    """Evaluate one superposition and its gradient at points ``(xs[i], ys[i])``."""
    offsets = np.array([0, tl.shape[0]])
    waists = np.array([waist])
    jmaxs = np.array([jmax])
    ux = np.empty(jmax + 1)
    uy = np.empty(jmax + 1)
    for i in range(xs.shape[0]):
        f, fx, fy = mode_value_grad(0, xs[i], ys[i], tl, tm, ta, offsets, waists, jmaxs, ux, uy)
        out_f[i] = f
        out_fx[i] = fx
        out_fy[i] = fy


@njit
def local_field(x, y, z, fp, ip, tl, tm, ta, offsets, waists, jmaxs, cg, cd, ux, uy, out):
    """Rabi frequency, drive phase, line descriptor and their gradients at one point."""
    f, fx, fy = mode_value_grad(0, x, y, tl, tm, ta, offsets, waists, jmaxs, ux, uy)
    s = fp[DRIVE_SCALE]
    k = fp[K_DRIVE]
    if ip[WAVE] == STANDING:
        c = math.cos(k * z)
        sn = math.sin(k * z)
        out[LF_OMEGA] = s * f * c
        out[LF_GRAD_OMEGA] = s * fx * c
        out[LF_GRAD_OMEGA + 1] = s * fy * c
        out[LF_GRAD_OMEGA + 2] = -s * f * k * sn
        out[LF_PHASE] = 0.0
        out[LF_GRAD_PHASE + 2] = 0.0
    else:
        out[LF_OMEGA] = s * f
        out[LF_GRAD_OMEGA] = s * fx
        out[LF_GRAD_OMEGA + 1] = s * fy
        out[LF_GRAD_OMEGA + 2] = 0.0
        out[LF_PHASE] = k * z
        out[LF_GRAD_PHASE + 2] = k
    out[LF_GRAD_PHASE] = 0.0
    out[LF_GRAD_PHASE + 1] = 0.0

    re = fp[GAMMA0]
    shift = fp[DELTA0]
    grx = 0.0
    gry = 0.0
    gix = 0.0
    giy = 0.0
    for n in range(ip[N_BRANCH]):
        g, gx, gy = mode_value_grad(n + 1, x, y, tl, tm, ta, offsets, waists, jmaxs, ux, uy)
        re += cg[n] * g * g
        grx += 2.0 * cg[n] * g * gx
        gry += 2.0 * cg[n] * g * gy
        shift += cd[n] * g * g
        gix += 2.0 * cd[n] * g * gx
        giy += 2.0 * cd[n] * g * gy
    out[LF_RE] = re
    out[LF_IM] = fp[DETUNING] + shift
    out[LF_GRAD_RE] = grx
    out[LF_GRAD_RE + 1] = gry
    out[LF_GRAD_RE + 2] = 0.0
    out[LF_GRAD_IM] = gix
    out[LF_GRAD_IM + 1] = giy
    out[LF_GRAD_IM + 2] = 0.0


@njit
def mean_force(lf, fp, ip, out):
    """Drive (radiation pressure + gradient) plus vacuum reaction force."""
    hbar = fp[HBAR]
    om = lf[LF_OMEGA]
    re = lf[LF_RE]
    im = lf[LF_IM]
    z2 = re * re + im * im
    exc = om * om / z2
    for i in range(3):
        out[i] = (
            hbar / z2 * (2.0 * lf[LF_GRAD_PHASE + i] * om * om * re + 2.0 * om * lf[LF_GRAD_OMEGA + i] * im)
            + hbar * exc * lf[LF_GRAD_IM + i]
        )
    if ip[PLANAR]:
        out[2] = 0.0


@njit
def friction_force(lf, v, fp, ip, out):
    """Velocity-linear force at velocity ``v``."""
    hbar = fp[HBAR]
    om = lf[LF_OMEGA]
    re = lf[LF_RE]
    im = lf[LF_IM]
    z2 = re * re + im * im
    z4 = z2 * z2
    c = re * re - im * im
    ri = re * im
    v_go = 0.0
    v_gp = 0.0
    v_gr = 0.0
    v_gi = 0.0
    for i in range(3):
        v_go += v[i] * lf[LF_GRAD_OMEGA + i]
        v_gp += v[i] * lf[LF_GRAD_PHASE + i]
        v_gr += v[i] * lf[LF_GRAD_RE + i]
        v_gi += v[i] * lf[LF_GRAD_IM + i]
    a_phase = -hbar * (c * 2.0 * om * v_go + 4.0 * ri * om * om * v_gp) / z4
    a_omega = hbar * (2.0 * c * om * v_gp - 4.0 * ri * v_go) / z4
    if ip[THRESHOLD_FRICTION]:
        z6 = z4 * z2
        v_gz2 = 2.0 * re * v_gr + 2.0 * im * v_gi
        a_phase += hbar * 2.0 * om * om / z6 * (c * v_gz2 - z2 * (re * v_gr - im * v_gi))
        a_omega += hbar * 2.0 * om / z6 * (2.0 * ri * v_gz2 - z2 * (re * v_gi + im * v_gr))
    a_vac = 0.0
    if ip[VACUUM_FRICTION]:
        a_vac = hbar * (
            -(re * 2.0 * om * v_go + 2.0 * im * om * om * v_gp) / z4
            + 2.0 * om * om / (z4 * z2) * (c * v_gr + 2.0 * ri * v_gi)
        )
    for i in range(3):
        out[i] = a_phase * lf[LF_GRAD_PHASE + i] + a_omega * lf[LF_GRAD_OMEGA + i] + a_vac * lf[LF_GRAD_IM + i]
    if ip[PLANAR]:
        out[2] = 0.0


@njit
def diffusion_tensor(lf, fp, ip, out):
    """Free-recoil + drive-fluctuation + reaction momentum diffusion."""
    hbar2 = fp[HBAR] * fp[HBAR]
    ka2 = fp[K_ATOM] * fp[K_ATOM]
    om = lf[LF_OMEGA]
    re = lf[LF_RE]
    im = lf[LF_IM]
    z2 = re * re + im * im
    exc = om * om / z2
    base = 2.0 * hbar2 * ka2 * re * exc
    for i in range(3):
        for j in range(3):
            out[i, j] = base * FREE_DIFFUSION_SHAPE[i, j]
    if ip[DRIVE_AXIAL_ONLY]:
        out[2, 2] += base
    else:
        pref = 2.0 * hbar2 * re / z2
        for i in range(3):
            for j in range(3):
                out[i, j] += pref * (
                    lf[LF_GRAD_OMEGA + i] * lf[LF_GRAD_OMEGA + j]
                    + om * om * lf[LF_GRAD_PHASE + i] * lf[LF_GRAD_PHASE + j]
                )
    if ip[INCLUDE_REACT]:
        pref = hbar2 * 2.0 * re / z2 * exc
        for i in range(3):
            for j in range(3):
                out[i, j] += pref * lf[LF_GRAD_IM + i] * lf[LF_GRAD_IM + j]
    if ip[PLANAR]:
        for i in range(3):
            out[2, i] = 0.0
            out[i, 2] = 0.0


@njit
def psd_factor(a, n, out):
    """Lower-triangular ``out`` with ``out @ out.T == a`` on the leading n x n block.

    Semidefinite input is allowed; zero pivots leave a zero column. Returns
    False when ``a`` has a clearly negative pivot.
    """
    scale = 0.0
    for i in range(n):
        scale = max(scale, abs(a[i, i]))
    tol = 1e-12 * scale
    for i in range(3):
        for j in range(3):
            out[i, j] = 0.0
    for j in range(n):
        d = a[j, j]
        for k in range(j):
            d -= out[j, k] * out[j, k]
        if d < -tol:
            return False
        if d <= tol:
            continue
        piv = math.sqrt(d)
        out[j, j] = piv
        for i in range(j + 1, n):
            s = a[i, j]
            for k in range(j):
                s -= out[i, k] * out[j, k]
            out[i, j] = s / piv
    return True


@njit
def physical_kick(d, dt, u, n, chol, cov, out):
    """Momentum impulse with covariance ``2 d dt`` from unit-variance draws ``u``."""
    for i in range(3):
        for j in range(3):
            cov[i, j] = 2.0 * d[i, j] * dt
    ok = psd_factor(cov, n, chol)
    for i in range(3):
        s = 0.0
        for j in range(n):
            s += chol[i, j] * u[j]
        out[i] = s if i < n else 0.0
    return ok


@njit
def compat_noise(d, dt, force, u, n, out):
    """Constant noise force over one step with per-axis variance ``|(d dt) . unit(force)|``."""
    norm = 0.0
    for i in range(n):
        norm += force[i] * force[i]
    norm = math.sqrt(norm)
    for i in range(3):
        out[i] = 0.0
    if norm < 1e-20:
        return
    for i in range(n):
        w = 0.0
        for j in range(n):
            w += d[i, j] * dt * force[j] / norm
        out[i] = u[i] * math.sqrt(abs(w))


@njit
def _force(x, v, fp, ip, tl, tm, ta, offsets, waists, jmaxs, cg, cd, ux, uy, lf, tmp, out):
    local_field(x[0], x[1], x[2], fp, ip, tl, tm, ta, offsets, waists, jmaxs, cg, cd, ux, uy, lf)
    mean_force(lf, fp, ip, out)
    friction_force(lf, v, fp, ip, tmp)
    for i in range(3):
        out[i] += tmp[i]


@njit
def integrate(r0, v0, dt, nsteps, decimate, noise_mode, exit_radius, stop_on_exit, uniforms,
              fp, ip, tl, tm, ta, offsets, waists, jmaxs, cg, cd, ts, rs, vs):
    """RK4 Langevin integration of one trajectory.

    Returns ``(n_recorded, exit_step, status)``; ``exit_step`` is -1 when the
    transverse radius never exceeded ``exit_radius``.
    """
    n = 2 if ip[PLANAR] else 3
    mass = fp[MASS]
    jm = 0
    for k in range(jmaxs.shape[0]):
        jm = max(jm, jmaxs[k])
    ux = np.empty(jm + 1)
    uy = np.empty(jm + 1)
    lf = np.empty(N_LF)
    tmp = np.empty(3)
    d = np.zeros((3, 3))
    chol = np.zeros((3, 3))
    cov = np.zeros((3, 3))
    noise = np.zeros(3)
    kick = np.zeros(3)
    r = r0.copy()
    v = v0.copy()
    rs2 = np.empty(3)
    vs2 = np.empty(3)
    k1r = np.empty(3)
    k1v = np.empty(3)
    k2r = np.empty(3)
    k2v = np.empty(3)
    k3r = np.empty(3)
    k3v = np.empty(3)
    k4r = np.empty(3)
    k4v = np.empty(3)
    fo = np.empty(3)

    ts[0] = 0.0
    for i in range(3):
        rs[0, i] = r[i]
        vs[0, i] = v[i]
    rec = 1
    exit_step = -1
    status = STATUS_OK
    r_exit2 = exit_radius * exit_radius
    if r[0] * r[0] + r[1] * r[1] > r_exit2:
        exit_step = 0
        if stop_on_exit:
            return rec, exit_step, status

    for step in range(nsteps):
        # stage 1 force, shared with the noise setup
        _force(r, v, fp, ip, tl, tm, ta, offsets, waists, jmaxs, cg, cd, ux, uy, lf, tmp, fo)
        for i in range(3):
            noise[i] = 0.0
        if noise_mode != NOISE_NONE:
            diffusion_tensor(lf, fp, ip, d)
            if noise_mode == NOISE_PAPER:
                compat_noise(d, dt, fo, uniforms[step], n, noise)

        for i in range(3):
            k1r[i] = v[i]
            k1v[i] = (fo[i] + noise[i]) / mass
            rs2[i] = r[i] + 0.5 * dt * k1r[i]
            vs2[i] = v[i] + 0.5 * dt * k1v[i]
        _force(rs2, vs2, fp, ip, tl, tm, ta, offsets, waists, jmaxs, cg, cd, ux, uy, lf, tmp, fo)
        for i in range(3):
            k2r[i] = vs2[i]
            k2v[i] = (fo[i] + noise[i]) / mass
            rs2[i] = r[i] + 0.5 * dt * k2r[i]
            vs2[i] = v[i] + 0.5 * dt * k2v[i]
        _force(rs2, vs2, fp, ip, tl, tm, ta, offsets, waists, jmaxs, cg, cd, ux, uy, lf, tmp, fo)
        for i in range(3):
            k3r[i] = vs2[i]
            k3v[i] = (fo[i] + noise[i]) / mass
            rs2[i] = r[i] + dt * k3r[i]
            vs2[i] = v[i] + dt * k3v[i]
        _force(rs2, vs2, fp, ip, tl, tm, ta, offsets, waists, jmaxs, cg, cd, ux, uy, lf, tmp, fo)
        for i in range(3):
            k4r[i] = vs2[i]
            k4v[i] = (fo[i] + noise[i]) / mass
        for i in range(3):
            r[i] += dt * (k1r[i] + 2.0 * k2r[i] + 2.0 * k3r[i] + k4r[i]) / 6.0
            v[i] += dt * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]) / 6.0
        if noise_mode == NOISE_PHYSICAL:
            if not physical_kick(d, dt, uniforms[step], n, chol, cov, kick):
                status = STATUS_NOT_PSD
                break
            for i in range(3):
                v[i] += kick[i] / mass

        finite = True
        for i in range(3):
            if not (math.isfinite(r[i]) and math.isfinite(v[i])):
                finite = False
        if not finite:
            status = STATUS_NONFINITE
            break

        t = (step + 1) * dt
        exited = False
        if exit_step < 0 and r[0] * r[0] + r[1] * r[1] > r_exit2:
            exit_step = step + 1
            exited = True
        if (step + 1) % decimate == 0 or step == nsteps - 1 or (exited and stop_on_exit):
            ts[rec] = t
            for i in range(3):
                rs[rec, i] = r[i]
                vs[rec, i] = v[i]
            rec += 1
        if exited and stop_on_exit:
            break
    return rec, exit_step, status
