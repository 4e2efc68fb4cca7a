import math

import numpy as np
import pytest

from fiberqed.langevin import (
    SQRT3, CallableModel, ConstantFieldModel, IntegrationError, IntegratorConfig, PhaseState, make_rng,
    noise_kick, normalize_noise_mode, psd_factor, rk4_step, simulate_trajectory, trapping_time,
)

K_SPRING = 4.0
MASS = 1.3


def harmonic(r, v):
    return -K_SPRING * r


def harmonic_error(dt, t_end=5.0):
    model = CallableModel(harmonic, MASS)
    cfg = IntegratorConfig(dt, t_end, "none", stop_on_exit=False)
    tr = simulate_trajectory(model, cfg, (1.0, 0.0, 0.0), (0.0, 0.5, 0.0))
    w = math.sqrt(K_SPRING / MASS)
    t = tr.t[-1]
    exact = np.array([math.cos(w * t), 0.5 / w * math.sin(w * t)])
    return np.linalg.norm(tr.r[-1, :2] - exact)


def test_free_particle_is_exact():
    s = rk4_step(PhaseState((1.0, 2.0, 3.0), (0.5, -1.0, 2.0)), lambda r, v: np.zeros(3), 0.1, 2.0)
    np.testing.assert_array_equal(s.r, [1.05, 1.9, 3.2])
    np.testing.assert_array_equal(s.v, [0.5, -1.0, 2.0])


def test_constant_force_is_exact():
    F = np.array([1.0, -2.0, 0.5])
    s = PhaseState((0.0, 0.0, 0.0), (1.0, 0.0, 0.0))
    for _ in range(10):
        s = rk4_step(s, lambda r, v: F, 0.1, 2.0)
    np.testing.assert_allclose(s.r, np.array([1.0, 0, 0]) * 1.0 + 0.5 * F / 2.0 * 1.0, rtol=1e-14, atol=1e-15)
    np.testing.assert_allclose(s.v, np.array([1.0, 0, 0]) + F / 2.0, rtol=1e-14)


def test_noise_force_held_constant_within_step():
    s = rk4_step(PhaseState((0.0, 0.0, 0.0), (0.0, 0.0, 0.0)), lambda r, v: np.zeros(3), 0.2, 1.0,
                 noise_force=(1.0, 0.0, 0.0))
    assert s.r[0] == pytest.approx(0.5 * 0.2 ** 2, rel=1e-14)


def test_rk4_richardson_order():
    e1, e2, e3 = harmonic_error(0.05), harmonic_error(0.025), harmonic_error(0.0125)
    assert math.log2(e1 / e2) >= 3.9
    assert math.log2(e2 / e3) >= 3.9


def test_energy_drift_small():
    model = CallableModel(lambda r, v: -r, 1.0)
    cfg = IntegratorConfig(1e-3, 10.0, "none", stop_on_exit=False)
    tr = simulate_trajectory(model, cfg, (1.0, 0.0, 0.0), (0.0, 1.0, 0.0))
    E = 0.5 * np.sum(tr.v ** 2, axis=1) + 0.5 * np.sum(tr.r ** 2, axis=1)
    assert len(tr.t) == 10001
    assert np.max(np.abs(E / E[0] - 1.0)) < 1e-8


def test_flat_profile_momentum_variance_grows_linearly():
    D = np.diag([0.0, 0.0, 2.0])
    model = ConstantFieldModel(np.zeros(3), D, 1.5)
    cfg = IntegratorConfig(0.1, 2.0, "physical", seed=3)
    p = np.array([simulate_trajectory(model, cfg, (0, 0, 0), (0, 0, 0), (i,)).v[:, 2] * 1.5 for i in range(2000)])
    t = np.arange(21) * 0.1
    var = p.var(axis=0)
    for i in (5, 10, 15, 20):
        assert var[i] == pytest.approx(2 * D[2, 2] * t[i], rel=0.10)


def test_physical_noise_covariance():
    D = np.array([[2.0, 0.5, 0.0], [0.5, 1.0, 0.2], [0.0, 0.2, 0.5]])
    dt = 0.05
    kicks = noise_kick(D, dt, make_rng(11), "physical", size=1_000_000)
    cov = np.cov(kicks.T)
    target = 2 * D * dt
    np.testing.assert_allclose(np.diag(cov), np.diag(target), rtol=0.01)
    assert abs(cov[0, 1] - target[0, 1]) < 0.01 * target[0, 0]


def test_uniform_noise_support():
    D = np.diag([1.0, 4.0, 0.0])
    kicks = noise_kick(D, 0.5, make_rng(12), "physical", size=200_000)
    sig = np.sqrt(np.diag(2 * D * 0.5))
    assert np.all(np.abs(kicks) <= SQRT3 * sig * (1 + 1e-12))
    assert np.all(np.abs(kicks).max(axis=0)[:2] > 0.999 * SQRT3 * sig[:2])


def test_paper_noise_variance_follows_force_direction():
    D = np.array([[2.0, 0.5, 0.0], [0.5, 1.0, 0.0], [0.0, 0.0, 0.0]])
    F = np.array([3.0, 4.0, 0.0])
    draws = noise_kick(D, 0.1, make_rng(13), "paper-compat", force=F, size=1_000_000)
    target = np.abs(D * 0.1 @ (F / 5.0))
    np.testing.assert_allclose(draws.var(axis=0)[:2], target[:2], rtol=0.01)
    assert np.all(noise_kick(D, 0.1, make_rng(1), "paper_compat", force=np.zeros(3)) == 0)


def test_zero_diffusion_gives_zero_kick():
    assert np.all(noise_kick(np.zeros((3, 3)), 0.1, make_rng(0)) == 0)


def test_non_psd_diffusion_rejected():
    with pytest.raises(ValueError):
        psd_factor(np.diag([1.0, -1.0, 1.0]))
    with pytest.raises(ValueError):
        noise_kick(np.diag([1.0, -1.0, 1.0]), 0.1, make_rng(0))
    with pytest.raises(ValueError):
        normalize_noise_mode("quantum")


def test_psd_factor_handles_singular_matrices():
    v = np.array([1.0, 2.0, 0.0])
    a = np.outer(v, v)
    L = psd_factor(a)
    np.testing.assert_allclose(L @ L.T, a, atol=1e-14)


def test_straight_line_exit_time():
    model = ConstantFieldModel(np.zeros(3), np.zeros((3, 3)), 1.0)
    cfg = IntegratorConfig(0.01, 100.0, "none", core_exit_radius=25.0)
    tr = simulate_trajectory(model, cfg, (5.0, 0.0, 0.0), (2.0, 0.0, 0.0))
    assert tr.exit_time == pytest.approx(10.0, abs=0.01)
    assert trapping_time(tr) == (tr.exit_time, False)


def test_censoring_and_start_outside():
    model = ConstantFieldModel(np.zeros(3), np.zeros((3, 3)), 1.0)
    cfg = IntegratorConfig(0.1, 1.0, "none", core_exit_radius=25.0)
    tr = simulate_trajectory(model, cfg, (0.0, 0.0, 0.0), (1.0, 0.0, 0.0))
    assert trapping_time(tr) == (1.0, True)
    out = simulate_trajectory(model, cfg, (30.0, 0.0, 0.0), (0.0, 0.0, 0.0))
    assert trapping_time(out) == (0.0, False)
    assert trapping_time(tr, core_exit_radius=0.55) == (pytest.approx(0.6), False)


def test_nan_force_aborts_with_partial_trajectory():
    model = CallableModel(lambda r, v: np.array([np.nan if r[0] > 1.0 else 0.0, 0.0, 0.0]), 1.0)
    cfg = IntegratorConfig(0.1, 10.0, "none")
    with pytest.raises(IntegrationError) as err:
        simulate_trajectory(model, cfg, (0.0, 0.0, 0.0), (1.0, 0.0, 0.0))
    tr = err.value.trajectory
    assert tr.status == "nonfinite" and 0 < tr.t[-1] < 10.0
    assert np.all(np.diff(tr.t) > 0)


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(0.0, 1.0)
    with pytest.raises(ValueError):
        IntegratorConfig(1.0, 0.5)
    with pytest.raises(ValueError):
        PhaseState((0.0, np.inf, 0.0), (0.0, 0.0, 0.0))


@pytest.mark.parametrize("mode", ["physical", "paper_compat"])
def test_fixed_seed_is_bit_identical(caption_config, mode, tmp_path):
    model = caption_config.model()
    cfg = caption_config.integrator(t_max=50.0, noise_mode=mode, seed=99)
    r0, v0 = caption_config.initial_state()
    a = simulate_trajectory(model, cfg, r0, v0, (1,))
    b = simulate_trajectory(model, cfg, r0, v0, (1,))
    c = simulate_trajectory(model, cfg, r0, v0, (2,))
    a.to_csv(tmp_path / "a.csv")
    b.to_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert not np.array_equal(a.r[: len(c.r)][-1], c.r[-1])


@pytest.mark.parametrize("mode", ["none", "physical", "paper_compat"])
def test_compiled_and_reference_loops_agree(caption_config, mode):
    model = caption_config.model()
    cfg = caption_config.integrator(t_max=20.0, noise_mode=mode, seed=5, stop_on_exit=False)
    r0, v0 = caption_config.initial_state()
    ref_model = CallableModel(lambda r, v: model.sample(r, v).total, model.mass,
                              lambda r, v: model.sample(r, v).diffusion, planar=True)
    a = simulate_trajectory(model, cfg, r0, v0, (3,))
    b = simulate_trajectory(ref_model, cfg, r0, v0, (3,))
    np.testing.assert_allclose(a.t, b.t, rtol=0, atol=0)
    np.testing.assert_allclose(a.r, b.r, rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(a.v, b.v, rtol=1e-9, atol=1e-9)


def test_caption_preset_runs_full_length_without_nan(caption_config):
    model = caption_config.model()
    cfg = caption_config.integrator(noise_mode="paper_compat", seed=1, stop_on_exit=False, decimate=100)
    assert cfg.nsteps == 30_000
    r0, v0 = caption_config.initial_state()
    tr = simulate_trajectory(model, cfg, r0, v0)
    assert tr.status == "ok"
    assert tr.t[-1] == pytest.approx(1500.0)
    assert np.all(np.isfinite(tr.r)) and np.all(np.isfinite(tr.v))


def test_decimation_keeps_final_sample(caption_config):
    model = caption_config.model()
    cfg = caption_config.integrator(t_max=1.0, noise_mode="none", decimate=7, stop_on_exit=False)
    tr = simulate_trajectory(model, cfg, *caption_config.initial_state())
    assert tr.t[-1] == pytest.approx(1.0)
    assert tr.t[1] == pytest.approx(0.35)
