import math
import warnings

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fiberqed.modes import (
    HGIndex, ModeSuperposition, ModeTableError, cross_section, energy_fraction, grid_rows, hermite_table,
    hg_eval_1d, load_mode_table, overlap, parse_mode_row, profile_eval, profile_grad, profile_value_grad,
    waist_for_order,
)

IG55 = {(4, 1): 0.755, (2, 3): -0.643, (0, 5): 0.130}


def hg_closed_form(j, s, w0):
    """sqrt(sqrt(2/pi)/(2^j j! w0)) H_j(sqrt2 s/w0) exp(-s^2/w0^2) at 50 digits."""
    mp.mp.dps = 50
    t = mp.sqrt(2) * mp.mpf(s) / w0
    norm = mp.sqrt(mp.sqrt(2 / mp.pi) / (mp.mpf(2) ** j * mp.factorial(j) * w0))
    return float(norm * mp.hermite(j, t) * mp.exp(-mp.mpf(s) ** 2 / w0 ** 2))


@pytest.mark.parametrize("j", [0, 1, 2, 5, 12, 25, 40])
@pytest.mark.parametrize("s", [-17.3, -3.0, 0.0, 0.4, 6.1, 21.0])
def test_hermite_function_matches_closed_form(j, s):
    got = hg_eval_1d(j, s, 7.5)
    ref = hg_closed_form(j, s, 7.5)
    assert got == pytest.approx(ref, rel=1e-11, abs=1e-14)


def test_hermite_table_rows_match_single_evaluations():
    s = np.linspace(-20, 20, 31)
    tab = hermite_table(6, s, 4.0)
    for j in range(7):
        np.testing.assert_allclose(tab[j], hg_eval_1d(j, s, 4.0), rtol=1e-14, atol=1e-300)


def test_orthonormality_up_to_index_five():
    modes = [ModeSuperposition.hg(l, m, 3.0) for l in range(6) for m in range(6)]
    gram = np.array([[overlap(a, b) for b in modes] for a in modes])
    assert np.max(np.abs(gram - np.eye(len(modes)))) < 1e-12


def test_ince_gaussian_norm_and_order():
    ig = ModeSuperposition.from_mapping(IG55, 10.0, "IG_o_5_5")
    assert ig.coefficient_norm == pytest.approx(1.000374, abs=1e-12)
    assert ig.is_ince and ig.order == 5
    assert cross_section(ig) == pytest.approx(1.000374, rel=1e-10)


def test_mixed_order_ince_label_rejected():
    with pytest.raises(ModeTableError):
        ModeSuperposition.from_mapping({(0, 0): 0.6, (1, 0): 0.8}, 1.0, "IG_bad")


def test_gaussian_center_value():
    g = ModeSuperposition.hg(0, 0, 10.0)
    assert profile_eval(g, (0.0, 0.0)) == pytest.approx(math.sqrt(2 / math.pi) / 10.0, rel=1e-14)


def test_gradient_of_gaussian_example():
    # f = sqrt(2/pi)/w0 exp(-r^2/w0^2), df/dx = -2x/w0^2 f
    g = ModeSuperposition.hg(0, 0, 1.0)
    fx, fy = profile_grad(g, (0.5, 0.0))
    f = math.sqrt(2 / math.pi) * math.exp(-0.25)
    assert fx == pytest.approx(-f, rel=1e-14)
    assert fy == 0.0


@pytest.mark.parametrize("terms", [IG55, {(0, 0): 1.0}, {(3, 2): 0.5, (1, 4): 0.5, (5, 0): -0.7}])
def test_gradients_against_central_differences(terms):
    mode = ModeSuperposition.from_mapping(terms, 6.0)
    g = np.linspace(-12, 12, 21)
    xx, yy = np.meshgrid(g, g, indexing="ij")
    _, fx, fy = profile_value_grad(mode, xx, yy)
    h = 1e-5
    ex = (profile_eval(mode, np.stack([xx + h, yy], -1)) - profile_eval(mode, np.stack([xx - h, yy], -1))) / (2 * h)
    ey = (profile_eval(mode, np.stack([xx, yy + h], -1)) - profile_eval(mode, np.stack([xx, yy - h], -1))) / (2 * h)
    scale = np.max(np.abs(np.concatenate([fx.ravel(), fy.ravel()])))
    assert np.max(np.abs(fx - ex)) / scale < 1e-6
    assert np.max(np.abs(fy - ey)) / scale < 1e-6


def test_point_and_grid_evaluation_agree():
    mode = ModeSuperposition.from_mapping(IG55, 10.0, "IG_o_5_5")
    g = np.linspace(-20, 20, 9)
    xx, yy = np.meshgrid(g, g, indexing="ij")
    f, fx, fy = profile_value_grad(mode, xx, yy)
    for i in (0, 3, 8):
        for j in (1, 4, 7):
            pf, pfx, pfy = profile_value_grad(mode, xx[i, j], yy[i, j])
            assert float(pf) == pytest.approx(f[i, j], rel=1e-13, abs=1e-16)
            assert float(pfx) == pytest.approx(fx[i, j], rel=1e-12, abs=1e-16)


def test_grid_rows_layout():
    rows = list(grid_rows(ModeSuperposition.hg(0, 0, 5.0), 10.0, 3))
    assert len(rows) == 9
    assert [r[:2] for r in rows[:3]] == [(-10.0, -10.0), (-10.0, 0.0), (-10.0, 10.0)]


def test_energy_fraction_and_waist_rule():
    assert energy_fraction(0, 1e3, 10.0) == pytest.approx(1.0, abs=1e-12)
    assert energy_fraction(0, 10.0, 10.0) == pytest.approx(math.erf(math.sqrt(2)) ** 2, rel=1e-10)
    assert waist_for_order(0, 25.0, 10.0) == 10.0
    w5 = waist_for_order(5, 25.0, 10.0)
    assert 0 < w5 < 10.0
    assert energy_fraction(5, 25.0, w5) == pytest.approx(0.999, abs=1e-6)


def test_mode_table_parsing(tmp_path):
    p = tmp_path / "modes.csv"
    p.write_text("# comment\nIG_o_5_5, 4,1,0.755, 2,3,-0.643, 0,5,0.130\n\nHG_1_0, 1, 0, 1.0  # trailing\n")
    modes = load_mode_table(p, waist=2.0)
    assert [m.label for m in modes] == ["IG_o_5_5", "HG_1_0"]
    assert modes[0].waist == 2.0


def test_mode_table_rejects_bad_rows():
    with pytest.raises(ModeTableError):
        parse_mode_row(["X", "0", "0", "1+2j"], 1.0)
    with pytest.raises(ModeTableError):
        parse_mode_row(["X", "0", "0"], 1.0)
    with pytest.raises(ModeTableError):
        parse_mode_row(["X", "-1", "0", "1"], 1.0)
    with pytest.warns(UserWarning):
        parse_mode_row(["X", "0", "0", "0.5"], 1.0)


def test_index_limits():
    with pytest.raises(ValueError):
        HGIndex(-1, 0)
    with pytest.raises(ValueError):
        ModeSuperposition.hg(41, 0, 1.0)
    with pytest.raises(ValueError):
        ModeSuperposition.from_mapping({(0, 0): complex(1, 1)}, 1.0)


@settings(max_examples=60, deadline=None)
@given(l=st.integers(0, 8), m=st.integers(0, 8), x=st.floats(-30, 30), y=st.floats(-30, 30),
       w0=st.floats(1.0, 20.0))
def test_hg_factorises(l, m, x, y, w0):
    mode = ModeSuperposition.hg(l, m, w0)
    got = float(profile_eval(mode, (x, y)))
    assert got == pytest.approx(hg_eval_1d(l, x, w0) * hg_eval_1d(m, y, w0), rel=1e-12, abs=1e-300)


@settings(max_examples=40, deadline=None)
@given(l=st.integers(0, 6), m=st.integers(0, 6), x=st.floats(-10, 10), y=st.floats(-10, 10))
def test_hg_parity(l, m, x, y):
    mode = ModeSuperposition.hg(l, m, 3.0)
    assert float(profile_eval(mode, (-x, y))) == pytest.approx((-1) ** l * float(profile_eval(mode, (x, y))),
                                                                rel=1e-12, abs=1e-300)


def test_first_order_mode_gradient_at_origin():
    # (2/w0) sqrt(1) u_0(0) u_0(0) = 2 sqrt(2/pi) for w0 = 1
    fx, fy = profile_grad(ModeSuperposition.hg(1, 0, 1.0), (0.0, 0.0))
    assert fx == pytest.approx(2 * math.sqrt(2 / math.pi), rel=1e-14)
    assert fy == 0.0


def test_superposition_is_linear():
    ig = ModeSuperposition.from_mapping(IG55, 8.0, "IG_o_5_5")
    pts = np.random.default_rng(1).uniform(-15, 15, size=(50, 2))
    parts = sum(a * profile_eval(ModeSuperposition.hg(l, m, 8.0), pts) for (l, m), a in IG55.items())
    np.testing.assert_allclose(profile_eval(ig, pts), parts, rtol=1e-13, atol=1e-17)
