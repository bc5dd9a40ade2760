import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gpvortex.ansatz import (BoxError, R2_mode0_closed, R2_mode0_measured, ansatz_values, build_ansatz,
                             circle_winding, epsilon_slope, identity_defect, mode_amplitudes,
                             mode_expand_near, remainder_envelope, sup_residual, trig_identity_check)
from gpvortex.point_vortex import VortexConfig, dipole, kirchhoff_rhs

FOUR = VortexConfig([[0.0, 0.5], [0.0, -0.5], [1.5, 0.3], [-1.2, 0.9]], [1, -1, 1, 1], eps=0.05)


def test_zeros_and_modulus(prof):
    cfg = FOUR
    c = cfg.positions / cfg.eps
    assert np.all(np.abs(ansatz_values(cfg, prof, c[:, 0], c[:, 1])) < 1e-14)
    Y = np.random.default_rng(0).uniform(-40, 40, (2, 500))
    assert np.all(np.abs(ansatz_values(cfg, prof, *Y)) < 1)


def test_winding(prof):
    cfg = FOUR
    c = cfg.positions / cfg.eps
    for j in range(cfg.n):
        assert circle_winding(cfg, prof, c[j], 3.0) == pytest.approx(cfg.degrees[j], abs=1e-12)
    assert circle_winding(cfg, prof, (0.0, 0.0), 80.0) == pytest.approx(2.0, abs=1e-12)


def test_time_derivative_matches_moving_centres(prof):
    cfg = dipole(1.0, 0.1)
    v = kirchhoff_rhs(cfg)
    Y1, Y2 = np.meshgrid(np.linspace(-8, 8, 17), np.linspace(-8, 8, 17))
    _, e2Ut = ansatz_values(cfg, prof, Y1, Y2, with_time_derivative=True, velocities=v)
    h = 1e-6
    up = ansatz_values(cfg.with_positions(cfg.positions + h * v), prof, Y1, Y2)
    dn = ansatz_values(cfg.with_positions(cfg.positions - h * v), prof, Y1, Y2)
    assert np.allclose(e2Ut, cfg.eps**2 * (up - dn) / (2 * h), atol=1e-7)


def test_identity_on_periodic_box(prof_long):
    cfg = dipole(1.0, 0.05)
    assert identity_defect(cfg, kirchhoff_rhs(cfg), prof_long, 100.0, 800) < 1e-7


def test_residual_scales_like_eps_squared(prof):
    eps = [0.1, 0.05]
    sups = [sup_residual(VortexConfig(FOUR.positions, FOUR.degrees, e), prof) for e in eps]
    assert 1.8 < epsilon_slope(eps, sups) < 2.2


def test_mode_two_dominates_near_core(prof):
    cfg = FOUR
    v = kirchhoff_rhs(cfg)
    nm = mode_expand_near(cfg, v, prof, 0, 1.0)
    amp = mode_amplitudes(nm.R2_j)
    assert amp[2] == pytest.approx(np.hypot(*nm.closed_R2_mode2), rel=0.05)
    others = np.delete(amp, [0, 2])
    assert np.max(others) < remainder_envelope(cfg, v, 0, 1.0)


def test_mode_zero_closed_form(prof):
    cfg = FOUR
    v = kirchhoff_rhs(cfg)
    r = np.array([0.5, 1.0, 2.0])
    meas = R2_mode0_measured(cfg, v, prof, 0, r)
    closed = R2_mode0_closed(cfg, v, prof, 0, r)
    assert np.max(np.abs(meas - closed)) < 5 * cfg.eps**3 * 2.0


def test_box_margin(prof):
    with pytest.raises(BoxError):
        build_ansatz(dipole(1.0, 0.05), 60.0, 240, prof)


@given(ry=st.floats(0.01, 0.8), th=st.floats(0, 2 * np.pi), q=st.floats(0, 2 * np.pi))
@settings(max_examples=50, deadline=None)
def test_trig_series_converges(ry, th, q):
    y = ry * np.array([np.cos(th), np.sin(th)])
    zeta = np.array([np.cos(q), np.sin(q)])
    r1, r2 = trig_identity_check(y, zeta, 400)
    assert abs(r1) < 1e-10 and abs(r2) < 1e-10
    # partial sums err by at most the geometric tail
    p1, p2 = trig_identity_check(y, zeta, 5)
    tail = ry**6 / (1 - ry)
    assert abs(p1) <= tail * (1 + 1e-9) + 1e-14 and abs(p2) <= tail * (1 + 1e-9) + 1e-14


def test_trig_rejects_outside():
    with pytest.raises(ValueError):
        trig_identity_check([2.0, 0.0], [1.0, 0.0], 10)
