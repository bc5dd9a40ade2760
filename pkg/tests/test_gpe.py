import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gpvortex import _pykernels
from gpvortex._backend import phase_rotate
from gpvortex.ansatz import BoxError, UnderResolvedError
from gpvortex.gpe import (GpeState, NetDegreeError, deviation, disk_integral, init_data, jacobian_field,
                          kirchhoff_on, linear_phase, loop_winding, min_points, run_gpe, step, track_zeros)
from gpvortex.point_vortex import VortexConfig, dipole


@pytest.fixture(scope="module")
def wide(prof):
    cfg = dipole(2.4, 0.1)
    return cfg, init_data(cfg, 8.0, min_points(8.0, 0.1), prof)


def plane_wave(L, N, kx, ky, amp=1.0, eps=0.1):
    x = -L / 2 + L / N * np.arange(N)
    X, Y = np.meshgrid(x, x)
    k = 2 * np.pi / L
    return GpeState(amp * np.exp(1j * k * (kx * X + ky * Y)).astype(complex), L, eps), k * np.hypot(kx, ky)


def test_plane_wave_exact_propagator():
    amp, eps, dt = 1.3, 0.1, 0.004
    st0, k = plane_wave(2 * np.pi, 64, 3, -2, amp, eps)
    st1 = step(st0, dt, 25, propagator="exact")
    omega = k**2 + (amp**2 - 1) / eps**2
    assert np.allclose(st1.u, st0.u * np.exp(-1j * omega * st1.t), atol=1e-11)


def test_plane_wave_saturated_propagator_close():
    st0, k = plane_wave(2 * np.pi, 64, 3, 1)
    st1 = step(st0, 0.004, 25)
    err = np.max(np.abs(st1.u - st0.u * np.exp(-1j * k**2 * st1.t)))
    theta = k**2 * 0.004
    assert err < 25 * theta**3  # phase error O(theta^3) per step


@given(c=st.floats(-20, 20), seed=st.integers(0, 2**16))
@settings(max_examples=30, deadline=None)
def test_rotation_preserves_modulus(c, seed):
    r = np.random.default_rng(seed)
    u = (r.normal(size=(8, 8)) + 1j * r.normal(size=(8, 8)))
    a = np.abs(u).copy()
    v = u.copy()
    phase_rotate(u, c)
    _pykernels.phase_rotate(v, c)
    assert np.allclose(np.abs(u), a, rtol=1e-14)
    assert np.allclose(u, v, rtol=1e-13, atol=1e-13)


@given(x=st.floats(0, 1e3))
def test_saturated_phase(x):
    th = linear_phase(np.array(x))
    assert 0 <= th < np.pi / 2 + 1e-15
    assert th <= x + 1e-15
    if x < 1e-2:
        assert th == pytest.approx(x - x**3 / (3 * (np.pi / 2) ** 2), rel=1e-6, abs=1e-18)


def test_resonant_mode_exact_vs_saturated():
    # |k|^2 dt = 484 * 0.005 sits in the resonance band (pi - 2a, pi), a = dt / eps^2
    L, N, eps, dt = 2 * np.pi, 512, 0.1, 0.005
    x = -L / 2 + L / N * np.arange(N)
    X, _ = np.meshgrid(x, x)
    u0 = (1 + 1e-8 * np.cos(22 * X)).astype(complex)
    grow = {}
    for prop in ("exact", "saturated"):
        s = step(GpeState(u0.copy(), L, eps), dt, 30, propagator=prop)
        grow[prop] = np.max(np.abs(s.u - np.mean(s.u))) / 1e-8
    assert grow["exact"] > 1e3
    assert grow["saturated"] < 10


def test_mass_conserved(wide):
    cfg, s0 = wide
    s1 = step(s0, 0.5 * cfg.eps**2, 10)
    assert s1.mass_drift < 1e-12
    assert s1.steps == 10 and s1.t == pytest.approx(10 * 0.5 * cfg.eps**2)


def test_jacobian_quantised(wide):
    cfg, s = wide
    J = jacobian_field(s)
    for p, d in zip(cfg.positions, cfg.degrees):
        assert disk_integral(s, J, p, 1.0) / np.pi == pytest.approx(d, abs=0.03)
    conj = GpeState(np.conj(s.u), s.L, s.eps)
    p = cfg.positions[0]
    assert disk_integral(conj, jacobian_field(conj), p, 1.0) == pytest.approx(-disk_integral(s, J, p, 1.0))


def test_winding(wide):
    cfg, s = wide
    for p, d in zip(cfg.positions, cfg.degrees):
        assert loop_winding(s, p, 0.5) == pytest.approx(d, abs=1e-12)
    assert loop_winding(s, (0.0, 0.0), 0.5) == pytest.approx(0.0, abs=1e-12)


def test_tracking(wide):
    cfg, s = wide
    tr = track_zeros(s)
    assert not tr.flagged
    assert np.all(tr.residuals < 1e-10)
    order = np.argsort(tr.positions[:, 1])[::-1]
    assert np.allclose(tr.positions[order], cfg.positions, atol=1e-6)
    assert list(tr.degrees[order]) == [1, -1]


def test_short_run_follows_kirchhoff(prof):
    cfg = dipole(1.0, 0.2)
    run = run_gpe(cfg, 0.1, 8.0, prof, sample_dt=0.02)
    assert not run.flagged
    assert run.mass_drift < 1e-12
    dev = deviation(run, kirchhoff_on(run, cfg))
    assert dev.max() < 0.05
    assert run.tracked[-1, 0, 0] > 0.15  # moved in +x at speed ~2


def test_preconditions(prof):
    with pytest.raises(NetDegreeError):
        init_data(VortexConfig([[0, 0]], [1], 0.2), 8.0, 320, prof)
    with pytest.raises(UnderResolvedError):
        init_data(dipole(1.0, 0.2), 8.0, 200, prof)
    with pytest.raises(BoxError):
        init_data(dipole(5.0, 0.2), 8.0, 320, prof)
    s, _ = plane_wave(2 * np.pi, 16, 1, 0)
    with pytest.raises(ValueError):
        step(s, 0.01, 1)  # dt > eps^2 / 2


@given(L=st.floats(1, 50), eps=st.floats(0.02, 0.5))
@settings(max_examples=50, deadline=None)
def test_min_points(L, eps):
    n = min_points(L, eps)
    assert n % 2 == 0 and n >= 8 * L / eps - 1e-6
