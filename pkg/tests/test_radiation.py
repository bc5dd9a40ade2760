import numpy as np
import pytest
from scipy.integrate import cumulative_trapezoid
from hypothesis import given, settings, strategies as st

from gpvortex.point_vortex import corotating_pair, dipole, integrate
from gpvortex.radiation import (build_forcing, integrate_corrected, psi2_out, radiation_field,
                                radiation_gradients, spectral_radiation, t_of_tau, tau_of_t, xi1_correction,
                                xi1_velocity)


@pytest.fixture(scope="module")
def pair_run():
    cfg = corotating_pair(2.0, 0.1)
    return cfg, *radiation_gradients(cfg, 0.2, 0.02)


@given(t=st.floats(0, 10), eps=st.floats(0.01, 0.5))
def test_clock_roundtrip(t, eps):
    assert t_of_tau(tau_of_t(t, eps), eps) == pytest.approx(t, rel=1e-12, abs=1e-14)
    assert tau_of_t(t, eps) == pytest.approx(np.sqrt(2) * t / eps)


def test_forcing_support_and_decay():
    base = integrate(corotating_pair(2.0, 0.1), 0.2, 0.02)
    f = build_forcing(base)
    xi = base.positions[0]
    # cut off inside delta of every vortex
    assert np.all(f.F_t(xi[:, 0] + 0.5 * f.delta, xi[:, 1], 0.0) == 0)
    r = np.array([20.0, 40.0, 80.0])
    v = np.abs(f.F_t(r * np.cos(1.0), r * np.sin(1.0), 0.0))
    assert np.all(v > 0)
    assert np.ptp(v * r**2) < 0.2 * np.max(v * r**2)  # |F| ~ |x|^-2


def test_translating_dipole_has_no_leading_forcing():
    base = integrate(dipole(1.0, 0.1), 0.2, 0.02)
    X, Y = np.meshgrid(np.linspace(-5, 5, 41), np.linspace(-5, 5, 41))
    assert np.max(np.abs(build_forcing(base).F_t(X, Y, 0.1))) < 1e-14


def test_fidelity_validation():
    base = integrate(dipole(1.0, 0.1), 0.1, 0.02)
    with pytest.raises(ValueError):
        build_forcing(base, fidelity="full")
    with pytest.raises(ValueError):
        build_forcing(base, fidelity="extended")


def test_spectral_matches_duhamel(pair_run):
    cfg, base, forcing, rad = pair_run
    m = len(rad.t) // 2
    t = rad.t[m]
    x = forcing.path.positions(t)[0]
    ref = radiation_field(forcing, [(x, float(tau_of_t(t, cfg.eps)))])[0]
    g = rad.grad_at_vortices[m, 0]
    assert np.linalg.norm(g - ref.grad) < 2e-3 * np.linalg.norm(ref.grad)
    assert rad.dtau_at_vortices[m, 0] == pytest.approx(ref.dtau, rel=2e-3, abs=1e-8)


def test_spectral_converged_in_h(pair_run):
    cfg, base, forcing, rad = pair_run
    fine = spectral_radiation(forcing, 0.02, h=forcing.delta / 6)
    G, Gf = rad.grad_at_vortices, fine.grad_at_vortices
    assert np.max(np.abs(Gf - G)) < 5e-4 * np.max(np.abs(G))


def test_zero_forcing_is_kirchhoff_bitwise(pair_run):
    cfg, base, forcing, rad = pair_run
    ct = integrate_corrected(cfg, 0.2, 0.02, gradients=np.zeros_like(rad.grad_at_vortices), base=base)
    assert np.array_equal(ct.trajectory.positions, base.positions)


def test_xi1_linearises_corrected_law(pair_run):
    cfg, base, forcing, rad = pair_run
    G = 2 * rad.grad_at_vortices
    ct = integrate_corrected(cfg, 0.2, 0.02, gradients=G, base=base)
    x1 = xi1_correction(base, G)
    assert np.max(np.abs(base.positions + x1 - ct.trajectory.positions)) < 1e-9
    assert np.max(np.abs(x1)) > 1e-5
    v1 = xi1_velocity(base, x1, G)
    x1_again = cumulative_trapezoid(v1, base.t, axis=0, initial=0)
    assert np.max(np.abs(x1_again - x1)) < 1e-2 * np.max(np.abs(x1))


def test_psi2_leading(pair_run):
    cfg, base, forcing, rad = pair_run
    s = radiation_field(forcing, [((3.0, 0.0), 2.0)])
    assert psi2_out(forcing, s)[0] == pytest.approx(0.5 * cfg.eps * np.sqrt(2) * s[0].dtau)


def test_probe_outside_window_rejected(pair_run):
    _, _, forcing, _ = pair_run
    with pytest.raises(ValueError):
        radiation_field(forcing, [((0.0, 0.0), 100.0)])


def test_corrected_csv(pair_run, tmp_path):
    cfg, base, forcing, rad = pair_run
    ct = integrate_corrected(cfg, 0.2, 0.02, gradients=2 * rad.grad_at_vortices, base=base)
    p = tmp_path / "c.csv"
    ct.write_csv(p)
    head = p.read_text().splitlines()[0]
    assert "dev_1 [physical x]" in head and head.startswith("t [physical time]")
