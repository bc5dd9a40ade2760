import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gpvortex.acceptance import _leap_source, wave_sources
from gpvortex.wave import (CFLError, SpectralWave, WaveSource, admissible, duhamel_curve, duhamel_dtau,
                           duhamel_eval, growth_curve, homogeneous_eval, leapfrog, outside_cone_decay)

# psi(0, tau) for F = 1/(1 + |x|^2): -int_0^tau rho/(1+rho^2) arccosh(tau/rho) drho, mpmath at 30 digits
QUAD_AT_ORIGIN = {10.0: -4.494670429850085, 100.0: -14.036215911695912}


@pytest.fixture(scope="module")
def sources():
    return wave_sources()


@pytest.mark.parametrize("tau", sorted(QUAD_AT_ORIGIN))
def test_closed_form_at_origin(sources, tau):
    v = duhamel_eval(sources["quadratic"], (0.0, 0.0), tau)
    assert v.value == pytest.approx(QUAD_AT_ORIGIN[tau], abs=1e-9)
    assert not v.flagged


def test_curve_matches_pointwise(sources):
    taus = [2.0, 5.0, 10.0]
    c = duhamel_curve(sources["quadratic"], (0.0, 0.0), taus)
    assert c[-1] == pytest.approx(QUAD_AT_ORIGIN[10.0], abs=1e-8)
    assert c[0] == pytest.approx(duhamel_eval(sources["quadratic"], (0.0, 0.0), 2.0).value, abs=1e-8)


def test_manufactured_tau_squared():
    # psi = tau^2 g solves -psi_tt + Lap psi = -2 g + tau^2 Lap g with zero data
    g = lambda X, Y: np.exp(-(X**2 + Y**2))
    lap = lambda X, Y: (4 * (X**2 + Y**2) - 4) * g(X, Y)
    src = WaveSource(lambda X, Y, t: -2 * g(X, Y) + t**2 * lap(X, Y), "quadratic", time_scale=1.0, check=False)
    x, tau = np.array([0.3, 0.2]), 2.0
    assert duhamel_eval(src, x, tau).value == pytest.approx(tau**2 * g(*x), rel=1e-6)
    assert duhamel_dtau(src, x, tau).value == pytest.approx(2 * tau * g(*x), rel=1e-5)


def test_homogeneous_constant_data():
    assert homogeneous_eval(lambda X, Y: np.ones_like(X), (0.4, -1.0), 3.0) == pytest.approx(3.0, rel=1e-9)


def test_finite_speed(sources):
    # compact source of radius 1: nothing reaches |x| = 5 before tau = 4
    assert duhamel_eval(sources["compact"], (5.0, 0.0), 3.5).value == 0.0
    assert duhamel_eval(sources["compact"], (5.0, 0.0), 4.5).value != 0.0


def _smooth_bump(X, Y, t):
    r2 = (X**2 + Y**2) / 4
    return np.where(r2 < 1, np.exp(1 - 1 / np.maximum(1 - r2, 1e-300)), 0.0)


def test_spectral_propagator_agrees_with_duhamel():
    src = WaveSource(_smooth_bump, "compact", radius=2.0, length=0.1)  # steep near the edge
    sw = SpectralWave(16.0, 512)
    f = src.F(sw.X, sw.Y, 0.0)
    for _ in range(40):
        sw.step(f, f, 0.1)
    psi, grad, dpsi = sw.sample(np.array([[1.5, 0.5]]))
    ref = duhamel_eval(src, (1.5, 0.5), 4.0)
    assert psi[0] == pytest.approx(ref.value, rel=2e-6)
    assert dpsi[0] == pytest.approx(duhamel_dtau(src, (1.5, 0.5), 4.0).value, rel=1e-4)


def test_leapfrog_energy_identity_second_order():
    src = _leap_source()
    devs = [leapfrog(src, 4.0, 8.0, N).deviation for N in (64, 128)]
    assert 1.8 < np.log2(devs[0] / devs[1]) < 2.2


def test_cfl_guard():
    with pytest.raises(CFLError):
        leapfrog(_leap_source(), 1.0, 8.0, 32, cfl=0.9)


def test_outside_cone_quadratic(sources):
    assert outside_cone_decay(sources["quadratic"], 10.0, [25, 50, 100]) == pytest.approx(2.0, abs=0.2)
    with pytest.raises(ValueError):
        outside_cone_decay(sources["quadratic"], 10.0, [5.0, 50.0])


def test_growth_classification_quadratic(sources):
    gc = growth_curve(sources["quadratic"], 100.0, [(0.0, 0.0)], n_tau=16)
    assert gc.admissible["quadratic"]
    assert gc.best == "quadratic"


def test_admissible_rejects_faster_growth():
    tau = np.geomspace(1, 100, 30)
    assert not admissible(tau, tau**2, "linear")
    assert admissible(tau, np.log1p(tau), "compact")


def test_source_class_validation():
    with pytest.raises(ValueError):
        WaveSource(lambda X, Y, t: 1 / (1 + np.hypot(X, Y)), "quadratic")
    with pytest.raises(ValueError):
        WaveSource(lambda X, Y, t: np.ones_like(X), "compact", radius=1.0)
    with pytest.raises(ValueError):
        WaveSource(lambda X, Y, t: X, "gaussian")


@given(a=st.floats(-5, 5).filter(lambda a: abs(a) > 1e-3), x=st.floats(-2, 2), y=st.floats(-2, 2))
@settings(max_examples=10, deadline=None)
def test_linear_in_source(sources, a, x, y):
    base = sources["quadratic"]
    scaled = WaveSource(lambda X, Y, t: a * base.F(X, Y, t), "quadratic")
    assert duhamel_eval(scaled, (x, y), 3.0).value == pytest.approx(a * duhamel_eval(base, (x, y), 3.0).value,
                                                                   rel=1e-10, abs=1e-13)
