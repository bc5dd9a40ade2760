import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gpvortex.profile import (ProfileError, eval_g, far_field, farfield_constant, ode_residual,
                              series_coeffs, shoot_slope, solve_profile, write_csv)

# w'(0) of the degree-one profile
A_REF = 0.5831894958603


def test_slope_frozen(prof):
    assert prof.shooting_slope == pytest.approx(A_REF, abs=1e-12)


def test_bisection_agrees_with_newton(prof):
    assert shoot_slope() == pytest.approx(prof.shooting_slope, abs=1e-8)


def test_residual_at_midpoints(prof):
    assert np.max(np.abs(ode_residual(prof))) < 1e-8


def test_shape(prof):
    r = np.linspace(1e-3, 50, 2000)
    w, dw = prof(r), prof(r, 1)
    assert np.all((w > 0) & (w < 1))
    assert np.all(dw > 0)
    assert prof(0.0) == 0.0
    assert prof(0.0, 1) == pytest.approx(A_REF, abs=1e-12)


def test_series_matches_interpolant(prof):
    c = series_coeffs(prof.shooting_slope)
    r = 0.04
    s = sum(ck * r ** (2 * k + 1) for k, ck in enumerate(c))
    assert prof(r) == pytest.approx(s, rel=1e-10)
    assert c[0] == prof.shooting_slope
    # r^3 coefficient forced by the ODE
    assert c[1] == pytest.approx(-prof.shooting_slope / 8, rel=1e-12)


@given(r=st.floats(20.0, 200.0), order=st.integers(0, 4))
@settings(max_examples=40, deadline=None)
def test_far_field_derivatives(r, order):
    # d^l/dr^l of 1 - 1/(2 r^2)
    exact = 1 - 0.5 / r**2 if order == 0 else (-1) ** (order + 1) * 0.5 * \
        np.prod(np.arange(2, order + 2)) * r ** (-order - 2)
    assert far_field(r, order) == pytest.approx(exact, rel=1e-12)


def test_far_field_constant_and_refinement(prof):
    c = farfield_constant(prof)
    assert 1.0 < c < 1.5
    assert c == pytest.approx(1.26178, abs=5e-5)
    fine = solve_profile(refine=2)
    assert abs(farfield_constant(fine) - c) / c < 1e-6


@given(r=st.floats(1e-3, 55.0))
@settings(max_examples=60, deadline=None)
def test_w_and_g_consistent(prof, r):
    w = prof(r)
    assert 0 < w < 1
    g, gp = eval_g(prof, np.array([r]))
    assert g[0] * r == pytest.approx(w, rel=1e-12)
    assert np.isfinite(gp[0])


def test_far_tail_tracks_asymptotics(prof):
    r = np.array([30.0, 40.0, 50.0])
    assert np.all(np.abs(prof(r) - far_field(r)) < 2 / r**4)


def test_rejects_short_domain():
    with pytest.raises(ValueError):
        solve_profile(r_max=20.0)


def test_tolerance_enforced():
    with pytest.raises(ProfileError):
        solve_profile(tol=1e-16)


def test_csv(prof, tmp_path):
    p = tmp_path / "w.csv"
    write_csv(prof, p)
    head = p.read_text().splitlines()[0]
    assert head.startswith("r")
    tab = np.loadtxt(p, delimiter=",", skiprows=1)
    assert tab.shape[1] >= 3
    assert np.all(np.diff(tab[:, 0]) > 0)
