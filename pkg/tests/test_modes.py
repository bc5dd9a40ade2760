import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gpvortex import modes as M
from gpvortex.acceptance import manufactured_mode0, manufactured_mode_k
from gpvortex.point_vortex import dipole


@pytest.fixture(scope="module")
def grid():
    return M.mode_grid()


@pytest.fixture(scope="module")
def bases(prof, grid):
    return {k: M.homogeneous_basis(k, prof, grid) for k in range(4)}


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_exponents(bases, k):
    got, exp = M.basis_exponents(bases[k]), M.expected_exponents(k)
    for name, e in exp.items():
        assert got[name] == pytest.approx(e, abs=0.1), name


@pytest.mark.parametrize("k", [1, 2, 3])
def test_wronskian_normalised(bases, k):
    for pair, val in bases[k].wronskian_norm.items():
        assert np.isfinite(val)


def test_z11_closed_form(prof, grid):
    r = grid.r[(grid.r > 0.05) & (grid.r < 30)]
    assert np.max(np.abs(M.z11_defect(prof, r))) < 1e-8


def test_kernel_modes_annihilated(prof, grid):
    # finite-difference operator: truncation error ~5e-6 at the small-r end
    sel = (grid.r > 0.05) & (grid.r < 30)
    for name, (k, nu, psi) in M.kernel_modes(prof, grid).items():
        if k == 0:
            continue
        assert np.max(np.abs(M.apply_mode_operator(k, prof, grid, psi)[sel])) < 1e-5, name


def test_mode0_manufactured(prof, grid, bases):
    (P, h1), (E, h2) = manufactured_mode0(prof)
    assert np.max(np.abs(M.solve_mode0_real(h1, prof, grid).Psi[:, 0] - P(grid.r))) < 1e-6
    assert np.max(np.abs(M.solve_mode0_imag(h2, bases[0]).Psi[:, 0] - E(grid.r))) < 1e-6


@pytest.mark.parametrize("k", [1, 2, 3])
def test_mode_k_manufactured(prof, grid, bases, k):
    Ps, h = manufactured_mode_k(k, prof)
    sol = M.solve_mode_k(k, 1, h, bases[k])
    assert np.max(np.abs(sol.Psi - Ps(grid.r))) < 1e-6
    # interpolation off the nodes
    x = np.array([0.37, 1.91, 4.2])
    assert np.allclose(sol(x), Ps(x), atol=1e-6)


def _bump12(r):
    s = np.clip(r - 1.0, 0.0, 1.0)
    return (s * (1 - s)) ** 3 * 64


def test_mode0_flux_is_constant_past_support(prof, grid):
    sol = M.solve_mode0_real(_bump12, prof, grid)
    r = grid.r
    w2 = prof(r) ** 2
    flux = w2 * r * sol.dPsi[:, 0]
    out = r > 2.0
    assert np.ptp(flux[out]) < 1e-9 * np.max(np.abs(flux))
    assert abs(flux[-1]) > 1e-3  # nonzero moment: Psi grows like log r


def test_mode0_constant_for_zero_moment(prof, grid):
    # subtract a multiple of a second bump so that int w^2 t h dt = 0
    b2 = lambda r: _bump12(r - 0.5)
    t = np.linspace(1e-3, 3, 20001)
    m1 = np.trapezoid(prof(t) ** 2 * t * _bump12(t), t)
    m2 = np.trapezoid(prof(t) ** 2 * t * b2(t), t)
    h = lambda r: _bump12(r) - m1 / m2 * b2(r)
    sol = M.solve_mode0_real(h, prof, grid)
    out = grid.r > 2.5
    assert np.ptp(sol.Psi[out, 0]) < 1e-6 * np.max(np.abs(sol.Psi[:, 0]))


@given(a=st.floats(-3, 3), b=st.floats(-3, 3))
@settings(max_examples=15, deadline=None)
def test_mode_k_linear(prof, bases, a, b):
    _, h1 = manufactured_mode_k(2, prof)
    h2 = lambda r: np.stack([np.exp(-r * r) * r**2, r**4 * np.exp(-r * r)], -1)
    s1 = M.solve_mode_k(2, 1, h1, bases[2]).Psi
    s2 = M.solve_mode_k(2, 1, h2, bases[2]).Psi
    s = M.solve_mode_k(2, 1, lambda r: a * h1(r) + b * h2(r), bases[2]).Psi
    assert np.allclose(s, a * s1 + b * s2, atol=1e-9 * (1 + abs(a) + abs(b)))


def test_divergent_tail_detected(bases):
    h = lambda r: np.stack([np.ones_like(r), np.zeros_like(r)], -1)
    with pytest.raises(M.DivergentIntegralError):
        M.solve_mode_k(2, 1, h, bases[2])


def test_basis_mismatch_rejected(bases):
    with pytest.raises(ValueError):
        M.solve_mode_k(2, 1, lambda r: 0 * r, bases[3])
    with pytest.raises(ValueError):
        M.solve_mode0_imag(lambda r: 0 * r, bases[1])


def test_inner_correction(prof, grid, bases):
    eps = 0.05
    corr = M.first_inner_correction(dipole(1.0, eps), 0, prof, grid=grid, bases={0: bases[0], 2: bases[2]})
    assert M.inner_residual(corr, prof) < 1e-5 * eps**2
    assert 0 < corr.sup() < 10 * eps**2 * np.log(1 / eps) ** 2
