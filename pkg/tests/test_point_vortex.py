import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gpvortex import _pykernels
from gpvortex._backend import kirchhoff_velocity
from gpvortex.point_vortex import (CoincidentVortexError, CollisionError, VortexConfig, corotating_pair,
                                   dipole, hamiltonian, integrate, kirchhoff_acceleration, kirchhoff_rhs,
                                   random_config, rk4_order)


def perp(v):
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def grad_K(cfg, h=1e-6):
    g = np.zeros_like(cfg.positions)
    for j in range(cfg.n):
        for c in range(2):
            p, m = cfg.positions.copy(), cfg.positions.copy()
            p[j, c] += h
            m[j, c] -= h
            g[j, c] = (hamiltonian(cfg.with_positions(p)) - hamiltonian(cfg.with_positions(m))) / (2 * h)
    return g


def test_dipole_translates():
    cfg = dipole(1.0)
    v = kirchhoff_rhs(cfg)
    assert np.allclose(v, [[2.0, 0.0], [2.0, 0.0]], atol=1e-14)
    tr = integrate(cfg, 1.0, 1e-2)
    assert np.allclose(tr.positions[-1], cfg.positions + [2.0, 0.0], atol=1e-12)


def test_corotating_pair_period():
    ell = 2.0
    tr = integrate(corotating_pair(ell), np.pi * ell**2 / 2, 1e-3)  # one full turn at omega = 4/l^2
    assert np.allclose(tr.positions[-1], tr.positions[0], atol=1e-9)


def test_K_ordered_pairs():
    cfg = VortexConfig([[0, 0], [3, 4]], [1, 1])
    assert hamiltonian(cfg) == pytest.approx(2 * 2 * np.log(5.0), rel=1e-14)


def test_gradient_identity(rng):
    cfg = random_config(5, rng, min_sep=0.6)
    lhs = perp(grad_K(cfg))
    rhs = 2 * cfg.degrees[:, None] * kirchhoff_rhs(cfg)
    assert np.allclose(lhs, rhs, atol=1e-7)


def test_conservation(rng):
    tr = integrate(random_config(4, rng, min_sep=0.8), 2.0, 1e-3)
    assert np.max(np.abs(tr.K - tr.K[0])) < 1e-8
    assert np.max(np.abs(tr.centroid - tr.centroid[0])) < 1e-10


def test_rk4_order(rng):
    assert 3.8 < rk4_order(random_config(3, rng, min_sep=0.8), 0.5, 0.05) < 4.3


def test_acceleration_matches_difference(rng):
    cfg = random_config(4, rng, min_sep=0.8)
    h = 1e-5
    tr = integrate(cfg, 2 * h, h)
    fd = (tr.positions[2] - 2 * tr.positions[1] + tr.positions[0]) / h**2
    assert np.allclose(kirchhoff_acceleration(cfg.positions, cfg.degrees), fd, rtol=1e-3, atol=1e-4)


def test_backends_agree(rng):
    cfg = random_config(8, rng, box=4.0)
    assert np.allclose(kirchhoff_velocity(cfg.positions, cfg.degrees),
                       _pykernels.kirchhoff_velocity(cfg.positions, cfg.degrees), rtol=1e-13, atol=1e-13)


def test_collision_guard():
    # separation 0.15 < 4 eps: the guard trips after the first step
    with pytest.raises(CollisionError) as err:
        integrate(dipole(0.15, eps=0.05), 1.0, 1e-3)
    assert len(err.value.trajectory.t) == 2


def test_validation():
    with pytest.raises(ValueError):
        VortexConfig([[0, 0]], [2])
    with pytest.raises(ValueError):
        VortexConfig([[0, 0], [1, 1]], [1])
    with pytest.raises(CoincidentVortexError):
        kirchhoff_rhs(VortexConfig([[0, 0], [0, 0]], [1, -1]))
    with pytest.raises(ValueError):
        integrate(dipole(), -1.0, 1e-3)


coords = st.floats(-3, 3, allow_nan=False)


@given(x=st.lists(st.tuples(coords, coords), min_size=2, max_size=5),
       d=st.lists(st.sampled_from([-1, 1]), min_size=5, max_size=5),
       theta=st.floats(0, 2 * np.pi), shift=st.tuples(coords, coords))
@settings(max_examples=60, deadline=None)
def test_K_invariant_under_rigid_motion(x, d, theta, shift):
    p = np.array(x)
    if len(p) > 1 and np.min([np.hypot(*(a - b)) for i, a in enumerate(p) for b in p[i + 1:]]) < 1e-2:
        return
    cfg = VortexConfig(p, d[: len(p)])
    R = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    moved = cfg.with_positions(p @ R.T + np.array(shift))
    assert hamiltonian(moved) == pytest.approx(hamiltonian(cfg), abs=1e-9)
    # velocities rotate with the frame
    assert np.allclose(kirchhoff_rhs(moved), kirchhoff_rhs(cfg) @ R.T, rtol=1e-8, atol=1e-8)
