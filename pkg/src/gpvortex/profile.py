"""Degree-one vortex modulus w(r).

Solves  w'' + w'/r - w/r^2 + (1 - w^2) w = 0,  w(0) = 0,  w -> 1,
on a graded radial grid and serves w and its derivatives at arbitrary radii.

The solve is a Newton polish by multiple shooting: unknown states (w, w') at
every grid node plus the slope a = w'(0), with the Taylor series at the first
node and w(r_max) = 1 - 1/(2 r_max^2) at the last.  The initial guess comes
from bisection shooting on a.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp
from scipy.interpolate import BPoly
from scipy.sparse.linalg import spsolve

R_SERIES = 0.05  # below this radius derivatives come from the Taylor series
N_SERIES = 8  # odd Taylor coefficients kept: r, r^3, ..., r^15


class ProfileError(RuntimeError):
    pass


@dataclass(frozen=True)
class RadialGrid:
    nodes: np.ndarray
    r_max: float

    def __post_init__(self):
        r = self.nodes
        if r[0] != 0.0 or np.any(np.diff(r) <= 0):
            raise ValueError("grid must start at 0 and be strictly increasing")
        if self.r_max < 40:
            raise ValueError("r_max must be >= 40")


def graded_grid(r_max: float = 60.0, h0: float = 0.01, ratio: float = 1.02,
                r_switch: float = 2.0, refine: int = 1) -> RadialGrid:
    """Uniform step h0 on [0, r_switch], geometric growth beyond.

    ``refine`` > 1 splits every interval into that many equal pieces.
    """
    n0 = int(round(r_switch / h0))
    r = list(np.linspace(0.0, r_switch, n0 + 1))
    h = h0
    while r[-1] < r_max:
        h *= ratio
        r.append(min(r[-1] + h, r_max))
    if r[-1] - r[-2] < 0.25 * h:  # avoid a sliver at the end
        r.pop(-2)
    r = np.asarray(r)
    if refine > 1:
        t = np.linspace(0, 1, refine + 1)[:-1]
        r = (r[:-1, None] + np.diff(r)[:, None] * t).ravel()
        r = np.append(r, r_max)
    return RadialGrid(r, float(r_max))


def series_coeffs(a: float, n: int = N_SERIES) -> np.ndarray:
    """Odd Taylor coefficients c_1, c_3, ... of w at the origin.

    From c_m (m^2 - 1) = -[r^{m-2}] (w - w^3).
    """
    c = np.zeros(2 * n)  # dense power coefficients, index = power
    c[1] = a
    for m in range(3, 2 * n, 2):
        cube = np.convolve(np.convolve(c[:m], c[:m]), c[:m])
        c[m] = -(c[m - 2] - cube[m - 2]) / (m * m - 1)
    return c[1::2]


def _series_eval(a: float, r, order: int):
    c = series_coeffs(a)
    powers = np.arange(1, 2 * len(c), 2)
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    for ck, p in zip(c, powers):
        if p < order:
            continue
        fall = factorial(p) / factorial(p - order)
        out = out + ck * fall * r ** (p - order)
    return out


def _rhs(r, w, v):
    return -v / r + w / r**2 - (1 - w * w) * w


def _higher(r, w, w1, order):
    """Derivatives of order 2..4 from the ODE, given w and w'."""
    w2 = _rhs(r, w, w1)
    if order == 2:
        return w2
    w3 = 2 * w1 / r**2 - w2 / r - 2 * w / r**3 - (1 - 3 * w * w) * w1
    if order == 3:
        return w3
    return (3 * w2 / r**2 - 6 * w1 / r**3 - w3 / r + 6 * w / r**4
            + 6 * w * w1 * w1 - (1 - 3 * w * w) * w2)


def far_field(r, order: int = 0):
    """Truncated far-field law w = 1 - 1/(2 r^2) and its derivatives."""
    r = np.asarray(r, dtype=float)
    if order == 0:
        return 1.0 - 0.5 / r**2
    return (-1) ** (order + 1) * factorial(order + 1) / 2 * r ** (-order - 2)


def shoot_slope(r_end: float = 12.0, lo: float = 0.5, hi: float = 0.7,
                r0: float = 1e-3, rtol: float = 1e-13) -> float:
    """Bisection on a: overshoot when w crosses 1, undershoot when w' < 0."""

    def f(r, y):
        return [y[1], _rhs(r, y[0], y[1])]

    def over(r, y):
        return y[0] - 1.0
    over.terminal = True

    def under(r, y):
        return y[1]
    under.terminal = True

    def classify(a):
        y0 = [_series_eval(a, r0, 0), _series_eval(a, r0, 1)]
        sol = solve_ivp(f, (r0, r_end), y0, method="DOP853", rtol=rtol,
                        atol=1e-15, events=(over, under))
        if sol.t_events[0].size:
            return 1
        if sol.t_events[1].size:
            return -1
        return 0

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        s = classify(mid)
        if s > 0:
            hi = mid
        elif s < 0:
            lo = mid
        else:
            break
    return 0.5 * (lo + hi)


def _shoot_guess(a: float, nodes: np.ndarray, r_join: float = 7.0):
    def f(r, y):
        return [y[1], _rhs(r, y[0], y[1])]

    r0 = nodes[1]
    y0 = [_series_eval(a, r0, 0), _series_eval(a, r0, 1)]
    inner = nodes[(nodes >= r0) & (nodes <= r_join)]
    sol = solve_ivp(f, (r0, inner[-1]), y0, method="DOP853", rtol=1e-12,
                    atol=1e-14, t_eval=inner)
    w = np.empty(len(nodes) - 1)
    v = np.empty(len(nodes) - 1)
    k = len(inner)
    w[:k], v[:k] = sol.y
    rr = nodes[1 + k:]
    w[k:] = 1 - 0.5 / rr**2 - 1.125 / rr**4
    v[k:] = 1 / rr**3 + 4.5 / rr**5
    return w, v


def _propagate(ra, rb, w, v, nsub):
    """Vectorised RK4 for the state and its 2x2 sensitivity over [ra, rb]."""
    h = (rb - ra) / nsub
    n = len(ra)
    y = np.stack([w, v], axis=1)
    S = np.tile(np.eye(2), (n, 1, 1))

    def f(r, y, S):
        ww, vv = y[:, 0], y[:, 1]
        dy = np.stack([vv, _rhs(r, ww, vv)], axis=1)
        J = np.zeros((n, 2, 2))
        J[:, 0, 1] = 1.0
        J[:, 1, 0] = 1 / r**2 - 1 + 3 * ww * ww
        J[:, 1, 1] = -1 / r
        return dy, J @ S

    r = ra.copy()
    for _ in range(nsub):
        k1, K1 = f(r, y, S)
        k2, K2 = f(r + h / 2, y + h[:, None] / 2 * k1, S + h[:, None, None] / 2 * K1)
        k3, K3 = f(r + h / 2, y + h[:, None] / 2 * k2, S + h[:, None, None] / 2 * K2)
        k4, K4 = f(r + h, y + h[:, None] * k3, S + h[:, None, None] * K3)
        y = y + h[:, None] / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        S = S + h[:, None, None] / 6 * (K1 + 2 * K2 + 2 * K3 + K4)
        r = r + h
    return y, S


def _newton(nodes, a, w, v, nsub, maxit=25, xtol=1e-14):
    rr = nodes[1:]
    m = len(rr)
    R = nodes[-1]
    for it in range(maxit):
        y, S = _propagate(rr[:-1], rr[1:], w[:-1], v[:-1], nsub)
        F = np.empty(2 * m + 1)
        F[0] = w[0] - _series_eval(a, rr[0], 0)
        F[1] = v[0] - _series_eval(a, rr[0], 1)
        F[2:-1:2] = w[1:] - y[:, 0]
        F[3:-1:2] = v[1:] - y[:, 1]
        F[-1] = w[-1] - (1 - 0.5 / R**2)
        # unknown ordering: a, w_1, v_1, ..., w_m, v_m
        rows, cols, vals = [], [], []

        def put(i, j, x):
            rows.append(i)
            cols.append(j)
            vals.append(x)

        da = 1e-7
        put(0, 0, -(_series_eval(a + da, rr[0], 0) - _series_eval(a - da, rr[0], 0)) / (2 * da))
        put(1, 0, -(_series_eval(a + da, rr[0], 1) - _series_eval(a - da, rr[0], 1)) / (2 * da))
        put(0, 1, 1.0)
        put(1, 2, 1.0)
        i = np.arange(m - 1)
        for p in range(2):
            row = 2 + 2 * i + p
            rows.extend(row)
            cols.extend(1 + 2 * (i + 1) + p)
            vals.extend(np.ones(m - 1))
            for q in range(2):
                rows.extend(row)
                cols.extend(1 + 2 * i + q)
                vals.extend(-S[:, p, q])
        put(2 * m, 2 * m - 1, 1.0)
        Jm = sparse.csc_matrix((vals, (rows, cols)), shape=(2 * m + 1, 2 * m + 1))
        dx = spsolve(Jm, -F)
        a += dx[0]
        w = w + dx[1::2]
        v = v + dx[2::2]
        if np.max(np.abs(dx)) < xtol:
            return a, w, v, it + 1
    raise ProfileError("Newton polish did not converge; refine grid or relax tol")


@dataclass(frozen=True)
class RadialProfile:
    grid: RadialGrid
    w: np.ndarray
    dw: np.ndarray
    shooting_slope: float
    residual: float = float("nan")
    _interp: BPoly = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self._interp is None:
            r = self.grid.nodes
            ddw = np.zeros_like(r)
            ddw[1:] = _rhs(r[1:], self.w[1:], self.dw[1:])
            ys = np.stack([self.w, self.dw, ddw], axis=1)
            object.__setattr__(self, "_interp", BPoly.from_derivatives(r, ys))

    @property
    def r_max(self) -> float:
        return self.grid.r_max

    def __call__(self, r, deriv_order: int = 0):
        return eval_w(self, r, deriv_order)


def ode_residual(profile: RadialProfile, points: np.ndarray | None = None) -> np.ndarray:
    """Residual of the profile ODE for the interpolant.

    Evaluated by default at interval midpoints, where the interpolant is not
    pinned to the ODE by construction.
    """
    r = profile.grid.nodes
    if points is None:
        points = 0.5 * (r[1:] + r[:-1])
    p = profile._interp
    w, w1, w2 = p(points), p(points, 1), p(points, 2)
    return w2 + w1 / points - w / points**2 + (1 - w * w) * w


def solve_profile(r_max: float = 60.0, tol: float = 1e-8, refine: int = 1,
                  nsub: int = 200) -> RadialProfile:
    if r_max < 40 or tol <= 0:
        raise ValueError("need r_max >= 40 and tol > 0")
    grid = graded_grid(r_max, refine=refine)
    a0 = shoot_slope()
    w, v = _shoot_guess(a0, grid.nodes)
    a, w, v, _ = _newton(grid.nodes, a0, w, v, nsub)
    W = np.concatenate([[0.0], w])
    V = np.concatenate([[a], v])
    prof = RadialProfile(grid, W, V, float(a))
    res = float(np.max(np.abs(ode_residual(prof))))
    if not res < tol:
        raise ProfileError(f"ODE residual {res:.3e} exceeds tol {tol:.1e}")
    return RadialProfile(grid, W, V, float(a), res, prof._interp)


def eval_w(profile: RadialProfile, r, deriv_order: int = 0):
    """w^(l)(r) for l = 0..4.  Total on r >= 0."""
    if deriv_order not in range(5):
        raise ValueError("deriv_order must be in 0..4")
    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    out = np.empty_like(r)
    near = r < R_SERIES
    far = r > profile.r_max
    mid = ~(near | far)
    out[near] = _series_eval(profile.shooting_slope, r[near], deriv_order)
    out[far] = far_field(r[far], deriv_order)
    if mid.any():
        rm = r[mid]
        if deriv_order < 2:
            out[mid] = profile._interp(rm, deriv_order)
        else:
            out[mid] = _higher(rm, profile._interp(rm), profile._interp(rm, 1),
                               deriv_order)
    return out[0] if scalar else out


def farfield_constant(profile: RadialProfile, r_lo: float = 10.0, r_hi: float = 30.0,
                      n: int = 401) -> float:
    """sup over [r_lo, r_hi] of r^4 |w - (1 - 1/(2r^2))|."""
    r = np.linspace(r_lo, r_hi, n)
    return float(np.max(r**4 * np.abs(eval_w(profile, r) - far_field(r))))


def write_csv(profile: RadialProfile, path) -> None:
    r = profile.grid.nodes
    np.savetxt(path, np.column_stack([r, profile.w, profile.dw]), delimiter=",",
               header="r [core units y=x/eps],w [1],dw [1/core unit]", comments="")


def eval_g(profile: RadialProfile, r):
    """g = w/r and g'(r)/r, smooth through the origin.

    W = w e^{i d theta} = g(r) (y1 + i d y2), so gradients of W never divide by r
    in the core.
    """
    r = np.asarray(r, dtype=float)
    near = r < R_SERIES
    rs = np.where(near, 1.0, r)
    w = eval_w(profile, rs)
    w1 = eval_w(profile, rs, 1)
    g = w / rs
    gp = (w1 * rs - w) / rs**3
    if np.any(near):
        c = series_coeffs(profile.shooting_slope)
        m = np.arange(1, 2 * len(c), 2)
        rn = r[near] if r.ndim else r
        gn = sum(ck * rn ** (mk - 1) for ck, mk in zip(c, m))
        gpn = sum(ck * (mk - 1) * rn ** (mk - 3) for ck, mk in zip(c[1:], m[1:]))
        if r.ndim:
            g[near], gp[near] = gn, gpn
        else:
            g, gp = gn, gpn
    return g, gp
