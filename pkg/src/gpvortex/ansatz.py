"""Multi-vortex product ansatz and its first error.

Everything here lives in the rescaled frame y = x / eps, with vortex centres
at xi_j / eps.  The residual operator is

    S(u) = eps^2 i u_t + Lap_y u + (1 - |u|^2) u,

and for the product ansatz S(U) = i U (R1 + i R2) with R1, R2 given term by
term in ``residual_R1R2``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .point_vortex import VortexConfig, kirchhoff_rhs
from .profile import RadialProfile, eval_g, eval_w


class UnderResolvedError(ValueError):
    pass


class BoxError(ValueError):
    pass


@dataclass
class ComplexField2D:
    samples: np.ndarray  # (N, N) complex, index [iy, ix]
    L: float
    frame: str = "y"
    eps: float = 1.0
    center: tuple = (0.0, 0.0)

    def __post_init__(self):
        n = self.samples.shape[0]
        if self.samples.shape != (n, n) or n % 2:
            raise ValueError("samples must be N x N with N even")
        if self.frame not in ("x", "y"):
            raise ValueError("frame must be 'x' or 'y'")

    @property
    def N(self) -> int:
        return self.samples.shape[0]

    @property
    def h(self) -> float:
        return self.L / self.N

    def coords(self):
        return grid_coords(self.L, self.N, self.center)

    def dump(self, stem) -> None:
        """Flat binary (row-major little-endian float64 re/im pairs) + JSON sidecar."""
        data = np.empty(self.samples.shape + (2,), dtype="<f8")
        data[..., 0] = self.samples.real
        data[..., 1] = self.samples.imag
        data.tofile(f"{stem}.bin")
        meta = {"N": self.N, "L": self.L, "frame": self.frame, "eps": self.eps,
                "center": list(self.center), "layout": "row-major [iy, ix], (re, im) float64 LE"}
        with open(f"{stem}.json", "w") as fh:
            json.dump(meta, fh, indent=2)

    @classmethod
    def load(cls, stem) -> "ComplexField2D":
        with open(f"{stem}.json") as fh:
            meta = json.load(fh)
        n = meta["N"]
        data = np.fromfile(f"{stem}.bin", dtype="<f8").reshape(n, n, 2)
        return cls(data[..., 0] + 1j * data[..., 1], meta["L"], meta["frame"],
                   meta["eps"], tuple(meta["center"]))


def grid_coords(L: float, N: int, center=(0.0, 0.0)):
    s = -L / 2 + L * np.arange(N) / N
    X, Y = np.meshgrid(center[0] + s, center[1] + s)
    return X, Y


def _scaled(config: VortexConfig):
    return config.positions / config.eps


def _check_box(config, L, center, margin):
    c = _scaled(config) - np.asarray(center)
    if np.any(np.abs(c) > L / 2 - margin):
        raise BoxError(f"vortex closer than {margin} core units to the box edge")


def vortex_factor(profile: RadialProfile, y1, y2, d: float):
    """W_j = g(r) (y1 + i d y2) and its gradient, for one centred vortex."""
    r = np.hypot(y1, y2)
    g, gp = eval_g(profile, r)
    z = y1 + 1j * d * y2
    W = g * z
    Wx = gp * y1 * z + g
    Wy = gp * y2 * z + 1j * d * g
    return W, Wx, Wy


def ansatz_values(config: VortexConfig, profile: RadialProfile, Y1, Y2,
                  with_time_derivative: bool = False, velocities=None):
    """U at points; optionally eps^2 U_t for centres moving with ``velocities``."""
    xs = _scaled(config)
    facs = [vortex_factor(profile, Y1 - p[0], Y2 - p[1], d)
            for p, d in zip(xs, config.degrees)]
    U = np.ones(np.broadcast(Y1, Y2).shape, dtype=complex)
    for W, _, _ in facs:
        U = U * W
    if not with_time_derivative:
        return U
    v = np.asarray(velocities, dtype=float)
    n = len(facs)
    Ut = np.zeros_like(U)
    for j in range(n):
        others = np.ones_like(U)
        for k in range(n):
            if k != j:
                others = others * facs[k][0]
        _, Wx, Wy = facs[j]
        # dW_j/dt = -grad W_j . d(xi_j/eps)/dt
        Ut += others * (-(Wx * v[j, 0] + Wy * v[j, 1]) / config.eps)
    return U, config.eps**2 * Ut


def build_ansatz(config: VortexConfig, L: float, N: int, profile: RadialProfile,
                 center=(0.0, 0.0), margin: float = 40.0) -> ComplexField2D:
    """U = prod W(y - xi_j/eps) (or its conjugate for d_j = -1) on an N x N grid."""
    _check_box(config, L, center, margin)
    Y1, Y2 = grid_coords(L, N, center)
    return ComplexField2D(ansatz_values(config, profile, Y1, Y2), L, "y",
                          config.eps, tuple(center))


def winding_number(values_on_loop: np.ndarray) -> float:
    """Discrete sum of wrapped phase increments around a closed loop, over 2 pi."""
    ph = np.angle(values_on_loop)
    dph = np.diff(np.append(ph, ph[0]))
    dph = (dph + np.pi) % (2 * np.pi) - np.pi
    return float(np.sum(dph) / (2 * np.pi))


def circle_winding(config, profile, center, radius, m: int = 2048) -> float:
    t = 2 * np.pi * np.arange(m) / m
    Y1 = center[0] + radius * np.cos(t)
    Y2 = center[1] + radius * np.sin(t)
    return winding_number(ansatz_values(config, profile, Y1, Y2))


@dataclass
class ResidualDecomposition:
    R1: np.ndarray
    R2: np.ndarray
    Y1: np.ndarray
    Y2: np.ndarray
    excluded: np.ndarray = field(default=None)  # nodes within one cell of a centre
    U: np.ndarray = field(default=None)

    def S(self):
        return 1j * self.U * (self.R1 + 1j * self.R2)


def _pieces(config, profile, Y1, Y2):
    """Per-vortex a_j = grad w_j / w_j and b_j = d_j grad theta_j, and w_j."""
    xs = _scaled(config)
    a, b, w = [], [], []
    for p, d in zip(xs, config.degrees):
        z1, z2 = Y1 - p[0], Y2 - p[1]
        r2 = z1 * z1 + z2 * z2
        r = np.sqrt(r2)
        with np.errstate(divide="ignore", invalid="ignore"):
            wr = eval_w(profile, r)
            q = eval_w(profile, r, 1) / (wr * r)
            a.append((q * z1, q * z2))
            b.append((-d * z2 / r2, d * z1 / r2))
        w.append(wr)
    return a, b, w


def residual_R1R2(config: VortexConfig, velocities, profile: RadialProfile,
                  Y1, Y2, cell: float | None = None) -> ResidualDecomposition:
    """R1, R2 at the points (Y1, Y2), term by term.

    R1 = sum_j a_j.(-eps xidot_j) + 2 sum_j sum_{k!=j} a_j . b_k
    R2 = sum_j b_j.(-eps xidot_j) + sum_j sum_{k!=j} b_j . b_k
         - (1 - prod w_j^2 - sum (1 - w_j^2)) - sum_j sum_{k!=j} a_j . a_k
    with a_j = grad w_j / w_j, b_j = d_j grad theta_j.
    """
    Y1 = np.asarray(Y1, dtype=float)
    Y2 = np.asarray(Y2, dtype=float)
    v = -config.eps * np.asarray(velocities, dtype=float)
    a, b, w = _pieces(config, profile, Y1, Y2)
    n = config.n
    R1 = np.zeros(np.broadcast(Y1, Y2).shape)
    R2 = np.zeros_like(R1)
    for j in range(n):
        R1 += a[j][0] * v[j, 0] + a[j][1] * v[j, 1]
        R2 += b[j][0] * v[j, 0] + b[j][1] * v[j, 1]
        for k in range(n):
            if k == j:
                continue
            R1 += 2 * (a[j][0] * b[k][0] + a[j][1] * b[k][1])
            R2 += b[j][0] * b[k][0] + b[j][1] * b[k][1]
            R2 -= a[j][0] * a[k][0] + a[j][1] * a[k][1]
    prod = np.ones_like(R1)
    tot = np.zeros_like(R1)
    for wj in w:
        prod *= wj * wj
        tot += 1 - wj * wj
    R2 -= 1 - prod - tot
    xs = _scaled(config)
    dist = np.min([np.hypot(Y1 - p[0], Y2 - p[1]) for p in xs], axis=0)
    if cell is None:
        cell = 0.0
    excluded = dist <= cell
    R1 = np.where(dist > 0, R1, 0.0)
    R2 = np.where(dist > 0, R2, 0.0)
    U = ansatz_values(config, profile, Y1, Y2)
    return ResidualDecomposition(R1, R2, Y1, Y2, excluded, U)


def residual_on_grid(config, velocities, profile, L, N, center=(0.0, 0.0)):
    Y1, Y2 = grid_coords(L, N, center)
    return residual_R1R2(config, velocities, profile, Y1, Y2, cell=L / N)


def _bump(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        f = np.where(t > 0, np.exp(-1 / np.where(t > 0, t, 1)), 0.0)
        g = np.where(t < 1, np.exp(-1 / np.where(t < 1, 1 - t, 1)), 0.0)
    return f / (f + g)


def box_window(L, N, center=(0.0, 0.0), flat: float = 0.55, taper: float = 0.2):
    """Separable window: 1 where |y_i - c_i| < flat L/2, 0 near the box edge."""
    X, Y = grid_coords(L, N, center)
    half = L / 2

    def one(s):
        u = (half - np.abs(s)) / half  # 1 at centre, 0 at edge
        return _bump((u - (1 - flat - taper)) / taper)

    return one(X - center[0]) * one(Y - center[1])


def spectral_laplacian(f: np.ndarray, L: float) -> np.ndarray:
    N = f.shape[0]
    k = 2 * np.pi * np.fft.fftfreq(N, d=L / N)
    K2 = k[None, :] ** 2 + k[:, None] ** 2
    return np.fft.ifft2(-K2 * np.fft.fft2(f))


def resolution_tail(f: np.ndarray) -> float:
    """Fraction of spectral energy in the outer eighth of wavenumbers."""
    N = f.shape[0]
    F = np.abs(np.fft.fft2(f)) ** 2
    k = np.abs(np.fft.fftfreq(N)) * N
    hi = (k[None, :] > 3 * N / 8) | (k[:, None] > 3 * N / 8)
    return float(F[hi].sum() / F.sum())


def residual_direct(config: VortexConfig, velocities, profile: RadialProfile,
                    L: float, N: int, center=(0.0, 0.0), tail_tol: float = 1e-10):
    """S(U) = eps^2 i U_t + Lap U + (1 - |U|^2) U on the grid.

    The ansatz is not periodic, so the Laplacian is taken spectrally of the
    windowed field; the result is exact only where the window equals one, and
    that mask is returned with S.
    """
    Y1, Y2 = grid_coords(L, N, center)
    U, e2Ut = ansatz_values(config, profile, Y1, Y2, True, velocities)
    win = box_window(L, N, center)
    V = win * U + (1 - win)
    tail = resolution_tail(V)
    if tail > tail_tol:
        raise UnderResolvedError(f"spectral tail fraction {tail:.2e} > {tail_tol:.0e}")
    S = 1j * e2Ut + spectral_laplacian(V, L) + (1 - np.abs(U) ** 2) * U
    return S, win >= 1.0 - 1e-15, (Y1, Y2)


def identity_defect(config, velocities, profile, L, N, min_dist: float = 3.0,
                    center=(0.0, 0.0)) -> float:
    """max |S_direct - i U (R1 + i R2)| over valid nodes at distance >= min_dist."""
    S, valid, (Y1, Y2) = residual_direct(config, velocities, profile, L, N, center)
    dec = residual_R1R2(config, velocities, profile, Y1, Y2)
    xs = _scaled(config)
    dist = np.min([np.hypot(Y1 - p[0], Y2 - p[1]) for p in xs], axis=0)
    ok = valid & (dist >= min_dist)
    return float(np.max(np.abs(S - dec.S())[ok]))


def sup_residual(config, profile, velocities=None, h: float = 0.25,
                 pad: float = 20.0) -> float:
    """sup |S(U)| = sup |U| |R1 + i R2| over a y-grid covering all cores."""
    if velocities is None:
        velocities = kirchhoff_rhs(config)
    xs = _scaled(config)
    lo = xs.min(axis=0) - pad
    hi = xs.max(axis=0) + pad
    g1 = np.arange(lo[0], hi[0] + h, h) + 0.5 * h * 0.618
    g2 = np.arange(lo[1], hi[1] + h, h) + 0.5 * h * 0.382
    Y1, Y2 = np.meshgrid(g1, g2)
    dec = residual_R1R2(config, velocities, profile, Y1, Y2)
    return float(np.max(np.abs(dec.S())))


def epsilon_slope(eps_values, values) -> float:
    return float(np.polyfit(np.log(eps_values), np.log(values), 1)[0])


# ---------------------------------------------------------------- near-core modes

def _circle(config, j, r, m):
    th = 2 * np.pi * np.arange(m) / m
    c = _scaled(config)[j]
    return c[0] + r * np.cos(th), c[1] + r * np.sin(th), th


def angular_modes(f: np.ndarray, kmax: int = 8):
    """Cosine/sine coefficients (a_k, b_k), k = 0..kmax, of samples on a circle."""
    m = len(f)
    F = np.fft.rfft(f) / m
    a = 2 * F.real
    b = -2 * F.imag
    a[0] /= 2
    return a[: kmax + 1], b[: kmax + 1]


def leading_mode1(config, velocities, j, Y1, Y2):
    """The O(eps) mode-1 terms removed before inspecting near-core spectra."""
    xs = config.positions
    d = config.degrees
    acc = -np.asarray(velocities)[j].copy()
    for k in range(config.n):
        if k != j:
            z = xs[j] - xs[k]
            acc += 2 * d[k] * np.array([-z[1], z[0]]) / (z @ z)
    return acc


@dataclass
class NearModes:
    r: float
    R1_full: tuple  # (a_k, b_k) of R1 minus the mode-1 leading term
    R2_full: tuple
    R1_j: tuple  # same for the vortex-j part only
    R2_j: tuple
    closed_R1_mode2: tuple  # (cos, sin) coefficients of the closed form
    closed_R2_mode2: tuple


def mode_expand_near(config: VortexConfig, velocities, profile: RadialProfile,
                     j: int, r: float, m: int = 128, delta: float | None = None,
                     kmax: int = 8) -> NearModes:
    """Angular Fourier content of R1, R2 on |y - xi_j/eps| = r."""
    if delta is None:
        from .point_vortex import min_distance_of
        delta = 0.25 * min_distance_of(config.positions)
    if r > delta / config.eps:
        raise ValueError("probe radius exceeds delta/eps")
    eps = config.eps
    Y1, Y2, th = _circle(config, j, r, m)
    dec = residual_R1R2(config, velocities, profile, Y1, Y2)
    lead = leading_mode1(config, velocities, j, Y1, Y2)
    wr = eval_w(profile, r)
    q = eval_w(profile, r, 1) / wr  # w'/w
    dj = config.degrees[j]
    ct, st = np.cos(th), np.sin(th)
    grad_w = (q * ct, q * st)
    grad_th = (-st / r, ct / r)
    lead1 = eps * (grad_w[0] * lead[0] + grad_w[1] * lead[1])
    lead2 = eps * dj * (grad_th[0] * lead[0] + grad_th[1] * lead[1])
    # vortex-j part: grad w_j/w_j . (-eps xidot_j + 2 sum d_k grad theta_k), likewise for R2
    a, b, _ = _pieces(config, profile, Y1, Y2)
    v = -eps * np.asarray(velocities)[j]
    s1 = np.full_like(Y1, v[0])
    s2 = np.full_like(Y1, v[1])
    for k in range(config.n):
        if k != j:
            s1 = s1 + 2 * b[k][0]
            s2 = s2 + 2 * b[k][1]
    Rj1 = a[j][0] * s1 + a[j][1] * s2 - lead1
    Rj2 = b[j][0] * s1 + b[j][1] * s2 - lead2
    c1 = np.zeros(2)
    c2 = np.zeros(2)
    for k in range(config.n):
        if k == j:
            continue
        z = config.positions[j] - config.positions[k]
        rho2 = z @ z
        qjk = np.arctan2(z[1], z[0])
        # sin(2(th - q)) = sin2th cos2q - cos2th sin2q
        amp1 = -2 * eps**2 * (q * r) * config.degrees[k] / rho2
        c1 += amp1 * np.array([-np.sin(2 * qjk), np.cos(2 * qjk)])
        amp2 = -2 * eps**2 * dj * config.degrees[k] / rho2
        c2 += amp2 * np.array([np.cos(2 * qjk), np.sin(2 * qjk)])
    return NearModes(r, angular_modes(dec.R1 - lead1, kmax), angular_modes(dec.R2 - lead2, kmax),
                     angular_modes(Rj1, kmax), angular_modes(Rj2, kmax), tuple(c1), tuple(c2))


def mode_amplitudes(coeffs) -> np.ndarray:
    a, b = coeffs
    return np.hypot(a, b)


def remainder_envelope(config: VortexConfig, velocities, j: int, r: float,
                       safety: float = 4.0) -> float:
    """Explicit eps^3 (1/r + r) bound for the non-leading angular content.

    The geometric factor collects the first omitted Taylor terms of the
    other vortices' phase gradients and moduli around vortex j.
    """
    eps = config.eps
    xs = config.positions
    v = np.asarray(velocities)
    G = 0.0
    rho = []
    for k in range(config.n):
        if k == j:
            continue
        rk = np.linalg.norm(xs[j] - xs[k])
        rho.append(rk)
        G += 1 / rk**3 + np.linalg.norm(v[k]) / rk**2
        for l in range(config.n):
            if l not in (j, k):
                G += 1 / (rk**2 * np.linalg.norm(xs[j] - xs[l]))
    geo = 1.0 / (1.0 - eps * r / min(rho)) if rho else 1.0
    return safety * G * eps**3 * (1 / r + r) * geo


def R2_mode0_closed(config: VortexConfig, velocities, profile, j: int, r):
    """Leading-order radial part of R2 near vortex j.

    eps^2 [C_j + (1 - w(r)^2) sum_k rho_jk^-2], where C_j collects the other
    vortices' phase gradients evaluated at xi_j.
    """
    eps = config.eps
    xs = config.positions
    d = config.degrees
    v = np.asarray(velocities)

    def perp(z):
        return np.array([-z[1], z[0]])

    C = 0.0
    s = 0.0
    for k in range(config.n):
        if k == j:
            continue
        zk = xs[j] - xs[k]
        rk2 = zk @ zk
        s += 1 / rk2
        C -= d[k] * perp(zk) @ v[k] / rk2
        for l in range(config.n):
            if l in (j, k):
                continue
            zl = xs[j] - xs[l]
            C += d[k] * d[l] * (perp(zk) @ perp(zl)) / (rk2 * (zl @ zl))
    w = eval_w(profile, r)
    return eps**2 * (C + (1 - w * w) * s)


def R2_mode0_measured(config, velocities, profile, j: int, r, m: int = 128):
    """Angular mean of R2 on circles |y_j| = r (vectorised over r)."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    th = 2 * np.pi * np.arange(m) / m
    c = _scaled(config)[j]
    Y1 = c[0] + r[:, None] * np.cos(th)
    Y2 = c[1] + r[:, None] * np.sin(th)
    dec = residual_R1R2(config, velocities, profile, Y1, Y2)
    return dec.R2.mean(axis=1)


# ---------------------------------------------------------------- trig identities

def trig_identity_check(y, zeta, M: int):
    """Residuals of the two series identities for y.(...) and y^perp.(...).

    Returns (res_sin, res_cos) for the partial sums with m = 2..M.
    """
    y = np.asarray(y, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    ry, rz = np.hypot(*y), np.hypot(*zeta)
    if not ry < rz:
        raise ValueError("need |y| < |zeta|")

    def perp(z):
        return np.array([-z[1], z[0]])

    s = y + zeta
    diff = perp(s) / (s @ s) - perp(zeta) / (zeta @ zeta)
    lhs1 = y @ diff
    lhs2 = perp(y) @ diff
    if ry == 0:
        return 0.0, 0.0
    th = np.arctan2(y[1], y[0])
    q = np.arctan2(zeta[1], zeta[0])
    m = np.arange(2, M + 1)
    sgn = (-1.0) ** (m - 1)
    rat = (ry / rz) ** m
    rhs1 = np.sum(sgn * rat * np.sin(m * (th - q)))
    rhs2 = np.sum(sgn * rat * np.cos(m * (th - q)))
    return float(lhs1 - rhs1), float(lhs2 - rhs2)
