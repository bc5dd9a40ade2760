"""Fourier-mode inversion of the linearised operator around the degree-one vortex.

For phi = i W psi the linearised equation reads

    Lap psi + 2 (w'/w) psi_r + (2 i d / r^2) psi_theta - 2 i w^2 Im(psi) = h,

and each angular mode reduces to a radial ODE.  For k >= 1

    Psi'' + (2w'/w + 1/r) Psi' - Q Psi = h,   Q = [[k^2, 2k], [2k, k^2 + 2 w^2 r^2]] / r^2,

and for k = 0 the real part satisfies (w^2 r Psi1')' = w^2 r h1 while the
imaginary part sees the extra term -2 w^2 Psi2.  The self-adjoint form
(p Psi')' - p Q Psi = p h with p = w^2 r makes

    Omega(u, v) = p (u . v' - u' . v)

constant on pairs of homogeneous solutions; variation of parameters uses it
for the normalisation Omega(z2, z1) = Omega(z4, z3) = 1.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import BPoly

from .profile import RadialProfile, eval_w

SQRT2 = np.sqrt(2.0)
_GX, _GW = np.polynomial.legendre.leggauss(6)
_GX = 0.5 * (_GX + 1)
_GW = 0.5 * _GW


class SeedContaminationError(RuntimeError):
    pass


class DivergentIntegralError(RuntimeError):
    pass


# ---------------------------------------------------------------- grid

@dataclass(frozen=True)
class ModeGrid:
    """Nodes r = log(1 + e^s) on a uniform s-grid: geometric near 0, uniform far out."""
    s: np.ndarray
    r: np.ndarray

    @property
    def ds(self) -> float:
        return float(self.s[1] - self.s[0])

    def r_s(self):
        e = np.exp(-np.logaddexp(0, -self.s))  # logistic(s)
        return e, e * (1 - e)


def mode_grid(r0: float = 1e-3, R: float = 40.0, ds: float = 0.01) -> ModeGrid:
    s0 = np.log(np.expm1(r0))
    s1 = R  # log(1 + e^R) = R to double precision for R >= 40
    n = int(np.ceil((s1 - s0) / ds))
    s = s0 + ds * np.arange(n + 1)
    return ModeGrid(s, np.logaddexp(0, s))


# ---------------------------------------------------------------- coefficients

class _Coef:
    """w-dependent coefficients, cached per profile."""

    def __init__(self, profile: RadialProfile):
        self.profile = profile

    def __call__(self, r):
        w = eval_w(self.profile, r)
        w1 = eval_w(self.profile, r, 1)
        return 2 * w1 / w + 1 / r, w * w


def _system(k: int, coef: _Coef, r):
    """Matrix A(r) of the first-order system y' = A y, y = (Psi, Psi')."""
    c, w2 = coef(r)
    n = len(r)
    if k == 0:
        A = np.zeros((n, 2, 2))
        A[:, 0, 1] = 1
        A[:, 1, 0] = 2 * w2
        A[:, 1, 1] = -c
        return A
    A = np.zeros((n, 4, 4))
    A[:, 0, 2] = A[:, 1, 3] = 1
    A[:, 2, 0] = k * k / r**2
    A[:, 2, 1] = A[:, 3, 0] = 2 * k / r**2
    A[:, 3, 1] = k * k / r**2 + 2 * w2
    A[:, 2, 2] = A[:, 3, 3] = -c
    return A


def _propagators(k, coef, r, nsub=4):
    """Transfer matrices over every grid interval, RK4 vectorised across intervals."""
    ra, rb = r[:-1], r[1:]
    h = (rb - ra) / nsub
    m = 2 if k == 0 else 4
    P = np.tile(np.eye(m), (len(ra), 1, 1))
    x = ra.copy()
    for _ in range(nsub):
        A0 = _system(k, coef, x)
        Am = _system(k, coef, x + h / 2)
        A1 = _system(k, coef, x + h)
        hh = h[:, None, None]
        K1 = A0 @ P
        K2 = Am @ (P + hh / 2 * K1)
        K3 = Am @ (P + hh / 2 * K2)
        K4 = A1 @ (P + hh * K3)
        P = P + hh / 6 * (K1 + 2 * K2 + 2 * K3 + K4)
        x = x + h
    return P


def omega(p, u, du, v, dv):
    """p (u . v' - u' . v) at nodes; vectors along the last axis."""
    if u.ndim == 1:
        return p * (u * dv - du * v)
    return p * (np.sum(u * dv, -1) - np.sum(du * v, -1))


# ---------------------------------------------------------------- basis

@dataclass
class HomogeneousBasis:
    k: int
    grid: ModeGrid
    z: dict  # name -> (values (n, m), derivatives (n, m))
    wronskian_norm: dict
    p: np.ndarray = field(repr=False, default=None)
    _interp: dict = field(repr=False, default_factory=dict)

    def __getitem__(self, name):
        return self.z[name]

    def interp(self, name) -> Callable:
        if name not in self._interp:
            v, dv = self.z[name]
            r = self.grid.r
            A = _system(self.k, self._coef, r)
            m = v.shape[1]
            ddv = np.einsum("nij,nj->ni", A[:, m:, :], np.concatenate([v, dv], 1))
            cols = [BPoly.from_derivatives(r, np.stack([v[:, i], dv[:, i], ddv[:, i]], 1))
                    for i in range(m)]
            self._interp[name] = lambda x, cols=cols: np.stack([c(x) for c in cols], -1)
        return self._interp[name]


def _project(y, z3, z4, p_i):
    """Remove z3 and z4 components of y at one node (uses Omega(z4, z3) = 1)."""
    m = len(y) // 2
    u, du = y[:m], y[m:]
    a3, d3 = z3[:m], z3[m:]
    a4, d4 = z4[:m], z4[m:]
    c4 = p_i * (u @ d3 - du @ a3)
    c3 = -p_i * (u @ d4 - du @ a4)
    return y - c3 * z3 - c4 * z4


def homogeneous_basis(k: int, profile: RadialProfile, grid: ModeGrid | None = None) -> HomogeneousBasis:
    if grid is None:
        grid = mode_grid()
    if k < 0:
        raise ValueError("k >= 0")
    r = grid.r
    coef = _Coef(profile)
    _, w2 = coef(r)
    p = w2 * r
    P = _propagators(k, coef, r)
    Pinv = np.linalg.inv(P)
    n = len(r)
    a = profile.shooting_slope

    def forward(y0, proj=None):
        Y = np.empty((n, len(y0)))
        Y[0] = y0
        for i in range(n - 1):
            Y[i + 1] = P[i] @ Y[i]
            if proj is not None:
                Y[i + 1] = proj(Y[i + 1], i + 1)
        return Y

    def backward(yN, proj=None):
        Y = np.empty((n, len(yN)))
        Y[-1] = yN
        for i in range(n - 2, -1, -1):
            Y[i] = Pinv[i] @ Y[i + 1]
            if proj is not None:
                Y[i] = proj(Y[i], i)
            s = np.max(np.abs(Y[i]))
            if s > 1e250:
                raise SeedContaminationError("overflow in backward sweep")
        return Y

    r0, R = r[0], r[-1]
    if k == 0:
        beta = a * a / 12
        Z10 = forward(np.array([1 + beta * r0**4, 4 * beta * r0**3]))
        g = np.exp(-SQRT2 * R) / np.sqrt(R)
        Z20 = backward(np.array([g, (-SQRT2 - 0.5 / R) * g]))
        om = omega(p, Z10[:, 0], Z10[:, 1], Z20[:, 0], Z20[:, 1])
        c = np.median(om)
        Z20 /= c
        om = om / c
        basis = HomogeneousBasis(0, grid, {"z10": (Z10[:, :1], Z10[:, 1:]),
                                          "z20": (Z20[:, :1], Z20[:, 1:])},
                                 {"Omega(z10,z20)": 1.0,
                                  "spread": float(np.max(np.abs(om - 1)))}, p)
        basis._coef = coef
        return basis

    e11 = np.array([1.0, 1.0])
    e1m = np.array([1.0, -1.0])
    # z3 ~ r^k (1,1) forward, dominant outward
    Z3 = forward(np.concatenate([r0**k * e11, k * r0 ** (k - 1) * e11]))
    # z4 ~ exp(-sqrt2 r) backward, dominant inward; seed along the decaying eigenvector of A(R)
    AR = _system(k, coef, np.array([R]))[0]
    ev, V = np.linalg.eig(AR)
    i4 = np.argmin(ev.real)
    v4 = np.real(V[:, i4])
    v4 = v4 / np.max(np.abs(v4)) * np.exp(-SQRT2 * R)
    Z4 = backward(v4)
    o43 = omega(p, Z4[:, :2], Z4[:, 2:], Z3[:, :2], Z3[:, 2:])
    c43 = np.median(o43)
    Z4 /= c43
    o43 = o43 / c43

    def proj(y, i):
        return _project(y, Z3[i], Z4[i], p[i])

    if k == 1:
        w = eval_w(profile, r)
        w1 = eval_w(profile, r, 1)
        w2d = eval_w(profile, r, 2)
        Z1 = np.column_stack([1 / r, -w1 / w, -1 / r**2, -(w2d * w - w1 * w1) / w**2])
        L0 = np.log(r0)
        Z2 = forward(np.concatenate([L0 / r0 * e1m, (1 - L0) / r0**2 * e1m]), proj)
    else:
        Z2 = forward(np.concatenate([r0 ** (k - 2) * e1m, (k - 2) * r0 ** (k - 3) * e1m]), proj)
        seed = np.array([R**-k, -k * R ** (-k - 2), -k * R ** (-k - 1), k * (k + 2) * R ** (-k - 3)])
        Z1 = backward(seed, proj)
    o21 = omega(p, Z2[:, :2], Z2[:, 2:], Z1[:, :2], Z1[:, 2:])
    c21 = np.median(o21)
    Z1 /= c21
    o21 = o21 / c21
    cross = {}
    for a_, A_ in (("z1", Z1), ("z2", Z2)):
        for b_, B_ in (("z3", Z3), ("z4", Z4)):
            o = omega(p, A_[:, :2], A_[:, 2:], B_[:, :2], B_[:, 2:])
            scale = np.sqrt(np.abs(omega(p, A_[:, :2], A_[:, 2:], A_[:, :2], A_[:, 2:]) + 1e-300))
            cross[f"Omega({a_},{b_})"] = float(np.median(o))
    norm = {"Omega(z2,z1)": 1.0, "Omega(z4,z3)": 1.0,
            "spread21": float(np.max(np.abs(o21 - 1))),
            "spread43": float(np.max(np.abs(o43 - 1)))}
    norm.update(cross)
    basis = HomogeneousBasis(k, grid, {n_: (Z[:, :2], Z[:, 2:]) for n_, Z in
                                       (("z1", Z1), ("z2", Z2), ("z3", Z3), ("z4", Z4))},
                             norm, p)
    basis._coef = coef
    return basis


# ---------------------------------------------------------------- quadrature

def _gauss_points(r):
    h = np.diff(r)
    x = r[:-1, None] + h[:, None] * _GX
    return x, h[:, None] * _GW


def _cum_left(f_nodes_gauss, wts, head=0.0):
    """Cumulative integral from 0 to every node."""
    seg = np.sum(f_nodes_gauss * wts, axis=1)
    return head + np.concatenate([[0.0], np.cumsum(seg)])


def _cum_right(f_gauss, wts, tail=0.0):
    """Integral from every node to infinity."""
    seg = np.sum(f_gauss * wts, axis=1)
    return tail + np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])


def _power_tail(f_end, f_prev, r_end, r_prev):
    """Analytic tail int_R^inf of a power-law integrand fitted at the last nodes."""
    if f_end == 0.0:
        return 0.0, 0.0
    if f_prev == 0 or np.sign(f_end) != np.sign(f_prev):
        return 0.0, abs(f_end) * r_end
    q = np.log(abs(f_end / f_prev)) / np.log(r_end / r_prev)
    if q >= -1.0:
        raise DivergentIntegralError(f"integrand decays like r^{q:.2f}; tail integral diverges")
    t = -f_end * r_end / (q + 1)
    return t, abs(t)


def _head(f0, f1, r0, r1):
    """int_0^{r0} of an integrand behaving like a power law near 0."""
    if f0 == 0.0:
        return 0.0
    if f1 == 0 or np.sign(f0) != np.sign(f1):
        return 0.5 * f0 * r0
    q = np.log(abs(f1 / f0)) / np.log(r1 / r0)
    if q <= -1:
        raise DivergentIntegralError("integrand not integrable at the origin")
    return f0 * r0 / (q + 1)


# ---------------------------------------------------------------- solutions

@dataclass
class ModeFunction:
    k: int
    nu: int  # 0 for k = 0 (component given by ``part``)
    r: np.ndarray
    Psi: np.ndarray  # (n, m)
    dPsi: np.ndarray
    tail_bound: float = 0.0
    part: str = ""

    def __call__(self, x):
        """Values at arbitrary radii (linear in Psi, cubic Hermite)."""
        x = np.asarray(x, dtype=float)
        out = []
        for i in range(self.Psi.shape[1]):
            bp = BPoly.from_derivatives(self.r, np.stack([self.Psi[:, i], self.dPsi[:, i]], 1))
            out.append(bp(x))
        return np.stack(out, -1)


def _wp(basis):
    r = basis.grid.r
    xg, wg = _gauss_points(r)
    _, w2g = basis._coef(xg.ravel())
    return r, xg, wg, (w2g * xg.ravel()).reshape(xg.shape)


def _hvals(h, x, m):
    v = np.asarray(h(x), dtype=float)
    if m == 1:
        return np.broadcast_to(v, x.shape).copy()
    return v.reshape(x.shape + (2,))


def solve_mode0_real(h1: Callable, profile: RadialProfile, grid: ModeGrid | None = None) -> ModeFunction:
    """Psi1(r) = int_0^r ds/(w^2 s) int_0^s w(t)^2 t h1(t) dt."""
    if grid is None:
        grid = mode_grid()
    coef = _Coef(profile)
    r = grid.r
    xg, wg = _gauss_points(r)
    _, w2g = coef(xg.ravel())
    w2g = w2g.reshape(xg.shape)
    inner = w2g * xg * _hvals(h1, xg, 1)
    h0 = float(np.asarray(h1(np.array([r[0]])))[0])
    a = profile.shooting_slope
    I_head = h0 * a * a * r[0] ** 4 / 4
    I_nodes = _cum_left(inner, wg, I_head)
    # inner integral at the outer Gauss points: I(r_i) + int_{r_i}^{x}
    hlen = np.diff(r)[:, None]
    sub = r[:-1, None, None] + (xg - r[:-1, None])[:, :, None] * _GX[None, None, :]
    _, w2s = coef(sub.ravel())
    fs = (w2s.reshape(sub.shape) * sub * _hvals(h1, sub, 1))
    Ig = I_nodes[:-1, None] + np.sum(fs * _GW, -1) * (xg - r[:-1, None])
    outer = Ig / (w2g * xg)
    Psi = _cum_left(outer, wg, h0 * r[0] ** 2 / 8)
    _, w2n = coef(r)
    dPsi = I_nodes / (w2n * r)
    del hlen
    return ModeFunction(0, 0, r, Psi[:, None], dPsi[:, None], part="real")


def solve_mode0_imag(h2: Callable, basis: HomogeneousBasis) -> ModeFunction:
    """Psi2 = z10 int_r^inf w^2 s h2 z20 + z20 int_0^r w^2 s h2 z10 (uses Omega(z10, z20) = 1)."""
    if basis.k != 0:
        raise ValueError("need the k = 0 basis")
    r, xg, wg, pg = _wp(basis)
    hv = _hvals(h2, xg, 1)
    z10 = basis.interp("z10")(xg)[..., 0]
    z20 = basis.interp("z20")(xg)[..., 0]
    f1 = pg * hv * z10
    f2 = pg * hv * z20
    head = _head(f1[0, 0], f1[0, -1], xg[0, 0], xg[0, -1])
    A = _cum_left(f1, wg, head)
    B = _cum_right(f2, wg)
    z10n, dz10n = basis["z10"]
    z20n, dz20n = basis["z20"]
    Psi = z10n[:, 0] * B + z20n[:, 0] * A
    dPsi = dz10n[:, 0] * B + dz20n[:, 0] * A
    return ModeFunction(0, 0, r, Psi[:, None], dPsi[:, None], part="imag")


def solve_mode_k(k: int, nu: int, h: Callable, basis: HomogeneousBasis) -> ModeFunction:
    """Four-term variation of parameters.

    c1 = int_0^r p h.z2,  c2 = int_r^inf p h.z1 (k = 1: -int_0^r p h.z1),
    c3 = -int_r^inf p h.z4,  c4 = -int_0^r p h.z3.
    """
    if k < 1 or basis.k != k or nu not in (1, 2):
        raise ValueError("need k >= 1, nu in {1, 2} and the matching basis")
    r, xg, wg, pg = _wp(basis)
    hv = _hvals(h, xg, 2)
    zg = {n_: basis.interp(n_)(xg) for n_ in ("z1", "z2", "z3", "z4")}
    f = {n_: pg * np.sum(hv * zg[n_], -1) for n_ in zg}

    def left(fn):
        return _cum_left(fn, wg, _head(fn[0, 0], fn[0, -1], xg[0, 0], xg[0, -1]))

    t1, b1 = _power_tail(f["z1"][-1, -1], f["z1"][-1, 0], xg[-1, -1], xg[-1, 0])
    c1 = left(f["z2"])
    if k == 1:
        c2 = -left(f["z1"])
        b1 = 0.0
    else:
        c2 = _cum_right(f["z1"], wg, t1)
    c3 = -_cum_right(f["z4"], wg)
    c4 = -left(f["z3"])
    Psi = np.zeros((len(r), 2))
    dPsi = np.zeros_like(Psi)
    for c, n_ in ((c1, "z1"), (c2, "z2"), (c3, "z3"), (c4, "z4")):
        v, dv = basis[n_]
        Psi += c[:, None] * v
        dPsi += c[:, None] * dv
    ref = np.max(np.abs(c2)) if k > 1 else 1.0
    return ModeFunction(k, nu, r, Psi, dPsi, tail_bound=b1 / max(ref, 1e-300))


# ---------------------------------------------------------------- operator oracle

def _fd_s(y, ds):
    """Fourth-order centred first and second differences along axis 0 (interior)."""
    d1 = np.full_like(y, np.nan)
    d2 = np.full_like(y, np.nan)
    d1[2:-2] = (-y[4:] + 8 * y[3:-1] - 8 * y[1:-3] + y[:-4]) / (12 * ds)
    d2[2:-2] = (-y[4:] + 16 * y[3:-1] - 30 * y[2:-2] + 16 * y[1:-3] - y[:-4]) / (12 * ds**2)
    return d1, d2


def radial_derivatives_fd(grid: ModeGrid, Psi):
    """Psi' and Psi'' from values alone, by finite differences in s."""
    rs, rss = grid.r_s()
    shape = (-1,) + (1,) * (Psi.ndim - 1)
    d1, d2 = _fd_s(Psi, grid.ds)
    dr = d1 / rs.reshape(shape)
    ddr = (d2 - rss.reshape(shape) * dr) / rs.reshape(shape) ** 2
    return dr, ddr


def apply_mode_operator(k: int, profile: RadialProfile, grid: ModeGrid, Psi, part: str = ""):
    """Mode operator applied to tabulated values via finite differences."""
    r = grid.r
    coef = _Coef(profile)
    c, w2 = coef(r)
    d1, d2 = radial_derivatives_fd(grid, Psi)
    if k == 0:
        out = d2 + c[:, None] * d1
        if part == "imag":
            out -= 2 * w2[:, None] * Psi
        return out
    Q = np.zeros((len(r), 2, 2))
    Q[:, 0, 0] = k * k / r**2
    Q[:, 0, 1] = Q[:, 1, 0] = 2 * k / r**2
    Q[:, 1, 1] = k * k / r**2 + 2 * w2
    return d2 + c[:, None] * d1 - np.einsum("nij,nj->ni", Q, Psi)


def operator_defect(sol: ModeFunction, h: Callable, profile, grid, r_lo=0.1, r_hi=None,
                    relative: bool = True) -> float:
    """sup over [r_lo, r_hi] of |L Psi - h|, relative to sup |h| when requested."""
    m = sol.Psi.shape[1]
    res = apply_mode_operator(sol.k, profile, grid, sol.Psi, sol.part)
    hv = _hvals(h, grid.r, m if m == 2 else 1)
    if m == 1:
        hv = hv[:, None]
    r = grid.r
    if r_hi is None:
        r_hi = r[-1] - 1.0
    sel = (r >= r_lo) & (r <= r_hi)
    err = np.max(np.abs(res - hv)[sel])
    if relative:
        err /= max(np.max(np.abs(hv[sel])), 1e-300)
    return float(err)


def loglog_slope(r, f, r_a, r_b, inverse_term: bool = False) -> float:
    """Slope p of log|f| ~ p log r + c on [r_a, r_b].

    With ``inverse_term`` an a/r term is fitted as well, which removes the
    leading correction of an asymptotic series in 1/r.
    """
    sel = (r >= r_a) & (r <= r_b)
    x = r[sel]
    cols = [np.log(x), np.ones_like(x)] + ([1 / x] if inverse_term else [])
    coef = np.linalg.lstsq(np.column_stack(cols), np.log(np.abs(f[sel])), rcond=None)[0]
    return float(coef[0])


def basis_exponents(basis: HomogeneousBasis) -> dict:
    """Measured power laws at both ends; exponential factors divided out where present."""
    r = basis.grid.r
    out = {}
    lo = (r[0], 1e-2)
    hi = (20.0, 35.0)  # stays clear of the seed transient of z4 near R
    exp_fac = np.exp(SQRT2 * r)
    if basis.k == 0:
        z10 = basis["z10"][0][:, 0]
        z20 = basis["z20"][0][:, 0]
        out["z10@0"] = loglog_slope(r, z10, *lo)
        out["z20@0"] = loglog_slope(r, z20, *lo)
        out["z10@inf"] = loglog_slope(r, z10 / exp_fac, *hi, inverse_term=True)
        out["z20@inf"] = loglog_slope(r, z20 * exp_fac, *hi, inverse_term=True)
        return out
    for name in ("z1", "z2", "z3", "z4"):
        v = basis[name][0]
        for i in range(2):
            out[f"{name}[{i}]@0"] = loglog_slope(r, v[:, i], *lo)
            if name == "z3":
                f = v[:, i] / exp_fac
            elif name == "z4":
                f = v[:, i] * exp_fac
            else:
                f = v[:, i]
            out[f"{name}[{i}]@inf"] = loglog_slope(r, f, *hi, inverse_term=True)
    return out


def expected_exponents(k: int) -> dict:
    if k == 0:
        return {"z10@0": 0.0, "z20@0": -2.0, "z10@inf": -0.5, "z20@inf": -0.5}
    e = {}
    at0 = {"z1": -k, "z2": k - 2, "z3": k, "z4": -2 - k}
    atinf = {"z1": (-k, -k - 2), "z2": (k, k - 2), "z3": (-2.5, -0.5), "z4": (-2.5, -0.5)}
    for n_ in at0:
        for i in range(2):
            e[f"{n_}[{i}]@0"] = at0[n_]
            e[f"{n_}[{i}]@inf"] = atinf[n_][i]
    if k == 1:
        # r^-1 log r: the local slope at r is -1 + 1/log r, recorded at the window centre
        rc = np.sqrt(1e-3 * 1e-2)
        e["z2[0]@0"] = e["z2[1]@0"] = -1 + 1 / np.log(rc)
    return e


# ---------------------------------------------------------------- first inner correction

def z11_defect(profile: RadialProfile, r) -> np.ndarray:
    """Mode-1 operator applied to (1/r, -w'/w) with exact derivatives of w."""
    r = np.asarray(r, dtype=float)
    w, w1, w2, w3 = (eval_w(profile, r, n) for n in range(4))
    q = w1 / w
    dq = w2 / w - q * q
    ddq = w3 / w - w2 * w1 / w**2 - 2 * q * dq
    Psi = np.column_stack([1 / r, -q])
    d1 = np.column_stack([-1 / r**2, -dq])
    d2 = np.column_stack([2 / r**3, -ddq])
    c = 2 * q + 1 / r
    Q11, Q12, Q22 = 1 / r**2, 2 / r**2, 1 / r**2 + 2 * w * w
    return d2 + c[:, None] * d1 - np.column_stack([Q11 * Psi[:, 0] + Q12 * Psi[:, 1],
                                                   Q12 * Psi[:, 0] + Q22 * Psi[:, 1]])


def kernel_modes(profile: RadialProfile, grid: ModeGrid) -> dict:
    """Mode profiles of iW, d_1 W, d_2 W divided by iW."""
    r = grid.r
    q = eval_w(profile, r, 1) / eval_w(profile, r)
    return {"iW": (0, "real", np.ones_like(r)[:, None]),
            "d1W": (1, 2, np.column_stack([-1 / r, q])),   # -sin/r - i q cos
            "d2W": (1, 1, np.column_stack([1 / r, -q]))}   # cos/r - i q sin


def _smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return s * s * s * (10 - 15 * s + 6 * s * s)


@dataclass
class InnerCorrection:
    """psi_j^(1,1) in the frame centred at xi_j / eps, polar coordinates (r, theta)."""
    j: int
    d: float
    eps: float
    grid: ModeGrid
    mode0: ModeFunction
    mode2: dict  # nu -> ModeFunction (problem with degree +1)
    data0: Callable  # h2 for mode 0 (degree +1 problem)
    data2: dict  # nu -> h-tilde callable
    r_cut: float  # delta / eps

    def _chi_modes(self):
        """Mode coefficients of chi = psi (d=+1) or -conj(psi) (d=-1), on grid nodes."""
        P0 = self.mode0.Psi[:, 0]
        A, B = self.mode2[1].Psi, self.mode2[2].Psi
        return P0, A, B

    def field(self, theta: np.ndarray) -> np.ndarray:
        """psi on (grid.r x theta)."""
        P0, A, B = self._chi_modes()
        c2, s2 = np.cos(2 * theta), np.sin(2 * theta)
        chi = (1j * P0[:, None] + A[:, 0, None] * c2 + 1j * A[:, 1, None] * s2
               + B[:, 0, None] * s2 - 1j * B[:, 1, None] * c2)
        return chi if self.d > 0 else -np.conj(chi)

    def data(self, theta: np.ndarray) -> np.ndarray:
        """The right-hand side h on (grid.r x theta) that psi solves for."""
        r = self.grid.r
        h0 = self.data0(r)
        a, b = self.data2[1](r), self.data2[2](r)
        c2, s2 = np.cos(2 * theta), np.sin(2 * theta)
        hchi = (1j * h0[:, None] + a[:, 0, None] * c2 + 1j * a[:, 1, None] * s2
                + b[:, 0, None] * s2 - 1j * b[:, 1, None] * c2)
        return hchi if self.d > 0 else -np.conj(hchi)

    def sup(self, m: int = 64) -> float:
        th = 2 * np.pi * np.arange(m) / m
        return float(np.max(np.abs(self.field(th))))


def apply_linear_operator(profile, grid: ModeGrid, psi: np.ndarray, d: float) -> np.ndarray:
    """Lap psi + 2 (w'/w) psi_r + (2 i d / r^2) psi_theta - 2 i w^2 Im psi on a polar grid.

    Radial derivatives by finite differences on the grid, angular ones spectrally.
    """
    r = grid.r[:, None]
    m = psi.shape[1]
    kk = np.fft.fftfreq(m, 1.0 / m)
    F = np.fft.fft(psi, axis=1)
    pth = np.fft.ifft(1j * kk * F, axis=1)
    pthth = np.fft.ifft(-(kk**2) * F, axis=1)
    dr, ddr = radial_derivatives_fd(grid, psi)
    q = (eval_w(profile, grid.r, 1) / eval_w(profile, grid.r))[:, None]
    w2 = (eval_w(profile, grid.r) ** 2)[:, None]
    return (ddr + dr / r + pthth / r**2 + 2 * q * dr + 2j * d * pth / r**2
            - 2j * w2 * psi.imag)


def first_inner_correction(config, j: int, profile: RadialProfile, velocities=None,
                           grid: ModeGrid | None = None, delta: float | None = None,
                           m: int = 128, bases: dict | None = None) -> InnerCorrection:
    """Solve the linearised problem around vortex j with data -(R_j1 + i R_j2), modes 0 and 2.

    Mode-2 data are the closed-form amplitudes; the mode-0 data of R_j2 are the
    measured angular means for r <= delta/eps, blended to the closed form beyond.
    """
    from .ansatz import R2_mode0_closed, R2_mode0_measured
    from .point_vortex import kirchhoff_rhs, min_distance_of
    from scipy.interpolate import CubicSpline

    if grid is None:
        grid = mode_grid()
    if velocities is None:
        velocities = kirchhoff_rhs(config) if config.n > 1 else np.zeros((1, 2))
    if delta is None:
        delta = 0.25 * min_distance_of(config.positions) if config.n > 1 else np.inf
    eps = config.eps
    dj = float(config.degrees[j])
    r_cut = delta / eps
    if bases is None:
        bases = {}
    B0 = bases.get(0) or homogeneous_basis(0, profile, grid)
    B2 = bases.get(2) or homogeneous_basis(2, profile, grid)

    # mode-2 amplitudes (cos, sin) of R_j1 / (w'r/w) and of R_j2
    c1 = np.zeros(2)
    c2 = np.zeros(2)
    xs = config.positions
    for k in range(config.n):
        if k == j:
            continue
        z = xs[j] - xs[k]
        rho2 = z @ z
        qk = np.arctan2(z[1], z[0])
        dk = config.degrees[k]
        c1 += -2 * eps**2 * dk / rho2 * np.array([-np.sin(2 * qk), np.cos(2 * qk)])
        c2 += -2 * eps**2 * dj * dk / rho2 * np.array([np.cos(2 * qk), np.sin(2 * qk)])

    def qr(r):
        return eval_w(profile, r, 1) / eval_w(profile, r) * r

    # data of the degree-+1 problem: h1 = -d R1, h2 = -R2
    def h_nu1(r):
        return np.stack([-dj * c1[0] * qr(r), -np.full_like(r, c2[1])], -1)

    def h_nu2(r):
        return np.stack([-dj * c1[1] * qr(r), np.full_like(r, c2[0])], -1)

    if config.n > 1:
        nodes = grid.r[grid.r <= r_cut]
        meas = R2_mode0_measured(config, velocities, profile, j, nodes, m)
        spl = CubicSpline(nodes, meas)

        def R20(r):
            r = np.asarray(r, dtype=float)
            closed = R2_mode0_closed(config, velocities, profile, j, r)
            inside = spl(np.minimum(r, r_cut))
            t = _smoothstep((r - 0.8 * r_cut) / (0.2 * r_cut))
            return (1 - t) * inside + t * closed
    else:
        def R20(r):
            return np.zeros_like(np.asarray(r, dtype=float))

    def h0(r):
        return -R20(r)

    mode0 = solve_mode0_imag(h0, B0)
    mode2 = {1: solve_mode_k(2, 1, h_nu1, B2), 2: solve_mode_k(2, 2, h_nu2, B2)}
    return InnerCorrection(j, dj, eps, grid, mode0, mode2, h0, {1: h_nu1, 2: h_nu2}, r_cut)


def inner_residual(corr: InnerCorrection, profile, r_lo: float = 0.1, r_hi: float | None = None,
                   m: int = 64) -> float:
    """sup over r_lo <= r <= r_hi of |L psi - h| on a polar grid."""
    th = 2 * np.pi * np.arange(m) / m
    psi = corr.field(th)
    res = apply_linear_operator(profile, corr.grid, psi, corr.d) - corr.data(th)
    r = corr.grid.r
    if r_hi is None:
        r_hi = corr.r_cut
    sel = (r >= r_lo) & (r <= r_hi)
    return float(np.max(np.abs(res[sel])))
