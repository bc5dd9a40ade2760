"""Inhomogeneous 2D wave equation  -psi_tt + Lap psi = F  with zero data.

Retarded solution (s = elapsed time, x' = x + rho e_alpha, rho = s sin(phi)):

    psi(x, tau) = -(1/2pi) int_0^tau ds int_0^{pi/2} dphi int_0^{2pi} dalpha  s sin(phi) F(x', tau - s)

The substitution removes the 1/sqrt(s^2 - rho^2) endpoint singularity.  The
tau-derivative carries the extra term s sin(phi) grad F . e_alpha.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

_GX8, _GW8 = np.polynomial.legendre.leggauss(8)
_GX16, _GW16 = np.polynomial.legendre.leggauss(16)
CLASSES = ("quadratic", "linear", "compact")


class QuadratureToleranceWarning(UserWarning):
    pass


class CFLError(ValueError):
    pass


@dataclass
class WaveSource:
    """F(x, y, tau) vectorised over x, y; decay class and length scales for quadrature."""
    F: Callable
    decay: str = "quadratic"
    radius: float = np.inf  # support radius for the compact class
    center: tuple = (0.0, 0.0)
    length: float = 1.0  # spatial feature scale
    time_scale: float = np.inf  # inf for tau-independent sources
    gradF: Callable | None = None  # returns (Fx, Fy)
    check: bool = True
    foci: tuple = ()  # extra points where F has structure (quadrature grading)

    def __post_init__(self):
        if self.decay not in CLASSES:
            raise ValueError(f"decay class must be one of {CLASSES}")
        if self.decay == "compact" and not np.isfinite(self.radius):
            raise ValueError("compact sources need a finite radius")
        if self.check:
            self._spot_check()

    @property
    def stationary(self) -> bool:
        return not np.isfinite(self.time_scale)

    def _spot_check(self):
        """Sampled |F| (1+|x|)^p stays bounded along rays for the declared class."""
        r = np.array([5.0, 20.0, 80.0, 320.0])
        th = np.linspace(0, 2 * np.pi, 8, endpoint=False)
        R, T = np.meshgrid(r, th, indexing="ij")
        X = self.center[0] + R * np.cos(T)
        Y = self.center[1] + R * np.sin(T)
        for tau in (0.0, 1.0, 10.0):
            v = np.abs(self.F(X, Y, tau))
            if self.decay == "compact":
                out = np.hypot(X - self.center[0], Y - self.center[1]) >= self.radius
                if np.any(v[out] != 0):
                    raise ValueError("compact source is nonzero beyond its radius")
                continue
            p = 2 if self.decay == "quadratic" else 1
            wv = (v * (1 + R) ** p).max(axis=1)
            if wv[-1] > 4 * max(wv[0], 1e-300) + 1e-12:
                raise ValueError(f"sampled decay inconsistent with class {self.decay!r}")

    def focus_points(self) -> np.ndarray:
        return np.array([self.center] + [tuple(p) for p in self.foci], dtype=float)

    def grad(self, X, Y, tau, h=1e-5):
        if self.gradF is not None:
            return self.gradF(X, Y, tau)
        return ((self.F(X + h, Y, tau) - self.F(X - h, Y, tau)) / (2 * h),
                (self.F(X, Y + h, tau) - self.F(X, Y - h, tau)) / (2 * h))


# ---------------------------------------------------------------- quadrature helpers

def _graded_breaks(lo, hi, foci, h, extra=()):
    """Panel breakpoints on [lo, hi], geometric away from each focus starting at size h."""
    foci = np.atleast_1d(np.asarray(foci, dtype=float))
    pts = {lo, hi}
    for focus in foci:
        for sgn in (-1, 1):
            for k in range(61):
                p = focus + sgn * h * (2**k - 1)
                if (sgn < 0 and p <= lo) or (sgn > 0 and p >= hi):
                    break
                if lo < p < hi:
                    pts.add(p)
    for e in extra:
        if lo < e < hi:
            pts.add(e)
    b = np.array(sorted(pts))
    # split long panels so that each is at most h + half the distance to the nearest focus
    out = [b[0]]
    for a, c in zip(b[:-1], b[1:]):
        dist = np.min(np.minimum(np.abs(a - foci), np.abs(c - foci)))
        m = int(np.ceil((c - a) / (0.5 * dist + h)))
        out.extend(a + (c - a) * np.arange(1, m + 1) / m)
    return np.array(out)


def _panel_nodes(breaks, order):
    gx, gw = (_GX8, _GW8) if order == 8 else (_GX16, _GW16)
    a, b = breaks[:-1, None], breaks[1:, None]
    x = 0.5 * (a + b) + 0.5 * (b - a) * gx
    w = 0.5 * (b - a) * gw
    return x.ravel(), w.ravel()


def _ball_average(source: WaveSource, x, s, t_src, refine: int, kind: str):
    """int_0^{pi/2} dphi int_0^{2pi} dalpha  sin(phi) G, G = F or F + s sin(phi) grad F . e."""
    h = source.length
    fp = source.focus_points()
    rstar = np.hypot(x[0] - fp[:, 0], x[1] - fp[:, 1])
    # rho breakpoints graded around each focus distance, mapped to phi = arcsin(rho / s)
    rb = _graded_breaks(0.0, s, np.minimum(rstar, s), h)
    phib = np.arcsin(np.clip(rb / s, 0, 1))
    order = 8 if refine == 0 else 16
    phi, wphi = _panel_nodes(phib, order)
    rho = s * np.sin(phi)
    # angular count from the distance between the circle and the source centre
    width = (h + np.min(np.abs(rho[:, None] - rstar[None, :]), axis=1)) / np.maximum(rho, 1e-300)
    M = np.ceil(2 * np.pi / width * 2.5 * (1 + refine)).astype(int)
    M = np.clip(M, 16, 16384)
    M = (2 ** np.ceil(np.log2(M))).astype(int)
    total = 0.0
    for m in np.unique(M):
        sel = M == m
        al = 2 * np.pi * np.arange(m) / m
        ca, sa = np.cos(al), np.sin(al)
        rr = rho[sel][:, None]
        X = x[0] + rr * ca
        Y = x[1] + rr * sa
        G = source.F(X, Y, t_src)
        if kind == "dtau":
            gx, gy = source.grad(X, Y, t_src)
            G = G + rr * (gx * ca + gy * sa)
        elif kind == "gradx":
            gx, gy = source.grad(X, Y, t_src)
            G = np.stack([gx, gy])
        avg = np.mean(G, axis=-1) * 2 * np.pi
        total = total + np.sum(np.sin(phi[sel]) * wphi[sel] * avg, axis=-1)
    return total


def _duhamel(source: WaveSource, x, tau: float, kind: str, refine: int,
             taus: Sequence[float] = ()):
    x = np.asarray(x, dtype=float)
    if tau <= 0:
        return 0.0 if kind != "gradx" else np.zeros(2)
    c = np.asarray(source.center, dtype=float)
    dist = float(np.hypot(x[0] - c[0], x[1] - c[1]))
    fp = source.focus_points()
    fdist = np.hypot(x[0] - fp[:, 0], x[1] - fp[:, 1])
    if source.decay == "compact" and dist >= source.radius + tau:
        return 0.0 if kind != "gradx" else np.zeros(2)
    hs = source.length if source.stationary else min(source.length, source.time_scale)
    lo = 0.0
    if source.decay == "compact":
        lo = max(0.0, dist - source.radius)  # the ball misses the support for s < lo
    sb = _graded_breaks(lo, tau, np.clip(fdist, lo, tau), hs, extra=taus)
    if lo > 0:
        sb = sb[sb >= lo]
    order = 8 if refine == 0 else 16
    snodes, sw = _panel_nodes(sb, order)
    vals = []
    for s in snodes:
        A = _ball_average(source, x, s, tau - s, refine, kind)
        vals.append(A if kind == "dtau" else s * A)
    vals = np.array(vals)
    if kind == "gradx":
        return -(sw[:, None] * vals).sum(0) / (2 * np.pi)
    return -np.sum(sw * vals) / (2 * np.pi), (snodes, sw, vals)


@dataclass
class WaveValue:
    value: float | np.ndarray
    error: float
    flagged: bool


def duhamel_eval(source: WaveSource, x, tau: float, tol: float = 1e-6) -> WaveValue:
    """psi(x, tau) with an error estimate from one refinement level."""
    r0 = _duhamel(source, x, tau, "psi", 0)
    r1 = _duhamel(source, x, tau, "psi", 1)
    v0 = r0[0] if isinstance(r0, tuple) else r0
    v1 = r1[0] if isinstance(r1, tuple) else r1
    err = abs(v1 - v0)
    return WaveValue(v1, err, err > tol * max(1.0, abs(v1)))


def duhamel_dtau(source: WaveSource, x, tau: float, tol: float = 1e-6) -> WaveValue:
    r0 = _duhamel(source, x, tau, "dtau", 0)
    r1 = _duhamel(source, x, tau, "dtau", 1)
    v0 = r0[0] if isinstance(r0, tuple) else r0
    v1 = r1[0] if isinstance(r1, tuple) else r1
    err = abs(v1 - v0)
    return WaveValue(v1, err, err > tol * max(1.0, abs(v1)))


def duhamel_grad(source: WaveSource, x, tau: float, h: float | None = None) -> np.ndarray:
    """grad_x psi: under the integral if the source has an analytic gradient, else central differences."""
    x = np.asarray(x, dtype=float)
    if source.gradF is not None:
        return np.asarray(_duhamel(source, x, tau, "gradx", 1))
    h = 0.01 if h is None else h
    out = np.zeros(2)
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        out[i] = (duhamel_eval(source, x + e, tau).value - duhamel_eval(source, x - e, tau).value) / (2 * h)
    return out


def duhamel_curve(source: WaveSource, x, taus: Sequence[float], refine: int = 1) -> np.ndarray:
    """psi(x, tau) for many tau in one pass (tau-independent sources only)."""
    if not source.stationary:
        return np.array([duhamel_eval(source, x, t).value for t in taus])
    taus = np.asarray(taus, dtype=float)
    tmax = float(taus.max())
    res = _duhamel(source, x, tmax, "psi", refine, taus=tuple(taus))
    if not isinstance(res, tuple):
        return np.zeros_like(taus)
    _, (sn, sw, vals) = res
    cum = np.concatenate([[0.0], np.cumsum(sw * vals)])
    ends = np.concatenate([[0.0], sn])  # node positions; breakpoints coincide with taus
    out = np.empty_like(taus)
    for i, t in enumerate(taus):
        out[i] = -cum[np.searchsorted(sn, t, side="right")] / (2 * np.pi)
    del ends
    return out


def homogeneous_eval(g: Callable, x, tau: float, length: float = 1.0, center=(0.0, 0.0),
                     refine: int = 1) -> float:
    """Solution with psi(0) = 0, psi_tau(0) = g: (1/2pi) int_B(x,tau) g / sqrt(tau^2 - |x'-x|^2)."""
    src = WaveSource(lambda X, Y, t: g(X, Y), "quadratic", center=center, length=length, check=False)
    return float(tau * _ball_average(src, np.asarray(x, float), tau, 0.0, refine, "psi") / (2 * np.pi))


# ---------------------------------------------------------------- growth laws

LAWS = {
    "quadratic": lambda t: np.log1p(t) ** 2,
    "linear": lambda t: t * np.log1p(t),
    "compact": lambda t: np.log(2 + t),
}


@dataclass
class GrowthCurve:
    tau: np.ndarray
    sup_psi: np.ndarray
    fits: dict  # law -> coefficient (least squares in log coordinates over the window)
    residuals: dict
    best: str
    admissible: dict  # law -> bool

    def ratio(self, law):
        return self.sup_psi / LAWS[law](self.tau)

    def write_csv(self, path):
        cols = [self.tau, self.sup_psi] + [self.fits[k] * LAWS[k](self.tau) for k in CLASSES]
        hdr = ("tau [wave time],sup_psi [1],bound_fit_1 [quadratic law],"
               "bound_fit_2 [linear law],bound_fit_3 [compact law]")
        np.savetxt(path, np.column_stack(cols), delimiter=",", header=hdr, comments="", fmt="%.12g")


def admissible(tau, sup_psi, law: str, slack: float = 1.1) -> bool:
    """Bound fitted on the first half of the window keeps dominating on the second half."""
    tau = np.asarray(tau)
    tmax = tau.max()
    w1 = (tau >= tmax / 4) & (tau <= tmax / 2)
    w2 = tau >= tmax / 2
    rat = sup_psi / LAWS[law](tau)
    return bool(np.all(rat[w2] <= slack * rat[w1].max()))


def growth_curve(source: WaveSource, tau_max: float, probes, n_tau: int = 24) -> GrowthCurve:
    if tau_max < 50:
        raise ValueError("tau_max >= 50 needed to separate the logarithmic regimes")
    taus = np.unique(np.concatenate([np.geomspace(1.0, tau_max, n_tau), [tau_max]]))
    sup = np.zeros_like(taus)
    for p in probes:
        sup = np.maximum(sup, np.abs(duhamel_curve(source, p, taus)))
    win = taus >= tau_max / 4
    fits, res = {}, {}
    for k, f in LAWS.items():
        lr = np.log(sup[win]) - np.log(f(taus[win]))
        c = float(np.mean(lr))
        fits[k] = float(np.exp(c))
        res[k] = float(np.sqrt(np.mean((lr - c) ** 2)))
    best = min(res, key=res.get)
    adm = {k: admissible(taus, sup, k) for k in LAWS}
    return GrowthCurve(taus, sup, fits, res, best, adm)


def outside_cone_decay(source: WaveSource, tau: float, radii: Sequence[float],
                       direction=(1.0, 0.0)) -> float:
    """Exponent p of |psi| ~ |x|^-p at radii >= 2 tau (inf when psi vanishes identically)."""
    radii = np.asarray(radii, dtype=float)
    if np.any(radii < 2 * tau):
        raise ValueError("radii must be >= 2 tau")
    e = np.asarray(direction, float) / np.hypot(*direction)
    c = np.asarray(source.center, float)
    v = np.array([abs(duhamel_eval(source, c + r * e, tau).value) for r in radii])
    if np.all(v == 0):
        return np.inf
    return float(-np.polyfit(np.log(radii), np.log(v), 1)[0])


# ---------------------------------------------------------------- grid solvers

def _lap5(u, dx):
    return (np.roll(u, 1, 0) + np.roll(u, -1, 0) + np.roll(u, 1, 1) + np.roll(u, -1, 1) - 4 * u) / dx**2


@dataclass
class LeapfrogRun:
    tau: np.ndarray
    energy: np.ndarray
    work: np.ndarray  # -2 int_0^tau int F psi_tau
    deviation: float
    field: np.ndarray
    x: np.ndarray


def leapfrog(source: WaveSource, tau_max: float, box: float, N: int, cfl: float = 0.5,
             g: Callable | None = None) -> LeapfrogRun:
    """Second-order leapfrog on the periodic box [-box, box)^2 with energy bookkeeping."""
    dx = 2 * box / N
    dt = cfl * dx
    if dt > dx / np.sqrt(2):
        raise CFLError("dt exceeds the 2D CFL limit dx / sqrt 2")
    nst = int(np.ceil(tau_max / dt))
    dt = tau_max / nst
    x = -box + dx * np.arange(N)
    X, Y = np.meshgrid(x, x, indexing="ij")
    F = lambda t: source.F(X, Y, t)
    u0 = np.zeros_like(X)
    v0 = np.zeros_like(X) if g is None else g(X, Y)
    # Taylor start: u(dt) = dt v0 + dt^2/2 (Lap u0 - F(0)) + dt^3/6 (Lap v0 - F_t(0))
    Ft0 = (F(1e-4) - F(0.0)) / 1e-4
    u1 = u0 + dt * v0 + 0.5 * dt**2 * (_lap5(u0, dx) - F(0.0)) + dt**3 / 6 * (_lap5(v0, dx) - Ft0)
    prev, cur = u0, u1
    E, W, T = [], [], []
    work = 0.0
    last_pow = None
    for n in range(1, nst):
        t = n * dt
        nxt = 2 * cur - prev + dt**2 * (_lap5(cur, dx) - F(t))
        ut = (nxt - prev) / (2 * dt)
        gx = (np.roll(cur, -1, 0) - np.roll(cur, 1, 0)) / (2 * dx)
        gy = (np.roll(cur, -1, 1) - np.roll(cur, 1, 1)) / (2 * dx)
        e = float(np.sum(ut**2 + gx**2 + gy**2) * dx * dx)
        pw = float(-2 * np.sum(F(t) * ut) * dx * dx)
        if last_pow is not None:
            work += 0.5 * dt * (pw + last_pow)
        last_pow = pw
        E.append(e)
        W.append(work)
        T.append(t)
        prev, cur = cur, nxt
    E = np.array(E)
    W = np.array(W)
    dev = float(np.max(np.abs((E - E[0]) - W)))
    return LeapfrogRun(np.array(T), E, W, dev, cur, x)


def energy_identity_check(source: WaveSource, tau_max: float, box: float, N: int,
                          cfl: float = 0.5, g: Callable | None = None) -> float:
    return leapfrog(source, tau_max, box, N, cfl, g).deviation


class SpectralWave:
    """Exact-per-mode propagation on a periodic box with F linear in tau over each step.

    Solves -psi_tt + Lap psi = F.  Valid for the whole-plane problem while the
    domain of dependence of the probed region stays inside the box.
    """

    def __init__(self, box: float, N: int):
        self.box, self.N = box, N
        self.dx = 2 * box / N
        self.x = -box + self.dx * np.arange(N)
        k = 2 * np.pi * np.fft.fftfreq(N, self.dx)
        self.kx, self.ky = np.meshgrid(k, k, indexing="ij")
        self.k = np.hypot(self.kx, self.ky)
        self.X, self.Y = np.meshgrid(self.x, self.x, indexing="ij")
        self.psi = np.zeros((N, N), complex)
        self.dpsi = np.zeros((N, N), complex)
        self.tau = 0.0

    def step(self, f0: np.ndarray, f1: np.ndarray, dtau: float):
        """Advance by dtau with F = f0 + (f1 - f0) (t - tau) / dtau (physical-space samples)."""
        F0 = np.fft.fft2(f0)
        S = (np.fft.fft2(f1) - F0) / dtau
        k = self.k
        nz = k > 0
        kk = np.where(nz, k, 1.0)
        # psi'' = -k^2 psi - F  ->  psi = u - (F0 + S t)/k^2 with u harmonic
        u = self.psi + F0 / kk**2
        v = self.dpsi + S / kk**2
        c, s = np.cos(kk * dtau), np.sin(kk * dtau)
        un = u * c + v * s / kk
        vn = -u * kk * s + v * c
        psi_n = un - (F0 + S * dtau) / kk**2
        dpsi_n = vn - S / kk**2
        # k = 0: psi'' = -F
        psi0 = self.psi + self.dpsi * dtau - F0 * dtau**2 / 2 - S * dtau**3 / 6
        dpsi0 = self.dpsi - F0 * dtau - S * dtau**2 / 2
        self.psi = np.where(nz, psi_n, psi0)
        self.dpsi = np.where(nz, dpsi_n, dpsi0)
        self.tau += dtau

    def _phases(self, pts):
        pts = np.atleast_2d(pts)
        k1 = self.kx[:, 0]
        ex = np.exp(1j * np.outer(pts[:, 0] + self.box, k1))
        ey = np.exp(1j * np.outer(pts[:, 1] + self.box, k1))
        return ex, ey

    def sample(self, pts):
        """psi, grad psi, psi_tau at arbitrary points by exact trigonometric interpolation."""
        ex, ey = self._phases(pts)
        n2 = self.N**2

        def ev(A):
            return np.real(np.einsum("pi,ij,pj->p", ex, A, ey)) / n2

        return (ev(self.psi), np.stack([ev(1j * self.kx * self.psi), ev(1j * self.ky * self.psi)], -1),
                ev(self.dpsi))

    def field(self):
        return np.real(np.fft.ifft2(self.psi))
