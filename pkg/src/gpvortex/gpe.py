"""Split-step Fourier solver for i u_t + Lap u + eps^-2 (1 - |u|^2) u = 0 on a periodic box.

Physical frame x throughout.  Used as an independent check of the reduced
vortex laws: evolve multi-vortex data, track the zeros, compare paths.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
from scipy.interpolate import RectBivariateSpline
from scipy.optimize import linear_sum_assignment

from . import _backend
from .ansatz import BoxError, ComplexField2D, UnderResolvedError, _bump, ansatz_values, grid_coords
from .point_vortex import Trajectory, VortexConfig, integrate

RESOLUTION = 8.0  # N >= RESOLUTION * L / eps
DT_FACTOR = 0.5  # dt <= DT_FACTOR * eps^2
THETA_MAX = np.pi / 2  # cap on the per-step linear phase of the saturated propagator


class NetDegreeError(ValueError):
    pass


class BlowupError(RuntimeError):
    pass


def threads() -> int:
    return max(1, int(os.environ.get("GPV_THREADS", "1")))


def min_points(L: float, eps: float) -> int:
    """Smallest FFT-friendly even N with N >= 8 L / eps."""
    n = int(np.ceil(RESOLUTION * L / eps - 1e-9))
    n = sfft.next_fast_len(n + (n % 2))
    while n % 2:
        n = sfft.next_fast_len(n + 1)
    return n


@dataclass
class GpeState:
    u: np.ndarray  # (N, N) complex, index [iy, ix]
    L: float
    eps: float
    t: float = 0.0
    steps: int = 0
    dt: float = float("nan")
    mass0: float = float("nan")
    mass_drift: float = 0.0  # max relative |M(t) - M(0)| / M(0) seen so far
    config: VortexConfig = field(default=None, repr=False)

    def __post_init__(self):
        if np.isnan(self.mass0):
            self.mass0 = self.mass()

    @property
    def N(self) -> int:
        return self.u.shape[0]

    @property
    def h(self) -> float:
        return self.L / self.N

    def coords(self):
        return grid_coords(self.L, self.N)

    def mass(self) -> float:
        return float(np.sum(np.abs(self.u) ** 2) * self.h**2)

    def energy(self) -> float:
        """(1/2) int |grad u|^2 + (1/(4 eps^2)) int (1 - |u|^2)^2."""
        ux, uy = gradient(self)
        dens = 0.5 * (np.abs(ux) ** 2 + np.abs(uy) ** 2) \
            + (1 - np.abs(self.u) ** 2) ** 2 / (4 * self.eps**2)
        return float(np.sum(dens) * self.h**2)

    def field(self) -> ComplexField2D:
        return ComplexField2D(self.u, self.L, "x", self.eps)

    def copy(self) -> "GpeState":
        return GpeState(self.u.copy(), self.L, self.eps, self.t, self.steps, self.dt,
                        self.mass0, self.mass_drift, self.config)


def _wavenumbers(N, L):
    return 2 * np.pi * sfft.fftfreq(N, d=L / N)


def collar_weight(L: float, N: int, collar: float = 0.1) -> np.ndarray:
    """1 in the interior, 0 on the box boundary, C-infinity blend over a band of width collar*L."""
    X, Y = grid_coords(L, N)
    width = collar * L

    def one(s):
        return _bump((L / 2 - np.abs(s)) / width)

    return one(X) * one(Y)


def init_data(config: VortexConfig, L: float, N: int, profile, collar: float = 0.1) -> GpeState:
    """Product ansatz, periodised: modulus -> 1 and phase -> 0 across the boundary collar."""
    if abs(np.sum(config.degrees)) > 0:
        raise NetDegreeError("the periodic solver needs zero total degree")
    if collar < 0.1:
        raise ValueError("collar must be at least 10% of L")
    eps = config.eps
    if N < RESOLUTION * L / eps or N % 2:
        raise UnderResolvedError(f"need an even N >= {RESOLUTION} L/eps = {RESOLUTION * L / eps:.0f}")
    inner = L / 2 - collar * L - 10 * eps
    if np.any(np.abs(config.positions) > inner):
        raise BoxError("vortices must sit at least 10 eps inside the collar")
    X, Y = grid_coords(L, N)
    U = ansatz_values(config, profile, X / eps, Y / eps)
    keep = collar_weight(L, N, collar)
    rho, phase = np.abs(U), np.angle(U)
    band = keep < 1
    if np.any(np.abs(phase[band]) > np.pi / 2):
        raise BoxError("phase winds inside the collar; move the vortices inward or enlarge L")
    u = (1 - keep * (1 - rho)) * np.exp(1j * keep * phase)
    return GpeState(u, float(L), float(eps), config=config)


def linear_phase(k2dt, propagator: str = "saturated"):
    """Per-step phase of the linear multiplier exp(-i Theta).

    "exact": Theta = |k|^2 dt.  Modes with |k|^2 dt near a multiple of pi then
    resonate with the nonlinear rotation about |u| = 1 and grow like
    (1 + dt/eps^2) per step, whatever dt is.
    "saturated": Theta = THETA_MAX tanh(|k|^2 dt / THETA_MAX); unitary, equal to
    the exact phase up to O((|k|^2 dt)^3), and never reaches the first resonance.
    """
    if propagator == "exact":
        return k2dt
    if propagator == "saturated":
        return THETA_MAX * np.tanh(k2dt / THETA_MAX)
    raise ValueError("propagator must be 'exact' or 'saturated'")


def step(state: GpeState, dt: float, nsteps: int = 1, propagator: str = "saturated") -> GpeState:
    """Strang splitting: half nonlinear rotation, linear Fourier multiplier, half rotation.

    Consecutive half rotations are fused.  Returns a new state.
    """
    if dt <= 0 or nsteps < 1:
        raise ValueError("dt and nsteps must be positive")
    eps = state.eps
    if dt > DT_FACTOR * eps**2:
        raise ValueError(f"dt = {dt} exceeds the stability bound {DT_FACTOR} eps^2 = {DT_FACTOR * eps**2}")
    k = _wavenumbers(state.N, state.L)
    k2 = k[None, :] ** 2 + k[:, None] ** 2
    if propagator == "exact":
        lx = np.exp(-1j * k**2 * dt)
        lin = lx[None, :] * lx[:, None]
    else:
        lin = np.exp(-1j * linear_phase(k2 * dt, propagator))
    del k2
    a = dt / eps**2
    u = state.u.copy()
    w = threads()

    def rotate(u, frac):
        _backend.phase_rotate(u, frac * a)

    drift = state.mass_drift
    rotate(u, 0.5)
    for s in range(nsteps):
        U = sfft.fft2(u, workers=w, overwrite_x=True)
        U *= lin
        u = sfft.ifft2(U, workers=w, overwrite_x=True)
        rotate(u, 0.5 if s == nsteps - 1 else 1.0)
    if not np.all(np.isfinite(u)):
        raise BlowupError(f"non-finite field after t = {state.t + nsteps * dt}")
    out = GpeState(u, state.L, eps, state.t + nsteps * dt, state.steps + nsteps, dt,
                   state.mass0, drift, state.config)
    out.mass_drift = max(drift, abs(out.mass() - state.mass0) / state.mass0)
    return out


def gradient(state: GpeState):
    k = _wavenumbers(state.N, state.L)
    U = sfft.fft2(state.u, workers=threads())
    ux = sfft.ifft2(U * (1j * k)[None, :], workers=threads())
    uy = sfft.ifft2(U * (1j * k)[:, None], workers=threads())
    return ux, uy


def jacobian_field(state: GpeState) -> np.ndarray:
    """J(u) = det(grad u) = Re(u)_x Im(u)_y - Re(u)_y Im(u)_x."""
    ux, uy = gradient(state)
    return ux.real * uy.imag - uy.real * ux.imag


def disk_integral(state: GpeState, f: np.ndarray, center, radius: float) -> float:
    X, Y = state.coords()
    dx = _wrap(X - center[0], state.L)
    dy = _wrap(Y - center[1], state.L)
    return float(np.sum(f[dx * dx + dy * dy <= radius**2]) * state.h**2)


def _wrap(d, L):
    return (d + L / 2) % L - L / 2


def loop_winding(state: GpeState, center, radius: float, m: int = 1024) -> float:
    """Winding of u along a circle, from spectral-free bicubic sampling of the grid."""
    from .ansatz import winding_number
    t = 2 * np.pi * np.arange(m) / m
    pts = np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)])
    return winding_number(sample(state, pts))


def sample(state: GpeState, pts) -> np.ndarray:
    """Bicubic interpolation of u at physical points (periodic)."""
    pts = np.atleast_2d(pts)
    out = np.empty(len(pts), dtype=complex)
    for i, p in enumerate(pts):
        out[i] = _Patch(state, p).value(p)
    return out


class _Patch:
    """8 x 8 periodic neighbourhood with bicubic splines of Re u and Im u."""

    HALF = 4

    def __init__(self, state: GpeState, p):
        N, h, L = state.N, state.h, state.L
        ix = int(np.floor((p[0] + L / 2) / h))
        iy = int(np.floor((p[1] + L / 2) / h))
        off = np.arange(-self.HALF + 1, self.HALF + 1)
        jx, jy = ix + off, iy + off
        sub = state.u[np.ix_(jy % N, jx % N)]
        self.x = -L / 2 + h * jx
        self.y = -L / 2 + h * jy
        self.re = RectBivariateSpline(self.y, self.x, sub.real, kx=3, ky=3, s=0)
        self.im = RectBivariateSpline(self.y, self.x, sub.imag, kx=3, ky=3, s=0)
        self.lo = np.array([self.x[1], self.y[1]])
        self.hi = np.array([self.x[-2], self.y[-2]])

    def shift(self, p, L):
        """Image of p nearest the patch centre."""
        c = 0.5 * (self.lo + self.hi)
        return c + _wrap(np.asarray(p) - c, L)

    def value(self, p):
        return complex(self.re(p[1], p[0])[0, 0], self.im(p[1], p[0])[0, 0])

    def jac(self, p):
        y, x = p[1], p[0]
        return np.array([[self.re(y, x, dy=1)[0, 0], self.re(y, x, dx=1)[0, 0]],
                         [self.im(y, x, dy=1)[0, 0], self.im(y, x, dx=1)[0, 0]]])


@dataclass
class Zero:
    position: np.ndarray
    degree: int
    residual: float
    iterations: int


def newton_zero(state: GpeState, guess, tol: float = 1e-12, maxit: int = 30) -> Zero:
    p = np.asarray(guess, dtype=float)
    patch = _Patch(state, p)
    p = patch.shift(p, state.L)
    for it in range(maxit):
        v = patch.value(p)
        res = abs(v)
        if res < tol:
            break
        J = patch.jac(p)
        dp = np.linalg.solve(J, -np.array([v.real, v.imag]))
        p = p + dp
        if np.any(p < patch.lo - state.h) or np.any(p > patch.hi + state.h):
            # walked off the patch: re-centre
            patch = _Patch(state, p)
            p = patch.shift(p, state.L)
    v = patch.value(p)
    det = np.linalg.det(patch.jac(p))
    return Zero(_wrap(p, state.L), int(np.sign(det)), abs(v), it)


@dataclass
class TrackedVortices:
    t: float
    positions: np.ndarray  # (n, 2), ordered by the initial labels
    degrees: np.ndarray
    residuals: np.ndarray
    flagged: bool = False
    note: str = ""


def coarse_minima(state: GpeState, threshold: float = 0.5) -> np.ndarray:
    """Grid nodes where |u| < threshold and |u| is a local minimum over the 8 neighbours."""
    a = np.abs(state.u)
    mask = a < threshold
    for sy in (-1, 0, 1):
        for sx in (-1, 0, 1):
            if sx or sy:
                mask &= a <= np.roll(np.roll(a, sy, 0), sx, 1)
    iy, ix = np.nonzero(mask)
    X, Y = state.coords()
    pts = np.column_stack([X[iy, ix], Y[iy, ix]])
    vals = a[iy, ix]
    keep = []
    for i in np.argsort(vals):  # drop minima within 2 eps of a deeper one
        if all(np.hypot(*_wrap(pts[i] - pts[j], state.L)) > 2 * state.eps for j in keep):
            keep.append(i)
    return pts[keep]


def track_zeros(state: GpeState, previous: TrackedVortices | None = None,
                threshold: float = 0.5, newton_tol: float = 1e-10) -> TrackedVortices:
    zs = [newton_zero(state, p) for p in coarse_minima(state, threshold)]
    pos = np.array([z.position for z in zs]).reshape(-1, 2)
    deg = np.array([z.degree for z in zs], dtype=int)
    res = np.array([z.residual for z in zs])
    flagged, note = False, ""
    if np.any(res >= newton_tol):
        flagged, note = True, f"Newton residual {res.max():.2e}"
    if previous is None:
        order = np.lexsort((pos[:, 1], pos[:, 0])) if len(pos) else np.arange(0)
        return TrackedVortices(state.t, pos[order], deg[order], res[order], flagged, note)
    n = len(previous.positions)
    if len(pos) != n:
        return TrackedVortices(state.t, pos, deg, res, True,
                               f"zero count changed from {n} to {len(pos)}")
    D = np.linalg.norm(_wrap(previous.positions[:, None, :] - pos[None, :, :], state.L), axis=-1)
    rows, cols = linear_sum_assignment(D)
    pos, deg, res = pos[cols], deg[cols], res[cols]
    if np.any(deg != previous.degrees):
        flagged, note = True, "degree changed"
    return TrackedVortices(state.t, pos, deg, res, flagged or previous.flagged, note or previous.note)


def label_initial(tracked: TrackedVortices, config: VortexConfig, L: float) -> TrackedVortices:
    """Reorder the t = 0 detection to the configuration's labels."""
    D = np.linalg.norm(_wrap(config.positions[:, None, :] - tracked.positions[None, :, :], L), axis=-1)
    if D.shape[0] != D.shape[1]:
        return TrackedVortices(tracked.t, tracked.positions, tracked.degrees, tracked.residuals,
                               True, f"found {D.shape[1]} zeros, expected {D.shape[0]}")
    _, cols = linear_sum_assignment(D)
    t = TrackedVortices(tracked.t, tracked.positions[cols], tracked.degrees[cols],
                        tracked.residuals[cols], tracked.flagged, tracked.note)
    if np.any(t.degrees != config.degrees):
        t.flagged, t.note = True, "degree disagrees with the configuration"
    return t


# ---------------------------------------------------------------- runs

@dataclass
class GpeRun:
    eps: float
    L: float
    N: int
    dt: float
    t: np.ndarray
    tracked: np.ndarray  # (T, n, 2)
    degrees: np.ndarray
    flagged: bool
    note: str
    mass_drift: float
    energy: np.ndarray
    final: GpeState = field(repr=False, default=None)

    def trajectory(self) -> Trajectory:
        return Trajectory(self.t, self.tracked, self.degrees.astype(float), self.eps, provenance="gpe")


def run_gpe(config: VortexConfig, t_end: float, L: float, profile, N: int | None = None,
            dt: float | None = None, sample_dt: float = 0.05, collar: float = 0.1) -> GpeRun:
    eps = config.eps
    N = min_points(L, eps) if N is None else N
    dt = 0.5 * eps**2 if dt is None else dt
    per = max(1, int(round(sample_dt / dt)))
    nsamp = int(round(t_end / (per * dt)))
    state = init_data(config, L, N, profile, collar)
    tr = label_initial(track_zeros(state), config, L)
    ts, P, E = [0.0], [tr.positions], [state.energy()]
    for _ in range(nsamp):
        state = step(state, dt, per)
        tr = track_zeros(state, tr)
        if tr.flagged and len(tr.positions) != config.n:
            break
        ts.append(state.t)
        P.append(tr.positions)
        E.append(state.energy())
    P = np.array(P)
    # unwrap periodic images so paths are continuous
    P = P[0] + np.cumsum(np.concatenate([np.zeros_like(P[:1]), _wrap(np.diff(P, axis=0), L)]), axis=0)
    return GpeRun(eps, L, N, dt, np.array(ts), P, np.array(config.degrees), tr.flagged, tr.note,
                  state.mass_drift, np.array(E), state)


@dataclass
class DeviationTable:
    eps: np.ndarray
    max_dev: np.ndarray
    slope: float
    runs: list
    kirchhoff: list
    corrected: list = field(default_factory=list)

    def write_csv(self, path):
        cols = [self.eps, self.max_dev]
        names = ["eps [1]", "max_dev [physical x]"]
        np.savetxt(path, np.column_stack(cols), delimiter=",", header=",".join(names) + f",slope={self.slope:.6g}",
                   comments="", fmt="%.17g")


def kirchhoff_on(run: GpeRun, config: VortexConfig, dt: float = 1e-3) -> np.ndarray:
    """Kirchhoff positions at the run's sample times."""
    tr = integrate(config, run.t[-1] if run.t[-1] > 0 else dt, dt)
    idx = np.rint(run.t / (tr.t[1] - tr.t[0])).astype(int)
    return tr.positions[idx]


def deviation(run: GpeRun, reference: np.ndarray) -> np.ndarray:
    """max_j |tracked - reference| per sample time."""
    return np.max(np.linalg.norm(run.tracked - reference, axis=-1), axis=1)


def compare_reduced(config: VortexConfig, t_end: float, eps_list, L: float, profile,
                    sample_dt: float = 0.05, dt_factor: float = 0.5, corrected=None) -> DeviationTable:
    """GPE vs Kirchhoff for each eps; log-log slope of the maximal deviation.

    ``corrected``: optional callable eps -> positions of xi* at the run's sample times.
    """
    runs, kir, cor, dev = [], [], [], []
    for eps in eps_list:
        cfg = VortexConfig(config.positions, config.degrees, eps)
        run = run_gpe(cfg, t_end, L, profile, dt=dt_factor * eps**2, sample_dt=sample_dt)
        ref = kirchhoff_on(run, cfg)
        runs.append(run)
        kir.append(ref)
        dev.append(deviation(run, ref).max())
        if corrected is not None:
            cor.append(corrected(cfg, run))
    e = np.asarray(eps_list, dtype=float)
    d = np.asarray(dev)
    slope = float(np.polyfit(np.log(e), np.log(d), 1)[0]) if len(e) > 1 else float("nan")
    return DeviationTable(e, d, slope, runs, kir, cor)


def tracked_velocity(run: GpeRun, at: float) -> np.ndarray:
    """Centred difference of the tracked positions at the sample nearest ``at``."""
    m = int(np.clip(np.argmin(np.abs(run.t - at)), 1, len(run.t) - 2))
    return (run.tracked[m + 1] - run.tracked[m - 1]) / (run.t[m + 1] - run.t[m - 1])
