"""Radiation forcing, the outer phase correction psi_1 and the radiation-corrected vortex law.

Physical time t and wave time tau = sqrt(2) t / eps; conversions live in
``tau_of_t`` / ``t_of_tau`` only.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import BPoly

from . import _backend
from .point_vortex import (CollisionError, Trajectory, VortexConfig, integrate,
                           kirchhoff_acceleration, min_distance_of)
from .wave import SpectralWave, WaveSource, duhamel_dtau, duhamel_eval, duhamel_grad

FIDELITIES = ("leading", "extended")


def tau_of_t(t, eps):
    return np.sqrt(2.0) * np.asarray(t) / eps


def t_of_tau(tau, eps):
    return eps * np.asarray(tau) / np.sqrt(2.0)


class KirchhoffPath:
    """Quintic Hermite interpolation of a Kirchhoff trajectory (positions, velocities, accelerations)."""

    def __init__(self, traj: Trajectory):
        self.traj = traj
        self.d = np.asarray(traj.degrees, dtype=float)
        P = traj.positions
        V = np.array([_backend.kirchhoff_velocity(p, self.d) for p in P])
        A = np.array([kirchhoff_acceleration(p, self.d) for p in P])
        n = P.shape[1]
        self._bp = [[BPoly.from_derivatives(traj.t, np.stack([P[:, j, c], V[:, j, c], A[:, j, c]], 1))
                     for c in range(2)] for j in range(n)]
        self.t_end = float(traj.t[-1])

    def positions(self, t: float) -> np.ndarray:
        if t < -1e-12 or t > self.t_end + 1e-9:
            raise ValueError(f"t={t} outside the base trajectory [0, {self.t_end}]")
        return np.array([[b(t) for b in row] for row in self._bp])

    def accelerations(self, t: float) -> np.ndarray:
        return kirchhoff_acceleration(self.positions(t), self.d)


@dataclass
class RadiationForcing:
    path: KirchhoffPath
    eps: float
    delta: float
    fidelity: str = "leading"
    profile: object = None  # needed for the extended fidelity
    omitted: tuple = ()

    def chi(self, X, Y, t):
        xi = self.path.positions(t)
        c = np.ones_like(np.asarray(X, dtype=float))
        for j in range(len(xi)):
            r = np.hypot(X - xi[j, 0], Y - xi[j, 1])
            c = c * _smoothstep((r - self.delta) / self.delta)
        return c

    def leading(self, X, Y, t):
        """1/2 eps^2 chi sum_j d_j (x - xi_j)^perp / |x - xi_j|^2 . (-xi_j'')."""
        xi = self.path.positions(t)
        acc = kirchhoff_acceleration(xi, self.path.d)
        return _backend.forcing_a(X, Y, xi, self.path.d, acc, self.eps, self.delta)

    def _E(self, X, Y, t):
        """(chi R1, chi R2) at physical points, with R from the ansatz residual."""
        from .ansatz import residual_R1R2
        xi = self.path.positions(t)
        cfg = VortexConfig(xi, self.path.d, self.eps)
        v = _backend.kirchhoff_velocity(xi, self.path.d)
        dec = residual_R1R2(cfg, v, self.profile, np.asarray(X) / self.eps, np.asarray(Y) / self.eps)
        c = self.chi(X, Y, t)
        R1 = np.where(c > 0, dec.R1, 0.0)
        R2 = np.where(c > 0, dec.R2, 0.0)
        return c * R1, c * R2

    def extended(self, X, Y, t, ht: float = 1e-4, hx: float = 1e-4):
        """(1/2) d_t E2 + grad(phi) . grad E2 - eps^-2 E1, with E = chi R (collar terms omitted)."""
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        E1, _ = self._E(X, Y, t)
        tp, tm = min(t + ht, self.path.t_end), max(t - ht, 0.0)
        dE2t = (self._E(X, Y, tp)[1] - self._E(X, Y, tm)[1]) / (tp - tm)
        gx = (self._E(X + hx, Y, t)[1] - self._E(X - hx, Y, t)[1]) / (2 * hx)
        gy = (self._E(X, Y + hx, t)[1] - self._E(X, Y - hx, t)[1]) / (2 * hx)
        xi = self.path.positions(t)
        px = np.zeros_like(X)
        py = np.zeros_like(X)
        for j in range(len(xi)):
            dx, dy = X - xi[j, 0], Y - xi[j, 1]
            r2 = np.maximum(dx * dx + dy * dy, 1e-300)
            px += self.path.d[j] * (-dy) / r2
            py += self.path.d[j] * dx / r2
        return 0.5 * dE2t + px * gx + py * gy - E1 / self.eps**2

    def F_t(self, X, Y, t):
        if self.fidelity == "leading":
            return self.leading(X, Y, t)
        return self.extended(X, Y, t)

    def F(self, X, Y, tau):
        """Forcing in wave time, as seen by the wave solver."""
        return self.F_t(X, Y, float(t_of_tau(tau, self.eps)))

    def E2(self, X, Y, t):
        return self._E(X, Y, t)[1]

    def source(self) -> WaveSource:
        xs = self.path.traj.positions
        c = tuple(np.mean(xs[0], axis=0))
        vmax = max(np.max(np.abs(_backend.kirchhoff_velocity(p, self.path.d))) for p in xs[::10])
        ts = float(tau_of_t(0.1 * self.delta / max(vmax, 1e-12), self.eps))
        idx = np.linspace(0, len(xs) - 1, 9).astype(int)
        foci = tuple(map(tuple, xs[idx].reshape(-1, 2)))
        return WaveSource(self.F, "quadratic", center=c, length=self.delta / 2,
                          time_scale=max(ts, 0.05), check=False, foci=foci)


def _smoothstep(s):
    return _backend_smooth(s)


def _backend_smooth(s):
    s = np.clip(s, 0.0, 1.0)
    return s * s * s * (10 - 15 * s + 6 * s * s)


def build_forcing(traj: Trajectory, eps: float | None = None, fidelity: str = "leading",
                  profile=None, delta: float | None = None) -> RadiationForcing:
    if fidelity not in FIDELITIES:
        raise ValueError(f"fidelity must be one of {FIDELITIES}")
    if fidelity == "extended" and profile is None:
        raise ValueError("extended fidelity needs the radial profile")
    eps = traj.eps if eps is None else eps
    if delta is None:
        delta = traj.delta()
    omitted = ("cutoff-collar terms of the inner corrections", "higher outer corrections") \
        if fidelity == "extended" else ("O_c(eps^2 |log eps|) collar terms", "lower order terms")
    return RadiationForcing(KirchhoffPath(traj), eps, delta, fidelity, profile, omitted)


# ---------------------------------------------------------------- the field psi_1

@dataclass
class RadiationSample:
    x: np.ndarray
    tau: float
    psi: float
    grad: np.ndarray
    dtau: float
    error: float


def radiation_field(forcing: RadiationForcing, probes) -> list:
    """psi_1, grad psi_1 and d_tau psi_1 at (x, tau) probes by direct retarded quadrature."""
    src = forcing.source()
    tmax = float(tau_of_t(forcing.path.t_end, forcing.eps))
    out = []
    for x, tau in probes:
        if tau < 0 or tau > tmax + 1e-9:
            raise ValueError("probe tau outside [0, sqrt2 T / eps]")
        x = np.asarray(x, dtype=float)
        v = duhamel_eval(src, x, tau)
        h = min(0.01, forcing.eps)
        g = duhamel_grad(src, x, tau, h)
        dt = duhamel_dtau(src, x, tau)
        out.append(RadiationSample(x, tau, float(v.value), g, float(dt.value), max(v.error, dt.error)))
    return out


@dataclass
class SpectralRadiation:
    """psi_1 marched on a periodic box; samples taken at every half step of the vortex clock."""
    t: np.ndarray
    grad_at_vortices: np.ndarray  # (T, n, 2): grad psi_1 at xi_j^0(t)
    dtau_at_vortices: np.ndarray  # (T, n)
    sup_psi: np.ndarray  # sup over the probe disk at each sample time
    probe_radius: float
    box: float
    N: int
    solver: SpectralWave = field(repr=False, default=None)


def _box_window(sw: SpectralWave, inner: float):
    def one(s):
        a = np.clip((np.abs(s) - inner) / (sw.box - inner), 0, 1)
        return 1 - _backend_smooth(a)
    return one(sw.X) * one(sw.Y)


def spectral_radiation(forcing: RadiationForcing, dt: float, probe_radius: float = 5.0,
                       h: float | None = None, dtau_max: float = 0.25) -> SpectralRadiation:
    """March psi_1 on [0, T] and record grad psi_1 at the base vortex positions every dt/2."""
    eps = forcing.eps
    T = forcing.path.t_end
    tau_end = float(tau_of_t(T, eps))
    xs = forcing.path.traj.positions
    reach = float(np.max(np.abs(xs))) + probe_radius
    box = reach + tau_end + 4.0
    if h is None:
        h = forcing.delta / 4
    N = int(2 * np.ceil(box / h))
    sw = SpectralWave(box, N)
    win = _box_window(sw, box - 3.0)
    nhalf = int(round(2 * T / dt))
    t_samp = 0.5 * dt * np.arange(nhalf + 1)
    sub = max(1, int(np.ceil(float(tau_of_t(0.5 * dt, eps)) / dtau_max)))
    n = xs.shape[1]
    G = np.zeros((nhalf + 1, n, 2))
    D = np.zeros((nhalf + 1, n))
    sup = np.zeros(nhalf + 1)
    disk = np.hypot(sw.X, sw.Y) <= probe_radius
    f_prev = forcing.F_t(sw.X, sw.Y, 0.0) * win
    for m in range(1, nhalf + 1):
        for q in range(1, sub + 1):
            t = t_samp[m - 1] + (t_samp[m] - t_samp[m - 1]) * q / sub
            f_next = forcing.F_t(sw.X, sw.Y, min(t, T)) * win
            sw.step(f_prev, f_next, float(tau_of_t(t, eps)) - sw.tau)
            f_prev = f_next
        _, g, dtau = sw.sample(forcing.path.positions(t_samp[m]))
        G[m] = g
        D[m] = dtau
        sup[m] = np.max(np.abs(sw.field()[disk]))
    return SpectralRadiation(t_samp, G, D, sup, probe_radius, box, N, sw)


def psi2_out(forcing: RadiationForcing, samples) -> np.ndarray:
    """(1/2)(E2 + eps sqrt2 d_tau psi_1) at the sampled probes."""
    out = []
    for s in samples:
        t = float(t_of_tau(s.tau, forcing.eps))
        E2 = float(forcing.E2(np.array([s.x[0]]), np.array([s.x[1]]), t)[0]) \
            if forcing.profile is not None else 0.0
        out.append(0.5 * (E2 + forcing.eps * np.sqrt(2) * s.dtau))
    return np.array(out)


# ---------------------------------------------------------------- corrected dynamics

@dataclass
class CorrectedTrajectory:
    trajectory: Trajectory
    base: Trajectory
    grad_samples: np.ndarray  # (2 nsteps + 1, n, 2): 2 grad psi_1 at xi^0 at half steps

    def deviation(self) -> np.ndarray:
        """|xi* - xi0| per time and vortex."""
        return np.linalg.norm(self.trajectory.positions - self.base.positions, axis=-1)

    def write_csv(self, path):
        dev = self.deviation()
        extra = {f"dev_{j + 1} [physical x]": dev[:, j] for j in range(dev.shape[1])}
        self.trajectory.write_csv(path, extra)


def _rk4_forced(pos, d, dt, nsteps, G, guard, base=None):
    """RK4 for xi' = V(xi) + G(t) (+ optional subtraction of V along a base path).

    G is sampled at half steps.  Same arithmetic as the Kirchhoff integrator so
    that G = 0 reproduces it bit for bit.
    """
    vel = _backend.kirchhoff_velocity
    out = np.empty((nsteps + 1,) + pos.shape)
    y = np.array(pos, dtype=float)
    out[0] = y
    for m in range(nsteps):
        g0, gh, g1 = G[2 * m], G[2 * m + 1], G[2 * m + 2]
        if base is None:
            k1 = vel(y, d) + g0
            k2 = vel(y + 0.5 * dt * k1, d) + gh
            k3 = vel(y + 0.5 * dt * k2, d) + gh
            k4 = vel(y + dt * k3, d) + g1
        else:
            b0, bh, b1 = base[2 * m], base[2 * m + 1], base[2 * m + 2]
            k1 = vel(b0 + y, d) - vel(b0, d) + g0
            k2 = vel(bh + y + 0.5 * dt * k1, d) - vel(bh, d) + gh
            k3 = vel(bh + y + 0.5 * dt * k2, d) - vel(bh, d) + gh
            k4 = vel(b1 + y + dt * k3, d) - vel(b1, d) + g1
        y = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[m + 1] = y
        check = y if base is None else base[2 * m + 2] + y
        if guard > 0 and min_distance_of(check) < guard:
            raise CollisionError(f"pairwise distance below 4*eps at step {m + 1}", out[: m + 2])
    return out


def radiation_gradients(config: VortexConfig, t_end: float, dt: float, fidelity="leading",
                        profile=None, **kw):
    """Base trajectory, forcing and 2 grad psi_1(xi^0_j(t), tau) at half steps."""
    base = integrate(config, t_end, dt)
    forcing = build_forcing(base, config.eps, fidelity, profile)
    rad = spectral_radiation(forcing, dt, **kw)
    return base, forcing, rad


def integrate_corrected(config: VortexConfig, t_end: float, dt: float, fidelity: str = "leading",
                        profile=None, gradients: np.ndarray | None = None,
                        base: Trajectory | None = None, **kw) -> CorrectedTrajectory:
    """xi*' = Kirchhoff(xi*) + 2 grad psi_1(xi^0(t), tau; xi^0), xi*(0) = xi^0(0).

    The forcing gradient is frozen along the Kirchhoff path xi^0.
    """
    if gradients is None:
        base, _, rad = radiation_gradients(config, t_end, dt, fidelity, profile, **kw)
        gradients = 2.0 * rad.grad_at_vortices
    elif base is None:
        base = integrate(config, t_end, dt)
    nsteps = len(base.t) - 1
    h = base.t[1] - base.t[0]
    pos = _rk4_forced(config.positions, np.asarray(config.degrees, float), h, nsteps, gradients,
                      4.0 * config.eps if config.n > 1 else 0.0)
    traj = Trajectory(base.t.copy(), pos, np.array(config.degrees), config.eps, provenance="corrected")
    return CorrectedTrajectory(traj, base, gradients)


def half_step_positions(base: Trajectory) -> np.ndarray:
    """xi^0 at t_m and t_m + dt/2 (the latter by quintic Hermite interpolation)."""
    path = KirchhoffPath(base)
    nst = len(base.t) - 1
    h = base.t[1] - base.t[0]
    out = np.empty((2 * nst + 1,) + base.positions.shape[1:])
    out[0::2] = base.positions
    for m in range(nst):
        out[2 * m + 1] = path.positions(base.t[m] + 0.5 * h)
    return out


def xi1_correction(base: Trajectory, gradients: np.ndarray) -> np.ndarray:
    """xi1' = V(xi0 + xi1) - V(xi0) + 2 grad psi_1(xi0_j, tau), xi1(0) = 0."""
    nst = len(base.t) - 1
    h = base.t[1] - base.t[0]
    d = np.asarray(base.degrees, float)
    return _rk4_forced(np.zeros_like(base.positions[0]), d, h, nst, gradients,
                       4.0 * base.eps, base=half_step_positions(base))


def xi1_velocity(base: Trajectory, xi1: np.ndarray, gradients: np.ndarray) -> np.ndarray:
    d = np.asarray(base.degrees, float)
    v = _backend.kirchhoff_velocity
    return np.array([v(b + x, d) - v(b, d) + g for b, x, g in
                     zip(base.positions, xi1, gradients[0::2])])
