"""Pure-Python/numpy versions of the hot kernels (fallback backend)."""
import numpy as np


def kirchhoff_velocity(pos, d):
    diff = pos[:, None, :] - pos[None, :, :]
    r2 = np.einsum("jkc,jkc->jk", diff, diff)
    np.fill_diagonal(r2, np.inf)
    coef = 2.0 * d[None, :] / r2
    vx = -np.sum(coef * diff[:, :, 1], axis=1)
    vy = np.sum(coef * diff[:, :, 0], axis=1)
    return np.stack([vx, vy], axis=1)


def min_distance(pos):
    diff = pos[:, None, :] - pos[None, :, :]
    r2 = np.einsum("jkc,jkc->jk", diff, diff)
    np.fill_diagonal(r2, np.inf)
    return float(np.sqrt(r2.min()))


def rk4_run(pos, d, dt, nsteps, guard):
    """Fixed-step RK4.  Returns (states, step index of guard breach or -1)."""
    out = np.empty((nsteps + 1,) + pos.shape)
    out[0] = pos
    y = pos.copy()
    for m in range(nsteps):
        k1 = kirchhoff_velocity(y, d)
        k2 = kirchhoff_velocity(y + 0.5 * dt * k1, d)
        k3 = kirchhoff_velocity(y + 0.5 * dt * k2, d)
        k4 = kirchhoff_velocity(y + dt * k3, d)
        y = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[m + 1] = y
        if min_distance(y) < guard:
            return out[: m + 2], m + 1
    return out, -1


def smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return s * s * s * (10.0 + s * (-15.0 + 6.0 * s))


def forcing_a(px, py, xi, d, acc, eps, delta):
    """0.5 eps^2 chi sum_j d_j (x - xi_j)^perp / |x - xi_j|^2 . (-acc_j)."""
    out = np.zeros_like(px, dtype=float)
    chi = np.ones_like(px, dtype=float)
    for j in range(len(d)):
        dx = px - xi[j, 0]
        dy = py - xi[j, 1]
        r2 = dx * dx + dy * dy
        chi *= smoothstep((np.sqrt(r2) - delta) / delta)
        with np.errstate(divide="ignore", invalid="ignore"):
            term = d[j] * (-dy * (-acc[j, 0]) + dx * (-acc[j, 1])) / r2
        out += np.where(r2 > 0, term, 0.0)
    return 0.5 * eps * eps * chi * out


def phase_rotate(u, c):
    """u <- u exp(-i c (|u|^2 - 1)) in place."""
    m = u.real**2 + u.imag**2
    m -= 1.0
    m *= -c
    u *= np.cos(m) + 1j * np.sin(m)
