"""Helmholtz-Kirchhoff point-vortex dynamics.

    xi_j' = 2 sum_{k != j} d_k (xi_j - xi_k)^perp / |xi_j - xi_k|^2,   (a, b)^perp = (-b, a)
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import _backend

COINCIDENT_TOL = 1e-12


class CoincidentVortexError(ValueError):
    pass


class CollisionError(RuntimeError):
    def __init__(self, msg, trajectory=None):
        super().__init__(msg)
        self.trajectory = trajectory


@dataclass(frozen=True)
class VortexConfig:
    positions: np.ndarray  # (n, 2), physical frame
    degrees: np.ndarray  # (n,), entries +-1
    eps: float = 0.05

    def __post_init__(self):
        p = np.array(self.positions, dtype=float).reshape(-1, 2)
        d = np.array(self.degrees, dtype=float).ravel()
        if len(p) != len(d) or len(p) < 1:
            raise ValueError("positions and degrees must have equal length >= 1")
        if not np.all(np.abs(d) == 1):
            raise ValueError("degrees must be exactly +1 or -1")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        p.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "positions", p)
        object.__setattr__(self, "degrees", d)

    @property
    def n(self) -> int:
        return len(self.degrees)

    def with_positions(self, positions) -> "VortexConfig":
        return VortexConfig(positions, self.degrees, self.eps)

    def to_dict(self) -> dict:
        return {"positions": self.positions.tolist(),
                "degrees": [int(x) for x in self.degrees], "eps": self.eps}

    @classmethod
    def from_dict(cls, obj: dict) -> "VortexConfig":
        return cls(obj["positions"], obj["degrees"], obj.get("eps", 0.05))

    @classmethod
    def load(cls, path) -> "VortexConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def dipole(ell: float = 1.0, eps: float = 0.05) -> VortexConfig:
    """+1 at (0, l/2), -1 at (0, -l/2); translates with velocity (2/l, 0)."""
    return VortexConfig([[0.0, ell / 2], [0.0, -ell / 2]], [1, -1], eps)


def corotating_pair(ell: float = 2.0, eps: float = 0.05) -> VortexConfig:
    """Two +1 vortices at (+-l/2, 0); rigid rotation at omega = 4/l^2."""
    return VortexConfig([[ell / 2, 0.0], [-ell / 2, 0.0]], [1, 1], eps)


def random_config(n: int, rng: np.random.Generator, eps: float = 0.05,
                  box: float = 2.0, min_sep: float = 0.5) -> VortexConfig:
    while True:
        p = rng.uniform(-box / 2, box / 2, size=(n, 2))
        if n < 2 or _backend.min_distance(p) > min_sep:
            d = rng.choice([-1.0, 1.0], size=n)
            return VortexConfig(p, d, eps)


def _pairs_ok(pos):
    if len(pos) > 1 and _backend.min_distance(pos) < COINCIDENT_TOL:
        raise CoincidentVortexError("coincident vortices")


def kirchhoff_rhs(config: VortexConfig) -> np.ndarray:
    _pairs_ok(config.positions)
    return _backend.kirchhoff_velocity(config.positions, config.degrees)


def hamiltonian(config: VortexConfig) -> float:
    """K = 2 sum over ordered pairs j != k of d_j d_k log|xi_j - xi_k|.

    With this normalisation (grad_{xi_j} K)^perp = 2 d_j xi_j'.
    """
    p, d = config.positions, config.degrees
    _pairs_ok(p)
    diff = p[:, None, :] - p[None, :, :]
    r = np.hypot(diff[..., 0], diff[..., 1])
    np.fill_diagonal(r, 1.0)
    return float(2.0 * np.sum(np.outer(d, d) * np.log(r)))


def kirchhoff_acceleration(pos: np.ndarray, d: np.ndarray) -> np.ndarray:
    """xi_j'' along the Kirchhoff flow, by differentiating the velocity law."""
    v = _backend.kirchhoff_velocity(pos, d)
    diff = pos[:, None, :] - pos[None, :, :]
    dv = v[:, None, :] - v[None, :, :]
    r2 = np.einsum("jkc,jkc->jk", diff, diff)
    np.fill_diagonal(r2, np.inf)
    dot = np.einsum("jkc,jkc->jk", diff, dv)
    perp_dv = np.stack([-dv[..., 1], dv[..., 0]], axis=-1)
    perp = np.stack([-diff[..., 1], diff[..., 0]], axis=-1)
    term = perp_dv / r2[..., None] - 2 * perp * (dot / r2**2)[..., None]
    return 2.0 * np.einsum("k,jkc->jc", d, term)


@dataclass
class Trajectory:
    t: np.ndarray
    positions: np.ndarray  # (T, n, 2)
    degrees: np.ndarray
    eps: float
    provenance: str = "kirchhoff"
    K: np.ndarray = field(default=None)
    centroid: np.ndarray = field(default=None)
    dmin: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.K is None:
            self.K, self.centroid, self.dmin = diagnostics(self.positions, self.degrees)

    def config_at(self, m: int) -> VortexConfig:
        return VortexConfig(self.positions[m], self.degrees, self.eps)

    def delta(self) -> float:
        """One quarter of the minimal pairwise distance over the trajectory."""
        return 0.25 * float(np.min(self.dmin))

    def write_csv(self, path, extra: dict | None = None) -> None:
        n = len(self.degrees)
        cols = [self.t]
        names = ["t [physical time]"]
        for j in range(n):
            cols += [self.positions[:, j, 0], self.positions[:, j, 1]]
            names += [f"x_{j + 1} [physical x]", f"y_{j + 1} [physical x]"]
        cols += [self.K, self.centroid[:, 0], self.centroid[:, 1], self.dmin]
        names += ["K [1]", "cx [physical x]", "cy [physical x]", "dmin [physical x]"]
        for key, val in (extra or {}).items():
            cols.append(val)
            names.append(key)
        np.savetxt(path, np.column_stack(cols), delimiter=",", header=",".join(names),
                   comments="", fmt="%.17g")


def diagnostics(positions: np.ndarray, d: np.ndarray):
    diff = positions[:, :, None, :] - positions[:, None, :, :]
    r = np.hypot(diff[..., 0], diff[..., 1])
    n = len(d)
    iu = np.triu_indices(n, 1)
    pair = r[:, iu[0], iu[1]]
    K = 4.0 * np.sum(d[iu[0]] * d[iu[1]] * np.log(pair), axis=1)
    centroid = np.einsum("j,tjc->tc", d, positions)
    dmin = pair.min(axis=1) if n > 1 else np.full(len(positions), np.inf)
    return K, centroid, dmin


def integrate(config: VortexConfig, t_end: float, dt: float) -> Trajectory:
    """Classic RK4 with a collision guard at 4 eps after every step."""
    if not (dt > 0 and t_end > 0):
        raise ValueError("dt and t_end must be positive")
    _pairs_ok(config.positions)
    nsteps = int(round(t_end / dt))
    if abs(nsteps * dt - t_end) > 1e-9 * t_end:
        nsteps = int(np.ceil(t_end / dt))
    h = t_end / nsteps
    guard = 4.0 * config.eps if config.n > 1 else 0.0
    states, hit = _backend.rk4_run(config.positions, config.degrees, h, nsteps, guard)
    t = h * np.arange(len(states))
    traj = Trajectory(t, states, np.array(config.degrees), config.eps)
    if hit >= 0:
        raise CollisionError(f"pairwise distance below 4*eps at t={t[hit]:.6g}", traj)
    return traj


def rk4_order(config: VortexConfig, t_end: float, dt: float) -> float:
    """Observed order from final-state differences at dt, dt/2, dt/4."""
    x = [integrate(config, t_end, dt / 2**k).positions[-1] for k in range(3)]
    e1 = np.max(np.abs(x[0] - x[1]))
    e2 = np.max(np.abs(x[1] - x[2]))
    return float(np.log2(e1 / e2))


def min_distance_of(positions) -> float:
    return _backend.min_distance(np.ascontiguousarray(positions, dtype=float))
