"""Upwind solver for the transport system satisfied by the two cumulative distributions.

The CDFs obey ``F_t + 2(F - G) F_x = 0`` and ``G_t - 2(F - G) G_x = 0``,
which has no flux form, so the update differences each unknown against its
upwind neighbour directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import CFLError, DomainError
from .quantile import DensityProfile, StatePair, cdf_from_quantiles


def _sample_points(x_min, x_max, nx):
    # nudged right so that mass sitting on a node up to rounding is counted there
    return np.linspace(x_min, x_max, nx + 1) + 1e-9 * (x_max - x_min) / nx


@dataclass(frozen=True)
class CdfPair:
    x_min: float
    x_max: float
    nx: int
    f: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        if self.nx < 2 or not self.x_max > self.x_min:
            raise DomainError("grid needs nx >= 2 and x_max > x_min")
        for name in ("f", "g"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (self.nx + 1,):
                raise DomainError(f"{name} must have nx + 1 = {self.nx + 1} nodes, got {arr.shape}")
            object.__setattr__(self, name, arr)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.nx

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx + 1)

    @classmethod
    def from_densities(cls, rho: DensityProfile, eta: DensityProfile,
                       x_min: float = -2.0, x_max: float = 2.0, nx: int = 4000) -> "CdfPair":
        xs = _sample_points(x_min, x_max, nx)
        return cls._clamped(x_min, x_max, nx, rho.cdf(xs), eta.cdf(xs))

    @classmethod
    def from_state(cls, s: StatePair, x_min: float = -2.0, x_max: float = 2.0,
                   nx: int = 4000) -> "CdfPair":
        xs = _sample_points(x_min, x_max, nx)
        return cls._clamped(x_min, x_max, nx, cdf_from_quantiles(s.x, xs), cdf_from_quantiles(s.y, xs))

    @classmethod
    def _clamped(cls, x_min, x_max, nx, f, g):
        f, g = np.array(f, dtype=float), np.array(g, dtype=float)
        f[0] = g[0] = 0.0
        f[-1] = g[-1] = 1.0
        return cls(x_min, x_max, nx, f, g)


def max_stable_dt(c: CdfPair) -> float:
    """Largest step for which the update is a convex combination (speeds are at most 2)."""
    return 0.5 * c.dx


def _transport(u, a, r):
    """One upwind update of ``u_t + a u_x = 0`` on interior nodes with ``r = dt/dx``."""
    out = u.copy()
    back = u[1:-1] - u[:-2]
    fwd = u[2:] - u[1:-1]
    ai = a[1:-1]
    out[1:-1] = u[1:-1] - r * (np.maximum(ai, 0.0) * back + np.minimum(ai, 0.0) * fwd)
    return out


def upwind_step(c: CdfPair, dt: float) -> CdfPair:
    if not dt > 0:
        raise DomainError(f"time step must be positive, got {dt}")
    if dt > max_stable_dt(c) * (1 + 1e-12):
        raise CFLError(f"dt={dt} exceeds the stability bound dx/2={max_stable_dt(c)}")
    a = 2.0 * (c.f - c.g)
    r = dt / c.dx
    f = _transport(c.f, a, r)
    g = _transport(c.g, -a, r)
    f[0] = g[0] = 0.0
    f[-1] = g[-1] = 1.0
    return replace(c, f=f, g=g)


def gap_l1(c: CdfPair) -> float:
    return float(np.sum(np.abs(c.f - c.g)) * c.dx)


def gap_energy(c: CdfPair) -> float:
    """Node-sum approximation of ``int (F - G)^2 dx``."""
    d = c.f - c.g
    return float(np.sum(d * d) * c.dx)


@dataclass
class HyperbolicResult:
    final: CdfPair
    times: list = field(default_factory=list)
    l1_gap: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)  # (t, CdfPair)
    steps: int = 0


def run_hyperbolic(initial: CdfPair, t_end: float, cfl: float = 0.5, record_stride: int = 1,
                   snapshot_stride: int | None = None) -> HyperbolicResult:
    """Iterate ``upwind_step`` with ``dt = cfl * dx / 2`` up to ``t_end`` (last step shortened).

    The gap norms are recorded at ``t = 0``, every ``record_stride`` steps and at ``t_end``.
    """
    if not 0 < cfl <= 1:
        raise CFLError(f"cfl must lie in (0, 1], got {cfl}")
    if not t_end > 0:
        raise DomainError(f"t_end must be positive, got {t_end}")
    dt = cfl * max_stable_dt(initial)
    ratio = t_end / dt
    nsteps = int(round(ratio)) if abs(ratio - round(ratio)) <= 1e-9 * ratio else math.ceil(ratio)
    res = HyperbolicResult(final=initial)

    def record(t, c):
        res.times.append(t)
        res.l1_gap.append(gap_l1(c))
        res.energy.append(gap_energy(c))

    c = initial
    record(0.0, c)
    res.snapshots.append((0.0, c))
    for k in range(1, nsteps + 1):
        t = t_end if k == nsteps else k * dt
        c = upwind_step(c, t - (k - 1) * dt)
        res.steps = k
        if k % record_stride == 0 or k == nsteps:
            record(t, c)
        if k == nsteps or (snapshot_stride and k % snapshot_stride == 0):
            res.snapshots.append((t, c))
    res.final = c
    return res


def compare_cdf(c: CdfPair, s: StatePair) -> tuple[float, float]:
    """L1 gaps between the grid CDFs and the empirical CDFs of ``s`` sampled on the same nodes."""
    xs = _sample_points(c.x_min, c.x_max, c.nx)
    fs = cdf_from_quantiles(s.x, xs)
    gs = cdf_from_quantiles(s.y, xs)
    return float(np.sum(np.abs(c.f - fs)) * c.dx), float(np.sum(np.abs(c.g - gs)) * c.dx)
