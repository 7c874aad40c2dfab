"""Proximal (minimizing-movement) time stepping and the simulation driver."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import prox as _prox
from .dynamics import euler_step, velocity_min_norm, velocity_signsum
from .energy import EnergyReport, dissipation, total_energy
from .errors import DimensionError, DomainError
from .quantile import (StatePair, lm_norm, midpoints, moment2, product_wasserstein2_sq,
                       reconstruct_density, wasserstein2)

log = logging.getLogger(__name__)

SOLVERS = ("exact", "subgradient", "smoothed_accelerated")
SCHEMES = ("prox", "euler_signsum", "euler_minnorm")


@dataclass(frozen=True)
class ProxConfig:
    tau: float = 1e-3
    inner_tol: float = 1e-8
    inner_max_iter: int = 200_000
    huber_eps: float = 1e-7
    solver: str = "exact"

    def __post_init__(self):
        if not self.tau > 0:
            raise DomainError(f"tau must be positive, got {self.tau}")
        if not self.inner_tol > 0:
            raise DomainError(f"inner_tol must be positive, got {self.inner_tol}")
        if self.inner_max_iter < 1:
            raise DomainError(f"inner_max_iter must be positive, got {self.inner_max_iter}")
        if self.huber_eps < 0:
            raise DomainError(f"huber_eps must be nonnegative, got {self.huber_eps}")
        if self.solver not in SOLVERS:
            raise DomainError(f"unknown solver {self.solver!r}; expected one of {SOLVERS}")


@dataclass(frozen=True)
class TimeSeriesRecord:
    t: float
    energy: EnergyReport
    w2_between_species: float
    m2_x: float
    m2_y: float
    linf_x: float
    linf_y: float
    l2_x: float
    l2_y: float
    projection_active: bool
    inner_iters: int


@dataclass
class RunResult:
    records: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)  # (t, StatePair)
    evi_residuals: list = field(default_factory=list)  # per step, max over references
    steps: int = 0
    final: StatePair | None = None


class RunAborted(RuntimeError):
    """A step failed; ``partial`` holds everything recorded before the failure."""

    def __init__(self, cause: Exception, partial: RunResult):
        self.cause = cause
        self.partial = partial
        super().__init__(f"run aborted after {partial.steps} steps: {cause}")


def solve_prox(s: StatePair, cfg: ProxConfig) -> _prox.ProxSolution:
    a, b = s.x.values, s.y.values
    if cfg.solver == "exact":
        return _prox.solve_exact(a, b, cfg.tau)
    if cfg.solver == "subgradient":
        return _prox.solve_subgradient(a, b, cfg.tau, cfg.inner_tol, cfg.inner_max_iter)
    return _prox.solve_smoothed(a, b, cfg.tau, cfg.huber_eps, cfg.inner_tol, cfg.inner_max_iter)


def prox_step(s: StatePair, cfg: ProxConfig) -> StatePair:
    """Minimizer of ``|Z - s|^2/(2 tau) + energy(Z)`` over the monotone cone."""
    sol = solve_prox(s, cfg)
    return StatePair.from_arrays(sol.x, sol.y)


def energy_value(s: StatePair) -> float:
    return total_energy(s).total


def evi_residual(prev: StatePair, nxt: StatePair, reference: StatePair, tau: float) -> float:
    """Signed defect of the discrete evolution variational inequality (nonpositive for a prox step)."""
    if not (prev.n == nxt.n == reference.n):
        raise DimensionError("states in the EVI check must share n")
    d_next = product_wasserstein2_sq(nxt, reference)
    d_prev = product_wasserstein2_sq(prev, reference)
    return (d_next - d_prev) / (2.0 * tau) - (energy_value(reference) - energy_value(nxt))


def default_references(n: int) -> list[StatePair]:
    """Five fixed comparison states used for the EVI monitor."""
    z = midpoints(n)
    zero = np.zeros(n)
    return [
        StatePair.from_arrays(zero, zero),
        StatePair.from_arrays(2 * z - 1, 2 * z - 1),
        StatePair.from_arrays(-np.ones(n), np.ones(n)),
        StatePair.from_arrays(z - 1, z),
        StatePair.from_arrays(np.where(z < 0.5, 0.0, 0.5), 0.5 * z ** 2),
    ]


def _has_ties(s: StatePair) -> bool:
    return bool(np.any(np.diff(s.x.values) == 0) or np.any(np.diff(s.y.values) == 0))


def _densities(s: StatePair):
    rx, ry = reconstruct_density(s.x), reconstruct_density(s.y)
    return (lm_norm(rx, math.inf), lm_norm(ry, math.inf), lm_norm(rx, 2), lm_norm(ry, 2))


def make_record(s: StatePair, t: float, diss: float, active: bool, iters: int) -> TimeSeriesRecord:
    linf_x, linf_y, l2_x, l2_y = _densities(s)
    rep = total_energy(s, diss)
    return TimeSeriesRecord(
        t=t, energy=rep, w2_between_species=wasserstein2(s.x, s.y),
        m2_x=moment2(s.x), m2_y=moment2(s.y), linf_x=linf_x, linf_y=linf_y,
        l2_x=l2_x, l2_y=l2_y, projection_active=active, inner_iters=iters)


def step_count(step: float, t_end: float) -> int:
    ratio = t_end / step
    k = round(ratio)
    if k >= 1 and abs(ratio - k) <= 1e-9 * max(1.0, ratio):
        return int(k)
    return int(math.ceil(ratio))


def run(initial: StatePair, scheme: str, step: float, t_end: float, record_every: int = 1,
        prox: ProxConfig | None = None, snapshot_stride: int | None = None,
        references: list[StatePair] | None = None, probe_h: float = 1e-6,
        record_dissipation: bool = True) -> RunResult:
    """Advance ``initial`` to ``t_end`` with steps of size ``step``.

    Times are ``t_k = k * step``; the last step is shortened to land on
    ``t_end``.  A record is taken at every step index divisible by
    ``record_every`` and snapshots at ``t = 0``, every ``snapshot_stride``
    steps and at ``t_end``.  For the proximal scheme every step is checked
    against the EVI for each reference state and the largest residual is
    stored.
    """
    if scheme not in SCHEMES:
        raise DomainError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if not t_end > 0:
        raise DomainError(f"t_end must be positive, got {t_end}")
    if not step > 0:
        raise DomainError(f"step must be positive, got {step}")
    if record_every < 1:
        raise DomainError(f"record_every must be positive, got {record_every}")
    cfg = prox if prox is not None else ProxConfig(tau=step)
    refs = default_references(initial.n) if references is None else references
    nsteps = step_count(step, t_end)

    def diss_of(s):
        if not record_dissipation:
            return 0.0
        v = velocity_signsum(s) if scheme == "euler_signsum" else velocity_min_norm(s, probe_h)
        return dissipation(s, v)

    out = RunResult()
    s = initial
    out.records.append(make_record(s, 0.0, diss_of(s), _has_ties(s), 0))
    out.snapshots.append((0.0, s))
    try:
        for k in range(1, nsteps + 1):
            t = t_end if k == nsteps else k * step
            dt = t - (k - 1) * step
            if scheme == "prox":
                sol = solve_prox(s, cfg if dt == cfg.tau else ProxConfig(
                    dt, cfg.inner_tol, cfg.inner_max_iter, cfg.huber_eps, cfg.solver))
                nxt = StatePair.from_arrays(sol.x, sol.y)
                active, iters = _has_ties(nxt), sol.iterations
                out.evi_residuals.append(max(evi_residual(s, nxt, r, dt) for r in refs))
            else:
                field_ = "signsum" if scheme == "euler_signsum" else "min_norm"
                nxt, active = euler_step(s, dt, field_, probe_h)
                iters = 0
            s = nxt
            out.steps = k
            if k % record_every == 0:
                out.records.append(make_record(s, t, diss_of(s), active, iters))
            if k == nsteps or (snapshot_stride and k % snapshot_stride == 0):
                out.snapshots.append((t, s))
    except Exception as exc:
        out.final = s
        raise RunAborted(exc, out) from exc
    out.final = s
    return out
