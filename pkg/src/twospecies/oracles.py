"""Closed-form reference states for atomic initial data and their subdifferentials.

Two scenarios are covered.  In the first, unit atoms at -1 and +1 either
spread into uniform blocks (the gradient-flow solution) or travel toward each
other as atoms.  In the second, both species share an atom of mass ``m`` at 0
and the rest of the second species sits at 1; the gradient flow keeps the
shared atom in place while the remaining mass spreads.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .quantile import StatePair, midpoints

KINDS = ("two_deltas_gf", "two_deltas_dirac", "overlap_gf", "overlap_dirac", "steady")


class RoundedMassWarning(UserWarning):
    """The shared-atom mass was rounded down to a multiple of 1/n."""


def collision_time(kind: str, m: float = 0.0) -> float:
    """End of the window in which the closed form holds (supports touch)."""
    if kind.startswith("two_deltas"):
        return 0.5
    if kind.startswith("overlap"):
        return 1.0 / (4.0 * (1.0 - m))
    return math.inf


def grid_mass(m: float, n: int) -> float:
    """``m`` snapped down to the grid; warns when ``m * n`` is not an integer."""
    k = m * n
    if abs(k - round(k)) <= 1e-9 * max(1.0, k):
        return round(k) / n
    mr = math.floor(k) / n
    warnings.warn(f"m*n = {k} is not integral; using m = {mr}", RoundedMassWarning, stacklevel=3)
    return mr


@dataclass(frozen=True)
class OracleSpec:
    kind: str
    t: float = 0.0
    n: int = 200
    m: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown oracle kind {self.kind!r}; expected one of {KINDS}")
        if self.n < 1:
            raise DomainError(f"n must be positive, got {self.n}")
        if not 0.0 <= self.m < 1.0:
            raise DomainError(f"m must lie in [0, 1), got {self.m}")
        if not self.t >= 0.0:
            raise DomainError(f"t must be nonnegative, got {self.t}")
        if not self.t < collision_time(self.kind, self.m):
            raise DomainError(
                f"t={self.t} is outside the validity window t < {collision_time(self.kind, self.m)} for {self.kind}")
        if self.kind.startswith("overlap"):
            object.__setattr__(self, "m", grid_mass(self.m, self.n))


def exact_state(spec: OracleSpec) -> StatePair:
    z = midpoints(spec.n)
    t, m = spec.t, spec.m
    if spec.kind == "two_deltas_gf":
        return StatePair.from_arrays(-1.0 + 2.0 * z * t, 1.0 + t * (2.0 * z - 2.0))
    if spec.kind == "two_deltas_dirac":
        return StatePair.from_arrays(np.full(spec.n, -1.0 + t), np.full(spec.n, 1.0 - t))
    upper = z >= m
    if spec.kind == "overlap_gf":
        return StatePair.from_arrays(np.where(upper, 2.0 * t * (z - m), 0.0),
                                     np.where(upper, 1.0 - 2.0 * t * (1.0 - z), 0.0))
    if spec.kind == "overlap_dirac":
        return StatePair.from_arrays(np.where(upper, (1.0 - m) * t, 0.0),
                                     np.where(upper, 1.0 - (1.0 - m) * t, 0.0))
    q = 2.0 * z - 1.0
    return StatePair.from_arrays(q, q.copy())


def exact_velocity(spec: OracleSpec):
    """Time derivative of the gradient-flow closed forms (minus the minimal subgradient)."""
    if spec.kind == "two_deltas_gf":
        z = midpoints(spec.n)
        return 2.0 * z, 2.0 * z - 2.0
    if spec.kind == "overlap_gf":
        f1, f2 = exact_subdifferential(spec.m, spec.n)
        return -f1, -f2
    if spec.kind == "two_deltas_dirac":
        return np.ones(spec.n), -np.ones(spec.n)
    if spec.kind == "overlap_dirac":
        upper = midpoints(spec.n) >= spec.m
        return np.where(upper, 1.0 - spec.m, 0.0), np.where(upper, spec.m - 1.0, 0.0)
    return np.zeros(spec.n), np.zeros(spec.n)


def exact_subdifferential(m: float, n: int):
    """Minimal subgradient at the shared-atom configuration with separated remainders."""
    if not 0.0 <= m < 1.0:
        raise DomainError(f"m must lie in [0, 1), got {m}")
    m = grid_mass(m, n)
    z = midpoints(n)
    upper = z >= m
    return np.where(upper, 2.0 * (m - z), 0.0), np.where(upper, 2.0 - 2.0 * z, 0.0)


def exact_energy_two_deltas(t: float):
    """Energy and dissipation along the spreading solution from atoms at -1 and +1."""
    if not 0.0 <= t < 0.5:
        raise DomainError(f"t={t} is outside [0, 1/2)")
    return 2.0 - 8.0 * t / 3.0, 8.0 / 3.0


def exact_dissipation_overlap(m: float) -> float:
    """Squared speed of the spreading solution with a shared atom of mass ``m``."""
    return 8.0 / 3.0 * (1.0 - m) ** 3
