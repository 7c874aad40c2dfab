"""Velocity fields of the quantile system and explicit Euler stepping."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError
from .prox import solve_exact
from .quantile import StatePair, project_isotonic

FIELDS = ("signsum", "min_norm")


@dataclass(frozen=True)
class VelocityPair:
    vx: np.ndarray
    vy: np.ndarray

    def __post_init__(self):
        if np.shape(self.vx) != np.shape(self.vy):
            raise DimensionError(f"velocity shapes differ: {np.shape(self.vx)} != {np.shape(self.vy)}")

    def __iter__(self):
        return iter((self.vx, self.vy))

    @property
    def sup_norm(self) -> float:
        return float(max(np.max(np.abs(self.vx)), np.max(np.abs(self.vy))))


def _rank_balance(sorted_ref: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """``#{ref < p} - #{ref > p}`` for each point, ties counting zero."""
    lo = np.searchsorted(sorted_ref, pts, side="left")
    hi = np.searchsorted(sorted_ref, pts, side="right")
    return (lo - (sorted_ref.size - hi)).astype(float)


def velocity_signsum(s: StatePair, method: str = "fast") -> VelocityPair:
    """Sign-kernel field with the convention sign(0) = 0.

    ``method="fast"`` counts ranks by binary search on the sorted nodes,
    ``method="brute"`` sums the sign matrix.  Both form the same integer
    count before the single division by ``n``, so they agree bitwise.
    """
    x, y = s.x.values, s.y.values
    n = s.n
    if method == "fast":
        sx = _rank_balance(x, x) - _rank_balance(y, x)
        sy = _rank_balance(y, y) - _rank_balance(x, y)
    elif method == "brute":
        sx = np.sign(x[:, None] - x[None, :]).sum(axis=1) - np.sign(x[:, None] - y[None, :]).sum(axis=1)
        sy = np.sign(y[:, None] - y[None, :]).sum(axis=1) - np.sign(y[:, None] - x[None, :]).sum(axis=1)
    else:
        raise ValueError(f"unknown method {method!r}")
    return VelocityPair(sx / n, sy / n)


def _prox_quotient(x, y, h):
    sol = solve_exact(x, y, h)
    return (sol.x - x) / h, (sol.y - y) / h


def velocity_min_norm(s: StatePair, h: float = 1e-6) -> VelocityPair:
    """Gradient-flow velocity from the proximal difference quotient.

    Evaluates ``(prox_h(Z) - Z)/h`` at ``h`` and ``h/2`` and combines them as
    ``2 v_{h/2} - v_h`` to remove the first-order bias.
    """
    if not h > 0:
        raise DomainError(f"probe step must be positive, got {h}")
    x, y = s.x.values, s.y.values
    vx1, vy1 = _prox_quotient(x, y, h)
    vx2, vy2 = _prox_quotient(x, y, 0.5 * h)
    return VelocityPair(2.0 * vx2 - vx1, 2.0 * vy2 - vy1)


def velocity(s: StatePair, field: str, h: float = 1e-6) -> VelocityPair:
    if field == "signsum":
        return velocity_signsum(s)
    if field == "min_norm":
        return velocity_min_norm(s, h)
    raise ValueError(f"unknown velocity field {field!r}; expected one of {FIELDS}")


def euler_step(s: StatePair, dt: float, field: str = "signsum", h: float = 1e-6):
    """One explicit step followed by projection onto the monotone cone.

    Returns the new state and whether the projection changed anything.
    """
    if not dt > 0:
        raise DomainError(f"time step must be positive, got {dt}")
    v = velocity(s, field, h)
    x = s.x.values + dt * v.vx
    y = s.y.values + dt * v.vy
    px, py = project_isotonic(x), project_isotonic(y)
    active = not (np.array_equal(px, x) and np.array_equal(py, y))
    return StatePair.from_arrays(px, py), active
