"""Interaction energy of the two-species system in quantile and CDF form.

On the monotone cone the self-interaction is the linear functional
``S(X) = (1/n) sum_j (1 - 2 z_j) X_j`` and the cross-interaction is the mean
absolute gap between the species' nodes.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .quantile import QuantileGrid, StatePair, as_values, midpoints

log = logging.getLogger(__name__)

BRUTE_CROSS_MAX_N = 4096


@dataclass(frozen=True)
class EnergyReport:
    self_x: float
    self_y: float
    cross: float
    total: float
    dissipation: float = 0.0

    @classmethod
    def assemble(cls, self_x, self_y, cross, dissipation=0.0, total=None):
        if total is None:
            total = self_x + self_y + cross
        return cls(self_x, self_y, cross, total, dissipation)

    @property
    def component_sum(self) -> float:
        return self.self_x + self.self_y + self.cross


def self_energy(q) -> float:
    """Self-interaction ``-1/2 int int |X(z) - X(w)|`` via its linear form on the cone.

    Raises ``ConeViolationError`` for non-monotone input, where the linear form
    is not the self-interaction.
    """
    v = as_values(q)
    z = midpoints(v.size)
    return float(np.mean((1.0 - 2.0 * z) * v))


def self_energy_pairwise(values) -> float:
    """O(n^2) pairwise self-interaction; valid off the cone too (test oracle)."""
    v = np.asarray(values, dtype=float)
    return float(-0.5 * np.mean(np.abs(v[:, None] - v[None, :])))


def cross_energy_brute(x, y) -> float:
    xv, yv = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    return float(np.mean(np.abs(xv[:, None] - yv[None, :])))


def cross_energy_merge(x, y) -> float:
    """Mean of ``|x_j - y_k|`` over all pairs using sorting and prefix sums."""
    xv = np.asarray(x, dtype=float)
    ys = np.sort(np.asarray(y, dtype=float))
    pref = np.concatenate([[0.0], np.cumsum(ys)])
    cnt = np.searchsorted(ys, xv, side="right")
    below = pref[cnt]
    above = pref[-1] - below
    m = ys.size
    tot = np.sum(xv * cnt - below) + np.sum(above - xv * (m - cnt))
    return float(tot / (xv.size * m))


def cross_energy(x, y, method: str = "auto") -> float:
    """Cross-interaction ``int int |X(z) - Y(w)| dz dw`` on the node grids."""
    xv = x.values if isinstance(x, QuantileGrid) else np.asarray(x, dtype=float)
    yv = y.values if isinstance(y, QuantileGrid) else np.asarray(y, dtype=float)
    if xv.size != yv.size:
        raise DimensionError(f"grid sizes differ: {xv.size} != {yv.size}")
    if method == "auto":
        method = "brute" if xv.size <= BRUTE_CROSS_MAX_N else "merge"
    if method == "brute":
        return cross_energy_brute(xv, yv)
    if method == "merge":
        return cross_energy_merge(xv, yv)
    raise ValueError(f"unknown method {method!r}")


def total_energy(s: StatePair, dissipation: float = 0.0) -> EnergyReport:
    """Energy split into its three interaction terms.

    ``total`` is taken from the CDF form, a sum of nonnegative terms, so it is
    never negative and is exactly zero when ``x == y``.  Summing the three
    terms instead cancels large numbers; ``component_sum`` keeps that value
    as a cross-check.
    """
    return EnergyReport.assemble(self_energy(s.x), self_energy(s.y), cross_energy(s.x, s.y),
                                 dissipation, total=cdf_gap_integral(s.x.values, s.y.values))


def cdf_gap_integral(x: np.ndarray, y: np.ndarray) -> float:
    """Exact ``int (F - G)^2 dx`` for the empirical CDFs of sorted node arrays."""
    n = x.size
    pts = np.concatenate([x, y])
    lab = np.concatenate([np.ones(n), -np.ones(n)])
    order = np.argsort(pts, kind="stable")
    pts, lab = pts[order], lab[order]
    # F - G on [pts[i], pts[i+1]) after passing nodes 0..i, counted in integers
    diff = np.cumsum(lab)[:-1]
    widths = np.diff(pts)
    return float(np.sum(diff * diff * widths) / (n * n))


def energy_from_cdfs(s: StatePair, x_resolution: int | None = None) -> float:
    """Energy as ``int (F - G)^2 dx``, i.e. a quarter of the squared L2 norm of ``N' * (rho - eta)``.

    The integral is evaluated exactly on the piecewise-constant CDFs.  When
    ``x_resolution`` is given, a midpoint-sampled approximation on that many
    cells is computed as a debug cross-check.
    """
    exact = cdf_gap_integral(s.x.values, s.y.values)
    if x_resolution:
        lo = min(s.x.values[0], s.y.values[0])
        hi = max(s.x.values[-1], s.y.values[-1])
        if hi > lo:
            edges = np.linspace(lo, hi, int(x_resolution) + 1)
            mids = 0.5 * (edges[1:] + edges[:-1])
            f = np.searchsorted(s.x.values, mids, side="right") / s.n
            g = np.searchsorted(s.y.values, mids, side="right") / s.n
            sampled = float(np.sum((f - g) ** 2) * (edges[1] - edges[0]))
            log.debug("cdf energy exact=%.17g sampled=%.17g", exact, sampled)
    return exact


def dissipation(s: StatePair, v) -> float:
    """Mass-weighted squared norm ``(1/n) sum (vx^2 + vy^2)`` of a velocity pair.

    ``v`` is anything that unpacks into two arrays (a ``VelocityPair`` or a tuple).
    """
    vx, vy = (np.asarray(c, dtype=float) for c in v)
    if vx.shape != (s.n,) or vy.shape != (s.n,):
        raise DimensionError(f"velocity shape {vx.shape}/{vy.shape} does not match n={s.n}")
    return float(np.mean(vx * vx) + np.mean(vy * vy))


def energy_gradient(x: np.ndarray, y: np.ndarray):
    """Mass-weighted gradient of the energy with the convention sign(0) = 0.

    This is one element of the subdifferential on the cone; at ties it is not
    in general the minimal one.
    """
    n = x.size
    c = 1.0 - 2.0 * midpoints(n)
    ys = np.sort(y)
    xs = np.sort(x)
    gx = c + (np.searchsorted(ys, x, "left") - (n - np.searchsorted(ys, x, "right"))) / n
    gy = c + (np.searchsorted(xs, y, "left") - (n - np.searchsorted(xs, y, "right"))) / n
    return gx, gy
