"""Quantile-function representation of probability measures on the line.

A measure is stored as ``n`` equal-mass nodes: ``values[j]`` is the
generalized inverse of the CDF sampled at the midpoint ``z_j = (j + 1/2)/n``.
Everything in this module is a pure function of its inputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._jit import njit
from .errors import ConeViolationError, DimensionError, DomainError, InvalidMeasureError

MASS_TOL = 1e-9


def midpoints(n: int) -> np.ndarray:
    """Mass grid ``z_j = (j + 1/2)/n``."""
    if n < 1:
        raise DomainError(f"grid size must be positive, got {n}")
    return (np.arange(n, dtype=float) + 0.5) / n


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


def check_cone(values: np.ndarray, name: str = "values") -> None:
    if values.ndim != 1 or values.size == 0:
        raise ConeViolationError(f"{name} must be a non-empty 1-d array")
    if not np.all(np.isfinite(values)):
        raise ConeViolationError(f"{name} contains non-finite entries")
    if np.any(np.diff(values) < 0):
        j = int(np.argmax(np.diff(values) < 0))
        raise ConeViolationError(
            f"{name} is not non-decreasing at index {j}: {values[j]!r} > {values[j + 1]!r}")


@dataclass(frozen=True)
class QuantileGrid:
    """Non-decreasing node positions, each node carrying mass ``1/n``."""

    values: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.values)
        check_cone(arr)
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def z(self) -> np.ndarray:
        return midpoints(self.n)

    def shifted(self, c: float) -> "QuantileGrid":
        return QuantileGrid(self.values + c)

    def __eq__(self, other):
        if not isinstance(other, QuantileGrid):
            return NotImplemented
        return self.n == other.n and bool(np.array_equal(self.values, other.values))

    def __hash__(self):
        return hash(self.values.tobytes())


@dataclass(frozen=True)
class StatePair:
    """Gradient-flow state: quantile grids of the two species."""

    x: QuantileGrid
    y: QuantileGrid

    def __post_init__(self):
        if not isinstance(self.x, QuantileGrid):
            object.__setattr__(self, "x", QuantileGrid(self.x))
        if not isinstance(self.y, QuantileGrid):
            object.__setattr__(self, "y", QuantileGrid(self.y))
        if self.x.n != self.y.n:
            raise DimensionError(f"species sizes differ: {self.x.n} != {self.y.n}")

    @classmethod
    def from_arrays(cls, x, y) -> "StatePair":
        return cls(QuantileGrid(x), QuantileGrid(y))

    @property
    def n(self) -> int:
        return self.x.n

    def stacked(self) -> np.ndarray:
        """Concatenated ``(X, Y)`` as one writable array of length ``2n``."""
        return np.concatenate([self.x.values, self.y.values])

    def shifted(self, c: float) -> "StatePair":
        return StatePair(self.x.shifted(c), self.y.shifted(c))


@dataclass(frozen=True)
class DensityProfile:
    """Atoms ``(position, mass)`` plus constant pieces ``(left, right, height)``."""

    atoms: tuple = ()
    pieces: tuple = ()
    total_mass: float = field(init=False)

    def __post_init__(self):
        atoms = tuple((float(p), float(m)) for p, m in self.atoms)
        pieces = tuple((float(a), float(b), float(h)) for a, b, h in self.pieces)
        for p, m in atoms:
            if not (math.isfinite(p) and 0.0 < m <= 1.0 + MASS_TOL):
                raise InvalidMeasureError(f"atom ({p}, {m}) must have finite position and mass in (0, 1]")
        for k in range(len(atoms) - 1):
            if not atoms[k][0] < atoms[k + 1][0]:
                raise InvalidMeasureError("atom positions must be strictly increasing")
        for a, b, h in pieces:
            if not (math.isfinite(a) and math.isfinite(b) and a < b):
                raise InvalidMeasureError(f"piece [{a}, {b}] must have finite left < right")
            if not (h >= 0.0 and math.isfinite(h)):
                raise InvalidMeasureError(f"piece height {h} must be finite and non-negative")
        for k in range(len(pieces) - 1):
            if pieces[k + 1][0] < pieces[k][1]:
                raise InvalidMeasureError("pieces must be sorted and non-overlapping")
        total = math.fsum(m for _, m in atoms) + math.fsum(h * (b - a) for a, b, h in pieces)
        if abs(total - 1.0) > MASS_TOL:
            raise InvalidMeasureError(f"total mass {total!r} differs from 1 by more than {MASS_TOL}")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "pieces", pieces)
        object.__setattr__(self, "total_mass", total)

    @classmethod
    def uniform(cls, left: float, right: float) -> "DensityProfile":
        return cls(pieces=((left, right, 1.0 / (right - left)),))

    @classmethod
    def dirac(cls, position: float) -> "DensityProfile":
        return cls(atoms=((position, 1.0),))

    @property
    def has_atoms(self) -> bool:
        return len(self.atoms) > 0

    def cdf(self, xs) -> np.ndarray:
        """Right-continuous CDF evaluated at ``xs``."""
        xs = np.asarray(xs, dtype=float)
        out = np.zeros_like(xs)
        for p, m in self.atoms:
            out += m * (xs >= p)
        for a, b, h in self.pieces:
            out += h * (np.clip(xs, a, b) - a)
        return out


def _inverse_table(d: DensityProfile):
    """Segments ``(mass_start, mass_end, x_start, x_end)`` of the CDF in order."""
    breaks = sorted({p for p, _ in d.atoms} | {a for a, _, _ in d.pieces} | {b for _, b, _ in d.pieces})
    atom_mass = dict(d.atoms)
    segs = []
    cum = 0.0
    for k, b in enumerate(breaks):
        m = atom_mass.get(b, 0.0)
        if m > 0.0:
            segs.append((cum, cum + m, b, b))
            cum += m
        if k + 1 < len(breaks):
            b1 = breaks[k + 1]
            dens = sum(h for a, r, h in d.pieces if a <= b and r >= b1)
            mass = dens * (b1 - b)
            if mass > 0.0:
                segs.append((cum, cum + mass, b, b1))
                cum += mass
    return np.array(segs, dtype=float).reshape(-1, 4)


def quantiles_from_density(d: DensityProfile, n: int) -> QuantileGrid:
    """Generalized inverse ``X(s) = inf{x : F(x) > s}`` sampled at the midpoint grid.

    Parameters
    ----------
    d : DensityProfile
        Probability measure with atoms and constant pieces.
    n : int
        Number of nodes, at least 2.
    """
    if n < 2:
        raise DomainError(f"n must be at least 2, got {n}")
    if abs(d.total_mass - 1.0) > MASS_TOL:
        raise InvalidMeasureError(f"total mass {d.total_mass!r} is not 1")
    table = _inverse_table(d)
    s = midpoints(n)
    # first segment whose upper mass exceeds s: right-continuous inverse
    k = np.searchsorted(table[:, 1], s, side="right")
    k = np.minimum(k, len(table) - 1)
    m0, m1, x0, x1 = table[k].T
    frac = np.where(m1 > m0, (s - m0) / np.where(m1 > m0, m1 - m0, 1.0), 0.0)
    frac = np.clip(frac, 0.0, 1.0)
    vals = x0 + frac * (x1 - x0)
    return QuantileGrid(np.maximum.accumulate(vals))


def cdf_from_quantiles(q: QuantileGrid, xs) -> np.ndarray:
    """Empirical CDF ``F(x) = #{j : values[j] <= x} / n``."""
    xs = np.asarray(xs, dtype=float)
    return np.searchsorted(q.values, xs, side="right") / q.n


def _same_size(a: QuantileGrid, b: QuantileGrid):
    if a.n != b.n:
        raise DimensionError(f"grid sizes differ: {a.n} != {b.n}")


def wasserstein2(a: QuantileGrid, b: QuantileGrid) -> float:
    """Quadratic Wasserstein distance, i.e. the L2(0,1) gap of the quantile functions."""
    _same_size(a, b)
    d = a.values - b.values
    return float(np.sqrt(np.mean(d * d)))


def product_wasserstein2_sq(s1: StatePair, s2: StatePair) -> float:
    """Squared product distance ``W2(x1,x2)^2 + W2(y1,y2)^2``."""
    return wasserstein2(s1.x, s2.x) ** 2 + wasserstein2(s1.y, s2.y) ** 2


def moment2(q: QuantileGrid) -> float:
    return float(np.mean(q.values * q.values))


@njit(cache=True)
def _pava(y):
    n = y.size
    level = np.empty(n)
    weight = np.empty(n)
    start = np.empty(n, dtype=np.int64)
    top = -1
    for i in range(n):
        top += 1
        level[top] = y[i]
        weight[top] = 1.0
        start[top] = i
        while top > 0 and level[top - 1] > level[top]:
            w = weight[top - 1] + weight[top]
            level[top - 1] = (weight[top - 1] * level[top - 1] + weight[top] * level[top]) / w
            weight[top - 1] = w
            top -= 1
    out = np.empty(n)
    for b in range(top + 1):
        stop = start[b + 1] if b < top else n
        for i in range(start[b], stop):
            out[i] = level[b]
    return out


def project_isotonic(values) -> np.ndarray:
    """Least-squares projection onto non-decreasing arrays (pool adjacent violators)."""
    y = np.ascontiguousarray(values, dtype=float)
    if y.ndim != 1:
        raise DimensionError("project_isotonic expects a 1-d array")
    if y.size == 0:
        return y.copy()
    if not np.all(np.isfinite(y)):
        raise DomainError("project_isotonic requires finite values")
    return _pava(y)


def _tie_blocks(values: np.ndarray, tol: float):
    """Start/stop indices of runs whose consecutive gaps are ``<= tol``."""
    gaps = np.diff(values)
    cuts = np.flatnonzero(gaps > tol) + 1
    starts = np.concatenate([[0], cuts])
    stops = np.concatenate([cuts, [values.size]])
    return starts, stops


def reconstruct_density(q: QuantileGrid, atom_gap_tol: float | None = None) -> DensityProfile:
    """Piecewise-constant density (plus atoms) consistent with the nodes.

    Runs of tied nodes become atoms carrying their full mass.  Every isolated
    node splits its mass ``1/n`` evenly into the gaps on either side, so a gap
    between two isolated nodes holds ``1/n`` and gets height ``(1/n)/gap``.  At
    the outer ends the half-cell extends by half of the inner gap.
    """
    v = q.values
    n = q.n
    if atom_gap_tol is None:
        atom_gap_tol = 1e-9 * float(v[-1] - v[0])
    starts, stops = _tie_blocks(v, atom_gap_tol)
    nb = starts.size
    pos = np.array([v[a:b].mean() for a, b in zip(starts, stops)])
    size = stops - starts
    atoms = [(float(pos[k]), size[k] / n) for k in range(nb) if size[k] > 1]
    if nb == 1 and size[0] == 1:
        raise DomainError("cannot reconstruct a density from a single node")
    # mass deposited in gap k (between block k and k+1)
    half = 0.5 / n
    pieces = []
    for k in range(nb - 1):
        mass = (half if size[k] == 1 else 0.0) + (half if size[k + 1] == 1 else 0.0)
        if mass > 0.0:
            a, b = float(pos[k]), float(pos[k + 1])
            pieces.append((a, b, mass / (b - a)))
    if size[0] == 1:
        g = float(pos[1] - pos[0])
        pieces.insert(0, (float(pos[0]) - g / 2, float(pos[0]), half / (g / 2)))
    if size[-1] == 1:
        g = float(pos[-1] - pos[-2])
        pieces.append((float(pos[-1]), float(pos[-1]) + g / 2, half / (g / 2)))
    return DensityProfile(atoms=tuple(atoms), pieces=tuple(pieces))


def lm_norm(d: DensityProfile, m: float) -> float:
    """L^m norm of the absolutely continuous part; ``inf`` whenever an atom is present."""
    if not m > 1:
        raise DomainError(f"L^m norm requires m > 1, got {m}")
    if d.has_atoms:
        return math.inf
    if not d.pieces:
        return 0.0
    h = np.array([p[2] for p in d.pieces])
    w = np.array([p[1] - p[0] for p in d.pieces])
    if math.isinf(m):
        return float(h.max())
    return float(np.sum(h ** m * w) ** (1.0 / m))


def as_values(q, name: str = "q") -> np.ndarray:
    """Values of a grid or array-like, validated against the cone."""
    if isinstance(q, QuantileGrid):
        return q.values
    arr = np.asarray(q, dtype=float)
    check_cone(arr, name)
    return arr


def grids_from_densities(rho: DensityProfile, eta: DensityProfile, n: int) -> StatePair:
    return StatePair(quantiles_from_density(rho, n), quantiles_from_density(eta, n))




def random_block_density(rng: np.random.Generator, max_blocks: int = 3,
                         support: tuple[float, float] = (-1.0, 1.0)) -> DensityProfile:
    """Mixture of up to ``max_blocks`` disjoint uniform blocks inside ``support``."""
    k = int(rng.integers(1, max_blocks + 1))
    while True:
        edges = np.sort(rng.uniform(support[0], support[1], size=2 * k))
        widths = edges[1::2] - edges[::2]
        if np.all(widths > 1e-3 * (support[1] - support[0])):
            break
    masses = rng.dirichlet(np.ones(k))
    pieces = tuple((float(edges[2 * i]), float(edges[2 * i + 1]), float(masses[i] / widths[i]))
                   for i in range(k))
    return DensityProfile(atoms=(), pieces=pieces)


__all__: Sequence[str] = [
    "QuantileGrid", "StatePair", "DensityProfile", "midpoints", "quantiles_from_density",
    "cdf_from_quantiles", "wasserstein2", "product_wasserstein2_sq", "moment2",
    "project_isotonic", "reconstruct_density", "lm_norm", "check_cone", "as_values",
    "grids_from_densities", "random_block_density",
]
