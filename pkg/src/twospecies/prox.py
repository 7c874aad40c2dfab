"""Inner solvers for one proximal (minimizing-movement) step.

After scaling by ``tau * n`` the step from ``(a, b)`` is

    min  1/2 |X - alpha|^2 + 1/2 |Y - beta|^2 + lam * sum_{j,k} |X_j - Y_k|
    s.t. X, Y non-decreasing,

with ``alpha = a - tau (1 - 2z)``, ``beta = b - tau (1 - 2z)`` and
``lam = tau / n``.  The pairwise term plus the order constraints is the
Lovasz extension of a submodular set function (a complete bipartite cut on
two chains), so the exact solution is obtained by divide and conquer: pool a
group at its mean, look for the up-set whose lift decreases the objective,
split there and recurse.  Each group is a contiguous range of X nodes and a
contiguous range of Y nodes, and candidate up-sets are suffix pairs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._jit import njit
from .energy import energy_gradient
from .errors import ConvergenceError
from .quantile import midpoints, project_isotonic

SPLIT_RTOL = 1e-12


@dataclass
class ProxSolution:
    x: np.ndarray
    y: np.ndarray
    residual: float
    iterations: int
    solver: str


def prox_targets(a: np.ndarray, b: np.ndarray, tau: float):
    n = a.size
    c = 1.0 - 2.0 * midpoints(n)
    return a - tau * c, b - tau * c, tau / n


@njit(cache=True)
def _group_value(px, py, n, lam, x0, x1, y0, y1):
    nx = x1 - x0
    ny = y1 - y0
    s = (px[x1] - px[x0]) + (py[y1] - py[y0])
    w = nx * (y0 - (n - y1)) + ny * (x0 - (n - x1))
    return (s - lam * w) / (nx + ny)


@njit(cache=True)
def _best_split(alpha, beta, n, lam, x0, x1, y0, y1, v):
    """Most negative ``lam*cut(U) - sum_U r`` over suffix pairs ``U`` of the group."""
    nx = x1 - x0
    ny = y1 - y0
    sx = np.zeros(nx + 1)
    sy = np.zeros(ny + 1)
    shift_x = lam * (y0 - (n - y1))
    shift_y = lam * (x0 - (n - x1))
    scale = 0.0
    for a in range(1, nx + 1):
        r = alpha[x1 - a] - shift_x - v
        sx[a] = sx[a - 1] + r
        scale += abs(r)
    for b in range(1, ny + 1):
        r = beta[y1 - b] - shift_y - v
        sy[b] = sy[b - 1] + r
        scale += abs(r)
    scale += lam * (nx + ny)
    best = 0.0
    ba = 0
    bb = 0
    for a in range(nx + 1):
        for b in range(ny + 1):
            if (a == nx and b == ny) or (a == 0 and b == 0):
                continue
            f = lam * (a * (ny - b) + b * (nx - a)) - sx[a] - sy[b]
            if f < best:
                best = f
                ba = a
                bb = b
    return best, ba, bb, scale


@njit(cache=True)
def _decompose(alpha, beta, lam, rtol):
    n = alpha.size
    px = np.zeros(n + 1)
    py = np.zeros(n + 1)
    for i in range(n):
        px[i + 1] = px[i] + alpha[i]
        py[i + 1] = py[i] + beta[i]
    xo = np.empty(n)
    yo = np.empty(n)
    stack = np.empty((2 * n + 2, 4), dtype=np.int64)
    top = 0
    stack[0, 0] = 0
    stack[0, 1] = n
    stack[0, 2] = 0
    stack[0, 3] = n
    splits = 0
    slack = 0.0
    while top >= 0:
        x0 = stack[top, 0]
        x1 = stack[top, 1]
        y0 = stack[top, 2]
        y1 = stack[top, 3]
        top -= 1
        v = _group_value(px, py, n, lam, x0, x1, y0, y1)
        if (x1 - x0) + (y1 - y0) > 1:
            best, ba, bb, scale = _best_split(alpha, beta, n, lam, x0, x1, y0, y1, v)
            if best < -rtol * scale:
                splits += 1
                top += 1
                stack[top, 0] = x0
                stack[top, 1] = x1 - ba
                stack[top, 2] = y0
                stack[top, 3] = y1 - bb
                top += 1
                stack[top, 0] = x1 - ba
                stack[top, 1] = x1
                stack[top, 2] = y1 - bb
                stack[top, 3] = y1
                continue
            if -best > slack:
                slack = -best
        for i in range(x0, x1):
            xo[i] = v
        for i in range(y0, y1):
            yo[i] = v
    return xo, yo, splits, slack


def solve_exact(a: np.ndarray, b: np.ndarray, tau: float) -> ProxSolution:
    """Exact proximal step by submodular divide and conquer (finite, at most 2n-1 splits)."""
    alpha, beta, lam = prox_targets(np.ascontiguousarray(a, float), np.ascontiguousarray(b, float), tau)
    x, y, splits, slack = _decompose(alpha, beta, lam, SPLIT_RTOL)
    # pooled values are exact means; enforce order against last-bit noise
    x = np.maximum.accumulate(x)
    y = np.maximum.accumulate(y)
    # unsplit groups may carry a sub-tolerance improving lift; report it as a distance bound
    return ProxSolution(x, y, float(slack) * a.size, int(splits), "exact")


def kkt_violation(x, y, a, b, tau) -> float:
    """Largest first-order optimality violation of ``(x, y)`` for the step from ``(a, b)``.

    Independent of the solver path: nodes are grouped by exact equality of
    their values, each group must sit at its pooled mean and admit no
    improving lift of a suffix pair.  Returned in units of the mass-weighted
    energy gradient (zero at the exact minimizer).
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    n = x.size
    alpha, beta, lam = prox_targets(np.asarray(a, float), np.asarray(b, float), tau)
    if np.any(np.diff(x) < 0) or np.any(np.diff(y) < 0):
        return float("inf")
    vals = np.unique(np.concatenate([x, y]))
    worst = 0.0
    for v in vals:
        ix = np.flatnonzero(x == v)
        iy = np.flatnonzero(y == v)
        x0, x1 = (ix[0], ix[-1] + 1) if ix.size else (np.searchsorted(x, v), np.searchsorted(x, v))
        y0, y1 = (iy[0], iy[-1] + 1) if iy.size else (np.searchsorted(y, v), np.searchsorted(y, v))
        nx, ny = x1 - x0, y1 - y0
        below_y = np.searchsorted(y, v, "left")
        above_y = n - np.searchsorted(y, v, "right")
        below_x = np.searchsorted(x, v, "left")
        above_x = n - np.searchsorted(x, v, "right")
        rx = alpha[x0:x1] - lam * (below_y - above_y) - v
        ry = beta[y0:y1] - lam * (below_x - above_x) - v
        total = rx.sum() + ry.sum()
        worst = max(worst, abs(total) / (nx + ny))
        sx = np.concatenate([[0.0], np.cumsum(rx[::-1])])
        sy = np.concatenate([[0.0], np.cumsum(ry[::-1])])
        aa = np.arange(nx + 1)[:, None]
        bb = np.arange(ny + 1)[None, :]
        f = lam * (aa * (ny - bb) + bb * (nx - aa)) - sx[:, None] - sy[None, :]
        worst = max(worst, -float(f.min()))
    return worst / (tau / n)


def objective(x, y, a, b, tau) -> float:
    """Mass-weighted proximal objective ``|Z - Z^n|^2/(2 tau) + energy``."""
    n = x.size
    z = midpoints(n)
    quad = (np.mean((x - a) ** 2) + np.mean((y - b) ** 2)) / (2.0 * tau)
    lin = np.mean((1.0 - 2.0 * z) * (x + y))
    cross = np.mean(np.abs(x[:, None] - y[None, :]))
    return float(quad + lin + cross)


def _project(x, y):
    return project_isotonic(x), project_isotonic(y)


def _fixed_point_residual(x, y, gx, gy, sigma):
    px, py = _project(x - sigma * gx, y - sigma * gy)
    return float(np.sqrt(np.mean((px - x) ** 2) + np.mean((py - y) ** 2)))


POLISH_TIE_TOLS = tuple(10.0 ** -k for k in range(12, 4, -1))


def _polish(x, y, a, b, tau, tol, tie_tols=POLISH_TIE_TOLS):
    """Exact minimizer recovered from an approximate one.

    First the merged order of the approximate nodes is frozen: on that order
    every ``|X_j - Y_k|`` is linear, so the step reduces to one isotonic
    regression over all ``2n`` nodes, exact whenever the order is right up
    to ties.  Failing that, nodes agreeing within a tie tolerance are pooled
    at their exact group value, smallest tolerance first.  A candidate is
    accepted when its optimality violation ``k`` (gradient units) satisfies
    ``tau * k <= tol``, since the minimizer is then within about ``tol``.
    Returns ``(x, y, tau * k)`` or ``None`` if nothing is accepted.
    """
    candidates = [lambda: _pool_by_order(x, y, a, b, tau)]
    candidates += [lambda tie=tie: _pool_ties(x, y, a, b, tau, tie) for tie in tie_tols]
    for make in candidates:
        px, py = make()
        res = tau * kkt_violation(px, py, a, b, tau)
        if res <= tol:
            return px, py, res
    return None


def _pool_by_order(x, y, a, b, tau):
    n = x.size
    alpha, beta, lam = prox_targets(a, b, tau)
    order = np.argsort(np.concatenate([x, y]), kind="stable")
    is_x = order < n
    # nodes of the other species strictly before / after each position
    ys_before = np.cumsum(~is_x) - (~is_x)
    xs_before = np.cumsum(is_x) - is_x
    target = np.where(is_x,
                      np.concatenate([alpha, beta])[order] - lam * (2 * ys_before - n),
                      np.concatenate([alpha, beta])[order] - lam * (2 * xs_before - n))
    w = project_isotonic(target)
    out = np.empty(2 * n)
    out[order] = w
    return np.maximum.accumulate(out[:n]), np.maximum.accumulate(out[n:])


def _pool_ties(x, y, a, b, tau, tol):
    n = x.size
    alpha, beta, lam = prox_targets(a, b, tau)
    vals = np.concatenate([x, y])
    lab = np.concatenate([np.zeros(n, int), np.ones(n, int)])
    order = np.argsort(vals, kind="stable")
    gaps = np.diff(vals[order])
    cuts = np.concatenate([[0], np.flatnonzero(gaps > tol) + 1, [2 * n]])
    xo = np.empty(n)
    yo = np.empty(n)
    px = np.concatenate([[0.0], np.cumsum(alpha)])
    py = np.concatenate([[0.0], np.cumsum(beta)])
    nx_before = ny_before = 0
    for s, e in zip(cuts[:-1], cuts[1:]):
        members = lab[order[s:e]]
        nx = int(np.sum(members == 0))
        ny = int(np.sum(members == 1))
        x0, y0 = nx_before, ny_before
        v = _group_value(px, py, n, lam, x0, x0 + nx, y0, y0 + ny)
        xo[x0:x0 + nx] = v
        yo[y0:y0 + ny] = v
        nx_before += nx
        ny_before += ny
    return xo, yo


def _tangent_norm2(x, g):
    """Squared norm of the projection of ``-g`` onto the tangent cone of the monotone cone at ``x``.

    This is the smallest squared norm of ``g + nu`` over normal-cone elements ``nu``.
    """
    cuts = np.flatnonzero(np.diff(x) != 0) + 1
    d = -g
    if cuts.size < x.size - 1:
        d = d.copy()
        for lo, hi in zip(np.concatenate([[0], cuts]), np.concatenate([cuts, [x.size]])):
            if hi - lo > 1:
                d[lo:hi] = project_isotonic(d[lo:hi])
    return float(np.mean(d * d))


def solve_subgradient(a, b, tau, tol=1e-8, max_iter=200_000, polish=True,
                      polish_every=25) -> ProxSolution:
    """Projected subgradient with a Polyak step, warm-started at ``(a, b)``.

    The optimal-value lower bound is ``phi(Z) - tau/2 |u|^2`` for the smallest
    element ``u`` of (sign-convention subgradient + normal cone), valid since
    ``phi`` is ``1/tau``-strongly convex.  When the fixed-point residual drops
    below ``tol`` the tie structure is pooled at exact values and certified;
    an uncertified point keeps iterating.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    x, y = a.copy(), b.copy()
    best = (np.inf, x, y)
    lower = -np.inf
    res = np.inf
    last_try = -polish_every
    k = 0
    for k in range(1, max_iter + 1):
        gx, gy = energy_gradient(x, y)
        gx = gx + (x - a) / tau
        gy = gy + (y - b) / tau
        phi = objective(x, y, a, b, tau)
        if phi < best[0]:
            best = (phi, x, y)
        lower = max(lower, phi - 0.5 * tau * (_tangent_norm2(x, gx) + _tangent_norm2(y, gy)))
        g2 = float(np.mean(gx * gx) + np.mean(gy * gy))
        if g2 == 0.0:
            return ProxSolution(x, y, 0.0, k, "subgradient")
        sigma = min(tau, max(phi - lower, 0.0) / g2)
        res = _fixed_point_residual(x, y, gx, gy, sigma)
        if res <= tol and not polish:
            return ProxSolution(x, y, res, k, "subgradient")
        if polish and (res <= tol or k - last_try >= polish_every):
            last_try = k
            out = _polish(best[1], best[2], a, b, tau, tol)
            if out is not None:
                return ProxSolution(out[0], out[1], out[2], k, "subgradient")
        x, y = _project(x - sigma * gx, y - sigma * gy)
    if polish:
        out = _polish(best[1], best[2], a, b, tau, tol)
        if out is not None:
            return ProxSolution(out[0], out[1], out[2], k, "subgradient")
    raise ConvergenceError("projected subgradient did not reach tolerance", res, k)


def _huber_cross_grad(x, y, eps):
    d = x[:, None] - y[None, :]
    s = np.clip(d / eps, -1.0, 1.0) if eps > 0 else np.sign(d)
    n = x.size
    return s.sum(axis=1) / n, -s.sum(axis=0) / n


def solve_smoothed(a, b, tau, eps=1e-7, tol=1e-8, max_iter=200_000,
                   polish_iters=100, polish=True) -> ProxSolution:
    """Huber-smoothed cross term, accelerated projected gradient, then polishing.

    Uses constant-momentum acceleration for the ``1/tau``-strongly convex,
    ``(1/tau + 2/eps)``-smooth objective, followed by ``polish_iters``
    projected steps with the exact (sign) subgradient and a pooled-value
    refinement on the detected tie structure.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    n = a.size
    c = 1.0 - 2.0 * midpoints(n)
    mu = 1.0 / tau
    lip = mu + (2.0 / eps if eps > 0 else 0.0)
    step = 1.0 / lip
    q = mu / lip
    beta_m = (1.0 - np.sqrt(q)) / (1.0 + np.sqrt(q))
    x, y = a.copy(), b.copy()
    ux, uy = x.copy(), y.copy()
    res = np.inf
    k = 0
    for k in range(1, max_iter + 1):
        hx, hy = _huber_cross_grad(ux, uy, eps)
        gx = (ux - a) / tau + c + hx
        gy = (uy - b) / tau + c + hy
        nx_, ny_ = _project(ux - step * gx, uy - step * gy)
        res = float(np.sqrt(np.mean((nx_ - ux) ** 2) + np.mean((ny_ - uy) ** 2))) / (step * mu)
        ux, uy = nx_ + beta_m * (nx_ - x), ny_ + beta_m * (ny_ - y)
        x, y = nx_, ny_
        if res <= tol:
            break
    for _ in range(polish_iters):
        gx, gy = energy_gradient(x, y)
        gx = gx + (x - a) / tau
        gy = gy + (y - b) / tau
        cand = _project(x - step * gx, y - step * gy)
        if objective(*cand, a, b, tau) <= objective(x, y, a, b, tau):
            x, y = cand
    if polish:
        out = _polish(x, y, a, b, tau, tol)
        if out is not None:
            return ProxSolution(out[0], out[1], out[2], k, "smoothed_accelerated")
    if res > tol:
        raise ConvergenceError("smoothed accelerated gradient did not reach tolerance", res, k)
    return ProxSolution(x, y, res, k, "smoothed_accelerated")
