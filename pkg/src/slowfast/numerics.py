"""Shared numerical kernels.

Small, dependency-light helpers used across the package: fixed-order
Gauss-Legendre panels for cumulative integrals, overflow-safe log-domain
trapezoid sums, weight-equidistributed grids, mirror reflection, and the
least-squares fits used by the decay and Holder studies.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import cumulative_trapezoid, simpson, trapezoid
from scipy.special import logsumexp

from .errors import FitError

_GL_NODES, _GL_WEIGHTS = leggauss(10)


def gauss_panels(func, edges):
    """Integrate ``func`` over each panel [edges[i], edges[i+1]].

    Uses a 10-point Gauss-Legendre rule per panel, vectorized over panels.
    ``func`` must accept an ndarray and return one of the same shape.
    Returns the per-panel integrals, shape ``(len(edges) - 1,)``.
    """
    edges = np.asarray(edges, dtype=float)
    a = edges[:-1]
    h = np.diff(edges)
    pts = a[:, None] + (0.5 * (_GL_NODES + 1.0))[None, :] * h[:, None]
    vals = func(pts)
    return 0.5 * h * (vals @ _GL_WEIGHTS)


def cumulative_gauss(func, grid, base=0.0):
    """Antiderivative of ``func`` sampled on ``grid``, equal to ``base`` at grid[0]."""
    grid = np.asarray(grid, dtype=float)
    out = np.empty(grid.size)
    out[0] = 0.0
    np.cumsum(gauss_panels(func, grid), out=out[1:])
    out += base
    return out


def log_trapezoid_panels(logf, y):
    """Per-panel log of the trapezoid rule applied to exp(logf), overflow-safe."""
    logf = np.asarray(logf, dtype=float)
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore"):
        logh = np.log(np.diff(y))
    return np.logaddexp(logf[:-1], logf[1:]) + logh - np.log(2.0)


def log_trapezoid(logf, y):
    """log of the trapezoid integral of exp(logf) over y, overflow-safe."""
    return float(logsumexp(log_trapezoid_panels(logf, y)))


def log_cumsum(logv):
    """log of the running sum of exp(logv)."""
    return np.logaddexp.accumulate(logv)


def equidistribute(probe, weight, n):
    """Place ``n`` nodes on the probe range with local density proportional to weight.

    ``probe`` must be increasing. Endpoints are pinned exactly; interior nodes
    come from inverting the cumulative weight integral, so regions where the
    weight is large receive proportionally more nodes.
    """
    cw = cumulative_trapezoid(weight, probe, initial=0.0)
    targets = np.linspace(0.0, cw[-1], n)
    grid = np.interp(targets, cw, probe)
    grid[0] = probe[0]
    grid[-1] = probe[-1]
    return np.unique(grid)


def curvature_weight(values, step, rel_floor=1e-12):
    """Equidistribution weight |d2 values|^(1/3) with a relative floor.

    The cube-root of the second difference is the classical weight that
    minimizes composite-trapezoid error for a fixed node budget. The floor
    keeps a trickle of nodes in flat regions.
    """
    d2 = np.empty_like(values)
    d2[1:-1] = np.abs(values[2:] - 2.0 * values[1:-1] + values[:-2]) / step**2
    d2[0] = d2[1]
    d2[-1] = d2[-2]
    top = d2.max()
    if top <= 0.0:
        return np.ones_like(values)
    return np.maximum(d2, rel_floor * top) ** (1.0 / 3.0)


def simpson_ratio(numerator, denominator, grid):
    """Ratio of two Simpson integrals on a shared (possibly irregular) grid.

    Sharing the grid makes any common normalization factor cancel exactly,
    which is what makes density-weighted averages accurate even when the
    stored density is normalized by the cruder trapezoid rule.
    """
    num = simpson(numerator, x=grid)
    den = simpson(denominator, x=grid)
    return num / den


def reflect_fold(values, lower=None, upper=None):
    """Mirror (Skorokhod) reflection of values into the declared interval.

    Handles multiple boundary crossings in one call: the two-sided case folds
    through the triangle wave of period twice the interval length, which is
    the exact result of repeated mirror reflections.
    """
    if lower is None and upper is None:
        return values
    if lower is not None and upper is None:
        return lower + np.abs(values - lower)
    if lower is None and upper is not None:
        return upper - np.abs(upper - values)
    span = upper - lower
    z = np.mod(values - lower, 2.0 * span)
    return lower + span - np.abs(z - span)


def fit_exponential_decay(times, values, value_ceiling=None, value_floor=1e-12):
    """Least squares of log(values) against times.

    Returns (amplitude, rate, r_squared) for the model A * exp(-rate * t).
    Points outside (value_floor, value_ceiling) are dropped before fitting;
    the ceiling selects the tail region of a decay curve.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    keep = v > value_floor
    if value_ceiling is not None:
        keep &= v < value_ceiling
    t, v = t[keep], v[keep]
    if t.size < 2:
        raise FitError("need at least two points inside the fit window")
    slope, intercept = np.polyfit(t, np.log(v), 1)
    resid = np.log(v) - (slope * t + intercept)
    total = np.log(v) - np.mean(np.log(v))
    denom = float(np.dot(total, total))
    r2 = 1.0 if denom == 0.0 else 1.0 - float(np.dot(resid, resid)) / denom
    return float(np.exp(intercept)), float(-slope), r2


def fit_power_law(deltas, values):
    """Least squares of log(values) against log(deltas).

    Returns (constant, exponent, r_squared) for the model C * delta**exponent.
    """
    d = np.asarray(deltas, dtype=float)
    v = np.asarray(values, dtype=float)
    keep = (d > 0.0) & (v > 0.0)
    d, v = d[keep], v[keep]
    if d.size < 2:
        raise FitError("need at least two positive (delta, value) pairs")
    slope, intercept = np.polyfit(np.log(d), np.log(v), 1)
    resid = np.log(v) - (slope * np.log(d) + intercept)
    total = np.log(v) - np.mean(np.log(v))
    denom = float(np.dot(total, total))
    r2 = 1.0 if denom == 0.0 else 1.0 - float(np.dot(resid, resid)) / denom
    return float(np.exp(intercept)), float(slope), r2


def extrapolate_to_zero(deltas, values):
    """Polynomial extrapolation of (deltas, values) to delta = 0.

    Lagrange interpolation through the last three points (or fewer when
    fewer are supplied), evaluated at zero. Richardson-style: exact for
    data polynomial in delta of matching degree.
    """
    d = np.asarray(deltas, dtype=float)[-3:]
    v = np.asarray(values, dtype=float)[-3:]
    if d.size == 1:
        return float(v[0])
    out = 0.0
    for i in range(d.size):
        term = v[i]
        for j in range(d.size):
            if j != i:
                term *= (0.0 - d[j]) / (d[i] - d[j])
        out += term
    return float(out)


def union_grid(*grids):
    """Sorted union of several 1-D grids."""
    return np.unique(np.concatenate([np.asarray(g, dtype=float) for g in grids]))


def abs_linear_integral(left, right, widths):
    """Exact integral of |v| for v piecewise linear with nodal values given.

    ``left`` and ``right`` are the values at the two ends of each cell and
    ``widths`` the cell lengths. Unlike the plain trapezoid rule this stays
    exact across sign changes, so integrals of |p - q| inherit the triangle
    inequality of the underlying functions up to roundoff.
    """
    a = np.asarray(left, dtype=float)
    b = np.asarray(right, dtype=float)
    h = np.asarray(widths, dtype=float)
    same = a * b >= 0.0
    denom = np.abs(a) + np.abs(b)
    cross = np.divide(a * a + b * b, 2.0 * denom, out=np.zeros_like(denom), where=denom > 0.0)
    per_cell = np.where(same, 0.5 * (np.abs(a) + np.abs(b)), cross)
    return float(np.sum(per_cell * h))


def trapezoid_integral(values, grid):
    return float(trapezoid(values, grid))
