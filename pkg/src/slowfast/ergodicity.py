"""Ergodicity classification, forward equation, and decay-rate estimates.

Classification uses the classical scale/speed criteria for 1-D diffusions
with scale density s(y) = exp(-Phi_x(y)) and speed density
m(y) = exp(Phi_x(y)) / g(x,y)^2:

* positive recurrence: the speed measure is finite and the scale-times-
  speed recurrence integral diverges toward every open end;
* exponential ergodicity: sup_z M([z, inf)) * int_0^z s stays bounded;
* strong (uniform) ergodicity: int M([y, inf)) s(y) dy converges.

Each criterion is evaluated on a doubling ladder of domains. A criterion
is declared finite when the last doubling adds less than 1e-10, divergent
when the contributions of successive doublings stop decaying (with a
growth cap of 1e6 flagging fast blowups), and inconclusive otherwise.
These thresholds are reported, never silent.

The ladder works with potential differences across single panels rather
than with the potential itself: quantities like s(z) * M([z, inf)) are
ratios of astronomically large and small exponentials whose logs cancel
to garbage at large radii, but they obey local recurrences (exponential-
fitted panels, the same phi-function that underlies the flux scheme
below) in which every term stays moderate.

The forward solver discretizes the Fokker-Planck operator in flux form
with exponentially fitted (Scharfetter-Gummel) edge fluxes built from
exact panel integrals of 2 f / g^2, which makes the discrete stationary
state equal to exp(Phi)/g^2 at the nodes: the continuous-time invariant
density is preserved by construction, not approximately. Time stepping is
Crank-Nicolson with a short backward-Euler startup to damp the ringing a
near-point initial mass would otherwise excite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded
from scipy.special import logsumexp

from .errors import ConfigError, ConservationError, SlowfastError
from .metrics import tv_distance
from .models import FULL_LINE, INTERVAL, ModelSpec
from .numerics import cumulative_gauss, fit_exponential_decay, gauss_panels, log_trapezoid
from .simulate import SimConfig, frozen_pair_gap
from .stationary import Density1D, _log_shape_factory, default_grid, stationary_density

GROWTH_CAP = 1e6
INCREMENT_FLOOR = 1e-10
MAX_DOUBLINGS = 20
_SEGMENT_PANELS = 256
_LOG_CAP = np.log(GROWTH_CAP)
_LOG_FLOOR = np.log(INCREMENT_FLOOR)
# a non-decaying ladder is only called divergent above this increment, so
# a converging tail can never be misread as slow divergence
_LOG_SLOW = np.log(1e-8)

FINITE = "finite"
DIVERGENT = "divergent"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class ErgodicityReport:
    """Three-way verdicts for one frozen slow state.

    Verdicts are True / False / None, None meaning the numerics could not
    decide within the ladder limits. ``integrals`` records each criterion
    integral with its verdict and the probed radius.
    """

    x: float
    ergodic: bool | None
    exp_ergodic: bool | None
    strongly_ergodic: bool | None
    integrals: dict
    fitted_rates: dict | None = None

    @staticmethod
    def _word(v):
        return INCONCLUSIVE if v is None else ("true" if v else "false")

    def as_dict(self):
        return {
            "x": self.x,
            "ergodic": self._word(self.ergodic),
            "exp_ergodic": self._word(self.exp_ergodic),
            "strongly_ergodic": self._word(self.strongly_ergodic),
            "integrals": self.integrals,
            "fitted_rates": self.fitted_rates,
        }


@dataclass(frozen=True)
class DecayCurve:
    """Distance to stationarity over time with an exponential fit."""

    times: np.ndarray
    values: np.ndarray
    fit: dict

    def as_dict(self):
        return {
            "times": [float(t) for t in self.times],
            "values": [float(v) for v in self.values],
            "fit": self.fit,
        }

    def to_csv(self, path=None):
        text = "t,value\n" + "".join(
            f"{float(t)!r},{float(v)!r}\n" for t, v in zip(self.times, self.values)
        )
        if path is None:
            return text
        with open(path, "w") as fh:
            fh.write(text)


def _log_phi1(d):
    """log of (e^d - 1)/d, stable from huge-negative to huge-positive d."""
    d = np.asarray(d, dtype=float)
    out = np.empty_like(d)
    small = np.abs(d) < 1e-8
    neg = d <= -30.0
    pos = d >= 30.0
    mid = ~(small | neg | pos)
    out[small] = 0.5 * d[small]
    out[neg] = -np.log(-d[neg])
    out[pos] = d[pos] - np.log(d[pos])
    out[mid] = np.log(np.expm1(d[mid]) / d[mid])
    return out


def _judge(ladder):
    """(verdict, last log value) for one criterion's doubling ladder.

    lincs[k] is the log of what doubling k added, so diff(lincs) is the
    per-octave log-slope of the increments: a converging tail settles at
    a negative slope, logarithmic divergence at slope 0, divergence like
    z^p at slope p log 2 > 0. Divergence is declared when

    * the value passed the cap while the increments were not decaying, or
    * the slope has stabilized (four consecutive diffs inside a 0.1 band)
      at a level >= -0.05.

    The stability requirement is what keeps the rise toward a distant
    plateau from being misread: such a rise sweeps its slope from large
    positive to large negative and holds no narrow band on the way, while
    a genuinely divergent tail locks onto its limiting slope and stays.
    """
    v = np.asarray(ladder, dtype=float)
    if v.size < 2:
        return INCONCLUSIVE, float(v[-1]) if v.size else -np.inf
    prev, last = v[-2], v[-1]
    if np.isnan(last) or last == np.inf:
        return INCONCLUSIVE, float(last)
    if last <= prev:
        lincs = np.full(v.size - 1, -np.inf)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            lincs = np.where(
                v[1:] > v[:-1],
                v[1:] + np.log1p(-np.exp(np.minimum(v[:-1] - v[1:], -1e-300))),
                -np.inf,
            )
    if lincs[-1] < _LOG_FLOOR:
        return FINITE, float(last)
    diffs = np.diff(lincs)
    if last > _LOG_CAP and diffs.size >= 2 and np.all(diffs[-2:] >= -0.05):
        return DIVERGENT, float(last)
    if diffs.size >= 4 and lincs[-1] > _LOG_SLOW:
        recent = diffs[-4:]
        if np.all(np.isfinite(recent)) and np.ptp(recent) <= 0.1 and np.mean(recent) >= -0.05:
            return DIVERGENT, float(last)
    return INCONCLUSIVE, float(last)


class _DirectionLadder:
    """Doubling ladder of criterion integrals in one escape direction."""

    def __init__(self, model, x, sign):
        self.sign = float(sign)
        self.anchor = model.fast_domain.anchor()
        ratio, log_shape = _log_shape_factory(model, x)
        self._ratio = ratio
        self._log_shape = log_shape
        self.r = np.zeros(1)
        self.delta = np.zeros(0)  # per-panel potential increments along r
        self.loggsq = np.array([self._loggsq_at(np.zeros(1))[0]])
        self.ladders = {"speed_total": [], "scale_recurrence": [], "exponential_sup": [], "strong_tail": []}
        self.verdicts = {}
        self.values = {}
        self.m_settled_at = None
        self.k = 0

    def _y(self, r):
        return self.anchor + self.sign * r

    def _loggsq_at(self, r):
        # log_shape = phi - log g^2, so feeding phi = 0 isolates log g^2
        return -self._log_shape(self._y(r), np.zeros(np.shape(r)))

    def extend(self):
        lo = 0.0 if self.k == 0 else 2.0 ** (self.k - 1)
        hi = 2.0**self.k
        seg = np.linspace(lo, hi, _SEGMENT_PANELS + 1)
        new_delta = self.sign * gauss_panels(lambda r: self._ratio(self._y(r)), seg)
        self.r = np.concatenate([self.r, seg[1:]])
        self.delta = np.concatenate([self.delta, new_delta])
        self.loggsq = np.concatenate([self.loggsq, self._loggsq_at(seg[1:])])
        self.k += 1
        self._record()

    def _record(self):
        r, delta, loggsq = self.r, self.delta, self.loggsq
        h = np.diff(r)
        logh = np.log(h)
        gsq_edge = 0.5 * (loggsq[:-1] + loggsq[1:])
        phi = np.concatenate([[0.0], np.cumsum(delta)])

        # total speed mass: sum of exponential-fitted panel masses
        log_m_panels = phi[:-1] + logh + _log_phi1(delta) - gsq_edge
        self._put("speed_total", logsumexp(log_m_panels))

        # forward recurrences relative to the running node: every term is a
        # potential difference across one panel, never the raw potential
        n = r.size
        mcum = np.full(n, -np.inf)  # s(z) * M([0, z])
        scum = np.full(n, -np.inf)  # e^{phi(z)} * int_0^z s
        for i in range(n - 1):
            d = delta[i]
            mcum[i + 1] = np.logaddexp(mcum[i] - d, logh[i] + _log_phi1(-d) - gsq_edge[i])
            scum[i + 1] = np.logaddexp(scum[i] + d, logh[i] + _log_phi1(d))
        mtail = np.full(n, -np.inf)  # s(z) * M([z, end])
        for i in range(n - 2, -1, -1):
            d = delta[i]
            mtail[i] = np.logaddexp(logh[i] + _log_phi1(d) - gsq_edge[i], d + mtail[i + 1])

        self._put("scale_recurrence", log_trapezoid(mcum, r))
        self._put("exponential_sup", float(np.max(mtail + scum)))
        self._put("strong_tail", log_trapezoid(mtail, r))

        for name in ("speed_total", "scale_recurrence"):
            if name not in self.verdicts:
                verdict, value = _judge(self.ladders[name])
                if verdict != INCONCLUSIVE:
                    self.verdicts[name] = verdict
                    self.values[name] = value
                    if name == "speed_total":
                        self.m_settled_at = self.k
        # tail-dependent criteria wait two extra doublings after the speed
        # mass settles, so M([z, end]) is a trusted stand-in for M([z, inf))
        tails_ready = (
            self.m_settled_at is not None
            and self.verdicts.get("speed_total") == FINITE
            and self.k >= self.m_settled_at + 2
        )
        for name in ("exponential_sup", "strong_tail"):
            if name not in self.verdicts:
                verdict, value = _judge(self.ladders[name])
                if verdict == DIVERGENT or (verdict == FINITE and tails_ready):
                    self.verdicts[name] = verdict
                    self.values[name] = value

    def _put(self, name, value):
        self.ladders[name].append(value)

    def hopeless(self):
        # no point refining tails of a non-recurrent direction
        return self.verdicts.get("speed_total") == DIVERGENT or (
            self.verdicts.get("scale_recurrence") == FINITE
        )

    def done(self):
        return len(self.verdicts) == 4 or self.hopeless()

    def run(self):
        while self.k < MAX_DOUBLINGS and not self.done():
            self.extend()
        out = {}
        for name, ladder in self.ladders.items():
            if name in self.verdicts:
                out[name] = (self.verdicts[name], self.values[name])
            else:
                out[name] = (INCONCLUSIVE, float(ladder[-1]) if ladder else -np.inf)
        return out, 2.0 ** (self.k - 1) if self.k else 0.0


def _combine(per_direction, name, finite_is_good_when="all"):
    """Three-valued AND across directions.

    ``speed_total``, ``exponential_sup``, ``strong_tail``: finite iff finite
    in every direction. ``scale_recurrence``: divergent iff divergent in
    every direction (escape must be blocked on every open end).
    """
    verdicts = [d[name][0] for d in per_direction]
    if name == "scale_recurrence":
        if all(v == DIVERGENT for v in verdicts):
            return DIVERGENT
        if any(v == FINITE for v in verdicts):
            return FINITE
        return INCONCLUSIVE
    if all(v == FINITE for v in verdicts):
        return FINITE
    if any(v == DIVERGENT for v in verdicts):
        return DIVERGENT
    return INCONCLUSIVE


def classify(model: ModelSpec, x, fitted_rates=None) -> ErgodicityReport:
    """Scale/speed-measure ergodicity verdicts for the frozen equation at x.

    Never silently guesses: each verdict is backed by a recorded criterion
    value, and undecidable ladders yield None with the partial value kept
    in ``integrals``.
    """
    if model.dim_fast != 1:
        raise ConfigError("classification handles one-dimensional fast components only")
    dom = model.fast_domain
    xval = float(x)

    if dom.kind == INTERVAL:
        ratio, log_shape = _log_shape_factory(model, xval)
        grid = np.linspace(dom.lower, dom.upper, 4097)
        phi = cumulative_gauss(ratio, grid)
        total = log_trapezoid(log_shape(grid, phi), grid)
        integrals = {
            "speed_total": {"verdict": FINITE, "log_value": float(total), "radius": dom.upper - dom.lower},
            "note": "compact reflecting fast domain: recurrence is automatic and convergence is uniform",
        }
        return ErgodicityReport(
            x=xval, ergodic=True, exp_ergodic=True, strongly_ergodic=True,
            integrals=integrals, fitted_rates=fitted_rates,
        )

    signs = [1.0] if dom.kind != FULL_LINE else [1.0, -1.0]
    per_direction = []
    radii = []
    try:
        for sign in signs:
            result, radius = _DirectionLadder(model, xval, sign).run()
            per_direction.append(result)
            radii.append(radius)
    except SlowfastError as exc:
        integrals = {"note": f"criterion evaluation failed: {exc}"}
        return ErgodicityReport(
            x=xval, ergodic=None, exp_ergodic=None, strongly_ergodic=None,
            integrals=integrals, fitted_rates=fitted_rates,
        )

    combined = {name: _combine(per_direction, name)
                for name in ("speed_total", "scale_recurrence", "exponential_sup", "strong_tail")}

    def tri(verdict, good):
        if verdict == INCONCLUSIVE:
            return None
        return verdict == good

    recurrent = tri(combined["speed_total"], FINITE)
    no_escape = tri(combined["scale_recurrence"], DIVERGENT)
    if recurrent is False or no_escape is False:
        ergodic = False
    elif recurrent and no_escape:
        ergodic = True
    else:
        ergodic = None

    if ergodic is False:
        exp_erg = strong = False
    else:
        exp_erg = tri(combined["exponential_sup"], FINITE)
        strong = tri(combined["strong_tail"], FINITE)
        if ergodic is None:
            exp_erg = None if exp_erg else exp_erg
            strong = None if strong else strong
        elif strong and not exp_erg:
            # Mao's tail criterion is the stronger statement
            exp_erg = True

    integrals = {}
    for i, (sign, result) in enumerate(zip(signs, per_direction)):
        key_suffix = "" if len(signs) == 1 else ("_up" if sign > 0 else "_down")
        for name, (verdict, logv) in result.items():
            integrals[name + key_suffix] = {
                "verdict": verdict,
                "log_value": None if not np.isfinite(logv) else float(logv),
                "value": float(np.exp(logv)) if np.isfinite(logv) and logv < 700.0 else None,
                "radius": float(radii[i]),
            }
    integrals["thresholds"] = {
        "growth_cap": GROWTH_CAP,
        "increment_floor": INCREMENT_FLOOR,
        "max_doublings": MAX_DOUBLINGS,
    }
    return ErgodicityReport(
        x=xval, ergodic=ergodic, exp_ergodic=exp_erg, strongly_ergodic=strong,
        integrals=integrals, fitted_rates=fitted_rates,
    )


def _bernoulli(p):
    """B(p) = p / (e^p - 1), the exponential-fitting flux weight."""
    p = np.asarray(p, dtype=float)
    out = np.empty_like(p)
    small = np.abs(p) < 1e-8
    big = p > 700.0
    mid = ~(small | big)
    out[small] = 1.0 - 0.5 * p[small]
    out[big] = 0.0
    with np.errstate(over="ignore"):
        out[mid] = p[mid] / np.expm1(p[mid])
    return out


def _default_pde_grid(model, x, y0, n_points=2049):
    base = default_grid(model, x)
    lo, hi = base[0], base[-1]
    span = hi - lo
    if y0 is not None:
        lo = min(lo, y0 - 0.05 * span)
        hi = max(hi, y0 + 0.05 * span)
    if model.fast_domain.bounded_below:
        lo = max(lo, model.fast_domain.lower)
    if model.fast_domain.bounded_above:
        hi = min(hi, model.fast_domain.upper)
    return np.linspace(lo, hi, n_points)


class _ForwardSolver:
    """Flux-form finite volumes + Crank-Nicolson for the forward equation."""

    def __init__(self, model, x, grid):
        grid = np.asarray(grid, dtype=float)
        if grid.ndim != 1 or grid.size < 8 or np.any(np.diff(grid) <= 0.0):
            raise ConfigError("pde grid must be strictly increasing with at least 8 nodes")
        if not np.all(model.fast_domain.contains(grid, tol=1e-12)):
            raise ConfigError("pde grid leaves the fast domain")
        self.grid = grid
        c = model.coefficients
        xval = float(x)
        h = np.diff(grid)
        gsq = c.g(np.full(grid.shape, xval), grid) ** 2
        if np.any(gsq <= 0.0):
            raise ConfigError("fast diffusion must be positive on the pde grid")
        dcoef = 0.5 * gsq
        # edge potential drops of the flux variable: d(Phi - log D) per cell
        ratio_int = gauss_panels(lambda y: 2.0 * c.f(np.full(np.shape(y), xval), y) / c.g(np.full(np.shape(y), xval), y) ** 2, grid)
        p = ratio_int - np.diff(np.log(dcoef))
        d_edge = np.sqrt(dcoef[:-1] * dcoef[1:])
        w = d_edge / h
        self.a_edge = w * _bernoulli(-p)  # multiplies the left node
        self.c_edge = w * _bernoulli(p)  # multiplies the right node
        vol = np.empty(grid.size)
        vol[0] = h[0] / 2.0
        vol[-1] = h[-1] / 2.0
        vol[1:-1] = (h[:-1] + h[1:]) / 2.0
        self.vol = vol
        n = grid.size
        self.lower = np.zeros(n)
        self.diag = np.zeros(n)
        self.upper = np.zeros(n)
        self.lower[1:] = self.a_edge / vol[1:]
        self.upper[:-1] = self.c_edge / vol[:-1]
        self.diag[:-1] -= self.a_edge / vol[:-1]
        self.diag[1:] -= self.c_edge / vol[1:]

    def apply(self, u):
        out = self.diag * u
        out[:-1] += self.upper[:-1] * u[1:]
        out[1:] += self.lower[1:] * u[:-1]
        return out

    def _solve(self, scale, rhs):
        n = self.grid.size
        ab = np.zeros((3, n))
        ab[0, 1:] = -scale * self.upper[:-1]
        ab[1] = 1.0 - scale * self.diag
        ab[2, :-1] = -scale * self.lower[1:]
        return solve_banded((1, 1), ab, rhs)

    def initial_mass(self, y0):
        width = 2.0 * np.interp(y0, self.grid, np.gradient(self.grid))
        u = np.exp(-0.5 * ((self.grid - y0) / width) ** 2)
        return u / np.dot(self.vol, u)

    def mass(self, u):
        return float(np.dot(self.vol, u))

    def advance(self, u, duration, startup):
        """March u over a time interval, Rannacher startup when asked."""
        if duration <= 0.0:
            return u
        n_steps = int(max(16, min(8192, np.ceil(duration / 2.5e-3))))
        dt = duration / n_steps
        done = 0
        if startup:
            for _ in range(4):
                u = self._solve(dt / 2.0, u)
            done = 2
        for _ in range(n_steps - done):
            rhs = u + 0.5 * dt * self.apply(u)
            u = self._solve(dt / 2.0, rhs)
        return u


def _density_from_state(grid, u):
    u = np.asarray(u, dtype=float).copy()
    floor = -1e-8 * max(u.max(), 1e-300)
    if u.min() < floor:
        raise ConservationError("forward solution developed significant negative mass")
    np.clip(u, 0.0, None, out=u)
    return Density1D.from_unnormalized(grid, u)


def _pde_snapshots(model, x, y0, times, grid=None):
    """Forward solutions at several times from one march; shared machinery."""
    times = np.asarray(times, dtype=float)
    if times.size == 0 or np.any(times < 0.0) or np.any(np.diff(times) <= 0.0):
        raise ConfigError("snapshot times must be increasing and nonnegative")
    if isinstance(y0, Density1D):
        if grid is None:
            grid = y0.grid
        solver = _ForwardSolver(model, x, grid)
        u = np.clip(y0.interpolate(solver.grid), 0.0, None)
        total = solver.mass(u)
        if total <= 0.0:
            raise ConfigError("initial density has no mass on the pde grid")
        u = u / total
    else:
        y0 = float(y0)
        if grid is None:
            grid = _default_pde_grid(model, x, y0)
        solver = _ForwardSolver(model, x, grid)
        if not solver.grid[0] <= y0 <= solver.grid[-1]:
            raise ConfigError("y0 outside the pde grid")
        u = solver.initial_mass(y0)

    out = []
    prev = 0.0
    started = False
    for t in times:
        if t > prev:
            u = solver.advance(u, t - prev, startup=not started)
            started = True
        prev = t
        if abs(solver.mass(u) - 1.0) > 1e-4:
            raise ConservationError(
                f"mass drifted to {solver.mass(u):.6f} at t = {t:g}; refine the grid"
            )
        out.append(_density_from_state(solver.grid, u))
    return solver.grid, out


def forward_pde_solve(model: ModelSpec, x, y0, t, grid=None) -> Density1D:
    """Law of the frozen fast state at time t from a near-point start.

    ``y0`` may be a float (mollified point mass two cells wide) or a
    Density1D initial condition. With ``grid=None`` a uniform grid over the
    stationary support is used (the initial density's own grid when one is
    given). Stiff requests are sub-stepped internally; mass drift beyond
    1e-4 raises ConservationError.
    """
    _, states = _pde_snapshots(model, x, y0, [float(t)], grid=grid)
    return states[0]


def _flat_fit(values):
    vmax = float(np.max(values)) if len(values) else 0.0
    return {"amplitude": vmax, "rate": 0.0, "r_squared": 0.0}


def tv_decay_curve(model: ModelSpec, x, y0, times, grid=None) -> DecayCurve:
    """Total variation between the forward solution and stationarity.

    The stationary target is tabulated on the solver grid, so the reported
    values measure dynamics rather than cross-grid interpolation. The fit
    window keeps values below 1 (the tail region of the decay).
    """
    times = np.asarray(times, dtype=float)
    pde_grid, states = _pde_snapshots(model, x, y0, times, grid=grid)
    target = stationary_density(model, x, grid=pde_grid)
    values = np.array([tv_distance(state, target) for state in states])
    try:
        amp, rate, r2 = fit_exponential_decay(times, values, value_ceiling=1.0, value_floor=1e-3)
        fit = {"amplitude": amp, "rate": max(rate, 0.0), "r_squared": min(max(r2, 0.0), 1.0)}
    except SlowfastError:
        fit = _flat_fit(values)
    return DecayCurve(times=times, values=values, fit=fit)


def w1_decay_coupling(model: ModelSpec, x, y, y_other, times, n_paths=256, seed=0) -> DecayCurve:
    """Mean gap of synchronously coupled frozen paths started at y and y'.

    The two copies consume identical Brownian increments, so the mean
    |Y_t - Y'_t| decays at the coupling rate; its exponential fit is the
    W1-decay rate estimate (a lower-bound-style, per-initial-pair figure,
    not a certified supremum).
    """
    times = np.asarray(times, dtype=float)
    if times.size == 0 or np.any(times <= 0.0) or np.any(np.diff(times) <= 0.0):
        raise ConfigError("times must be increasing and positive")
    t_max = float(times[-1])
    dt = 0.01
    n = int(np.ceil(t_max / dt - 1e-12))
    cfg = SimConfig(
        epsilon=1.0,
        dt=dt,
        horizon=(n + 1) * dt,
        n_paths=n_paths,
        seed=seed,
        store="strided",
        stride=max(1, (n + 1) // 2048),
        y0=float(y),
        fast_substep=dt,
    )
    t_grid, gaps = frozen_pair_gap(model, x, cfg, float(y_other))
    mean_gap = gaps.mean(axis=0)
    values = np.interp(times, t_grid, mean_gap)
    try:
        amp, rate, r2 = fit_exponential_decay(times, values, value_floor=1e-6)
        fit = {"amplitude": amp, "rate": max(rate, 0.0), "r_squared": min(max(r2, 0.0), 1.0)}
    except SlowfastError:
        fit = _flat_fit(values)
    return DecayCurve(times=times, values=values, fit=fit)
