"""Euler-Maruyama integration of coupled, frozen, and averaged equations.

Discretization
--------------
Coupled runs advance both states on a single uniform fast grid of step
h = dt / ceil(dt / (epsilon * fast_substep)), so h never exceeds
epsilon * fast_substep and an integer number of fast steps tiles each slow
step dt. States are pushed back into their domains by mirror reflection
after every step. Frozen runs integrate the fast equation alone at unit
time scale; averaged runs step the one-dimensional averaged equation
directly on the dt grid.

Randomness
----------
Every path owns counter-based streams keyed by
(seed, path index, equation tag, variant) through Philox. The key layout
makes ensembles reproducible bit for bit regardless of chunking or worker
count, and lets an averaged run replay exactly the slow-equation Gaussian
increments that a coupled run consumed (``paired=True``), which is what
makes pathwise comparisons of the two equations meaningful.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .errors import BlowUpError, ConfigError
from .models import ModelSpec

EQ_SLOW = 0
EQ_FAST = 1
EQ_AVG = 2

_STORE_MODES = ("terminal", "full", "strided")

# dt may not exceed this multiple of epsilon in coupled runs; larger ratios
# mean the caller is silently under-resolving the fast equation.
_STIFFNESS_GUARD = 0.1


def path_stream(seed, path_index, equation_tag, variant=0):
    """Counter-based generator for one (path, equation) pair."""
    ss = np.random.SeedSequence(entropy=(seed, path_index, equation_tag, variant))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class SimConfig:
    """Ensemble configuration shared by all simulators.

    Attributes
    ----------
    epsilon : float
        Time-scale separation; must be positive.
    dt : float
        Slow storage/reporting step. Coupled runs refine it internally.
    horizon : float
        Final time T; must exceed dt.
    n_paths : int
        Ensemble size.
    seed : int
        Root of every stream key.
    store : str
        ``terminal`` keeps only t = T, ``full`` keeps every slow step,
        ``strided`` keeps every ``stride``-th slow step plus the endpoint.
    x0, y0 : float
        Deterministic initial states.
    fast_substep : float
        Fast-grid calibration h0: coupled runs use h <= epsilon * h0,
        frozen runs h <= h0.
    chunk_size : int
        Paths integrated per vectorized block; affects memory only, never
        results.
    """

    epsilon: float
    dt: float
    horizon: float
    n_paths: int
    seed: int
    store: str = "terminal"
    stride: int = 1
    x0: float = 0.5
    y0: float = 1.0
    fast_substep: float = 1e-2
    chunk_size: int = 1024

    def __post_init__(self):
        if self.epsilon <= 0.0:
            raise ConfigError("epsilon must be positive")
        if self.dt <= 0.0:
            raise ConfigError("dt must be positive")
        if not self.dt < self.horizon:
            raise ConfigError("dt must be smaller than horizon")
        if self.n_paths < 1:
            raise ConfigError("n_paths must be at least 1")
        if self.store not in _STORE_MODES:
            raise ConfigError(f"store must be one of {_STORE_MODES}")
        if self.store == "strided" and self.stride < 1:
            raise ConfigError("stride must be at least 1")
        if self.fast_substep <= 0.0:
            raise ConfigError("fast_substep must be positive")
        if self.chunk_size < 1:
            raise ConfigError("chunk_size must be at least 1")

    def n_slow_steps(self):
        n = int(round(self.horizon / self.dt))
        if abs(n * self.dt - self.horizon) > 1e-9 * max(1.0, self.horizon):
            raise ConfigError("horizon must be an integer multiple of dt")
        return n

    def stored_indices(self):
        n = self.n_slow_steps()
        if self.store == "terminal":
            return np.array([n])
        if self.store == "full":
            return np.arange(n + 1)
        idx = np.arange(0, n + 1, self.stride)
        if idx[-1] != n:
            idx = np.append(idx, n)
        return idx


@dataclass(frozen=True)
class PathSample:
    """One stored trajectory on the slow grid."""

    times: np.ndarray
    slow: np.ndarray
    fast: np.ndarray | None
    stream_id: int


@dataclass(frozen=True)
class Ensemble:
    """Stored states of many paths on the slow grid.

    ``slow`` and ``fast`` have shape (n_paths, n_stored); ``fast`` is None
    for averaged runs. ``stream_ids`` records the path index behind each
    row's random streams.
    """

    model: str
    kind: str
    config: SimConfig
    times: np.ndarray
    slow: np.ndarray
    fast: np.ndarray | None
    stream_ids: np.ndarray

    @property
    def n_paths(self):
        return self.slow.shape[0]

    def path(self, i):
        return PathSample(
            times=self.times,
            slow=self.slow[i],
            fast=None if self.fast is None else self.fast[i],
            stream_id=int(self.stream_ids[i]),
        )

    def terminal_slow(self):
        return self.slow[:, -1]

    def terminal_fast(self):
        if self.fast is None:
            raise ConfigError("averaged ensembles store no fast states")
        return self.fast[:, -1]

    def to_csv(self, path):
        """Write one row per stored state: path id, time, slow, fast."""
        cols = "path,t,x" + (",y" if self.fast is not None else "")
        with open(path, "w") as fh:
            fh.write(cols + "\n")
            for i in range(self.n_paths):
                for j, t in enumerate(self.times):
                    row = f"{int(self.stream_ids[i])},{float(t)!r},{float(self.slow[i, j])!r}"
                    if self.fast is not None:
                        row += f",{float(self.fast[i, j])!r}"
                    fh.write(row + "\n")

    def to_npz(self, path):
        """Flat binary layout: arrays plus a JSON header string."""
        header = json.dumps(
            {"model": self.model, "kind": self.kind, "config": asdict(self.config)},
            sort_keys=True,
        )
        arrays = {
            "header": np.frombuffer(header.encode(), dtype=np.uint8),
            "times": self.times,
            "slow": self.slow,
            "stream_ids": self.stream_ids,
        }
        if self.fast is not None:
            arrays["fast"] = self.fast
        np.savez(path, **arrays)


def _chunk_ranges(n_paths, chunk_size):
    starts = range(0, n_paths, chunk_size)
    return [(s, min(s + chunk_size, n_paths)) for s in starts]


def _run_chunks(worker, n_paths, chunk_size, workers):
    ranges = _chunk_ranges(n_paths, chunk_size)
    if workers <= 1 or len(ranges) == 1:
        return [worker(p0, p1) for p0, p1 in ranges]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda r: worker(*r), ranges))


def _draw_rows(seed, p0, p1, tag, variant, n_draws):
    out = np.empty((p1 - p0, n_draws))
    for i, p in enumerate(range(p0, p1)):
        out[i] = path_stream(seed, p, tag, variant).standard_normal(n_draws)
    return out


def _check_finite(x, step, p0):
    if np.all(np.isfinite(x)):
        return
    bad = int(np.flatnonzero(~np.isfinite(x))[0])
    raise BlowUpError(
        f"path {p0 + bad} became non-finite at fast step {step}",
        path_index=p0 + bad,
        step=step,
    )


def simulate_coupled(model: ModelSpec, config: SimConfig, workers=1) -> Ensemble:
    """Integrate the coupled pair for every path in the ensemble.

    Both states advance on the shared fast grid; slow states are recorded
    on the dt grid according to ``config.store``. Raises ConfigError when
    dt / epsilon exceeds the stiffness guard, and BlowUpError naming the
    path and step if any state leaves the representable range.
    """
    if config.dt / config.epsilon > _STIFFNESS_GUARD + 1e-12:
        raise ConfigError(
            f"dt/epsilon = {config.dt / config.epsilon:.3g} exceeds the "
            f"stiffness guard {_STIFFNESS_GUARD}; reduce dt for this epsilon"
        )
    if not np.all(model.slow_domain.contains(config.x0)):
        raise ConfigError("x0 outside the slow domain")
    if not np.all(model.fast_domain.contains(config.y0)):
        raise ConfigError("y0 outside the fast domain")

    n_slow = config.n_slow_steps()
    n_sub = max(1, int(np.ceil(config.dt / (config.epsilon * config.fast_substep) - 1e-12)))
    h = config.dt / n_sub
    n_fast = n_slow * n_sub
    sqrt_h = np.sqrt(h)
    inv_eps = 1.0 / config.epsilon
    sqrt_inv_eps = 1.0 / np.sqrt(config.epsilon)
    stored = config.stored_indices()
    store_set = {int(j) * n_sub: k for k, j in enumerate(stored)}

    c = model.coefficients
    slow_out = np.empty((config.n_paths, stored.size))
    fast_out = np.empty((config.n_paths, stored.size))

    def worker(p0, p1):
        xi = _draw_rows(config.seed, p0, p1, EQ_SLOW, 0, n_fast)
        eta = _draw_rows(config.seed, p0, p1, EQ_FAST, 0, n_fast)
        x = np.full(p1 - p0, float(config.x0))
        y = np.full(p1 - p0, float(config.y0))
        if 0 in store_set:
            slow_out[p0:p1, store_set[0]] = x
            fast_out[p0:p1, store_set[0]] = y
        for k in range(n_fast):
            b = c.b(x, y)
            s = c.sigma(x, y)
            f = c.f(x, y)
            g = c.g(x, y)
            x = x + b * h + s * (sqrt_h * xi[:, k])
            y = y + f * (h * inv_eps) + g * (sqrt_h * sqrt_inv_eps * eta[:, k])
            x = model.slow_domain.reflect(x)
            y = model.fast_domain.reflect(y)
            _check_finite(x, k + 1, p0)
            _check_finite(y, k + 1, p0)
            idx = store_set.get(k + 1)
            if idx is not None:
                slow_out[p0:p1, idx] = x
                fast_out[p0:p1, idx] = y
        return p0

    _run_chunks(worker, config.n_paths, config.chunk_size, workers)
    return Ensemble(
        model=model.name,
        kind="coupled",
        config=config,
        times=stored * config.dt,
        slow=slow_out,
        fast=fast_out,
        stream_ids=np.arange(config.n_paths),
    )


def simulate_frozen(model: ModelSpec, x, config: SimConfig, workers=1) -> Ensemble:
    """Integrate the frozen fast equation dY = f(x, Y) dt + g(x, Y) dB.

    The slow coordinate is pinned at ``x`` and the fast equation runs at
    unit time scale (epsilon plays no role). Stored rows keep the constant
    slow coordinate alongside the fast states for a uniform layout.
    """
    if not np.all(model.slow_domain.contains(x)):
        raise ConfigError("frozen slow coordinate outside the slow domain")
    if not np.all(model.fast_domain.contains(config.y0)):
        raise ConfigError("y0 outside the fast domain")

    n_slow = config.n_slow_steps()
    n_sub = max(1, int(np.ceil(config.dt / config.fast_substep - 1e-12)))
    h = config.dt / n_sub
    n_fast = n_slow * n_sub
    sqrt_h = np.sqrt(h)
    stored = config.stored_indices()
    store_set = {int(j) * n_sub: k for k, j in enumerate(stored)}

    c = model.coefficients
    fast_out = np.empty((config.n_paths, stored.size))
    xval = float(x)

    def worker(p0, p1):
        eta = _draw_rows(config.seed, p0, p1, EQ_FAST, 0, n_fast)
        y = np.full(p1 - p0, float(config.y0))
        xs = np.full(p1 - p0, xval)
        if 0 in store_set:
            fast_out[p0:p1, store_set[0]] = y
        for k in range(n_fast):
            f = c.f(xs, y)
            g = c.g(xs, y)
            y = y + f * h + g * (sqrt_h * eta[:, k])
            y = model.fast_domain.reflect(y)
            _check_finite(y, k + 1, p0)
            idx = store_set.get(k + 1)
            if idx is not None:
                fast_out[p0:p1, idx] = y
        return p0

    _run_chunks(worker, config.n_paths, config.chunk_size, workers)
    times = stored * config.dt
    return Ensemble(
        model=model.name,
        kind="frozen",
        config=config,
        times=times,
        slow=np.full((config.n_paths, stored.size), xval),
        fast=fast_out,
        stream_ids=np.arange(config.n_paths),
    )


def frozen_pair_gap(model: ModelSpec, x, config: SimConfig, y0_other, workers=1):
    """Gap |Y - Y'| of two synchronously coupled frozen trajectories.

    Both copies start from ``config.y0`` and ``y0_other`` and consume the
    same Brownian increments, so the gap decays at the coupling rate of the
    frozen equation. Returns (times, gaps) with gaps of shape
    (n_paths, n_stored) on the grid selected by ``config.store``.
    """
    if not np.all(model.slow_domain.contains(x)):
        raise ConfigError("frozen slow coordinate outside the slow domain")
    for y0 in (config.y0, y0_other):
        if not np.all(model.fast_domain.contains(y0)):
            raise ConfigError("initial fast state outside the fast domain")

    n_slow = config.n_slow_steps()
    n_sub = max(1, int(np.ceil(config.dt / config.fast_substep - 1e-12)))
    h = config.dt / n_sub
    n_fast = n_slow * n_sub
    sqrt_h = np.sqrt(h)
    stored = config.stored_indices()
    store_set = {int(j) * n_sub: k for k, j in enumerate(stored)}

    c = model.coefficients
    gap_out = np.empty((config.n_paths, stored.size))
    xval = float(x)

    def worker(p0, p1):
        eta = _draw_rows(config.seed, p0, p1, EQ_FAST, 0, n_fast)
        ya = np.full(p1 - p0, float(config.y0))
        yb = np.full(p1 - p0, float(y0_other))
        xs = np.full(p1 - p0, xval)
        if 0 in store_set:
            gap_out[p0:p1, store_set[0]] = np.abs(ya - yb)
        for k in range(n_fast):
            dw = sqrt_h * eta[:, k]
            ya = ya + c.f(xs, ya) * h + c.g(xs, ya) * dw
            yb = yb + c.f(xs, yb) * h + c.g(xs, yb) * dw
            ya = model.fast_domain.reflect(ya)
            yb = model.fast_domain.reflect(yb)
            _check_finite(ya, k + 1, p0)
            _check_finite(yb, k + 1, p0)
            idx = store_set.get(k + 1)
            if idx is not None:
                gap_out[p0:p1, idx] = np.abs(ya - yb)
        return p0

    _run_chunks(worker, config.n_paths, config.chunk_size, workers)
    return stored * config.dt, gap_out


def simulate_averaged(avg, config: SimConfig, paired=False, variant=0, workers=1) -> Ensemble:
    """Integrate the averaged slow equation dXbar = bbar dt + sigmabar dW.

    Parameters
    ----------
    avg : object
        Anything exposing vectorized ``drift(x)`` and ``sigma(x)`` plus a
        ``slow_domain`` (an AveragedModel, or a ModelSpec-free stub).
    paired : bool
        Replay the slow-equation streams of the coupled run with the same
        config: the Gaussian increments are the fast-grid draws aggregated
        over each dt block, so both runs see the same Brownian path W.
    variant : int
        Sub-seed for independent unpaired copies (noise-floor estimates).
    """
    if paired and variant != 0:
        raise ConfigError("paired runs replay variant 0 of the slow streams")
    n_slow = config.n_slow_steps()
    stored = config.stored_indices()
    store_set = {int(j): k for k, j in enumerate(stored)}
    dt = config.dt
    domain = getattr(avg, "slow_domain", None)

    if paired:
        n_sub = max(1, int(np.ceil(dt / (config.epsilon * config.fast_substep) - 1e-12)))
        sqrt_h = np.sqrt(dt / n_sub)
    else:
        n_sub = 1
        sqrt_h = np.sqrt(dt)

    slow_out = np.empty((config.n_paths, stored.size))

    def worker(p0, p1):
        if paired:
            raw = _draw_rows(config.seed, p0, p1, EQ_SLOW, 0, n_slow * n_sub)
            dw = sqrt_h * raw.reshape(p1 - p0, n_slow, n_sub).sum(axis=2)
        else:
            dw = sqrt_h * _draw_rows(config.seed, p0, p1, EQ_AVG, variant, n_slow)
        x = np.full(p1 - p0, float(config.x0))
        if 0 in store_set:
            slow_out[p0:p1, store_set[0]] = x
        for j in range(n_slow):
            x = x + avg.drift(x) * dt + avg.sigma(x) * dw[:, j]
            if domain is not None:
                x = domain.reflect(x)
            _check_finite(x, j + 1, p0)
            idx = store_set.get(j + 1)
            if idx is not None:
                slow_out[p0:p1, idx] = x
        return p0

    _run_chunks(worker, config.n_paths, config.chunk_size, workers)
    return Ensemble(
        model=getattr(avg, "source", "averaged"),
        kind="averaged",
        config=config,
        times=stored * config.dt,
        slow=slow_out,
        fast=None,
        stream_ids=np.arange(config.n_paths),
    )


def load_npz(path) -> Ensemble:
    """Inverse of Ensemble.to_npz."""
    with np.load(path) as data:
        header = json.loads(bytes(data["header"]).decode())
        fast = data["fast"] if "fast" in data.files else None
        return Ensemble(
            model=header["model"],
            kind=header["kind"],
            config=SimConfig(**header["config"]),
            times=data["times"],
            slow=data["slow"],
            fast=fast,
            stream_ids=data["stream_ids"],
        )
