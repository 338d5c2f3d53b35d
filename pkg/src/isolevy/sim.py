"""Pathwise construction of horizontal Lévy processes by interlacing.

Jumps shorter than ``epsilon`` are dropped; the remaining jumps arrive as a
Poisson process of rate ``nu_rad([epsilon, inf))``.  Between consecutive
events (jump arrivals and requested observation times) the Brownian part is
advanced by equal geodesic random-walk substeps of length at most ``h_max``.
A jump ``x`` moves the frame by the time-one horizontal flow of ``H_x``, i.e.
along a geodesic with the basis parallel transported, so jumps carry no
discretisation error.

The engine is vectorised over a batch of paths and consumes its generator in
a fixed order (full-batch draws every iteration), which keeps results
reproducible and lets callers reuse random numbers across runs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geom import Manifold, OrthonormalFrame
from .levy import LevyCharacteristics, sample_jump, truncate

ENDPOINT = "endpoint"
ALL_EVENTS = "all"

START, BROWNIAN, JUMP, OBSERVE = "start", "brownian", "jump", "observe"


@dataclass(frozen=True)
class Grid:
    """Record the state at multiples of ``dt`` (and at ``t_end``)."""

    dt: float

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("grid step must be positive")


@dataclass(frozen=True)
class SimConfig:
    manifold: Manifold
    characteristics: LevyCharacteristics
    epsilon: float
    h_max: float
    t_end: float
    record: object = ENDPOINT

    def __post_init__(self):
        for name in ("epsilon", "h_max", "t_end"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if self.characteristics.dim != self.manifold.dim:
            raise ValueError("characteristics and manifold dimensions differ")
        if not (self.record in (ENDPOINT, ALL_EVENTS) or isinstance(self.record, Grid)):
            raise ValueError(f"unknown record mode {self.record!r}")

    def with_time(self, t_end: float) -> SimConfig:
        return SimConfig(self.manifold, self.characteristics, self.epsilon, self.h_max, t_end, self.record)

    def with_h_max(self, h_max: float) -> SimConfig:
        return SimConfig(self.manifold, self.characteristics, self.epsilon, h_max, self.t_end, self.record)

    @property
    def jump_rate(self) -> float:
        nu = self.characteristics.jumps
        return 0.0 if nu.is_empty else truncate(nu, self.epsilon).total_rate

    def small_jump_bias_bound(self) -> float:
        """``int_{r < epsilon} r^2 nu_rad(dr)``: the mass of dropped jumps."""
        return float(self.characteristics.jumps.small_jump_moment(self.epsilon))


@dataclass
class BatchResult:
    frames: OrthonormalFrame
    stop_times: np.ndarray
    stops: list[OrthonormalFrame]
    n_jumps: np.ndarray
    n_steps: np.ndarray


@dataclass(frozen=True)
class PathSample:
    times: np.ndarray
    frames: OrthonormalFrame
    events: tuple[str, ...]
    n_jumps: int = 0
    n_steps: int = 0


class _Noise:
    """Full-batch draws; in antithetic mode the second half mirrors the first."""

    def __init__(self, rng, n, antithetic):
        if antithetic and n % 2:
            raise ValueError("antithetic batches need an even number of paths")
        self.rng, self.n, self.anti = rng, n, antithetic
        self.half = n // 2 if antithetic else n

    def _mirror(self, x, negate):
        if not self.anti:
            return x
        return np.concatenate([x, -x if negate else x])

    def normal(self, d):
        return self._mirror(self.rng.standard_normal((self.half, d)), True)

    def exponential(self):
        return self._mirror(self.rng.standard_exponential(self.half), False)

    def jumps(self, tm, d):
        return self._mirror(sample_jump(tm, d, self.rng, self.half), True)


def _stop_schedule(cfg: SimConfig, stop_times) -> np.ndarray:
    times = set()
    if isinstance(cfg.record, Grid):
        k = 1
        while k * cfg.record.dt < cfg.t_end * (1 - 1e-12):
            times.add(k * cfg.record.dt)
            k += 1
    for s in stop_times or ():
        if not 0 < s <= cfg.t_end:
            raise ValueError(f"stop time {s} outside (0, t_end]")
        times.add(float(s))
    times.add(float(cfg.t_end))
    return np.array(sorted(times))


def simulate_batch(
    cfg: SimConfig,
    frames0: OrthonormalFrame,
    rng: np.random.Generator,
    *,
    stop_times=None,
    antithetic: bool = False,
    recorder: Callable | None = None,
) -> BatchResult:
    """Advance a batch of frames from time 0 to ``cfg.t_end``.

    ``recorder(tag, idx, t, frames)`` is called for every substep and jump
    with the indices of the paths concerned.  States at ``stop_times`` (and
    at grid times when ``cfg.record`` is a :class:`Grid`) are returned in
    ``BatchResult.stops``.
    """
    m = cfg.manifold
    d = m.dim
    a = cfg.characteristics.a
    n = len(frames0)
    base = np.array(frames0.base, dtype=float)
    basis = np.array(frames0.basis, dtype=float)
    noise = _Noise(rng, n, antithetic)

    nu = cfg.characteristics.jumps
    tm = None if nu.is_empty else truncate(nu, cfg.epsilon)
    rate = 0.0 if tm is None else tm.total_rate

    stops = _stop_schedule(cfg, stop_times)
    stop_base = [None] * len(stops)
    stop_basis = [None] * len(stops)
    for j in range(len(stops)):
        stop_base[j] = np.empty_like(base)
        stop_basis[j] = np.empty_like(basis)

    t = np.zeros(n)
    stop_idx = np.zeros(n, dtype=int)
    arrival = noise.exponential() / rate if rate > 0 else np.full(n, np.inf)
    n_jumps = np.zeros(n, dtype=int)
    n_steps = np.zeros(n, dtype=int)
    done = np.zeros(n, dtype=bool)

    seg_end = np.empty(n)
    seg_jump = np.empty(n, dtype=bool)
    seg_dt = np.empty(n)
    seg_left = np.empty(n, dtype=int)

    def start_segments(idx):
        nxt = stops[stop_idx[idx]]
        jump = arrival[idx] < nxt
        end = np.where(jump, arrival[idx], nxt)
        length = end - t[idx]
        steps = np.maximum(1, np.ceil(length / cfg.h_max * (1 - 1e-12)).astype(int))
        seg_end[idx], seg_jump[idx] = end, jump
        seg_dt[idx], seg_left[idx] = length / steps, steps

    start_segments(np.arange(n))

    while not done.all():
        idx = np.flatnonzero(~done)
        full = len(idx) == n
        if a > 0:
            z = noise.normal(d)
            # each path draws its own row, active or not, so streams stay aligned
            x = z[idx] * np.sqrt(a * seg_dt[idx])[:, None]
            if full:
                base, basis = m._flow(base, basis, x)
            else:
                base[idx], basis[idx] = m._flow(base[idx], basis[idx], x)
            seg_left[idx] -= 1
            n_steps[idx] += 1
            t[idx] = seg_end[idx] - seg_left[idx] * seg_dt[idx]
        else:
            seg_left[idx] = 0
            t[idx] = seg_end[idx]

        reached = idx[seg_left[idx] == 0]
        jumpers = reached[seg_jump[reached]]
        observers = reached[~seg_jump[reached]]
        if recorder is not None and a > 0:
            recorder(BROWNIAN, idx, t[idx], OrthonormalFrame(base[idx], basis[idx]))

        if len(jumpers):
            jx = noise.jumps(tm, d)
            base[jumpers], basis[jumpers] = m._flow(base[jumpers], basis[jumpers], jx[jumpers])
            n_jumps[jumpers] += 1
            arrival[jumpers] = seg_end[jumpers] + noise.exponential()[jumpers] / rate
            if recorder is not None:
                recorder(JUMP, jumpers, t[jumpers], OrthonormalFrame(base[jumpers], basis[jumpers]))

        if len(observers):
            if recorder is not None and a == 0:
                recorder(OBSERVE, observers, t[observers],
                         OrthonormalFrame(base[observers], basis[observers]))
            for j in np.unique(stop_idx[observers]):
                rows = observers[stop_idx[observers] == j]
                stop_base[j][rows] = base[rows]
                stop_basis[j][rows] = basis[rows]
            stop_idx[observers] += 1
            done[observers] = stop_idx[observers] >= len(stops)

        restart = reached[~done[reached]]
        if len(restart):
            start_segments(restart)

    frames_at_stops = [OrthonormalFrame(b, bb) for b, bb in zip(stop_base, stop_basis)]
    return BatchResult(OrthonormalFrame(base, basis), stops, frames_at_stops, n_jumps, n_steps)


class _PathRecorder:
    def __init__(self):
        self.chunks: list[tuple] = []

    def __call__(self, tag, idx, t, frames):
        if len(idx):
            self.chunks.append((tag, idx, t, np.array(frames.base), np.array(frames.basis)))


def simulate_path(r0: OrthonormalFrame, cfg: SimConfig, rng: np.random.Generator) -> PathSample:
    """Simulate one path of the horizontal process started at the frame ``r0``."""
    frames0 = OrthonormalFrame(np.asarray(r0.base, float)[None], np.asarray(r0.basis, float)[None])
    return simulate_paths(frames0, cfg, rng)[0]


def simulate_paths(frames0: OrthonormalFrame, cfg: SimConfig, rng: np.random.Generator) -> list[PathSample]:
    """Simulate a batch of paths and return one :class:`PathSample` each,
    recorded according to ``cfg.record``."""
    n = len(frames0)
    rec = _PathRecorder() if cfg.record == ALL_EVENTS else None
    res = simulate_batch(cfg, frames0, rng, recorder=rec)
    start = (np.arange(n), np.zeros(n), np.asarray(frames0.base, float), np.asarray(frames0.basis, float))
    tags = [np.full(n, START, dtype=object)]
    cols = [start]
    if rec is not None:
        for tag, idx, t, base, basis in rec.chunks:
            tags.append(np.full(len(idx), tag, dtype=object))
            cols.append((idx, t, base, basis))
    else:
        for s, fr in zip(res.stop_times, res.stops):
            tags.append(np.full(n, OBSERVE, dtype=object))
            cols.append((np.arange(n), np.full(n, s), fr.base, fr.basis))
    pid = np.concatenate([c[0] for c in cols])
    # chunks arrive in time order per path, so a stable sort by path id suffices
    order = np.argsort(pid, kind="stable")
    pid = pid[order]
    times = np.concatenate([c[1] for c in cols])[order]
    bases = np.concatenate([c[2] for c in cols])[order]
    bases_b = np.concatenate([c[3] for c in cols])[order]
    events = np.concatenate(tags)[order]
    cuts = np.searchsorted(pid, np.arange(n + 1))
    paths = []
    for i in range(n):
        sl = slice(cuts[i], cuts[i + 1])
        paths.append(PathSample(times[sl].copy(), OrthonormalFrame(bases[sl], bases_b[sl]),
                                tuple(events[sl]), int(res.n_jumps[i]), int(res.n_steps[i])))
    return paths


def brownian_step(m: Manifold, r: OrthonormalFrame, a: float, dt: float,
                  rng: np.random.Generator) -> OrthonormalFrame:
    """One geodesic random-walk step: ``x ~ N(0, a dt I)`` in frame coordinates,
    then the horizontal flow of ``H_x``."""
    if not (a > 0 and dt > 0):
        raise ValueError("brownian_step needs a > 0 and dt > 0")
    base = np.asarray(r.base, float)
    x = rng.standard_normal(base.shape[:-1] + (m.dim,)) * math.sqrt(a * dt)
    return m.horizontal_flow(r, x)


def small_jump_bias_bound(cfg: SimConfig) -> float:
    return cfg.small_jump_bias_bound()


def project(path: PathSample) -> np.ndarray:
    """Base-manifold points of a path, one per recorded time."""
    return np.asarray(path.frames.base).copy()


def write_paths_csv(fh, paths: list[PathSample], include_start: bool = True) -> None:
    """Write rows ``path_id, t, event, x0, ...`` with 17 significant digits.

    With ``include_start=False`` the initial row of each path is omitted
    (endpoint-only dumps then have one row per path).
    """
    writer = csv.writer(fh, lineterminator="\n")
    ncoord = paths[0].frames.base.shape[-1] if paths else 0
    writer.writerow(["path_id", "t", "event"] + [f"x{j}" for j in range(ncoord)])
    for pid, path in enumerate(paths):
        for t, ev, x in zip(path.times, path.events, path.frames.base):
            if ev == START and not include_start:
                continue
            writer.writerow([pid, f"{t:.17g}", ev] + [f"{v:.17g}" for v in x])
