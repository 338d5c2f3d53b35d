"""Monte Carlo estimators and hypothesis tests against spectral predictions.

Every estimator maps ``(configuration, seed)`` to its result
deterministically.  Paths are simulated in fixed-size chunks, each with its
own generator derived from the seed, a label naming the sample and the chunk
number, so independent samples never share random numbers while repeated runs
with the same seed reuse them exactly.

Tests report a statistic and a threshold and pass iff ``statistic <=
threshold``.  Thresholds are 4 standard errors, Bonferroni-corrected when a
dictionary of observables is tested at once.  Where a systematic error is
known in closed form (dropped small jumps, kernel smoothing) it is subtracted
from the discrepancy before dividing by the standard error.
"""

from __future__ import annotations

import hashlib
import json
import math
import zlib
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .geom import Circle, Manifold, OrthonormalFrame, Sphere2, Torus
from .levy import LevyCharacteristics
from .observables import (BallIndicator, Observable, ZonalObservable, builtin_observables,
                          constant, zonal)
from .quadrature import gauss_legendre
from .sim import SimConfig, simulate_batch
from .spectral import (SpectrumTable, _check_index, build_spectrum, eigenvalue, heat_trace,
                       jump_generator, kernel, legendre)

K_SIGMA = 4.0
CHUNK = 8192  # paths per generator stream; even, so antithetic pairs never straddle chunks
Z99 = 2.576


class DegenerateTestError(RuntimeError):
    """A test with zero standard error but a non-zero discrepancy."""


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("an estimate needs at least two samples")
        if self.stderr < 0:
            raise ValueError("standard error must be non-negative")

    @property
    def ci99(self) -> tuple[float, float]:
        return (self.mean - Z99 * self.stderr, self.mean + Z99 * self.stderr)


@dataclass
class TestReport:
    __test__ = False  # not a pytest class

    name: str
    statistic: float
    threshold: float
    passed: bool
    config_hash: str = ""
    seed: int | None = None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "statistic": _jsonable(self.statistic),
            "threshold": _jsonable(self.threshold),
            "pass": bool(self.passed),
            "config_hash": self.config_hash,
            "seed": self.seed,
            "details": _jsonable(self.details),
        }


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


def _report(name, statistic, threshold, cfg, root, **details) -> TestReport:
    statistic = float(statistic)
    threshold = float(threshold)
    return TestReport(name, statistic, threshold, bool(statistic <= threshold),
                      config_hash(cfg) if cfg is not None else "", _seed_of(root), details)


def bonferroni_threshold(m: int, k: float = K_SIGMA) -> float:
    """Two-sided z threshold keeping the family-wise level of one k-sigma test."""
    if m <= 1:
        return k
    return float(norm.isf(norm.sf(k) / m))


# -- seeding --------------------------------------------------------------------

def _root(rng) -> np.random.SeedSequence:
    if isinstance(rng, np.random.SeedSequence):
        return rng
    if isinstance(rng, np.random.Generator):
        return np.random.SeedSequence(int(rng.integers(0, 2**63)))
    if rng is None:
        rng = 0
    return np.random.SeedSequence(int(rng))


def _seed_of(root) -> int | None:
    if root is None:
        return None
    ent = root.entropy
    return int(ent) if isinstance(ent, (int, np.integer)) else None


def _label(name: str) -> int:
    return zlib.crc32(name.encode())


def chunk_rng(root: np.random.SeedSequence, label: str, chunk: int) -> np.random.Generator:
    ss = np.random.SeedSequence(root.entropy, spawn_key=tuple(root.spawn_key) + (_label(label), chunk))
    return np.random.default_rng(ss)


def config_hash(cfg: SimConfig) -> str:
    m = cfg.manifold
    payload = {
        "manifold": [m.kind, float(m.scale), int(m.dim)],
        "a": float(cfg.characteristics.a),
        "jumps": cfg.characteristics.jumps.to_dict(),
        "epsilon": float(cfg.epsilon),
        "h_max": float(cfg.h_max),
        "t_end": float(cfg.t_end),
    }
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


# -- accumulation ---------------------------------------------------------------

class RunningMoments:
    """Count, mean and centred second moment, mergeable across chunks."""

    def __init__(self):
        self.n, self.mean, self.m2 = 0, 0.0, 0.0

    def add(self, values):
        values = np.asarray(values, dtype=float).ravel()
        if not len(values):
            return
        mean = float(np.mean(values))
        m2 = float(np.sum((values - mean) ** 2))
        self.merge(len(values), mean, m2)

    def merge(self, n, mean, m2):
        if n == 0:
            return
        total = self.n + n
        delta = mean - self.mean
        self.mean += delta * n / total
        self.m2 += m2 + delta * delta * self.n * n / total
        self.n = total

    def estimate(self) -> Estimate:
        var = self.m2 / (self.n - 1) if self.n > 1 else 0.0
        return Estimate(self.mean, math.sqrt(max(var, 0.0) / self.n), self.n)


def _estimate(values) -> Estimate:
    acc = RunningMoments()
    acc.add(values)
    return acc.estimate()


# -- path drivers ---------------------------------------------------------------

def _value(f, points) -> np.ndarray:
    return np.asarray(f(points), dtype=float)


def _start_points(m: Manifold, start, size, rng):
    if isinstance(start, str):
        if start != "uniform":
            raise ValueError(f"unknown start mode {start!r}")
        return m.sample_uniform(rng, size)
    p = m.wrap(np.asarray(start, dtype=float))
    return np.broadcast_to(p, (size,) + p.shape).copy()


def _initial_frames(m: Manifold, pts, frame: str, rng) -> OrthonormalFrame:
    if frame == "canonical":
        return m.canonical_frame(pts)
    if frame == "random":
        return m.random_frame(pts, rng)
    raise ValueError(f"unknown frame mode {frame!r}")


def run_chunks(cfg: SimConfig, root, label: str, n: int, start, *, frame: str = "canonical",
               antithetic: bool = False, stop_times=None):
    """Yield ``(start_points, start_frames, BatchResult)`` per chunk."""
    if antithetic and n % 2:
        raise ValueError("antithetic sampling needs an even number of paths")
    m = cfg.manifold
    for j, lo in enumerate(range(0, n, CHUNK)):
        size = min(CHUNK, n - lo)
        rng = chunk_rng(root, label, j)
        pts = _start_points(m, start, size, rng)
        frames0 = _initial_frames(m, pts, frame, rng)
        yield pts, frames0, simulate_batch(cfg, frames0, rng, stop_times=stop_times, antithetic=antithetic)


def _endpoint_values(cfg, root, label, n, start, fns, **kw):
    """Stack ``fn(start_points, end_points)`` over all chunks for each ``fn``."""
    out = [[] for _ in fns]
    for pts, _, res in run_chunks(cfg, root, label, n, start, **kw):
        for acc, fn in zip(out, fns):
            acc.append(fn(pts, res.frames.base))
    return [np.concatenate(v) for v in out]


# -- estimators and tests -------------------------------------------------------

def estimate_expectation(f, start, t: float, n: int, cfg: SimConfig, rng, *,
                         frame: str = "canonical", label: str = "expectation") -> Estimate:
    """Monte Carlo estimate of ``T_t f(start) = E[f(X_t) | X_0 = start]``."""
    if n < 100:
        raise ValueError("estimate_expectation needs n >= 100")
    if t < 0:
        raise ValueError("t must be non-negative")
    m = cfg.manifold
    if t == 0:
        p = m.wrap(np.asarray(start, dtype=float))
        return Estimate(float(_value(f, p[None])[0]), 0.0, n)
    root = _root(rng)
    (vals,) = _endpoint_values(cfg.with_time(t), root, label, n, start,
                               [lambda s, e: _value(f, e)], frame=frame)
    return _estimate(vals)


def _drop_bias(ch, m, index, t, eps):
    """``|e^{-lambda_eps t} - e^{-lambda t}|``: effect of dropping jumps below eps."""
    if ch.jumps.is_empty:
        return 0.0
    lam = eigenvalue(ch, m, index)
    lam_eps = eigenvalue(ch, m, index, eps0=eps)
    return abs(math.exp(-lam_eps * t) - math.exp(-lam * t))


def _zscore(diff, se, bias=0.0):
    excess = max(0.0, abs(diff) - bias)
    if se == 0:
        if excess > 0:
            raise DegenerateTestError(f"zero standard error with discrepancy {diff:.3g}")
        return 0.0
    return excess / se


def test_eigen_decay(index, start, t: float, n: int, cfg: SimConfig, rng, *,
                     table: SpectrumTable | None = None, name: str | None = None) -> TestReport:
    """Zonal eigenfunction centred at ``start`` decays like ``e^{-lambda t}``."""
    m, ch = cfg.manifold, cfg.characteristics
    root = _root(rng)
    if table is not None:
        lam = table.mode(index).lam
    else:
        lam = eigenvalue(ch, m, index)
    start = m.wrap(np.asarray(start, dtype=float))
    f = zonal(m, index, start)
    target = math.exp(-lam * t) * float(f(start[None])[0])
    est = estimate_expectation(f, start, t, n, cfg, root, label="eigen_decay")
    bias = _drop_bias(ch, m, index, t, cfg.epsilon)
    diff = est.mean - target
    stat = _zscore(diff, est.stderr, bias)
    return _report(name or f"eigen_decay[{m.kind},{index}]", stat, K_SIGMA, cfg, root,
                   t=t, n=n, index=_jsonable(index), lam=lam, target=target, mean=est.mean,
                   stderr=est.stderr, truncation_bias=bias)


def test_invariance(f: Observable, t: float, n: int, cfg: SimConfig, rng, *,
                    name: str | None = None) -> TestReport:
    """Uniformly started paths keep the uniform law: ``E f(X_t) = mu(f)``."""
    root = _root(rng)
    target = f.mu_mean
    (vals,) = _endpoint_values(cfg.with_time(t), root, "invariance", n, "uniform",
                               [lambda s, e: _value(f, e)], frame="random")
    est = _estimate(vals)
    diff = est.mean - target
    stat = _zscore(diff, est.stderr)
    return _report(name or f"invariance[{cfg.manifold.kind},{f.name}]", stat, K_SIGMA, cfg, root,
                   t=t, n=n, target=target, mean=est.mean, stderr=est.stderr)


def spectral_pairing(f: ZonalObservable, g: ZonalObservable, ch, t: float, eps0: float = 0.0) -> float:
    """``<T_t f, g>`` in L^2 of the Riemannian measure, in closed form."""
    return f.evolve(ch, t, eps0).inner(g)


def test_selfadjoint(f: Observable, g: Observable, t: float, n: int, cfg: SimConfig, rng, *,
                     name: str | None = None) -> TestReport:
    """``<T_t f, g> = <f, T_t g>`` from two independent uniform-start samples.

    With zonal ``f`` and ``g`` both sides are also compared to the spectral
    closed form; the reported statistic is the largest of the three z-scores.
    """
    m, ch = cfg.manifold, cfg.characteristics
    root = _root(rng)
    vol = m.volume()
    c = cfg.with_time(t)
    (left,) = _endpoint_values(c, root, "selfadjoint/left", n, "uniform",
                               [lambda s, e: _value(g, s) * _value(f, e)], frame="random")
    (right,) = _endpoint_values(c, root, "selfadjoint/right", n, "uniform",
                                [lambda s, e: _value(f, s) * _value(g, e)], frame="random")
    lhs, rhs = _estimate(left), _estimate(right)
    lhs_v, rhs_v = vol * lhs.mean, vol * rhs.mean
    lhs_se, rhs_se = vol * lhs.stderr, vol * rhs.stderr
    se = math.hypot(lhs_se, rhs_se)
    stats = {"difference": _zscore(lhs_v - rhs_v, se)}
    details = dict(t=t, n=n, lhs=lhs_v, rhs=rhs_v, lhs_stderr=lhs_se, rhs_stderr=rhs_se)
    if isinstance(f, ZonalObservable) and isinstance(g, ZonalObservable):
        exact = spectral_pairing(f, g, ch, t)
        exact_rev = spectral_pairing(g, f, ch, t)
        bias = abs(spectral_pairing(f, g, ch, t, cfg.epsilon) - exact)
        stats["lhs_vs_spectral"] = _zscore(lhs_v - exact, lhs_se, bias)
        stats["rhs_vs_spectral"] = _zscore(rhs_v - exact_rev, rhs_se, bias)
        details.update(spectral=exact, spectral_reversed=exact_rev, truncation_bias=bias)
    details["z"] = stats
    return _report(name or f"selfadjoint[{m.kind},{f.name},{g.name}]", max(stats.values()),
                   K_SIGMA, cfg, root, **details)


def chapman_kolmogorov_observables(m: Manifold) -> dict[str, Observable]:
    obs = builtin_observables(m)
    obs.pop("one")
    return dict(list(obs.items())[:6])


def test_chapman_kolmogorov(s: float, t: float, n: int, cfg: SimConfig, rng, *,
                            start=None, observables: dict | None = None,
                            name: str | None = None) -> TestReport:
    """Single runs to ``s + t`` against runs to ``s`` restarted for ``t``."""
    m = cfg.manifold
    if s < 0 or not t > 0:
        raise ValueError("need s >= 0 and t > 0")
    root = _root(rng)
    obs = observables or chapman_kolmogorov_observables(m)
    if start is None:
        start = _default_start(m)
    start = m.wrap(np.asarray(start, dtype=float))

    single = {k: RunningMoments() for k in obs}
    for _, _, res in run_chunks(cfg.with_time(s + t), root, "ck/single", n, start):
        for k, f in obs.items():
            single[k].add(_value(f, res.frames.base))

    restarted = {k: RunningMoments() for k in obs}
    first = cfg.with_time(s) if s > 0 else None
    second = cfg.with_time(t)
    for j, lo in enumerate(range(0, n, CHUNK)):
        size = min(CHUNK, n - lo)
        frames = m.canonical_frame(np.broadcast_to(start, (size,) + start.shape).copy())
        if first is not None:
            frames = simulate_batch(first, frames, chunk_rng(root, "ck/first", j)).frames
        end = simulate_batch(second, frames, chunk_rng(root, "ck/second", j)).frames
        for k, f in obs.items():
            restarted[k].add(_value(f, end.base))

    z = {}
    for k in obs:
        a, b = single[k].estimate(), restarted[k].estimate()
        z[k] = _zscore(a.mean - b.mean, math.hypot(a.stderr, b.stderr))
    threshold = bonferroni_threshold(len(obs))
    return _report(name or f"chapman_kolmogorov[{m.kind}]", max(z.values()), threshold, cfg, root,
                   s=s, t=t, n=n, z=z)


def test_frame_independence(f: Observable, start, t: float, n: int, cfg: SimConfig, rng, *,
                            name: str | None = None) -> TestReport:
    """Canonical and Haar-random initial frames give the same projected law."""
    m = cfg.manifold
    root = _root(rng)
    start = m.wrap(np.asarray(start, dtype=float))
    c = cfg.with_time(t)
    (a,) = _endpoint_values(c, root, "frame/canonical", n, start, [lambda s, e: _value(f, e)])
    (b,) = _endpoint_values(c, root, "frame/random", n, start, [lambda s, e: _value(f, e)],
                            frame="random")
    ea, eb = _estimate(a), _estimate(b)
    stat = _zscore(ea.mean - eb.mean, math.hypot(ea.stderr, eb.stderr))
    return _report(name or f"frame_independence[{m.kind},{f.name}]", stat, K_SIGMA, cfg, root,
                   t=t, n=n, canonical=ea.mean, random=eb.mean)


def _default_start(m: Manifold) -> np.ndarray:
    if isinstance(m, Sphere2):
        return np.array([0.0, 0.0, 1.0])
    return np.zeros(m.coord_dim)


# -- kernel density estimation ----------------------------------------------------

@dataclass(frozen=True)
class KernelDensity:
    starts: np.ndarray
    grid: np.ndarray
    weights: np.ndarray  # quadrature weights of the grid (sum = volume)
    estimate: np.ndarray  # (n_starts, n_grid)
    stderr: np.ndarray
    spectral: np.ndarray
    bias: np.ndarray
    bandwidth: float

    @property
    def mass(self) -> np.ndarray:
        return self.estimate @ self.weights


def kde_grid(m: Manifold, n: int):
    """A quadrature grid with weights: equispaced on the circle, a product
    Gauss-Legendre x equispaced rule on the sphere, a product grid on the torus."""
    if isinstance(m, Circle):
        pts = (2.0 * np.pi * np.arange(n) / n)[:, None]
        return pts, np.full(n, m.volume() / n)
    if isinstance(m, Sphere2):
        nz = max(2, int(round(math.sqrt(n / 2))))
        nphi = max(1, n // nz)
        x, w = gauss_legendre(nz)
        phi = 2.0 * np.pi * np.arange(nphi) / nphi
        z = np.repeat(x, nphi)
        r = np.sqrt(1.0 - z * z)
        ph = np.tile(phi, nz)
        pts = np.stack([r * np.cos(ph), r * np.sin(ph), z], axis=-1)
        return pts, np.repeat(w, nphi) * (2.0 * np.pi / nphi) * m.scale**2
    side = max(1, int(round(n ** (1.0 / m.dim))))
    axis = m.side * np.arange(side) / side
    pts = np.stack(np.meshgrid(*([axis] * m.dim), indexing="ij"), axis=-1).reshape(-1, m.dim)
    return pts, np.full(len(pts), m.volume() / len(pts))


class _GeodesicGaussian:
    """Gaussian in geodesic distance, normalised on the manifold, with its
    zonal (Funk-Hecke) coefficients."""

    def __init__(self, m: Manifold, h: float):
        self.m, self.h = m, h
        if isinstance(m, Sphere2):
            x, w = gauss_legendre(400)
            theta = 0.5 * np.pi * (x + 1.0)
            self._theta, self._w = theta, 0.5 * np.pi * w * np.sin(theta)
            prof = np.exp(-0.5 * (m.scale * theta / h) ** 2)
            self._norm = 2.0 * np.pi * m.scale**2 * float(prof @ self._w)

    def __call__(self, d):
        m, h = self.m, self.h
        if isinstance(m, Sphere2):
            return np.exp(-0.5 * (d / h) ** 2) / self._norm
        # wrapped (periodised) Gaussian per axis: integrates to one exactly
        period = 2.0 * np.pi * m.scale
        out = 0.0
        for k in range(-3, 4):
            out = out + np.exp(-0.5 * ((d + k * period) / h) ** 2)
        return out / (math.sqrt(2.0 * np.pi) * h)

    def coefficient(self, md) -> float:
        m = self.m
        if isinstance(m, Sphere2):
            prof = np.exp(-0.5 * (m.scale * self._theta / self.h) ** 2)
            pl = legendre(md.index, np.cos(self._theta))
            return 2.0 * np.pi * m.scale**2 * float((prof * pl) @ self._w) / self._norm
        return math.exp(-0.5 * md.mu * self.h**2)

    def density(self, samples, grid):
        m = self.m
        if isinstance(m, Torus):
            diff = grid[:, None, :] - samples[None, :, :]
            return np.prod(self(np.mod(diff + m.side / 2, m.side) - m.side / 2), axis=-1)
        return self(m.geodesic_distance(grid[:, None, :], samples[None, :, :]))


def estimate_kernel_kde(t: float, grid, n: int, cfg: SimConfig, rng, *, starts=None,
                        table: SpectrumTable | None = None, mu_cutoff: float | None = None,
                        tol: float = 1e-4, name: str | None = None):
    """Kernel density estimate of ``p_t(x, .)`` for several starts ``x``.

    Returns ``(KernelDensity, kernel TestReport, symmetry TestReport)``.  The
    kernel test compares the estimate with the spectral kernel in sup norm
    with threshold ``sup|bias| + 4 sup SE``; the bias of the smoothed
    estimator is computed exactly from the spectral expansion.  The symmetry
    test compares ``p(x_i, x_j)`` with ``p(x_j, x_i)`` over all start pairs.
    """
    m, ch = cfg.manifold, cfg.characteristics
    root = _root(rng)
    c = cfg.with_time(t)
    if isinstance(grid, int):
        grid, weights = kde_grid(m, grid)
    else:
        grid, weights = grid
    grid = np.asarray(grid, dtype=float)
    if starts is None:
        starts = grid[:: max(1, len(grid) // 4)][:4]
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    if table is None:
        table = build_spectrum(ch, m, mu_cutoff or _kde_cutoff(m, ch, t, tol))
    table_eps = build_spectrum(ch, m, table.cutoff, eps0=cfg.epsilon) if not ch.jumps.is_empty else table

    samples = []
    for i, x in enumerate(starts):
        ends = [res.frames.base for _, _, res in run_chunks(c, root, f"kde/{i}", n, x)]
        samples.append(np.concatenate(ends))
    spread = np.concatenate([m.geodesic_distance(s, x) for s, x in zip(samples, starts)])
    sigma = math.sqrt(float(np.mean(spread**2)) / m.dim)
    h = 1.06 * sigma * n ** (-0.2)
    if not h > 1e-3 * m.scale:
        raise ValueError(f"KDE bandwidth {h:.3g} underflows; t is too small")
    kern = _GeodesicGaussian(m, h)

    est = np.empty((len(starts), len(grid)))
    se = np.empty_like(est)
    for i, s in enumerate(samples):
        acc = [RunningMoments() for _ in grid]
        for lo in range(0, len(s), CHUNK):
            vals = kern.density(s[lo:lo + CHUNK], grid)
            for j in range(len(grid)):
                acc[j].add(vals[j])
        for j, a in enumerate(acc):
            e = a.estimate()
            est[i, j], se[i, j] = e.mean, e.stderr

    spec = np.stack([kernel(table, x, grid, t, tol) for x in starts])
    smoothed = np.stack([kernel(table_eps, x, grid, t, tol, weights=kern.coefficient) for x in starts])
    slack = 2.0 * table.tail_bound(t) / m.volume()
    bias = smoothed - spec
    density = KernelDensity(starts, grid, np.asarray(weights), est, se, spec, bias, h)

    stat = float(np.max(np.abs(est - spec)))
    threshold = float(np.max(np.abs(bias))) + slack + K_SIGMA * float(np.max(se))
    report = _report(name or f"kernel_kde[{m.kind}]", stat, threshold, cfg, root,
                     t=t, n=n, bandwidth=h, sup_bias=float(np.max(np.abs(bias))),
                     sup_stderr=float(np.max(se)), mass=density.mass)

    # symmetry: densities at the other start points
    z, pairs = 0.0, 0
    kern_at = [kern.density(s, starts) for s in samples]
    for i in range(len(starts)):
        for j in range(i + 1, len(starts)):
            a, b = _estimate(kern_at[i][j]), _estimate(kern_at[j][i])
            z = max(z, _zscore(a.mean - b.mean, math.hypot(a.stderr, b.stderr)))
            pairs += 1
    sym = _report(f"kernel_symmetry[{m.kind}]", z, bonferroni_threshold(pairs), cfg, root,
                  t=t, n=n, pairs=pairs)
    return density, report, sym


def _kde_cutoff(m: Manifold, ch: LevyCharacteristics, t: float, tol: float) -> float:
    if ch.a <= 0:
        raise ValueError("kernel comparison needs a > 0")
    beta = 0.5 * ch.a * t / m.scale**2
    # e^{-beta mu} small enough for the tail term, with room for multiplicities
    return max(4.0, (math.log(1.0 / tol) + 12.0) / beta) / m.scale**2


# -- generator --------------------------------------------------------------------

GENERATOR_STEPS = (0.02, 0.01, 0.005)


def direct_generator(f: ZonalObservable, x0, ch: LevyCharacteristics, m: Manifold,
                     eps0: float = 0.0) -> float:
    """``(a/2) Laplacian f(x0)`` plus the symmetrised jump integral at ``x0``."""
    x0 = m.wrap(np.asarray(x0, dtype=float))
    lap = float(f.laplacian(x0[None])[0])
    jump = jump_generator(m, f, x0, ch.jumps, eps0) if not ch.jumps.is_empty else 0.0
    return 0.5 * ch.a * lap + jump


def test_generator(f: ZonalObservable, x0, cfg: SimConfig, *, n: int = 200_000, rng=0,
                   steps=GENERATOR_STEPS, rel_tol: float = 0.05,
                   name: str | None = None) -> TestReport:
    """Richardson-extrapolated ``(E f(X_h) - f(x0)) / h`` against the generator.

    All step sizes reuse the same streams (common random numbers) and paths
    come in antithetic pairs; the standard error is taken over pair averages
    of the per-path extrapolated difference quotient.
    """
    m, ch = cfg.manifold, cfg.characteristics
    root = _root(rng)
    x0 = m.wrap(np.asarray(x0, dtype=float))
    f0 = float(f(x0[None])[0])
    h1, h2, h3 = steps
    if not (np.isclose(h2, h1 / 2) and np.isclose(h3, h1 / 4)):
        raise ValueError("Richardson weights assume steps h, h/2, h/4")
    quotients = []
    for h in steps:
        # one Brownian substep per inter-jump segment, so the same normal
        # draws are reused at every h; Richardson removes the O(h) weak error
        c = SimConfig(m, ch, cfg.epsilon, h, h, cfg.record)
        (vals,) = _endpoint_values(c, root, "generator", n, x0,
                                   [lambda s, e: _value(f, e)], antithetic=True)
        quotients.append((vals - f0) / h)
    d1, d2, d3 = quotients
    per_path = (8.0 * d3 - 6.0 * d2 + d1) / 3.0
    pairs = _pair_means(per_path)
    est = _estimate(pairs)
    direct = direct_generator(f, x0, ch, m)
    bias = abs(direct - direct_generator(f, x0, ch, m, eps0=cfg.epsilon)) if not ch.jumps.is_empty else 0.0
    diff = est.mean - direct
    threshold = rel_tol * abs(direct) + bias + K_SIGMA * est.stderr
    stat = abs(diff)
    return _report(name or f"generator[{m.kind},{f.name}]", stat, threshold, cfg, root,
                   x0=x0, n=n, direct=direct, extrapolated=est.mean, stderr=est.stderr,
                   raw=[float(np.mean(q)) for q in quotients], truncation_bias=bias)


def _pair_means(values: np.ndarray) -> np.ndarray:
    """Average antithetic partners (second half of each chunk mirrors the first)."""
    out = []
    for lo in range(0, len(values), CHUNK):
        v = values[lo:lo + CHUNK]
        half = len(v) // 2
        out.append(0.5 * (v[:half] + v[half:]))
    return np.concatenate(out)


# -- exact spectral checks ----------------------------------------------------------

def l2_norm(f: ZonalObservable) -> float:
    return math.sqrt(max(f.inner(f), 0.0))


def test_contraction(f: ZonalObservable, ch: LevyCharacteristics, t: float, *,
                     slack: float = 1e-12, name: str | None = None) -> TestReport:
    """``||T_t f||_2 <= ||f||_2`` on spectral coefficients (no sampling)."""
    before = l2_norm(f)
    after = l2_norm(f.evolve(ch, t))
    stat = after - before
    return TestReport(name or f"contraction[{f.manifold.kind}]", stat, slack * max(1.0, before),
                      bool(stat <= slack * max(1.0, before)),
                      details={"t": t, "norm_before": before, "norm_after": after})


def test_domination(table: SpectrumTable, *, name: str | None = None) -> TestReport:
    """Count modes with ``lambda < (a/2) mu``; zero violations pass."""
    a = table.characteristics.a
    bad = [md.index for md in table.modes if md.lam < 0.5 * a * md.mu or md.lam < 0]
    return TestReport(name or f"domination[{table.manifold.kind}]", float(len(bad)), 0.0, not bad,
                      details={"modes": len(table.modes), "violations": _jsonable(bad)})


def test_trace_comparison(ch: LevyCharacteristics, m: Manifold, times, mu_cutoff: float, *,
                          name: str | None = None) -> TestReport:
    """``tr T_t <= tr K_t`` where ``K`` is the Brownian semigroup with the same ``a``.

    Truncated sums underestimate both traces, so ``tr T_t <= tj + ej`` and
    ``tr K_t >= tb``.  The statistic is the largest ``tj + ej - tb`` over
    ``times`` and must be negative: the inequality is then strict beyond the
    error bounds.
    """
    from .levy import Empty

    jumpy = build_spectrum(ch, m, mu_cutoff)
    brown = build_spectrum(LevyCharacteristics(ch.a, Empty(), ch.dim), m, mu_cutoff)
    rows, worst = [], -math.inf
    for t in times:
        tj, ej = heat_trace(jumpy, t)
        tb, eb = heat_trace(brown, t)
        margin = tj + ej - tb
        worst = max(worst, margin)
        rows.append({"t": t, "trace": tj, "error_bound": ej, "brownian_trace": tb, "brownian_error": eb})
    return TestReport(name or f"trace_comparison[{m.kind}]", worst, 0.0, bool(worst < 0.0),
                      details={"rows": rows})
