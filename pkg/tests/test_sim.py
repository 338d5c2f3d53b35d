import io
import math

import numpy as np
import pytest
from scipy.stats import chisquare, poisson

from isolevy.geom import Circle, Sphere2, Torus
from isolevy.levy import Atom, Empty, LevyCharacteristics, Stable
from isolevy.sim import (ALL_EVENTS, BROWNIAN, ENDPOINT, JUMP, START, Grid, SimConfig, brownian_step,
                         project, simulate_batch, simulate_path, simulate_paths, write_paths_csv)


def frames_at(m, p, n):
    return m.canonical_frame(np.tile(np.asarray(p, float), (n, 1)))


def cfg_for(m, a, nu, *, eps=0.05, h=0.01, t=0.5, record=ENDPOINT):
    return SimConfig(m, LevyCharacteristics(a, nu, m.dim), eps, h, t, record)


# -- configuration -------------------------------------------------------------------

def test_config_validation():
    s = Sphere2()
    for bad in (dict(eps=0.0), dict(h=-1.0), dict(t=0.0), dict(t=math.inf), dict(record="sometimes")):
        with pytest.raises(ValueError):
            cfg_for(s, 1.0, Empty(), **bad)
    with pytest.raises(ValueError):
        SimConfig(s, LevyCharacteristics(1.0, Empty(), 1), 0.1, 0.1, 1.0)
    with pytest.raises(ValueError):
        Grid(0.0)
    cfg = cfg_for(s, 1.0, Stable(1.0, 1.0), eps=0.1)
    assert cfg.jump_rate == pytest.approx(10.0)
    assert cfg.small_jump_bias_bound() == pytest.approx(0.1)
    assert cfg.with_time(2.0).t_end == 2.0 and cfg.with_h_max(0.5).h_max == 0.5


# -- Brownian step -----------------------------------------------------------------------------

def test_circle_brownian_step_is_exact():
    # on the circle one step of any length is an exact Brownian increment
    c = Circle()
    r = frames_at(c, [1.0], 200_000)
    out = brownian_step(c, r, 2.0, 0.5, np.random.default_rng(0))
    x = out.base[:, 0]
    for k in (1, 2):
        mean = np.cos(k * (x - 1.0)).mean()
        assert abs(mean - math.exp(-k * k * 0.5)) < 4 / math.sqrt(2 * 200_000)
    with pytest.raises(ValueError):
        brownian_step(c, r, 0.0, 0.5, np.random.default_rng(0))


def test_sphere_brownian_height_decay():
    # E z_t = exp(-a t) for Brownian motion with generator (a/2) Delta on S^2
    s = Sphere2()
    n = 40_000
    cfg = cfg_for(s, 2.0, Empty(), h=0.005, t=0.5)
    res = simulate_batch(cfg, frames_at(s, [0, 0, 1], n), np.random.default_rng(1))
    z = res.frames.base[:, 2]
    se = z.std() / math.sqrt(n)
    assert abs(z.mean() - math.exp(-1.0)) < 4 * se + 0.004
    assert np.all(res.n_steps == 100) and np.all(res.n_jumps == 0)


def test_circle_pure_jump_atom():
    c = Circle()
    n = 50_000
    cfg = cfg_for(c, 0.0, Atom(math.pi / 2, 1.0), t=1.0)
    res = simulate_batch(cfg, frames_at(c, [0.0], n), np.random.default_rng(2))
    est = np.cos(res.frames.base[:, 0])
    assert abs(est.mean() - math.exp(-1.0)) < 4 * est.std() / math.sqrt(n)
    assert np.all(res.n_steps == 0)


# -- path structure ---------------------------------------------------------------------------

def test_path_structure_all_events():
    s = Sphere2()
    cfg = cfg_for(s, 1.0, Atom(0.5, 4.0), h=0.05, t=2.0, record=ALL_EVENTS)
    path = simulate_path(s.canonical_frame(np.array([0.0, 0, 1])), cfg, np.random.default_rng(3))
    assert path.events[0] == START and path.times[0] == 0
    assert np.all(np.diff(path.times) >= 0)
    assert path.times[-1] == pytest.approx(2.0)
    assert path.events.count(JUMP) == path.n_jumps
    assert path.events.count(BROWNIAN) == path.n_steps
    assert path.n_jumps > 0
    pts = project(path)
    assert pts.shape == (len(path.times), 3)
    np.testing.assert_allclose(np.linalg.norm(pts, axis=-1), 1, atol=1e-12)
    assert s.gram_error(path.frames).max() < 1e-10


def test_continuity_between_jumps():
    s = Sphere2()
    h = 0.01
    cfg = cfg_for(s, 1.0, Atom(1.0, 2.0), h=h, t=3.0, record=ALL_EVENTS)
    path = simulate_path(s.canonical_frame(np.array([1.0, 0, 0])), cfg, np.random.default_rng(4))
    d = s.geodesic_distance(path.frames.base[:-1], path.frames.base[1:])
    moved_by_jump = np.array([ev == JUMP for ev in path.events[1:]])
    # Brownian increments are N(0, a dt) in 2D; 8 sigma is never reached here
    assert d[~moved_by_jump].max() < 8 * math.sqrt(h)
    np.testing.assert_allclose(d[moved_by_jump], 1.0, atol=1e-9)


def test_no_jumps_without_jump_measure():
    t = Torus(2)
    cfg = cfg_for(t, 1.0, Empty(), h=0.1, t=1.0, record=ALL_EVENTS)
    paths = simulate_paths(frames_at(t, [1.0, 1.0], 20), cfg, np.random.default_rng(5))
    assert all(p.n_jumps == 0 and JUMP not in p.events for p in paths)


def test_poisson_jump_counts():
    c = Circle()
    n = 20_000
    cfg = cfg_for(c, 0.5, Stable(1.0, 1.0), eps=0.5, h=0.1, t=1.5)
    res = simulate_batch(cfg, frames_at(c, [0.0], n), np.random.default_rng(6))
    mean = cfg.jump_rate * 1.5
    counts = np.bincount(res.n_jumps)
    k = np.arange(len(counts))
    keep = poisson.pmf(k, mean) * n > 20
    expected = poisson.pmf(k[keep], mean) * n
    observed = counts[keep]
    expected *= observed.sum() / expected.sum()
    assert chisquare(observed, expected).pvalue > 1e-3


def test_recorded_frames_are_orthonormal():
    s = Sphere2()
    cfg = cfg_for(s, 1.0, Stable(1.5, 1.0), eps=0.05, h=0.02, t=1.0, record=ALL_EVENTS)
    paths = simulate_paths(s.random_frame(s.sample_uniform(np.random.default_rng(7), 30),
                                          np.random.default_rng(8)), cfg, np.random.default_rng(9))
    assert max(s.gram_error(p.frames).max() for p in paths) < 1e-10


def test_grid_recording():
    t = Torus(3)
    cfg = cfg_for(t, 1.0, Atom(0.3, 1.0), h=0.05, t=1.0, record=Grid(0.25))
    paths = simulate_paths(frames_at(t, [0.5, 0.5, 0.5], 5), cfg, np.random.default_rng(10))
    for p in paths:
        np.testing.assert_allclose(p.times, [0, 0.25, 0.5, 0.75, 1.0])
        assert p.events[0] == START


def test_stop_times_match_endpoint():
    s = Sphere2()
    cfg = cfg_for(s, 1.0, Atom(0.7, 1.0), h=0.02, t=1.0)
    f0 = frames_at(s, [0, 0, 1], 100)
    a = simulate_batch(cfg, f0, np.random.default_rng(11), stop_times=[0.3])
    b = simulate_batch(cfg, f0, np.random.default_rng(11))
    assert np.allclose(a.stop_times, [0.3, 1.0])
    np.testing.assert_array_equal(a.stops[-1].base, a.frames.base)
    assert a.stops[0].base.shape == (100, 3) and b.stops[0].base.shape == (100, 3)
    with pytest.raises(ValueError):
        simulate_batch(cfg, f0, np.random.default_rng(11), stop_times=[2.0])


# -- distributional checks -----------------------------------------------------------------------

def test_sphere_mixes_to_uniform():
    # equal-area bands in z and equal sectors in longitude
    s = Sphere2()
    n = 30_000
    cfg = cfg_for(s, 2.0, Atom(1.0, 1.0), h=0.05, t=2.0)
    x = simulate_batch(cfg, frames_at(s, [0, 0, 1], n), np.random.default_rng(12)).frames.base
    band = np.clip(((x[:, 2] + 1) / 2 * 5).astype(int), 0, 4)
    sector = ((np.arctan2(x[:, 1], x[:, 0]) + np.pi) / (2 * np.pi) * 4).astype(int) % 4
    counts = np.bincount(band * 4 + sector, minlength=20)
    assert chisquare(counts).pvalue > 1e-3


def test_epsilon_refinement_consistent():
    # shrinking epsilon changes the law by at most the discarded small-jump mass
    c = Circle()
    n = 100_000
    out = []
    for eps in (0.2, 0.05):
        cfg = cfg_for(c, 0.2, Stable(1.2, 0.5), eps=eps, h=1.0, t=1.0)
        x = simulate_batch(cfg, frames_at(c, [0.0], n), np.random.default_rng(13)).frames.base[:, 0]
        out.append((np.cos(x).mean(), np.cos(x).std() / math.sqrt(n), cfg.small_jump_bias_bound()))
    (m1, s1, b1), (m2, s2, b2) = out
    assert abs(m1 - m2) < 4 * math.hypot(s1, s2) + 0.5 * b1


# -- determinism, antithetic mode, output ------------------------------------------------------

def test_same_seed_same_paths():
    s = Sphere2()
    cfg = cfg_for(s, 1.0, Stable(0.8, 1.0), eps=0.1, h=0.05, t=1.0, record=ALL_EVENTS)
    f0 = frames_at(s, [0, 0, 1], 10)
    a = simulate_paths(f0, cfg, np.random.default_rng(14))
    b = simulate_paths(f0, cfg, np.random.default_rng(14))
    for p, q in zip(a, b):
        assert np.array_equal(p.times, q.times) and np.array_equal(p.frames.basis, q.frames.basis)
    c = simulate_paths(f0, cfg, np.random.default_rng(15))
    assert not np.array_equal(a[0].frames.base, c[0].frames.base)


def test_antithetic_mirror_on_circle():
    c = Circle()
    cfg = cfg_for(c, 1.0, Atom(0.5, 2.0), h=0.1, t=1.0)
    res = simulate_batch(cfg, frames_at(c, [np.pi], 1000), np.random.default_rng(16), antithetic=True)
    x = res.frames.base[:, 0] - np.pi
    np.testing.assert_allclose(np.angle(np.exp(1j * (x[:500] + x[500:]))), 0, atol=1e-9)
    np.testing.assert_array_equal(res.n_jumps[:500], res.n_jumps[500:])
    with pytest.raises(ValueError):
        simulate_batch(cfg, frames_at(c, [0.0], 3), np.random.default_rng(0), antithetic=True)


def test_csv_dump():
    c = Circle()
    cfg = cfg_for(c, 1.0, Atom(1.0, 1.0), h=0.25, t=1.0, record=ALL_EVENTS)
    paths = simulate_paths(frames_at(c, [0.1], 3), cfg, np.random.default_rng(17))
    buf = io.StringIO()
    write_paths_csv(buf, paths)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "path_id,t,event,x0"
    assert len(lines) == 1 + sum(len(p.times) for p in paths)
    first = lines[1].split(",")
    assert first[:3] == ["0", "0", "start"] and float(first[3]) == 0.1
    last = lines[-1].split(",")
    assert float(last[3]) == paths[-1].frames.base[-1, 0]
    end = simulate_paths(frames_at(c, [0.1], 3), cfg_for(c, 1.0, Empty()), np.random.default_rng(0))
    buf = io.StringIO()
    write_paths_csv(buf, end, include_start=False)
    assert len(buf.getvalue().splitlines()) == 4
