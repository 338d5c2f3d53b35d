"""The validation suite driven by a :class:`RunConfig`."""

from __future__ import annotations

import warnings

import numpy as np

from . import mc
from .config import ALL_TESTS, RunConfig
from .observables import ZonalObservable, builtin_observables
from .spectral import build_spectrum


def _zero_mean(obs: dict) -> list[str]:
    return [k for k, f in obs.items() if k != "one" and isinstance(f, ZonalObservable)]


def planned_tests(rc: RunConfig, name_filter: str | None = None) -> list[str]:
    tests = [t for t in ALL_TESTS if t in rc.mc.tests]
    if name_filter:
        tests = [t for t in tests if name_filter in t]
    return tests


def run_suite(rc: RunConfig, name_filter: str | None = None) -> list[mc.TestReport]:
    """Run every configured test whose name contains ``name_filter``.

    Each test draws from its own stream family ``(seed, test name)``, so
    selecting a subset does not change the reports of the others.
    """
    cfg = rc.build_sim()
    m, ch = cfg.manifold, cfg.characteristics
    obs = builtin_observables(m)
    seed = rc.seed_value
    n = rc.mc.n_paths
    times = rc.mc.times
    start = np.asarray(rc.sim.start, float) if rc.sim.start is not None else mc._default_start(m)
    names = rc.mc.observables or _zero_mean(obs)[:3]
    gen_names = rc.mc.generator_observables or _zero_mean(obs)[:2]
    pairs = rc.mc.pairs or ([names[:2]] if len(names) >= 2 else [])

    def root(label):
        return np.random.SeedSequence(seed, spawn_key=(mc._label(label),))

    reports: list[mc.TestReport] = []
    for test in planned_tests(rc, name_filter):
        if test == "eigen_decay":
            for idx in rc.mc.modes:
                index = tuple(idx) if isinstance(idx, list) else idx
                label = f"eigen_decay/{idx}"
                reports.append(mc.test_eigen_decay(index, start, times.decay, n, cfg, root(label)))
        elif test == "invariance":
            for k in names:
                reports.append(mc.test_invariance(obs[k], times.invariance, n, cfg, root(f"invariance/{k}")))
        elif test == "selfadjoint":
            for f, g in pairs:
                reports.append(mc.test_selfadjoint(obs[f], obs[g], times.selfadjoint, n, cfg,
                                                   root(f"selfadjoint/{f}/{g}")))
        elif test == "chapman_kolmogorov":
            reports.append(mc.test_chapman_kolmogorov(times.ck_s, times.ck_t, n, cfg,
                                                      root("chapman_kolmogorov"), start=start))
        elif test == "frame_independence":
            k = names[0]
            reports.append(mc.test_frame_independence(obs[k], start, times.decay, n, cfg,
                                                      root(f"frame_independence/{k}")))
        elif test == "generator":
            for k in gen_names:
                reports.append(mc.test_generator(obs[k], start, cfg, n=rc.mc.generator_paths,
                                                 rng=root(f"generator/{k}")))
        elif test == "kernel_kde":
            if ch.a <= 0:
                continue  # no kernel expansion without a Brownian part
            _, kde, sym = mc.estimate_kernel_kde(times.kde, rc.kernel.grid, rc.mc.kde_paths, cfg,
                                                 root("kernel_kde"))
            reports += [kde, sym]
        elif test == "contraction":
            for k, f in obs.items():
                if isinstance(f, ZonalObservable):
                    for t in rc.trace.times:
                        reports.append(mc.test_contraction(f, ch, t, name=f"contraction[{m.kind},{k},{t}]"))
        elif test == "domination":
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                table = build_spectrum(ch, m, rc.spectral.mu_cutoff)
            reports.append(mc.test_domination(table))
        elif test == "trace_comparison":
            if ch.a <= 0 or ch.jumps.is_empty:
                continue
            reports.append(mc.test_trace_comparison(ch, m, rc.trace.times, rc.spectral.mu_cutoff))
    digest = rc.digest()
    for r in reports:
        r.config_hash = digest
        r.seed = seed
    return reports
