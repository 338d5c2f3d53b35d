"""Command-line entry point: ``isolevy {simulate,spectrum,trace,kernel,validate}``.

Data go to stdout, or to a file in ``--out DIR``; summaries and notes go to
stderr.  Exit codes: 0 success, 1 a validation test failed, 2 configuration
error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import config as config_mod
from .config import ConfigError
from .levy import Empty, LevyCharacteristics

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _emit(text: str, out_dir: str | None, filename: str) -> None:
    if out_dir is None:
        sys.stdout.write(text)
        return
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    (path / filename).write_text(text)
    print(f"wrote {path / filename}", file=sys.stderr)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


# -- commands ---------------------------------------------------------------------

def cmd_simulate(rc, out_dir) -> int:
    from .mc import _default_start
    from .sim import ENDPOINT, simulate_paths, write_paths_csv

    cfg = rc.build_sim()
    m = cfg.manifold
    start = np.asarray(rc.sim.start, float) if rc.sim.start is not None else _default_start(m)
    frames0 = m.canonical_frame(np.broadcast_to(m.wrap(start), (rc.sim.n_paths,) + start.shape).copy())
    rng = np.random.default_rng(np.random.SeedSequence(rc.seed_value))
    paths = simulate_paths(frames0, cfg, rng)
    buf = io.StringIO()
    write_paths_csv(buf, paths, include_start=cfg.record != ENDPOINT)
    _emit(buf.getvalue(), out_dir, "paths.csv")
    jumps = sum(p.n_jumps for p in paths)
    steps = sum(p.n_steps for p in paths)
    print(f"paths={len(paths)} jumps={jumps} brownian_steps={steps} "
          f"jump_rate={cfg.jump_rate:.6g} small_jump_bias_bound={cfg.small_jump_bias_bound():.6g}",
          file=sys.stderr)
    return EXIT_OK


def _table(rc, ch=None):
    from .spectral import build_spectrum

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return build_spectrum(ch or rc.build_characteristics(), rc.build_manifold(),
                              rc.spectral.mu_cutoff, rc.spectral.eps0)


def cmd_spectrum(rc, out_dir) -> int:
    table = _table(rc)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "multiplicity", "mu", "lambda_jump", "lambda", "alpha"])
    for md in table.modes:
        w.writerow([md.index, md.multiplicity, _fmt(md.mu), _fmt(md.lam_jump), _fmt(md.lam), _fmt(md.alpha)])
    _emit(buf.getvalue(), out_dir, "spectrum.csv")
    return EXIT_OK


def cmd_trace(rc, out_dir, times=None) -> int:
    from .spectral import heat_trace

    ch = rc.build_characteristics()
    table = _table(rc, ch)
    brown = _table(rc, LevyCharacteristics(ch.a, Empty(), ch.dim))
    rows = []
    for t in times or rc.trace.times:
        value, err = heat_trace(table, float(t))
        bvalue, _ = heat_trace(brown, float(t))
        rows.append({"t": float(t), "trace": value, "error_bound": err, "brownian_trace": bvalue})
    if rc.output.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(rows[0]))
        for row in rows:
            w.writerow([_fmt(v) for v in row.values()])
        _emit(buf.getvalue(), out_dir, "trace.csv")
    else:
        _emit(_json(rows), out_dir, "trace.json")
    return EXIT_OK


def cmd_kernel(rc, out_dir, t=None, grid=None) -> int:
    from .mc import kde_grid
    from .spectral import kernel

    table = _table(rc)
    m = table.manifold
    pts, _ = kde_grid(m, int(grid or rc.kernel.grid))
    t = float(t if t is not None else rc.kernel.t)
    values = kernel(table, pts[:, None, :], pts[None, :, :], t)
    k = pts.shape[1]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{j}" for j in range(k)] + [f"y{j}" for j in range(k)] + ["p_t"])
    for i, x in enumerate(pts):
        for j, y in enumerate(pts):
            w.writerow([_fmt(v) for v in x] + [_fmt(v) for v in y] + [_fmt(values[i, j])])
    _emit(buf.getvalue(), out_dir, "kernel.csv")
    return EXIT_OK


def cmd_validate(rc, out_dir, name_filter=None) -> int:
    from .suite import planned_tests, run_suite

    if rc.seed is None:
        print("seed not set in config; using seed 0", file=sys.stderr)
    if name_filter and not planned_tests(rc, name_filter):
        raise ConfigError(f"--filter {name_filter!r} selects no tests")
    reports = run_suite(rc, name_filter)
    _emit(_json([r.to_dict() for r in reports]), out_dir, "validate.json")
    failed = [r.name for r in reports if not r.passed]
    for r in reports:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name} statistic={r.statistic:.4g} "
              f"threshold={r.threshold:.4g}", file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


# -- argument handling ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration (default: the shipped default.yaml)")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", help="write output into this directory instead of stdout")

    p = argparse.ArgumentParser(prog="isolevy", description="Isotropic Lévy processes on model manifolds.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="simulate paths and dump them as CSV")
    sub.add_parser("spectrum", parents=[common], help="tabulate eigenvalues as CSV")
    tr = sub.add_parser("trace", parents=[common], help="heat trace as JSON")
    tr.add_argument("--t", type=float, nargs="+", help="times (default: trace.times)")
    kn = sub.add_parser("kernel", parents=[common], help="spectral kernel on a grid as CSV")
    kn.add_argument("--t", type=float, help="time (default: kernel.t)")
    kn.add_argument("--grid", type=int, help="number of grid points (default: kernel.grid)")
    va = sub.add_parser("validate", parents=[common], help="run the Monte Carlo test suite")
    va.add_argument("--filter", dest="name_filter", help="run only tests whose name contains this")
    return p


def load_config(path, seed=None):
    rc = config_mod.load(path or config_mod.default_config_path())
    if seed is not None:
        if not 0 <= seed < 2**64:
            raise ConfigError("--seed must be in [0, 2**64)")
        rc.seed = seed
    return rc


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        rc = load_config(args.config, args.seed)
        if args.out is None:
            args.out = rc.output.dir
        if args.command == "simulate":
            return cmd_simulate(rc, args.out)
        if args.command == "spectrum":
            return cmd_spectrum(rc, args.out)
        if args.command == "trace":
            return cmd_trace(rc, args.out, args.t)
        if args.command == "kernel":
            return cmd_kernel(rc, args.out, args.t, args.grid)
        return cmd_validate(rc, args.out, args.name_filter)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
