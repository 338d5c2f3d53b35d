"""Run configuration: a versioned YAML document, validated at load time.

Layout (all sections optional except ``schema_version``)::

    schema_version: 1
    seed: 0
    manifold: {kind: sphere, scale: 1.0, dim: 2}
    characteristics:
      a: 2.0
      jumps: {family: atom, radius: 1.0, rate: 0.5}
    sim: {epsilon: 0.05, h_max: 0.01, t_end: 1.0, record: endpoint, n_paths: 10, start: null}
    spectral: {mu_cutoff: 100.0, eps0: 0.0}
    trace: {times: [0.3, 0.5, 1.0, 2.0]}
    kernel: {t: 1.0, grid: 64}
    mc: {...}
    output: {dir: null, format: csv}

Unknown keys anywhere are rejected.  ``record`` is ``endpoint``, ``all`` or
``{grid: dt}``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .geom import Manifold, make_manifold
from .levy import LevyCharacteristics, jump_measure_from_dict
from .observables import builtin_observables
from .sim import ALL_EVENTS, ENDPOINT, Grid, SimConfig

SCHEMA_VERSION = 1

ALL_TESTS = (
    "eigen_decay", "invariance", "selfadjoint", "chapman_kolmogorov", "frame_independence",
    "generator", "kernel_kde", "contraction", "domination", "trace_comparison",
)


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


@dataclass
class ManifoldSection:
    kind: str = "sphere"
    scale: float = 1.0
    dim: int | None = None


@dataclass
class CharacteristicsSection:
    a: float = 2.0
    jumps: dict = field(default_factory=lambda: {"family": "empty"})


@dataclass
class SimSection:
    epsilon: float = 0.05
    h_max: float = 0.01
    t_end: float = 1.0
    record: object = ENDPOINT
    n_paths: int = 10
    start: list | None = None


@dataclass
class SpectralSection:
    mu_cutoff: float = 100.0
    eps0: float = 0.0


@dataclass
class TraceSection:
    times: list = field(default_factory=lambda: [0.3, 0.5, 1.0, 2.0])


@dataclass
class KernelSection:
    t: float = 1.0
    grid: int = 64


@dataclass
class TimesSection:
    decay: float = 0.5
    invariance: float = 0.5
    selfadjoint: float = 0.5
    ck_s: float = 0.25
    ck_t: float = 0.25
    kde: float = 1.0


@dataclass
class MCSection:
    n_paths: int = 20000
    kde_paths: int = 20000
    generator_paths: int = 100000
    modes: list = field(default_factory=lambda: [1, 2])
    observables: list = field(default_factory=list)
    pairs: list = field(default_factory=list)
    generator_observables: list = field(default_factory=list)
    times: TimesSection = field(default_factory=TimesSection)
    tests: list = field(default_factory=lambda: list(ALL_TESTS))


@dataclass
class OutputSection:
    dir: str | None = None
    format: str = "csv"


@dataclass
class RunConfig:
    schema_version: int = SCHEMA_VERSION
    seed: int | None = None
    manifold: ManifoldSection = field(default_factory=ManifoldSection)
    characteristics: CharacteristicsSection = field(default_factory=CharacteristicsSection)
    sim: SimSection = field(default_factory=SimSection)
    spectral: SpectralSection = field(default_factory=SpectralSection)
    trace: TraceSection = field(default_factory=TraceSection)
    kernel: KernelSection = field(default_factory=KernelSection)
    mc: MCSection = field(default_factory=MCSection)
    output: OutputSection = field(default_factory=OutputSection)

    # -- derived objects ------------------------------------------------------
    @property
    def seed_value(self) -> int:
        return 0 if self.seed is None else int(self.seed)

    def build_manifold(self) -> Manifold:
        s = self.manifold
        return make_manifold(s.kind, s.scale, s.dim)

    def build_characteristics(self) -> LevyCharacteristics:
        m = self.build_manifold()
        return LevyCharacteristics(float(self.characteristics.a),
                                   jump_measure_from_dict(self.characteristics.jumps), m.dim)

    def record_mode(self):
        r = self.sim.record
        if isinstance(r, dict):
            return Grid(float(r["grid"]))
        return r

    def build_sim(self) -> SimConfig:
        s = self.sim
        return SimConfig(self.build_manifold(), self.build_characteristics(), float(s.epsilon),
                         float(s.h_max), float(s.t_end), self.record_mode())

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = yaml.safe_dump(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _build(cls, data, path: str):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping, got {type(data).__name__}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"{path or 'config'}: unknown key(s) {', '.join(map(str, unknown))}")
    kwargs = {}
    for name, value in data.items():
        sub = fields[name].default_factory if fields[name].default_factory is not dataclasses.MISSING else None
        if sub is not None and dataclasses.is_dataclass(sub):
            kwargs[name] = _build(sub, value, f"{path}.{name}" if path else name)
        else:
            kwargs[name] = value
    return cls(**kwargs)


def _positive(value, name):
    try:
        ok = float(value) > 0 and math.isfinite(float(value))
    except (TypeError, ValueError):
        ok = False
    if not ok:
        raise ConfigError(f"{name} must be a positive number, got {value!r}")


def validate(rc: RunConfig) -> RunConfig:
    if rc.schema_version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version {rc.schema_version!r} is not supported (expected {SCHEMA_VERSION})")
    if rc.seed is not None and (not isinstance(rc.seed, int) or isinstance(rc.seed, bool)
                                or not 0 <= rc.seed < 2**64):
        raise ConfigError("seed must be an integer in [0, 2**64)")
    r = rc.sim.record
    if not (r in (ENDPOINT, ALL_EVENTS) or (isinstance(r, dict) and set(r) == {"grid"})):
        raise ConfigError(f"sim.record must be 'endpoint', 'all' or {{grid: dt}}, got {r!r}")
    for name in ("epsilon", "h_max", "t_end"):
        _positive(getattr(rc.sim, name), f"sim.{name}")
    _positive(rc.spectral.mu_cutoff, "spectral.mu_cutoff")
    for t in rc.trace.times:
        _positive(t, "trace.times")
    _positive(rc.kernel.t, "kernel.t")
    for name in ("decay", "invariance", "selfadjoint", "ck_t", "kde"):
        _positive(getattr(rc.mc.times, name), f"mc.times.{name}")
    if rc.mc.times.ck_s < 0:
        raise ConfigError("mc.times.ck_s must be non-negative")
    for name in ("n_paths", "kde_paths", "generator_paths"):
        v = getattr(rc.mc, name)
        if not isinstance(v, int) or v < 100:
            raise ConfigError(f"mc.{name} must be an integer >= 100")
    if rc.mc.generator_paths % 2:
        raise ConfigError("mc.generator_paths must be even (antithetic pairs)")
    if not isinstance(rc.sim.n_paths, int) or rc.sim.n_paths < 1:
        raise ConfigError("sim.n_paths must be a positive integer")
    unknown = sorted(set(rc.mc.tests) - set(ALL_TESTS))
    if unknown:
        raise ConfigError(f"mc.tests: unknown test(s) {', '.join(unknown)}")
    if rc.output.format not in ("csv", "json"):
        raise ConfigError("output.format must be csv or json")
    try:
        sim = rc.build_sim()
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from None
    m = sim.manifold
    if rc.sim.start is not None and len(rc.sim.start) != m.coord_dim:
        raise ConfigError(f"sim.start must have {m.coord_dim} coordinates")
    names = set(builtin_observables(m))
    used = list(rc.mc.observables) + list(rc.mc.generator_observables)
    for pair in rc.mc.pairs:
        if not (isinstance(pair, list) and len(pair) == 2):
            raise ConfigError("mc.pairs entries must be [f, g] name pairs")
        used += pair
    missing = sorted(set(used) - names)
    if missing:
        raise ConfigError(f"unknown observable(s) {', '.join(missing)} for {m.kind}; "
                          f"choose from {', '.join(sorted(names))}")
    return rc


def from_dict(data) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    if "schema_version" not in data:
        raise ConfigError("schema_version is required")
    return validate(_build(RunConfig, data, ""))


def loads(text: str) -> RunConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from None
    return from_dict(data)


def load(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return loads(text)


def dumps(rc: RunConfig) -> str:
    return yaml.safe_dump(rc.to_dict(), sort_keys=False)


def default_config_path() -> Path:
    return Path(__file__).with_name("data") / "default.yaml"
