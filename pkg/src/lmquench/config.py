"""Run configuration: TOML file, environment override and validation.

A configuration file has up to six tables; every key is optional::

    [mesh]
    n_points = 121          # odd
    scaling = 0.15          # node spacing h

    [physics]
    g = 2.5
    kappa = 0.7

    [dynamics]
    t_max = 10053.096491487338   # 2 pi x 1600
    dt = 0.0                     # 0: derive from the spectrum
    samples_per_period = 20
    max_samples = 1048576
    n_states = 0                 # 0: smallest k reaching sum_rule
    sum_rule = 0.999999
    display_t_max = 50.0
    display_dt = 0.01

    [observables]
    bins = 100
    histogram_lower = "zero"     # or "min"
    tail_window = [3.0, 50.0]
    tail_bin_width = 4.0
    refine = 1
    density_t_max = 6.283185307179586
    density_steps = 64
    fft_omega_max = 20.0
    fft_pad = 1
    fft_window = "none"          # or "hann"
    classifier = { peak_prominence = 0.1 }   # any ClassifierThresholds field

    [sweep]
    g = [0.5, 1.0, 2.5]
    kappa = [0.7, -5.0]
    workers = 0                  # 0: all available cores

    [output]
    directory = "lmquench-out"
    cache_dir = ""               # empty: no cache

The environment variable ``LMQUENCH_OUTPUT`` overrides
``output.directory``; nothing else is read from the environment.
"""

from __future__ import annotations

import dataclasses
import math
import os
import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .observables import ClassifierThresholds
from .quench_dynamics import DEFAULT_HORIZON, DEFAULT_SUM_RULE

OUTPUT_ENV = "LMQUENCH_OUTPUT"


class ConfigError(ValueError):
    """Invalid or unreadable configuration."""


def _real(name, v, *, positive=False, nonneg=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{name} must be a finite number, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(f"{name} must be positive, got {v!r}")
    if nonneg and v < 0:
        raise ConfigError(f"{name} must be non-negative, got {v!r}")
    return float(v)


def _int(name, v, *, minimum=None):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise ConfigError(f"{name} must be an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {v!r}")
    return int(v)


@dataclass(frozen=True)
class MeshConfig:
    n_points: int = 121
    scaling: float = 0.15

    def __post_init__(self):
        n = _int("mesh.n_points", self.n_points, minimum=3)
        if n % 2 == 0:
            raise ConfigError(f"mesh.n_points must be odd, got {n}")
        object.__setattr__(self, "n_points", n)
        object.__setattr__(self, "scaling", _real("mesh.scaling", self.scaling, positive=True))


@dataclass(frozen=True)
class PhysicsConfig:
    g: float = 2.5
    kappa: float = 0.7

    def __post_init__(self):
        object.__setattr__(self, "g", _real("physics.g", self.g))
        object.__setattr__(self, "kappa", _real("physics.kappa", self.kappa))


@dataclass(frozen=True)
class DynamicsConfig:
    t_max: float = DEFAULT_HORIZON
    dt: float = 0.0
    samples_per_period: int = 20
    max_samples: int = 2 ** 20
    n_states: int = 0
    sum_rule: float = DEFAULT_SUM_RULE
    display_t_max: float = 50.0
    display_dt: float = 0.01

    def __post_init__(self):
        s = object.__setattr__
        s(self, "t_max", _real("dynamics.t_max", self.t_max, positive=True))
        s(self, "dt", _real("dynamics.dt", self.dt, nonneg=True))
        s(self, "samples_per_period", _int("dynamics.samples_per_period",
                                           self.samples_per_period, minimum=2))
        s(self, "max_samples", _int("dynamics.max_samples", self.max_samples, minimum=2))
        s(self, "n_states", _int("dynamics.n_states", self.n_states, minimum=0))
        rule = _real("dynamics.sum_rule", self.sum_rule, positive=True)
        if rule > 1:
            raise ConfigError(f"dynamics.sum_rule must be in (0, 1], got {rule}")
        s(self, "sum_rule", rule)
        s(self, "display_t_max", _real("dynamics.display_t_max", self.display_t_max,
                                       positive=True))
        s(self, "display_dt", _real("dynamics.display_dt", self.display_dt, positive=True))
        if self.dt and math.ceil(self.t_max / self.dt) + 1 > self.max_samples:
            raise ConfigError(
                f"dynamics.dt={self.dt} needs more than max_samples={self.max_samples} "
                f"points over t_max={self.t_max}")


@dataclass(frozen=True)
class ObservablesConfig:
    bins: int = 100
    histogram_lower: str = "zero"
    tail_window: tuple[float, float] = (3.0, 50.0)
    tail_bin_width: float = 4.0
    refine: int = 1
    density_t_max: float = 2 * math.pi
    density_steps: int = 64
    fft_omega_max: float = 20.0
    fft_pad: int = 1
    fft_window: str = "none"
    classifier: ClassifierThresholds = field(default_factory=ClassifierThresholds)

    def __post_init__(self):
        s = object.__setattr__
        s(self, "bins", _int("observables.bins", self.bins, minimum=2))
        if self.histogram_lower not in ("zero", "min"):
            raise ConfigError(
                f"observables.histogram_lower must be 'zero' or 'min', got {self.histogram_lower!r}")
        try:
            lo, hi = self.tail_window
        except (TypeError, ValueError):
            raise ConfigError(f"observables.tail_window must be [lo, hi], got {self.tail_window!r}")
        lo = _real("observables.tail_window[0]", lo, positive=True)
        hi = _real("observables.tail_window[1]", hi, positive=True)
        if not lo < hi:
            raise ConfigError(f"observables.tail_window needs lo < hi, got {self.tail_window!r}")
        s(self, "tail_window", (lo, hi))
        s(self, "tail_bin_width", _real("observables.tail_bin_width", self.tail_bin_width,
                                        nonneg=True))
        s(self, "refine", _int("observables.refine", self.refine, minimum=1))
        s(self, "density_t_max", _real("observables.density_t_max", self.density_t_max,
                                       nonneg=True))
        s(self, "density_steps", _int("observables.density_steps", self.density_steps,
                                      minimum=1))
        s(self, "fft_omega_max", _real("observables.fft_omega_max", self.fft_omega_max,
                                       positive=True))
        s(self, "fft_pad", _int("observables.fft_pad", self.fft_pad, minimum=1))
        if self.fft_window not in ("none", "hann"):
            raise ConfigError(
                f"observables.fft_window must be 'none' or 'hann', got {self.fft_window!r}")
        if isinstance(self.classifier, dict):
            known = {f.name for f in dataclasses.fields(ClassifierThresholds)}
            bad = set(self.classifier) - known
            if bad:
                raise ConfigError(f"unknown classifier thresholds: {sorted(bad)}")
            kw = {k: tuple(v) if isinstance(v, list) else v for k, v in self.classifier.items()}
            s(self, "classifier", ClassifierThresholds(**kw))
        elif not isinstance(self.classifier, ClassifierThresholds):
            raise ConfigError("observables.classifier must be a table of thresholds")


@dataclass(frozen=True)
class SweepConfig:
    g: tuple[float, ...] = ()
    kappa: tuple[float, ...] = ()
    workers: int = 0

    def __post_init__(self):
        for name in ("g", "kappa"):
            values = getattr(self, name)
            if isinstance(values, (int, float)):
                values = (values,)
            try:
                values = tuple(_real(f"sweep.{name}", v) for v in values)
            except TypeError:
                raise ConfigError(f"sweep.{name} must be a list of numbers, got {values!r}")
            object.__setattr__(self, name, values)
        object.__setattr__(self, "workers", _int("sweep.workers", self.workers, minimum=0))

    @property
    def enabled(self) -> bool:
        return bool(self.g or self.kappa)

    def points(self, physics: PhysicsConfig) -> list[tuple[float, float]]:
        """Grid points in row-major ``(g, kappa)`` order."""
        gs = self.g or (physics.g,)
        ks = self.kappa or (physics.kappa,)
        return [(g, k) for g in gs for k in ks]


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "lmquench-out"
    cache_dir: str = ""

    def __post_init__(self):
        for name in ("directory", "cache_dir"):
            if not isinstance(getattr(self, name), str):
                raise ConfigError(f"output.{name} must be a string")
        if not self.directory:
            raise ConfigError("output.directory must not be empty")


_SECTIONS = {
    "mesh": MeshConfig,
    "physics": PhysicsConfig,
    "dynamics": DynamicsConfig,
    "observables": ObservablesConfig,
    "sweep": SweepConfig,
    "output": OutputConfig,
}


@dataclass(frozen=True)
class RunConfig:
    mesh: MeshConfig = field(default_factory=MeshConfig)
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    dynamics: DynamicsConfig = field(default_factory=DynamicsConfig)
    observables: ObservablesConfig = field(default_factory=ObservablesConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a table")
        unknown = set(data) - set(_SECTIONS)
        if unknown:
            raise ConfigError(f"unknown configuration sections: {sorted(unknown)}")
        parts = {}
        for name, section in _SECTIONS.items():
            values = data.get(name, {})
            if not isinstance(values, dict):
                raise ConfigError(f"[{name}] must be a table")
            known = {f.name for f in dataclasses.fields(section)}
            bad = set(values) - known
            if bad:
                raise ConfigError(f"unknown keys in [{name}]: {sorted(bad)}")
            try:
                parts[name] = section(**values)
            except ConfigError:
                raise
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"[{name}]: {exc}") from exc
        return cls(**parts)

    def to_dict(self) -> dict:
        """Plain nested mapping (tuples as lists), suitable for JSON."""
        def plain(v):
            if dataclasses.is_dataclass(v):
                return {f.name: plain(getattr(v, f.name)) for f in dataclasses.fields(v)}
            if isinstance(v, (tuple, list)):
                return [plain(x) for x in v]
            return v
        return plain(self)

    def updated(self, **sections) -> "RunConfig":
        """Copy with fields replaced, e.g. ``updated(physics={"g": 1.0})``."""
        data = self.to_dict()
        for name, values in sections.items():
            if name not in _SECTIONS:
                raise ConfigError(f"unknown configuration section {name!r}")
            data[name].update(values)
        return RunConfig.from_mapping(data)

    def single_point(self, g: float, kappa: float) -> "RunConfig":
        """The configuration of one sweep point, with the sweep grid cleared."""
        return self.updated(physics={"g": g, "kappa": kappa},
                            sweep={"g": [], "kappa": []})


def load_config(path=None, environ=None) -> RunConfig:
    """Read a TOML file (or defaults if ``path`` is None) and apply the
    output-directory environment override."""
    data = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from exc
    config = RunConfig.from_mapping(data)
    env = os.environ if environ is None else environ
    if env.get(OUTPUT_ENV):
        config = config.updated(output={"directory": env[OUTPUT_ENV]})
    return config
