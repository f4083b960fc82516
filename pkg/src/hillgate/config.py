"""Experiment configuration files and result records.

Configs are YAML mappings with fixed sections.  Parsing is strict: unknown
keys anywhere are an error, missing required keys are reported by their
dotted path, and defaults are filled in so that two configs compare equal
exactly when they describe the same experiment.

Example
-------
::

    format_version: 1
    seed: 7
    field: {potential: double_well_1d, params: {a: 1.0, height: 1.0}}
    regions:
      A: {shape: ball, center: [-1.0], radius: 0.3}
      B: {shape: ball, center: [1.0], radius: 0.3}
    thermo: {gamma: 1.0, beta: 1.0}
    sim: {dt: 1.0e-3}
"""
from __future__ import annotations

import copy
import hashlib
import json
import platform
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from . import __version__
from .boundary_sampler import SurfaceSamplerParams
from .errors import ConfigError, HillgateError
from .estimators import AmsParams
from .fields import ForceField, PotentialSpec, ThermoParams
from .geometry import LevelSetRegion, MetastablePair
from .integrator import Observable, Scheme, SimParams

FORMAT_VERSION = 1

_REQUIRED = object()


@dataclass(frozen=True)
class _Key:
    kind: str           # float, int, str, vector, mapping, observable
    default: Any = _REQUIRED
    nullable: bool = False


def _region_schema():
    return {"shape": _Key("str", "ball"), "center": _Key("vector"), "radius": _Key("float")}


SCHEMA = {
    "format_version": _Key("int", FORMAT_VERSION),
    "seed": _Key("int", 0),
    "field": {"potential": _Key("str"), "params": _Key("mapping", {})},
    "regions": {"A": _region_schema(), "B": _region_schema()},
    "thermo": {"gamma": _Key("float"), "beta": _Key("float")},
    "sim": {
        "dt": _Key("float", 1e-3),
        "scheme": _Key("str", "baoab"),
        "max_steps": _Key("int", 100_000_000),
        "crossing_tol": _Key("float", 1e-12),
        "tol_tangent": _Key("float", 1e-10),
    },
    "sampler": {
        "method": _Key("str", "direct_sphere"),
        "n_burnin": _Key("int", 1000),
        "proposal_scale": _Key("float", 0.3),
        "thin": _Key("int", 5),
    },
    "estimator": {
        "n_samples": _Key("int", 20_000),
        "n_events": _Key("int", 200_000),
        "observable": _Key("observable", None, nullable=True),
    },
    "ams": {
        "n_replicas": _Key("int", 100),
        "kill_count": _Key("int", 1),
        "n_runs": _Key("int", 20),
        "init": _Key("str", "plus"),
        "level_B": _Key("float", None, nullable=True),
        "on_extinction": _Key("str", "raise"),
    },
    "output": {"dir": _Key("str", "out")},
}


def _coerce(path: str, key: _Key, value):
    if value is None:
        if key.nullable:
            return None
        raise ConfigError(f"{path} must not be null")
    try:
        if key.kind == "float":
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if key.kind == "int":
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise TypeError
            return int(value)
        if key.kind == "str":
            if not isinstance(value, str):
                raise TypeError
            return value
        if key.kind == "vector":
            vals = value if isinstance(value, (list, tuple)) else [value]
            return [float(v) for v in vals]
        if key.kind == "mapping":
            if not isinstance(value, Mapping):
                raise TypeError
            return copy.deepcopy(dict(value))
        if key.kind == "observable":
            if not isinstance(value, Mapping):
                raise TypeError
            obs = Observable.from_config(dict(value))
            return obs.to_config()
    except (TypeError, ValueError):
        raise ConfigError(f"{path}: expected {key.kind}, got {value!r}") from None
    except HillgateError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    raise AssertionError(key.kind)


def _normalize(schema: dict, data, prefix: str = "") -> dict:
    if data is None:
        data = {}
    if not isinstance(data, Mapping):
        raise ConfigError(f"{prefix or 'config'} must be a mapping")
    unknown = sorted(set(data) - set(schema))
    if unknown:
        where = f" in {prefix}" if prefix else ""
        raise ConfigError(f"unknown key(s){where}: {', '.join(map(str, unknown))}")
    out = {}
    for name, sub in schema.items():
        path = f"{prefix}.{name}" if prefix else name
        if isinstance(sub, dict):
            out[name] = _normalize(sub, data.get(name), path)
        elif name in data:
            out[name] = _coerce(path, sub, data[name])
        elif sub.default is _REQUIRED:
            raise ConfigError(f"missing required key {path}")
        else:
            out[name] = copy.deepcopy(sub.default)
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """A parsed, fully defaulted experiment description.

    Build with :func:`parse_config` or :meth:`from_dict`; the domain objects
    (field, regions, simulation settings, ...) are derived on access.
    """

    data: dict

    @classmethod
    def from_dict(cls, raw: Mapping) -> "ExperimentConfig":
        data = _normalize(SCHEMA, raw)
        if data["format_version"] != FORMAT_VERSION:
            raise ConfigError(f"unsupported format_version {data['format_version']}")
        cfg = cls(data)
        cfg._check()
        return cfg

    def _check(self) -> None:
        """Build every derived object once so errors surface at load time."""
        try:
            _ = (self.field, self.thermo, self.sim_params, self.sampler_params,
                 self.observable, self.ams_params)
            pair = self.pair
        except ConfigError:
            raise
        except HillgateError as exc:
            raise ConfigError(str(exc)) from None
        if pair.dimension != self.field.dimension:
            raise ConfigError(f"regions live in dimension {pair.dimension}, "
                              f"the potential in {self.field.dimension}")
        if self.data["estimator"]["n_samples"] < 1 or self.data["estimator"]["n_events"] < 1:
            raise ConfigError("estimator.n_samples and estimator.n_events must be >= 1")

    # -- derived objects
    @property
    def seed(self) -> int:
        return self.data["seed"]

    @property
    def field(self) -> ForceField:
        f = self.data["field"]
        return ForceField.conservative(PotentialSpec.from_config(f["potential"], f["params"]))

    def region(self, label: str) -> LevelSetRegion:
        r = self.data["regions"][label]
        if r["shape"] != "ball":
            raise ConfigError(f"regions.{label}.shape: only 'ball' is supported, got {r['shape']!r}")
        return LevelSetRegion.ball(r["center"], r["radius"], label)

    @property
    def pair(self) -> MetastablePair:
        try:
            return MetastablePair(self.region("A"), self.region("B"))
        except ConfigError:
            raise
        except HillgateError as exc:
            raise ConfigError(f"regions: {exc}") from None

    @property
    def thermo(self) -> ThermoParams:
        t = self.data["thermo"]
        return ThermoParams(gamma=t["gamma"], beta=t["beta"])

    @property
    def sim_params(self) -> SimParams:
        s = self.data["sim"]
        try:
            scheme = Scheme(s["scheme"])
        except ValueError:
            raise ConfigError(f"sim.scheme: unknown scheme {s['scheme']!r}") from None
        return SimParams(self.thermo, s["dt"], scheme, s["max_steps"], s["crossing_tol"],
                         s["tol_tangent"])

    @property
    def sampler_params(self) -> SurfaceSamplerParams:
        try:
            return SurfaceSamplerParams(**self.data["sampler"])
        except ValueError as exc:
            raise ConfigError(f"sampler: {exc}") from None

    @property
    def observable(self) -> Observable | None:
        return Observable.from_config(self.data["estimator"]["observable"])

    @property
    def ams_params(self) -> AmsParams:
        return AmsParams(**self.data["ams"])

    @property
    def n_samples(self) -> int:
        return self.data["estimator"]["n_samples"]

    @property
    def n_events(self) -> int:
        return self.data["estimator"]["n_events"]

    @property
    def out_dir(self) -> Path:
        return Path(self.data["output"]["dir"])

    # -- serialization
    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.data, sort_keys=False)

    def dump(self, path) -> None:
        Path(path).write_text(self.to_yaml())

    def replace(self, **sections) -> "ExperimentConfig":
        """Copy with top-level keys or sections updated (sections are merged)."""
        raw = self.to_dict()
        for k, v in sections.items():
            if isinstance(v, Mapping) and isinstance(raw.get(k), dict):
                raw[k].update(v)
            else:
                raw[k] = v
        return ExperimentConfig.from_dict(raw)

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form without ``output`` (first 16 hex digits)."""
        body = {k: v for k, v in self.data.items() if k != "output"}
        blob = json.dumps(body, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def parse_config(path) -> ExperimentConfig:
    """Read and validate a YAML config file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    return ExperimentConfig.from_dict(raw)


def reference_config(**overrides) -> ExperimentConfig:
    """1D double well ``(q^2 - 1)^2`` with A = ball(-1, 0.3), B = ball(1, 0.3), gamma = beta = 1."""
    raw = {
        "seed": 7,
        "field": {"potential": "double_well_1d", "params": {"a": 1.0, "height": 1.0}},
        "regions": {"A": {"center": [-1.0], "radius": 0.3},
                    "B": {"center": [1.0], "radius": 0.3}},
        "thermo": {"gamma": 1.0, "beta": 1.0},
        "sim": {"dt": 1e-3},
    }
    cfg = ExperimentConfig.from_dict(raw)
    return cfg.replace(**overrides) if overrides else cfg


# ----------------------------------------------------------------- results

RESULT_KEYS = ("format_version", "command", "config_hash", "seed", "version", "estimates",
               "counters", "extra", "wall_time")


@dataclass
class ResultRecord:
    """Summary of one command run, written as ``summary.json``.

    Keys: ``format_version``, ``command``, ``config_hash``, ``seed``,
    ``version``, ``estimates`` (list of estimate records), ``counters``
    (event discards, timeouts, step counts), ``extra`` (command-specific
    scalars) and ``wall_time`` in seconds.
    """

    command: str
    config_hash: str
    seed: int
    estimates: list = field(default_factory=list)
    counters: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    wall_time: float = 0.0
    version: str = f"hillgate {__version__} (python {platform.python_version()})"
    format_version: int = FORMAT_VERSION

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: _jsonable(d[k]) for k in RESULT_KEYS}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False, allow_nan=True)

    def write(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def read(cls, path) -> "ResultRecord":
        d = json.loads(Path(path).read_text())
        unknown = set(d) - set(RESULT_KEYS)
        if unknown:
            raise ConfigError(f"unknown keys in result record: {sorted(unknown)}")
        return cls(**d)

    def same_result(self, other: "ResultRecord") -> bool:
        """Equality ignoring wall time."""
        a, b = self.to_dict(), other.to_dict()
        a.pop("wall_time")
        b.pop("wall_time")
        return a == b


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if hasattr(x, "item") and callable(x.item):
        return x.item()
    return x
