"""Versioned YAML run configuration.

One flat schema serves every subcommand; see ``docs/config.md``. Unknown
keys, type mismatches and missing files map onto distinct exit codes.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

import yaml

from .benchmark import BenchmarkConfig
from .fock import DEFAULT_DIM, GridSpec
from .gate import GateConfig

SCHEMA_VERSION = 1

EXIT_UNKNOWN_KEY = 2
EXIT_BAD_VALUE = 3
EXIT_MISSING_FILE = 4


class ConfigError(Exception):
    def __init__(self, message, exit_code, key=None):
        super().__init__(message)
        self.exit_code = exit_code
        self.key = key

    @property
    def category(self):
        return {
            EXIT_UNKNOWN_KEY: "config-unknown-key",
            EXIT_BAD_VALUE: "config-bad-value",
            EXIT_MISSING_FILE: "config-missing-file",
        }[self.exit_code]


@dataclass(frozen=True)
class AlphaRange:
    start: float = -2.0
    stop: float = 2.0
    step: float = 0.25

    def values(self) -> list:
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return [round(self.start + k * self.step, 12) for k in range(n)]


@dataclass(frozen=True)
class RunConfig:
    """Every tunable of the sweep; defaults reproduce the g = 1, chi = 0.03 scenario."""

    schema_version: int = SCHEMA_VERSION
    chi: float = 0.03
    g: float = 1.0
    qnd_gain: float = 1.0
    q_min: float = -8.0
    q_max: float = 8.0
    q_nodes: int = 161
    signal_dim: int = DEFAULT_DIM
    grid_min: float = -10.0
    grid_max: float = 10.0
    grid_points: int = 1001
    re_alpha: tuple = tuple(AlphaRange().values())
    im_alpha: float = 0.0
    allow_large_alpha: bool = False
    mode: str = "deterministic"
    benchmark: bool = True
    chi_eff: Optional[float] = None
    lambda_min: float = 0.0
    lambda_max: float = 2.5
    lambda_points: int = 25
    lambda_tol: float = 1e-6
    g_gen: float = 4.0
    workers: int = 1
    output_dir: Optional[str] = None

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.grid_min, self.grid_max, self.grid_points)

    def gate_config(self) -> GateConfig:
        return GateConfig(
            chi=self.chi,
            g=self.g,
            qnd_gain=self.qnd_gain,
            q_min=self.q_min,
            q_max=self.q_max,
            q_nodes=self.q_nodes,
            signal_dim=self.signal_dim,
            grid=self.grid,
        )

    def benchmark_config(self) -> BenchmarkConfig:
        return BenchmarkConfig(
            lambda_min=self.lambda_min,
            lambda_max=self.lambda_max,
            coarse_points=self.lambda_points,
            tol=self.lambda_tol,
            grid=self.grid,
        )

    def alphas(self) -> list:
        return [complex(re, self.im_alpha) for re in self.re_alpha]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["re_alpha"] = list(self.re_alpha)
        return d


_FLOAT = "float"
_INT = "int"
_BOOL = "bool"
_STR = "str"

_TYPES = {
    "schema_version": _INT,
    "chi": _FLOAT,
    "g": _FLOAT,
    "qnd_gain": _FLOAT,
    "q_min": _FLOAT,
    "q_max": _FLOAT,
    "q_nodes": _INT,
    "signal_dim": _INT,
    "grid_min": _FLOAT,
    "grid_max": _FLOAT,
    "grid_points": _INT,
    "re_alpha": "alpha",
    "im_alpha": _FLOAT,
    "allow_large_alpha": _BOOL,
    "mode": _STR,
    "benchmark": _BOOL,
    "chi_eff": "optional_float",
    "lambda_min": _FLOAT,
    "lambda_max": _FLOAT,
    "lambda_points": _INT,
    "lambda_tol": _FLOAT,
    "g_gen": _FLOAT,
    "workers": _INT,
    "output_dir": "optional_str",
}
_ALIASES = {"lambda": "qnd_gain"}

assert set(_TYPES) == {f.name for f in fields(RunConfig)}


def _bad(key, msg):
    return ConfigError(f"{key}: {msg}", EXIT_BAD_VALUE, key)


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _coerce(key, kind, value):
    if kind == _FLOAT:
        if not _is_number(value):
            raise _bad(key, f"expected a number, got {value!r}")
        return float(value)
    if kind == "optional_float":
        return None if value is None else _coerce(key, _FLOAT, value)
    if kind == _INT:
        if not isinstance(value, int) or isinstance(value, bool):
            raise _bad(key, f"expected an integer, got {value!r}")
        return value
    if kind == _BOOL:
        if not isinstance(value, bool):
            raise _bad(key, f"expected true/false, got {value!r}")
        return value
    if kind == _STR:
        if not isinstance(value, str):
            raise _bad(key, f"expected a string, got {value!r}")
        return value
    if kind == "optional_str":
        return None if value is None else _coerce(key, _STR, value)
    if kind == "alpha":
        if isinstance(value, dict):
            unknown = set(value) - {"start", "stop", "step"}
            if unknown:
                raise ConfigError(
                    f"re_alpha: unknown keys {sorted(unknown)}", EXIT_UNKNOWN_KEY, "re_alpha"
                )
            kw = {k: _coerce(f"re_alpha.{k}", _FLOAT, v) for k, v in value.items()}
            rng = AlphaRange(**kw)
            if not rng.step > 0:
                raise _bad("re_alpha.step", "step must be positive")
            if rng.stop < rng.start:
                raise _bad("re_alpha.stop", "stop must not be below start")
            return tuple(rng.values())
        if isinstance(value, list) and value:
            return tuple(_coerce("re_alpha[]", _FLOAT, v) for v in value)
        raise _bad(key, "expected a non-empty list or a {start, stop, step} mapping")
    raise AssertionError(kind)


def validate(cfg: RunConfig) -> RunConfig:
    if cfg.schema_version != SCHEMA_VERSION:
        raise _bad("schema_version", f"unsupported version {cfg.schema_version}")
    if not cfg.g > 0:
        raise _bad("g", f"must be positive, got {cfg.g}")
    if cfg.qnd_gain == 0:
        raise _bad("qnd_gain", "must be nonzero")
    if cfg.q_min > -8.0 or cfg.q_max < 8.0:
        raise _bad("q_min", "q window must cover [-8, 8]")
    if cfg.q_nodes < 81:
        raise _bad("q_nodes", "need at least 81 nodes")
    if cfg.signal_dim < 8:
        raise _bad("signal_dim", "must be at least 8")
    if not cfg.grid_max > cfg.grid_min or cfg.grid_points < 101:
        raise _bad("grid_points", "grid needs grid_max > grid_min and >= 101 points")
    if cfg.mode not in ("deterministic", "probabilistic"):
        raise _bad("mode", f"expected deterministic|probabilistic, got {cfg.mode!r}")
    if not 0.0 <= cfg.lambda_min < cfg.lambda_max:
        raise _bad("lambda_max", "need 0 <= lambda_min < lambda_max")
    if cfg.lambda_points < 25:
        raise _bad("lambda_points", "coarse scan needs at least 25 points")
    if not cfg.lambda_tol > 0:
        raise _bad("lambda_tol", "must be positive")
    if not cfg.g_gen > 1:
        raise _bad("g_gen", "generation squeezing must exceed 1")
    if cfg.workers < 1:
        raise _bad("workers", "must be at least 1")
    if not cfg.allow_large_alpha:
        for re in cfg.re_alpha:
            if abs(complex(re, cfg.im_alpha)) > 2.0 + 1e-12:
                raise _bad(
                    "re_alpha", f"|alpha| = {abs(complex(re, cfg.im_alpha)):.3f} exceeds 2; "
                    "set allow_large_alpha to override"
                )
    return cfg


def from_mapping(data: dict, base: Optional[RunConfig] = None) -> RunConfig:
    values = {}
    for raw_key, value in data.items():
        key = _ALIASES.get(raw_key, raw_key)
        if key not in _TYPES:
            raise ConfigError(f"unknown config key {raw_key!r}", EXIT_UNKNOWN_KEY, raw_key)
        values[key] = _coerce(key, _TYPES[key], value)
    cfg = RunConfig(**{**((base or RunConfig()).__dict__), **values})
    return validate(cfg)


def load_config(path) -> RunConfig:
    """Read a YAML config file; an empty file yields all defaults."""
    if path is None:
        return validate(RunConfig())
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}", EXIT_MISSING_FILE, None)
    try:
        data = yaml.safe_load(p.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}", EXIT_BAD_VALUE, None) from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping at top level", EXIT_BAD_VALUE, None)
    return from_mapping(data)


def parse_config(path, kind: str = "sweep"):
    """Load ``path`` and return the sweep, gate or benchmark view of it."""
    cfg = load_config(path)
    if kind == "sweep":
        return cfg
    if kind == "gate":
        return cfg.gate_config()
    if kind == "benchmark":
        return cfg.benchmark_config()
    raise ValueError(f"unknown config kind {kind!r}")
