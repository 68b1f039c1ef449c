"""Experiment configuration: INI files, CLI overrides, effective dumps.

The file format is two flat sections, both optional, every key optional:

    [sir]
    population = 1000000.0
    initial_infected = 200.0
    beta = 0.2857142857142857
    gamma = 0.14285714285714285
    lambda = -0.2
    overdispersion = 500.0
    horizon = 100

    [experiment]
    thresholds = 0.05,0.1,0.15,0.2,0.25,0.3
    replicates = 100000
    seed = 42
    out = out
    conditioning = full-path
    threads = 1

Unset keys fall back to the defaults above.  `dump_config` writes floats
with repr so a dumped config reloads to exactly equal values.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, replace

from .errors import ConfigError
from .montecarlo import CONDITIONING_MODES
from .sir import SirParams

DEFAULT_THRESHOLDS = (0.05, 0.10, 0.15, 0.20, 0.25, 0.30)
DEFAULT_REPLICATES = 100_000
DEFAULT_SEED = 42

_SIR_KEYS = {
    "population": float,
    "initial_infected": float,
    "beta": float,
    "gamma": float,
    "lambda": float,
    "overdispersion": float,
    "horizon": int,
}

_EXPERIMENT_KEYS = ("thresholds", "replicates", "seed", "out", "conditioning", "threads")


@dataclass(frozen=True)
class ExperimentConfig:
    sir: SirParams = field(default_factory=SirParams)
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    replicates: int = DEFAULT_REPLICATES
    seed: int = DEFAULT_SEED
    out: str = "out"
    conditioning: str = "full-path"
    threads: int = 1

    def __post_init__(self):
        if not self.thresholds:
            raise ConfigError("thresholds must be non-empty")
        if list(self.thresholds) != sorted(set(self.thresholds)):
            raise ConfigError(f"thresholds must be strictly increasing: {self.thresholds}")
        if any(not 0.0 < v < 1.0 for v in self.thresholds):
            raise ConfigError(f"thresholds must lie in (0, 1): {self.thresholds}")
        if self.replicates < 1:
            raise ConfigError(f"replicates must be >= 1, got {self.replicates}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must fit in an unsigned 64-bit value, got {self.seed}")
        if self.conditioning not in CONDITIONING_MODES:
            raise ConfigError(
                f"conditioning must be one of {', '.join(CONDITIONING_MODES)}, "
                f"got {self.conditioning!r}"
            )
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")


def parse_thresholds(text: str) -> tuple[float, ...]:
    """Parse a comma-separated threshold list like '0.05,0.1,0.3'."""
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise ConfigError(f"no thresholds in {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"bad threshold list {text!r}: {exc}") from exc


def _coerce(section: str, key: str, raw: str, kind):
    try:
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from exc


def load_config(path: str | None = None) -> ExperimentConfig:
    """Read an INI file (or use pure defaults when path is None)."""
    sir_kwargs = {}
    exp_kwargs = {}
    if path is not None:
        parser = configparser.ConfigParser()
        try:
            with open(path, "r", encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from exc

        for section in parser.sections():
            if section not in ("sir", "experiment"):
                raise ConfigError(f"unknown config section [{section}]")

        if parser.has_section("sir"):
            for key, raw in parser.items("sir"):
                if key not in _SIR_KEYS:
                    raise ConfigError(f"unknown key [sir] {key}")
                name = "lam" if key == "lambda" else key
                sir_kwargs[name] = _coerce("sir", key, raw, _SIR_KEYS[key])

        if parser.has_section("experiment"):
            for key, raw in parser.items("experiment"):
                if key not in _EXPERIMENT_KEYS:
                    raise ConfigError(f"unknown key [experiment] {key}")
                if key == "thresholds":
                    exp_kwargs[key] = parse_thresholds(raw)
                elif key in ("replicates", "seed", "threads"):
                    exp_kwargs[key] = _coerce("experiment", key, raw, int)
                elif key == "conditioning":
                    exp_kwargs[key] = raw.strip()
                else:
                    exp_kwargs[key] = raw

    try:
        sir = SirParams(**sir_kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return ExperimentConfig(sir=sir, **exp_kwargs)


def apply_overrides(
    config: ExperimentConfig,
    seed: int | None = None,
    replicates: int | None = None,
    thresholds: tuple[float, ...] | None = None,
    out: str | None = None,
    conditioning: str | None = None,
    threads: int | None = None,
) -> ExperimentConfig:
    """Layer command-line flag values over a loaded config."""
    updates = {
        key: value
        for key, value in (
            ("seed", seed),
            ("replicates", replicates),
            ("thresholds", thresholds),
            ("out", out),
            ("conditioning", conditioning),
            ("threads", threads),
        )
        if value is not None
    }
    return replace(config, **updates) if updates else config


def dump_config(config: ExperimentConfig) -> str:
    """Render the effective configuration as reloadable INI text."""
    parser = configparser.ConfigParser()
    sir = config.sir
    parser["sir"] = {
        "population": repr(sir.population),
        "initial_infected": repr(sir.initial_infected),
        "beta": repr(sir.beta),
        "gamma": repr(sir.gamma),
        "lambda": repr(sir.lam),
        "overdispersion": repr(sir.overdispersion),
        "horizon": str(sir.horizon),
    }
    parser["experiment"] = {
        "thresholds": ",".join(repr(v) for v in config.thresholds),
        "replicates": str(config.replicates),
        "seed": str(config.seed),
        "out": config.out,
        "conditioning": config.conditioning,
        "threads": str(config.threads),
    }
    buffer = io.StringIO()
    parser.write(buffer)
    return buffer.getvalue()
