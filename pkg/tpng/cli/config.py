"""Run configuration: environment < TOML file < command-line flags."""

from __future__ import annotations

import os
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
from typing import Any, Dict, Literal, Mapping, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from tpng.core import config
from tpng.core.errors import ConfigError, DomainError
from tpng.experiments.suites import EXPERIMENTS, check_params
from tpng.model.schemas import Box, ModelParams
from tpng.sampling.streams import SEED_MAX, parse_seed

Command = Literal["simulate", "couple", "triple", "experiment", "render", "oracle-check"]

# TPNG_<NAME> -> dotted key inside RunConfig
ENV_KEYS: Dict[str, str] = {
    "SEED": "seed",
    "REPLICAS": "replicas",
    "OUT": "out",
    "T": "model.t",
    "WIDTH": "model.width",
    "HEIGHT": "model.height",
    "SOURCE_RATE": "model.source_rate",
    "SINK_RATE": "model.sink_rate",
    "BULK_INTENSITY": "model.bulk_intensity",
}


class ModelSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    t: float = Field(0.0, ge=0, lt=1)
    width: float = Field(100.0, gt=0)
    height: float = Field(100.0, gt=0)
    source_rate: float = Field(0.0, ge=0)
    sink_rate: float = Field(0.0, ge=0)
    bulk_intensity: float = Field(1.0, ge=0)

    def params(self, seed: int) -> ModelParams:
        return ModelParams(
            t=self.t,
            source_rate=self.source_rate,
            sink_rate=self.sink_rate,
            bulk_intensity=self.bulk_intensity,
            box=Box(width=self.width, height=self.height),
            seed=seed,
        )


class CoupleSection(BaseModel):
    """Boundary rates of the upper process; sources may only grow and sinks only shrink."""

    model_config = ConfigDict(extra="forbid")

    source_rate: Optional[float] = Field(None, ge=0)
    sink_rate: Optional[float] = Field(None, ge=0)


class TripleSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    lam: float = Field(1.0, gt=0)
    eps: float = Field(0.25, gt=0)
    blocking: bool = True


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    command: Command
    seed: int = Field(default_factory=lambda: config.DEFAULT_SEED, ge=0, lt=SEED_MAX)
    replicas: Optional[int] = Field(None, ge=1)
    workers: int = Field(default_factory=lambda: config.WORKERS, ge=1)
    out: Optional[str] = None
    input: Optional[str] = None
    experiment: Optional[str] = None
    model: ModelSection = Field(default_factory=ModelSection)
    couple: CoupleSection = Field(default_factory=CoupleSection)
    triple: TripleSection = Field(default_factory=TripleSection)
    params: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("seed", mode="before")
    @classmethod
    def seed_text(cls, v):
        if isinstance(v, str):
            try:
                return parse_seed(v)
            except DomainError as exc:
                raise ValueError(str(exc)) from exc
        return v

    @field_validator("experiment")
    @classmethod
    def known_experiment(cls, v):
        if v is not None and v not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {v!r}; choose from {', '.join(sorted(EXPERIMENTS))}")
        return v

    @model_validator(mode="after")
    def command_inputs(self):
        if self.command == "experiment" and self.experiment is None:
            raise ValueError("the experiment command needs an experiment name")
        if self.command == "render" and self.input is None:
            raise ValueError("the render command needs an input document")
        return self

    @property
    def model_params(self) -> ModelParams:
        return self.model.params(self.seed)


def _set_dotted(target: Dict[str, Any], dotted: str, value: Any) -> None:
    node = target
    *parents, leaf = dotted.split(".")
    for key in parents:
        node = node.setdefault(key, {})
    node[leaf] = value


def _deep_merge(base: Dict[str, Any], layer: Mapping[str, Any]) -> Dict[str, Any]:
    out = dict(base)
    for key, value in layer.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def env_layer(environ: Mapping[str, str]) -> Dict[str, Any]:
    layer: Dict[str, Any] = {}
    for name, dotted in ENV_KEYS.items():
        value = environ.get(config.ENV_PREFIX + name)
        if value is not None and value != "":
            _set_dotted(layer, dotted, value)
    return layer


def file_layer(path: Optional[str]) -> Dict[str, Any]:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError("", f"cannot read config file {path}: {exc.strerror or exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("", f"malformed config file {path}: {exc}") from exc


def flag_layer(flags: Mapping[str, Any]) -> Dict[str, Any]:
    """Flags use dotted keys (``model.t``); unset flags are None and skipped."""
    layer: Dict[str, Any] = {}
    for dotted, value in flags.items():
        if value is not None:
            _set_dotted(layer, dotted, value)
    return layer


def load_run_config(
    command: str,
    flags: Mapping[str, Any],
    config_path: Optional[str] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> RunConfig:
    """Merge the three layers and validate; errors name the dotted path of the offending key."""
    environ = os.environ if environ is None else environ
    merged = _deep_merge(env_layer(environ), file_layer(config_path))
    merged = _deep_merge(merged, flag_layer(flags))
    merged["command"] = command
    try:
        cfg = RunConfig.model_validate(merged)
    except ValidationError as exc:
        first = exc.errors()[0]
        path = ".".join(str(p) for p in first["loc"])
        raise ConfigError(path, first["msg"]) from exc
    if cfg.command == "experiment":
        check_params(cfg.experiment, cfg.params)
    elif cfg.command == "oracle-check":
        check_params("oracle", cfg.params)
    return cfg
