"""Experiment configuration schema (YAML or JSON on disk).

Layout::

    seed: 0
    system: {A, B, Q, R, gamma}
    noise:  {kind, mean/covariance | lower/upper | point, sigma0_sq?, mu0?}
    task:   {solve: {...}, dist: {...}, compare: {...}, bound: {...}, optimize: {...}}
    output: {directory, prefix}

Only the task block for the command being run has to be present. Unknown keys
anywhere are rejected.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError
from .linsys import LinearSystem, NoiseModel

Matrix = list[list[float]]
Vector = list[float]
GainSpec = Union[Literal["optimal"], Matrix]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SystemBlock(_Strict):
    A: Matrix
    B: Matrix
    Q: Matrix
    R: Matrix
    gamma: float

    def build(self) -> LinearSystem:
        return LinearSystem(self.A, self.B, self.Q, self.R, self.gamma)


class NoiseBlock(_Strict):
    kind: Literal["gaussian", "uniform_box", "degenerate"]
    mean: Optional[Vector] = None
    covariance: Optional[Matrix] = None
    lower: Optional[Vector] = None
    upper: Optional[Vector] = None
    point: Optional[Vector] = None
    sigma0_sq: Optional[float] = Field(default=None, ge=0)
    mu0: Optional[float] = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _fields_match_kind(self):
        allowed = {
            "gaussian": {"mean", "covariance"},
            "uniform_box": {"lower", "upper"},
            "degenerate": {"point"},
        }[self.kind]
        for name in ("mean", "covariance", "lower", "upper", "point"):
            given = getattr(self, name) is not None
            if given and name not in allowed:
                raise ValueError(f"field {name!r} does not apply to {self.kind} noise")
            if not given and name in allowed:
                raise ValueError(f"{self.kind} noise requires {name!r}")
        return self

    def build(self) -> NoiseModel:
        return NoiseModel(**self.model_dump())


class _Task(_Strict):
    tol: float = Field(default=1e-12, gt=0)
    max_iter: int = Field(default=1_000_000, ge=1)


class SolveTask(_Task):
    K: GainSpec = "optimal"


class DistTask(_Task):
    K: GainSpec = "optimal"
    x: Vector
    N: list[int] = Field(min_length=1)
    M: int = Field(default=10_000, ge=1)
    bins: int = Field(default=60, ge=1)
    range: Optional[tuple[float, float]] = None
    mc: bool = True
    horizon: Optional[int] = Field(default=None, ge=1)

    @field_validator("N")
    @classmethod
    def _non_negative(cls, v):
        if any(n < 0 for n in v):
            raise ValueError("truncation depths must be >= 0")
        return v

    @field_validator("range")
    @classmethod
    def _ordered(cls, v):
        if v is not None and not v[0] < v[1]:
            raise ValueError("range needs lo < hi")
        return v


class CompareTask(_Task):
    K: GainSpec = "optimal"
    x: Vector
    N: list[int] = Field(min_length=1)
    M: int = Field(default=100_000, ge=1)
    reference: Union[Literal["mc"], int] = 200
    horizon: Optional[int] = Field(default=None, ge=1)
    L0: Union[Literal["estimate"], float, None] = "estimate"

    @field_validator("N")
    @classmethod
    def _non_negative(cls, v):
        if any(n < 0 for n in v):
            raise ValueError("truncation depths must be >= 0")
        return v

    @field_validator("reference")
    @classmethod
    def _ref(cls, v):
        if isinstance(v, int) and v < 0:
            raise ValueError("reference depth must be >= 0")
        return v

    @field_validator("L0")
    @classmethod
    def _l0(cls, v):
        if isinstance(v, float) and v <= 0:
            raise ValueError("L0 must be positive")
        return v


class BoundTask(_Task):
    K: GainSpec = "optimal"
    x: Vector
    N: list[int] = Field(min_length=1)
    L0: Optional[float] = Field(default=None, gt=0)

    @field_validator("N")
    @classmethod
    def _positive(cls, v):
        if any(n < 1 for n in v):
            raise ValueError("the bound is defined for N >= 1")
        return v


class OptimizeTask(_Task):
    x: Vector
    K0: Matrix
    N: int = Field(default=10, ge=0)
    M: int = Field(default=20_000, ge=1)
    alpha: float = Field(default=1.0, gt=0, le=1)
    eta: float = Field(default=4e-4, ge=0)
    delta: float = Field(default=0.1, gt=0)
    episodes: int = Field(default=3000, ge=0)
    seeds: list[int] = Field(default_factory=lambda: [0], min_length=1)
    crn: bool = True

    @field_validator("seeds")
    @classmethod
    def _seeds(cls, v):
        if any(s < 0 for s in v) or len(set(v)) != len(v):
            raise ValueError("seeds must be distinct non-negative integers")
        return v


class TaskBlock(_Strict):
    solve: Optional[SolveTask] = None
    dist: Optional[DistTask] = None
    compare: Optional[CompareTask] = None
    bound: Optional[BoundTask] = None
    optimize: Optional[OptimizeTask] = None


class OutputBlock(_Strict):
    directory: str = "results"
    prefix: str = ""


class ExperimentConfig(_Strict):
    seed: int = Field(default=0, ge=0)
    system: SystemBlock
    noise: NoiseBlock
    task: TaskBlock
    output: OutputBlock = OutputBlock()

    def task_for(self, command: str):
        block = getattr(self.task, command)
        if block is None:
            raise ConfigError(f"config has no task.{command} block")
        return block


def parse_config(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    """Read a YAML (or JSON, which is valid YAML) config file."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path} does not contain a mapping")
    return parse_config(data)
