"""Pydantic request/response models for the experiment service."""

from __future__ import annotations

from typing import Literal, Union

from pydantic import BaseModel, Field

Gamma = Union[float, Literal["auto"]]


class DataSource(BaseModel):
    """Where the training data comes from: a synthetic preset or a file."""

    preset: str | None = None
    data_path: str | None = None
    data_format: Literal["csv", "libsvm"] = "csv"
    target_column: int = -1
    has_header: bool = False
    task: Literal["regression", "classification"] = "regression"
    n: int = Field(default=200, ge=1, description="sample size for presets")


class FitRequest(DataSource):
    kernel: str | None = None
    gamma: Gamma = "auto"
    rule: str = "holdout"
    seed: int = 0


class CurveRequest(DataSource):
    kernel: str | None = None
    gamma: Gamma = "auto"
    epochs: int = Field(default=100, ge=1)
    validation_fraction: float = Field(default=0.2, gt=0, lt=1)
    test_n: int = Field(default=1000, ge=1)
    seed: int = 0


class RatesRequest(BaseModel):
    preset: str = "source:r=1.5"
    rule: str = "norm:1.5"
    grid: list[int] = Field(default_factory=lambda: [64, 128, 256, 512, 1024, 2048, 4096, 8192])
    replicates: int = Field(default=50, ge=1)
    mode: Literal["norm", "risk"] = "norm"
    gamma: Gamma = "auto"
    seed: int = 0


class VerifyRequest(BaseModel):
    preset: str = "source:r=1.5"
    epochs: int = Field(default=1000, ge=1)
    algebra_trials: int = Field(default=100, ge=1)
    concentration_n: int = Field(default=200, ge=2)
    concentration_delta: float = Field(default=0.1, gt=0, lt=1)
    concentration_trials: int = Field(default=500, ge=100)
    gamma: Gamma = "auto"
    seed: int = 0


class BenchRequest(DataSource):
    kernel: str = "linear"
    seeds: list[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4])
    max_epochs: int = Field(default=100, ge=1)
    gamma: Gamma = "auto"
    seed: int = 0


class SynthRequest(BaseModel):
    preset: str = "trig-d5"
    n: int = Field(default=100, ge=1)
    seed: int = 0


class Envelope(BaseModel):
    """Response wrapper mirroring the serialized report envelope."""

    version: str
    command: str
    config: dict
    seed: int
    metrics: dict
    timing_seconds: float
