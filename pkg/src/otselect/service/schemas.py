"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Any

from pydantic import BaseModel, Field


class SelectRequest(BaseModel):
    train: list[list[float]]
    val: list[list[float]] | None = None
    method: str
    rho: float = Field(gt=0.0, le=1.0)
    seed: int = 0
    params: dict[str, Any] = Field(default_factory=dict)


class TraceEntry(BaseModel):
    step: int
    ot_value: float
    div_energy: float
    entropy: float
    sinkhorn_violation: float


class SelectResponse(BaseModel):
    k: int
    selected: list[int]
    weights: list[float]
    trace: list[TraceEntry]
    params: dict[str, Any]
    method: str
    seed: int


class SinkhornRequest(BaseModel):
    w: list[float]
    b: list[float]
    cost: list[list[float]]
    epsilon: float = Field(default=0.5, gt=0.0)
    tol: float = Field(default=1e-6, gt=0.0)
    max_iter: int = Field(default=10000, ge=1)
    log_domain: bool = True


class SinkhornResponse(BaseModel):
    plan: list[list[float]]
    potential_train: list[float]
    potential_val: list[float]
    value: float
    transport_cost: float
    iterations: int
    marginal_violation: float


class VendiRequest(BaseModel):
    features: list[list[float]]


class VendiResponse(BaseModel):
    score: float


class ProjectRequest(BaseModel):
    data: list[list[float]]
    d_out: int = Field(default=1024, ge=1)
    sparsity: float = Field(default=0.0, ge=0.0, le=1.0)
    seed: int = 0


class ProjectResponse(BaseModel):
    n: int
    d: int
    data: list[list[float]]


class ScoreRequest(BaseModel):
    sub: list[list[float]]
    val: list[list[float]]
    method: str = "subset"
    epsilon: float = Field(default=0.5, gt=0.0)
    tol: float = Field(default=1e-6, gt=0.0)


class ScoreResponse(BaseModel):
    method: str
    k: int
    vendi: float
    mean_attr: float
    ot_to_val: float
    params: dict[str, Any]


class SimulateRequest(BaseModel):
    config: dict[str, Any]


class HealthResponse(BaseModel):
    status: str
    version: str
