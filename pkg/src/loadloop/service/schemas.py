"""Pydantic request/response models for the HTTP API."""

from __future__ import annotations

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class SessionCreated(BaseModel):
    session_id: str


class SessionState(BaseModel):
    session_id: str
    stage: str
    detail: Dict[str, Any] = Field(default_factory=dict)


class SemanticsProposal(BaseModel):
    assignments: Dict[str, str]
    proposed: bool = True


class SemanticsUpdate(BaseModel):
    assignments: Dict[str, str]


class TaskUpdate(BaseModel):
    interval_delta: int = Field(ge=0)
    horizon: int = Field(ge=1)


class ConditionRuleModel(BaseModel):
    column_role: str
    threshold: float
    weight_if_true: float
    weight_if_false: float


class MetricUpdate(BaseModel):
    base: str = "absolute"
    kind: str = "plain"
    weights: Optional[List[float]] = None
    condition_rule: Optional[ConditionRuleModel] = None
    alpha: float = 1.0
    beta: float = 1.0


class CleanResult(BaseModel):
    cleaning_report: Dict[str, Any]
    data_summary: Dict[str, Any]


class OptimizeRequest(BaseModel):
    max_trials: int = Field(default=30, ge=1)
    init_samples: int = Field(default=10, ge=1)
    batch_size: int = Field(default=5, ge=1)
    epsilon: Optional[float] = None
    seed: int = 0
    split_ratios: Optional[List[float]] = None


class GuidanceRequest(BaseModel):
    text: Optional[str] = None
    directives: Optional[List[Dict[str, Any]]] = None


class GuidanceResponse(BaseModel):
    queued: List[Dict[str, Any]]
    clarification: Optional[str] = None


class TrialModel(BaseModel):
    trial_index: int
    config: Dict[str, Any]
    loss: Optional[float]
    failed: bool
    origin: str
    seed: int
    error: Optional[str] = None


class SummaryResponse(BaseModel):
    summary: Dict[str, Any]
    rendered: str
    best_so_far: List[float] = Field(default_factory=list)


class ImportanceResponse(BaseModel):
    model_type: str
    importances: List[List[Any]]  # [name, value] pairs, ranked


class BestResponse(BaseModel):
    config: Dict[str, Any]
    loss: float
    trial_index: int
    train_curve: List[float] = Field(default_factory=list)
    val_curve: List[float] = Field(default_factory=list)


class DeployRequest(BaseModel):
    origin_index: Optional[int] = None


class PostprocessRequest(BaseModel):
    kind: str
    hours: Optional[List[int]] = None
    override_values: Optional[List[float]] = None
    factor: float = 0.0
    threshold: float = 0.0
    direction: str = "above"
    external_role: str = "temperature"
    note: str = ""


class ForecastModel(BaseModel):
    index: int
    origin_timestamp: str
    horizon: int
    raw: List[float]
    adjusted: List[float]
    applied_rules: List[Dict[str, Any]]
    context: Dict[str, List[float]]
    target_timestamps: List[str]


class ChatMessage(BaseModel):
    text: str


class ChatTranscript(BaseModel):
    messages: List[Dict[str, Any]]


class TokensResponse(BaseModel):
    report: Dict[str, Any]
